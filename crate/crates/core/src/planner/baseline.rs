use std::collections::BTreeSet;

use super::sequence::{align, legal_transfer_targets};
use super::{cell_order, faulty_unit, structure_state, CmCache, Configuration, PlanMode, PlanStep, ReconfigPlan, StepKind};
use crate::error::PlanError;
use crate::model::{Assembly, Unit};

/// Margin-unaware comparison planner: strip every unit except the faulty
/// one and a single carrier neighbor, farthest first, then rebuild the
/// target around that pair one unit at a time. Margins are recorded but
/// never checked, so the plan may pass through uncontrollable structures.
pub fn plan_baseline(p: &Configuration, p_star: &Configuration, cache: &mut CmCache) -> Result<ReconfigPlan, PlanError> {
    let a = &p.assembly;
    let faulty = faulty_unit(a)?.clone();
    let initial_cm = cache.cm(a)?;
    if a.len() < 2 {
        return Ok(ReconfigPlan::from_steps(PlanMode::Full, initial_cm, Vec::new(), a, initial_cm));
    }
    let mut neighbors: Vec<&Unit> =
        a.units().iter().filter(|u| u.cell.is_adjacent(faulty.cell)).collect();
    neighbors.sort_by_key(|u| cell_order(u.cell));
    let carrier = neighbors.first().map(|u| (*u).clone()).ok_or(PlanError::NoControllableSubassembly)?;
    let keep: BTreeSet<_> = [faulty.cell, carrier.cell].into();
    let target = align(a, &p_star.assembly, &keep)?;

    let mut state = a.clone();
    let mut steps = Vec::new();
    let mut detached: Vec<Unit> = Vec::new();
    while state.len() > 2 {
        let mut options: Vec<&Unit> =
            state.units().iter().filter(|u| u.id != faulty.id && u.id != carrier.id).collect();
        options.sort_by_key(|u| (-u.cell.manhattan(faulty.cell), cell_order(u.cell)));
        let (unit, rem) = options
            .iter()
            .find_map(|u| state.without(&[u.id]).ok().map(|rem| ((*u).clone(), rem)))
            .ok_or_else(|| PlanError::InfeasiblePlan("no unit can be detached".into()))?;
        let single = state.subassembly(&[unit.id])?;
        steps.push(PlanStep {
            kind: StepKind::Detach,
            unit_ids: vec![unit.id],
            from_cells: vec![unit.cell],
            to_cells: Vec::new(),
            structures: vec![structure_state(&rem, cache.cm(&rem)?), structure_state(&single, cache.cm(&single)?)],
        });
        detached.push(unit);
        state = rem;
    }

    for unit in detached.into_iter().rev() {
        let cell = legal_transfer_targets(&state.cells(), &target.footprint, &BTreeSet::new())
            .into_iter()
            .min_by_key(|c| (c.manhattan(faulty.cell), cell_order(*c)))
            .ok_or_else(|| PlanError::InfeasiblePlan("no dockable target cell".into()))?;
        let mut units = state.units().to_vec();
        units.push(Unit { cell, ..unit.clone() });
        let grown: Assembly = state.with_units(units)?;
        steps.push(PlanStep {
            kind: StepKind::Attach,
            unit_ids: vec![unit.id],
            from_cells: Vec::new(),
            to_cells: vec![cell],
            structures: vec![structure_state(&grown, cache.cm(&grown)?)],
        });
        state = grown;
    }
    let final_cm = cache.cm(&state)?;
    Ok(ReconfigPlan::from_steps(PlanMode::Full, initial_cm, steps, &state, final_cm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{apply_fault, Fault, UnitGeometry, DEFAULT_PITCH};
    use crate::planner::find_optimal_reconfiguration;

    #[test]
    fn baseline_passes_through_negative_margin() {
        let a = Assembly::grid(3, 3, DEFAULT_PITCH, UnitGeometry::default()).unwrap();
        let p = Configuration::new(apply_fault(&a, &Fault::complete(8)).unwrap());
        let mut cache = CmCache::new();
        let star = find_optimal_reconfiguration(&p, &mut cache).unwrap();
        let plan = plan_baseline(&p, &star, &mut cache).unwrap();
        assert!(plan.min_intermediate_cm < 0.0);
        assert_eq!(plan.step_count, 14);
        assert!((plan.final_cm - star.cm.unwrap()).abs() < 1e-9);
    }
}
