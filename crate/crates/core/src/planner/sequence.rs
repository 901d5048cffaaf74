use std::collections::BTreeSet;

use super::{
    cell_order, cell_set, cm_key, connected_subsets, faulty_unit, structure_state, CmCache, Configuration, PlanMode,
    PlanStep, ReconfigPlan, StepKind,
};
use crate::error::PlanError;
use crate::model::{unit_signature, Assembly, Cell, Unit, UnitGeometry};
use crate::symmetry::{transform_assembly, unit_image, Transform};

/// Connected sub-blocks tried per block size in the partial planner.
const MAX_BLOCKS_PER_SIZE: usize = 256;

/// Cells occupied in `target`, free in `current`, 4-adjacent to `current`
/// and not reserved.
pub fn legal_transfer_targets(
    current: &BTreeSet<Cell>,
    target: &BTreeSet<Cell>,
    reserved: &BTreeSet<Cell>,
) -> BTreeSet<Cell> {
    target
        .iter()
        .filter(|c| !current.contains(c) && !reserved.contains(c))
        .filter(|c| c.neighbors().iter().any(|n| current.contains(n)))
        .copied()
        .collect()
}

pub(crate) fn rotation(q: u8) -> Transform {
    match q % 4 {
        0 => Transform::IDENTITY,
        1 => Transform::ROTATE_90,
        2 => Transform::ROTATE_180,
        _ => Transform::ROTATE_270,
    }
}

/// Target footprint placed in the current frame.
#[derive(Clone, Debug)]
pub(crate) struct Alignment {
    pub footprint: BTreeSet<Cell>,
}

impl Alignment {
    pub fn misplaced<'a>(&self, a: &'a Assembly) -> Vec<&'a Unit> {
        let mut v: Vec<&Unit> = a.units().iter().filter(|u| !self.footprint.contains(&u.cell)).collect();
        v.sort_by_key(|u| cell_order(u.cell));
        v
    }

    pub fn holes(&self, a: &Assembly) -> BTreeSet<Cell> {
        let occupied = a.cells();
        self.footprint.iter().filter(|c| !occupied.contains(c)).copied().collect()
    }
}

fn same_unit(g: &UnitGeometry, a: &Unit, b: &Unit) -> bool {
    let uniform = |u: &Unit| u.rotors.iter().all(|r| r.efficiency == u.rotors[0].efficiency);
    if uniform(a) && uniform(b) {
        return a.rotors[0].efficiency == b.rotors[0].efficiency;
    }
    unit_signature(g, a) == unit_signature(g, b)
}

/// Places the target so its faulty unit coincides with the current one,
/// trying the rotations and mirror images of the target (all have the
/// target's margin). The placement must reproduce the faulty unit's
/// orientation and keep every cell in `keep` inside the footprint. Fewest
/// units to move wins, then the order of [`Transform::ALL`].
pub(crate) fn align(current: &Assembly, target: &Assembly, keep: &BTreeSet<Cell>) -> Result<Alignment, PlanError> {
    let faulty = faulty_unit(current)?;
    let g = current.geometry();
    let mut best: Option<(usize, Alignment)> = None;
    for t in Transform::ALL {
        let rotated = transform_assembly(target, t)?;
        let tf = faulty_unit(&rotated)?;
        if !same_unit(g, tf, faulty) {
            continue;
        }
        let (dc, dr) = (faulty.cell.col - tf.cell.col, faulty.cell.row - tf.cell.row);
        let footprint: BTreeSet<Cell> = rotated.units().iter().map(|u| u.cell.offset(dc, dr)).collect();
        if !keep.is_subset(&footprint) {
            continue;
        }
        let moves = current.units().iter().filter(|u| !footprint.contains(&u.cell)).count();
        if best.as_ref().is_none_or(|b| moves < b.0) {
            best = Some((moves, Alignment { footprint }));
        }
    }
    best.map(|b| b.1)
        .ok_or_else(|| PlanError::InfeasiblePlan("no placement of the target keeps the carrier in place".into()))
}

fn infeasible(what: &str, cm: f64) -> PlanError {
    PlanError::InfeasiblePlan(format!("{what} has margin {cm:.6}"))
}

/// Moves one misplaced unit: detach the one whose loss hurts the margin
/// least, then dock it where the grown structure's margin is largest.
fn single_transfer(
    state: &Assembly,
    align: &Alignment,
    cache: &mut CmCache,
    steps: &mut Vec<PlanStep>,
) -> Result<Assembly, PlanError> {
    let mut best: Option<((i64, (i32, i32)), Unit, Assembly, f64)> = None;
    for u in align.misplaced(state) {
        let Ok(rem) = state.without(&[u.id]) else {
            continue;
        };
        let cm = cache.cm(&rem)?;
        let key = (-cm_key(cm), cell_order(u.cell));
        if best.as_ref().is_none_or(|b| key < b.0) {
            best = Some((key, u.clone(), rem, cm));
        }
    }
    let (_, unit, rem, rem_cm) = best.ok_or_else(|| {
        PlanError::InfeasiblePlan("every misplaced unit is needed to keep the structure connected".into())
    })?;
    if rem_cm <= 0.0 {
        return Err(infeasible(&format!("structure left after detaching unit {}", unit.id), rem_cm));
    }
    let single = state.subassembly(&[unit.id])?;
    let single_cm = cache.cm(&single)?;
    if single_cm <= 0.0 {
        return Err(infeasible(&format!("unit {} flying alone", unit.id), single_cm));
    }
    steps.push(PlanStep {
        kind: StepKind::Detach,
        unit_ids: vec![unit.id],
        from_cells: vec![unit.cell],
        to_cells: Vec::new(),
        structures: vec![structure_state(&rem, rem_cm), structure_state(&single, single_cm)],
    });

    let mut best: Option<((i64, (i32, i32)), Cell, Assembly, f64)> = None;
    for cell in legal_transfer_targets(&rem.cells(), &align.footprint, &BTreeSet::new()) {
        let mut units = rem.units().to_vec();
        units.push(Unit { cell, ..unit.clone() });
        let grown = rem.with_units(units)?;
        let cm = cache.cm(&grown)?;
        let key = (-cm_key(cm), cell_order(cell));
        if best.as_ref().is_none_or(|b| key < b.0) {
            best = Some((key, cell, grown, cm));
        }
    }
    let (_, cell, grown, cm) =
        best.ok_or_else(|| PlanError::InfeasiblePlan(format!("no dockable target cell for unit {}", unit.id)))?;
    if cm <= 0.0 {
        return Err(infeasible(&format!("structure after docking unit {}", unit.id), cm));
    }
    steps.push(PlanStep {
        kind: StepKind::Attach,
        unit_ids: vec![unit.id],
        from_cells: Vec::new(),
        to_cells: vec![cell],
        structures: vec![structure_state(&grown, cm)],
    });
    Ok(grown)
}

fn check_inputs(p: &Configuration, p_star: &Configuration, p_dagger: &Configuration) -> Result<(), PlanError> {
    let (a, t, d) = (&p.assembly, &p_star.assembly, &p_dagger.assembly);
    if a.len() != t.len() {
        return Err(PlanError::InfeasiblePlan("target has a different number of units".into()));
    }
    let subset = d.units().iter().all(|u| a.unit(u.id).is_some_and(|v| v.cell == u.cell));
    if !subset {
        return Err(PlanError::InfeasiblePlan("carrier is not part of the current structure".into()));
    }
    if faulty_unit(d)?.id != faulty_unit(a)?.id {
        return Err(PlanError::InfeasiblePlan("carrier does not contain the faulty unit".into()));
    }
    Ok(())
}

/// Units outside the aligned target are moved one at a time.
/// The carrier and every unit already in place stay put.
pub fn plan_full_sequence(
    p: &Configuration,
    p_star: &Configuration,
    p_dagger: &Configuration,
    cache: &mut CmCache,
) -> Result<ReconfigPlan, PlanError> {
    check_inputs(p, p_star, p_dagger)?;
    let align = align(&p.assembly, &p_star.assembly, &p_dagger.assembly.cells())?;
    let initial_cm = cache.cm(&p.assembly)?;
    let mut state = p.assembly.clone();
    let mut steps = Vec::new();
    while !align.misplaced(&state).is_empty() {
        state = single_transfer(&state, &align, cache, &mut steps)?;
    }
    let final_cm = cache.cm(&state)?;
    Ok(ReconfigPlan::from_steps(PlanMode::Full, initial_cm, steps, &state, final_cm))
}

struct BlockMove {
    score: (i64, Vec<(i32, i32)>, usize),
    ids: Vec<u32>,
    from: Vec<Cell>,
    to: Vec<Cell>,
    rem: (Assembly, f64),
    block: (Assembly, f64),
    grown: (Assembly, f64),
}

/// Connected groups of misplaced cells, largest first: whole components,
/// then their connected sub-blocks down to two cells.
fn candidate_blocks(misplaced: &BTreeSet<Cell>) -> Vec<Vec<Vec<Cell>>> {
    let max = misplaced.len();
    let mut by_size: Vec<Vec<Vec<Cell>>> = vec![Vec::new(); max + 1];
    let mut order: Vec<Cell> = misplaced.iter().copied().collect();
    order.sort_by_key(|c| cell_order(*c));
    for (i, &root) in order.iter().enumerate() {
        let allowed: BTreeSet<Cell> = order[i..].iter().copied().collect();
        for size in 2..=max {
            if by_size[size].len() >= MAX_BLOCKS_PER_SIZE {
                continue;
            }
            let room = MAX_BLOCKS_PER_SIZE - by_size[size].len();
            let mut found: Vec<Vec<Cell>> = connected_subsets(&allowed, root, size, Some(200_000))
                .into_iter()
                .filter(|s| s.len() == size)
                .take(room)
                .collect();
            for s in &mut found {
                s.sort_by_key(|c| cell_order(*c));
            }
            by_size[size].extend(found);
        }
    }
    by_size.into_iter().skip(2).rev().filter(|v| !v.is_empty()).collect()
}

/// Rigid placements of `block` into `holes` touching `rest`, one per
/// distinct image, as (rotation, translated image in block order).
fn block_placements(block: &[Cell], holes: &BTreeSet<Cell>, rest: &BTreeSet<Cell>) -> Vec<(u8, Vec<Cell>)> {
    let mut out: Vec<(u8, Vec<Cell>)> = Vec::new();
    let mut seen: BTreeSet<Vec<Cell>> = BTreeSet::new();
    let mut hole_list: Vec<Cell> = holes.iter().copied().collect();
    hole_list.sort_by_key(|c| cell_order(*c));
    for q in 0..4u8 {
        let t = rotation(q);
        let rotated: Vec<Cell> = block.iter().map(|c| t.apply_cell(*c)).collect();
        let anchor = *rotated.iter().min_by_key(|c| cell_order(**c)).expect("block is not empty");
        for h in &hole_list {
            let (dc, dr) = (h.col - anchor.col, h.row - anchor.row);
            let image: Vec<Cell> = rotated.iter().map(|c| c.offset(dc, dr)).collect();
            if !image.iter().all(|c| holes.contains(c)) {
                continue;
            }
            if !image.iter().any(|c| c.neighbors().iter().any(|n| rest.contains(n))) {
                continue;
            }
            let key = cell_set(image.iter().copied()).into_iter().collect::<Vec<_>>();
            if seen.insert(key) {
                out.push((q, image));
            }
        }
    }
    out
}

fn try_blocks(
    state: &Assembly,
    align: &Alignment,
    cache: &mut CmCache,
) -> Result<Option<BlockMove>, PlanError> {
    let misplaced: BTreeSet<Cell> = align.misplaced(state).iter().map(|u| u.cell).collect();
    let holes = align.holes(state);
    for group in candidate_blocks(&misplaced) {
        let mut best: Option<BlockMove> = None;
        for block in group {
            let ids: Vec<u32> = block.iter().map(|c| state.unit_at(*c).expect("occupied").id).collect();
            let Ok(rem) = state.without(&ids) else {
                continue;
            };
            let rest = rem.cells();
            let placements = block_placements(&block, &holes, &rest);
            if placements.is_empty() {
                continue;
            }
            let rem_cm = cache.cm(&rem)?;
            if rem_cm <= 0.0 {
                continue;
            }
            let sub = state.subassembly(&ids)?;
            let sub_cm = cache.cm(&sub)?;
            if sub_cm <= 0.0 {
                continue;
            }
            for (idx, (q, image)) in placements.into_iter().enumerate() {
                let t = rotation(q);
                let mut units = rem.units().to_vec();
                for (c, to) in block.iter().zip(&image) {
                    let u = state.unit_at(*c).expect("occupied");
                    let (yaw, perm) = unit_image(state.geometry(), u.yaw, t).unwrap_or((u.yaw, [0, 1, 2, 3]));
                    let mut rotors = u.rotors;
                    for k in 0..4 {
                        rotors[perm[k]] = u.rotors[k];
                    }
                    units.push(Unit { id: u.id, cell: *to, yaw, rotors });
                }
                let grown = rem.with_units(units)?;
                let grown_cm = cache.cm(&grown)?;
                if grown_cm <= 0.0 {
                    continue;
                }
                let worst = rem_cm.min(sub_cm).min(grown_cm);
                let score = (-cm_key(worst), block.iter().map(|c| cell_order(*c)).collect(), idx);
                if best.as_ref().is_none_or(|b| score < b.score) {
                    best = Some(BlockMove {
                        score,
                        ids: ids.clone(),
                        from: block.clone(),
                        to: image,
                        rem: (rem.clone(), rem_cm),
                        block: (sub.clone(), sub_cm),
                        grown: (grown, grown_cm),
                    });
                }
            }
        }
        if best.is_some() {
            return Ok(best);
        }
    }
    Ok(None)
}

fn partial_steps(
    p: &Configuration,
    align: &Alignment,
    cache: &mut CmCache,
) -> Result<(Vec<PlanStep>, Assembly), PlanError> {
    let mut state = p.assembly.clone();
    let mut steps = Vec::new();
    while !align.misplaced(&state).is_empty() {
        match try_blocks(&state, align, cache)? {
            Some(m) => {
                steps.push(PlanStep {
                    kind: StepKind::Detach,
                    unit_ids: m.ids.clone(),
                    from_cells: m.from.clone(),
                    to_cells: Vec::new(),
                    structures: vec![structure_state(&m.rem.0, m.rem.1), structure_state(&m.block.0, m.block.1)],
                });
                steps.push(PlanStep {
                    kind: StepKind::Attach,
                    unit_ids: m.ids,
                    from_cells: Vec::new(),
                    to_cells: m.to,
                    structures: vec![structure_state(&m.grown.0, m.grown.1)],
                });
                state = m.grown.0;
            }
            None => state = single_transfer(&state, align, cache, &mut steps)?,
        }
    }
    Ok((steps, state))
}

/// Moves rigid blocks of misplaced units when every structure involved
/// keeps a positive margin, largest blocks first, single units otherwise.
/// Falls back to the full sequence if block moves lead to a dead end.
pub fn plan_partial_sequence(
    p: &Configuration,
    p_star: &Configuration,
    p_dagger: &Configuration,
    cache: &mut CmCache,
) -> Result<ReconfigPlan, PlanError> {
    check_inputs(p, p_star, p_dagger)?;
    let align = align(&p.assembly, &p_star.assembly, &p_dagger.assembly.cells())?;
    let initial_cm = cache.cm(&p.assembly)?;
    match partial_steps(p, &align, cache) {
        Ok((steps, state)) => {
            let final_cm = cache.cm(&state)?;
            Ok(ReconfigPlan::from_steps(PlanMode::Partial, initial_cm, steps, &state, final_cm))
        }
        Err(PlanError::InfeasiblePlan(why)) => {
            log::info!("partial plan failed ({why}); using the full sequence");
            plan_full_sequence(p, p_star, p_dagger, cache)
        }
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{apply_fault, Fault, DEFAULT_PITCH};
    use crate::planner::{find_optimal_reconfiguration, min_carrier_for_target};

    fn setup(c: i32, r: i32, id: u32) -> (Configuration, Configuration, Configuration, CmCache) {
        let a = Assembly::grid(c, r, DEFAULT_PITCH, UnitGeometry::default()).unwrap();
        let p = Configuration::new(apply_fault(&a, &Fault::complete(id)).unwrap());
        let mut cache = CmCache::new();
        let star = find_optimal_reconfiguration(&p, &mut cache).unwrap();
        let dagger = min_carrier_for_target(&p, &star, &mut cache).unwrap();
        (p, star, dagger, cache)
    }

    #[test]
    fn legal_targets() {
        let cur: BTreeSet<Cell> = [Cell::new(0, 0), Cell::new(1, 0)].into();
        let full: BTreeSet<Cell> = cur.clone();
        assert!(legal_transfer_targets(&cur, &full, &BTreeSet::new()).is_empty());
        let target: BTreeSet<Cell> = [Cell::new(0, 0), Cell::new(1, 0), Cell::new(1, 1), Cell::new(3, 3)].into();
        let got = legal_transfer_targets(&cur, &target, &BTreeSet::new());
        assert_eq!(got, [Cell::new(1, 1)].into());
        let reserved: BTreeSet<Cell> = [Cell::new(1, 1)].into();
        assert!(legal_transfer_targets(&cur, &target, &reserved).is_empty());
    }

    #[test]
    fn three_by_three_edge_failure_counts() {
        let (p, star, dagger, mut cache) = setup(3, 3, 8);
        let full = plan_full_sequence(&p, &star, &dagger, &mut cache).unwrap();
        let partial = plan_partial_sequence(&p, &star, &dagger, &mut cache).unwrap();
        assert_eq!(full.step_count, 6);
        assert_eq!(partial.step_count, 2);
        assert_eq!(partial.mode, PlanMode::Partial);
        assert!(full.min_intermediate_cm > 0.0 && partial.min_intermediate_cm > 0.0);
    }

    #[test]
    fn three_by_two_corner_partial_halves_steps() {
        let (p, star, dagger, mut cache) = setup(3, 2, 3);
        let full = plan_full_sequence(&p, &star, &dagger, &mut cache).unwrap();
        let partial = plan_partial_sequence(&p, &star, &dagger, &mut cache).unwrap();
        assert_eq!(full.step_count, 4);
        assert_eq!(partial.step_count, 2);
    }

    #[test]
    fn same_target_gives_empty_plan() {
        let (p, _, dagger, mut cache) = setup(3, 3, 8);
        let plan = plan_full_sequence(&p, &p, &dagger, &mut cache).unwrap();
        assert_eq!(plan.step_count, 0);
        let plan = plan_partial_sequence(&p, &p, &dagger, &mut cache).unwrap();
        assert_eq!(plan.step_count, 0);
    }
}
