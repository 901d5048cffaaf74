//! Fault-tolerant self-reconfiguration planning.
//!
//! The pipeline is: pick the margin-optimal placement of the faulty unit
//! within the unchanged footprint ([`find_optimal_reconfiguration`]), find
//! the smallest controllable block that can carry the faulty unit
//! ([`min_controllable_subassembly`]), then move the remaining units one at
//! a time ([`plan_full_sequence`]) or in rigid blocks
//! ([`plan_partial_sequence`]) so that every structure in the air keeps a
//! positive margin.

mod baseline;
mod candidates;
mod enumerate;
mod sequence;
mod subassembly;

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::controllability::controllability_margin;
use crate::error::PlanError;
use crate::model::{Assembly, AssemblyKey, Cell, Unit};

pub use baseline::plan_baseline;
pub use candidates::{enumerate_candidates, find_optimal_reconfiguration, Candidate};
pub use enumerate::connected_subsets;
pub use sequence::{legal_transfer_targets, plan_full_sequence, plan_partial_sequence};
pub use subassembly::{min_carrier_for_target, min_controllable_subassembly};

/// An assembly with an optionally cached margin.
#[derive(Clone, Debug, PartialEq)]
pub struct Configuration {
    pub assembly: Assembly,
    pub cm: Option<f64>,
}

impl Configuration {
    pub fn new(assembly: Assembly) -> Self {
        Self { assembly, cm: None }
    }

    pub fn evaluated(assembly: Assembly, cm: f64) -> Self {
        Self { assembly, cm: Some(cm) }
    }

    pub fn cm(&mut self, cache: &mut CmCache) -> Result<f64, PlanError> {
        if let Some(cm) = self.cm {
            return Ok(cm);
        }
        let cm = cache.cm(&self.assembly)?;
        self.cm = Some(cm);
        Ok(cm)
    }
}

/// Memoizes margins by translation-invariant physical layout.
#[derive(Debug, Default)]
pub struct CmCache {
    map: HashMap<AssemblyKey, f64>,
    evaluations: usize,
}

impl CmCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cm(&mut self, a: &Assembly) -> Result<f64, PlanError> {
        let key = a.canonical_key();
        if let Some(cm) = self.map.get(&key) {
            return Ok(*cm);
        }
        let cm = controllability_margin(a)?.cm;
        self.evaluations += 1;
        self.map.insert(key, cm);
        Ok(cm)
    }

    /// Number of margins actually computed (cache misses).
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanMode {
    Full,
    Partial,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepKind {
    Detach,
    Attach,
}

/// One structure existing after a step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureState {
    pub unit_ids: Vec<u32>,
    pub cells: Vec<Cell>,
    pub cm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    pub kind: StepKind,
    pub unit_ids: Vec<u32>,
    pub from_cells: Vec<Cell>,
    pub to_cells: Vec<Cell>,
    /// Remainder first, then the block in flight (for detaches).
    pub structures: Vec<StructureState>,
}

impl PlanStep {
    pub fn post_step_cms(&self) -> Vec<f64> {
        self.structures.iter().map(|s| s.cm).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconfigPlan {
    pub mode: PlanMode,
    pub initial_cm: f64,
    pub steps: Vec<PlanStep>,
    pub step_count: usize,
    /// Smallest margin of any structure after any step; the initial
    /// margin for an empty plan.
    pub min_intermediate_cm: f64,
    pub final_cm: f64,
    /// Occupied cells of the final structure.
    pub final_cells: Vec<Cell>,
}

impl ReconfigPlan {
    fn from_steps(mode: PlanMode, initial_cm: f64, steps: Vec<PlanStep>, last: &Assembly, final_cm: f64) -> Self {
        let min_intermediate_cm =
            steps.iter().flat_map(|s| s.structures.iter().map(|t| t.cm)).fold(initial_cm, f64::min);
        Self {
            mode,
            initial_cm,
            step_count: steps.len(),
            steps,
            min_intermediate_cm,
            final_cm,
            final_cells: sorted_cells(last),
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.steps.iter().all(|s| s.structures.iter().all(|t| t.cm > 0.0))
    }

    /// Rows `(step, structure_id, cm)`; step 0 is the initial structure.
    pub fn trace(&self) -> Vec<TraceRow> {
        let mut rows = vec![TraceRow { step: 0, structure_id: 0, cm: self.initial_cm }];
        for (i, s) in self.steps.iter().enumerate() {
            for (j, t) in s.structures.iter().enumerate() {
                rows.push(TraceRow { step: i + 1, structure_id: j, cm: t.cm });
            }
        }
        rows
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub structure_id: usize,
    pub cm: f64,
}

/// Result of running the whole pipeline on a faulty assembly.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanOutcome {
    pub target: Configuration,
    /// `None` when the assembly is already optimal.
    pub carrier: Option<Configuration>,
    pub plan: ReconfigPlan,
    pub cm_evaluations: usize,
}

/// Target search, carrier search and the selected sequence planner, in order.
pub fn plan_reconfiguration(p: &Assembly, mode: PlanMode) -> Result<PlanOutcome, PlanError> {
    let mut cache = CmCache::new();
    let current = Configuration::new(p.clone());
    let target = find_optimal_reconfiguration(&current, &mut cache)?;
    let initial_cm = cache.cm(p)?;
    if target.assembly == *p {
        let plan = ReconfigPlan::from_steps(mode, initial_cm, Vec::new(), p, initial_cm);
        return Ok(PlanOutcome { target, carrier: None, plan, cm_evaluations: cache.evaluations() });
    }
    let mut carrier = min_controllable_subassembly(&current, &mut cache)?;
    if sequence::align(p, &target.assembly, &carrier.assembly.cells()).is_err() {
        log::info!("smallest controllable block does not fit the target; searching blocks that do");
        carrier = min_carrier_for_target(&current, &target, &mut cache)?;
    }
    let plan = match mode {
        PlanMode::Full => plan_full_sequence(&current, &target, &carrier, &mut cache)?,
        PlanMode::Partial => plan_partial_sequence(&current, &target, &carrier, &mut cache)?,
    };
    Ok(PlanOutcome { target, carrier: Some(carrier), plan, cm_evaluations: cache.evaluations() })
}

/// The single faulty unit of an assembly.
pub fn faulty_unit(a: &Assembly) -> Result<&Unit, PlanError> {
    match a.faulty_units().as_slice() {
        [] => Err(PlanError::NoFaultPresent),
        [u] => Ok(u),
        many => Err(PlanError::MultipleFaults(many.len())),
    }
}

/// Row-major ordering key used for all cell tie-breaks.
pub fn cell_order(c: Cell) -> (i32, i32) {
    (c.row, c.col)
}

/// Margin as an integer on a 1e-9 grid, for stable comparisons.
pub(crate) fn cm_key(cm: f64) -> i64 {
    (cm * 1e9).round() as i64
}

pub(crate) fn sorted_cells(a: &Assembly) -> Vec<Cell> {
    let mut cells: Vec<Cell> = a.cells().into_iter().collect();
    cells.sort_by_key(|c| cell_order(*c));
    cells
}

pub(crate) fn structure_state(a: &Assembly, cm: f64) -> StructureState {
    let mut units: Vec<&Unit> = a.units().iter().collect();
    units.sort_by_key(|u| cell_order(u.cell));
    StructureState { unit_ids: units.iter().map(|u| u.id).collect(), cells: units.iter().map(|u| u.cell).collect(), cm }
}

pub(crate) fn cell_set(cells: impl IntoIterator<Item = Cell>) -> BTreeSet<Cell> {
    cells.into_iter().collect()
}
