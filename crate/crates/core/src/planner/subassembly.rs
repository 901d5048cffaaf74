use std::collections::BTreeSet;

use super::sequence::align;
use super::{cell_order, cm_key, connected_subsets, faulty_unit, CmCache, Configuration};
use crate::error::PlanError;
use crate::model::{Assembly, Cell};

/// Smallest connected block of the faulty unit plus `n` functional units
/// with positive margin, `n = 1, 2, ...`, best margin within a size. The
/// whole assembly does not count: a carrier must leave something to move.
pub fn min_controllable_subassembly(p: &Configuration, cache: &mut CmCache) -> Result<Configuration, PlanError> {
    smallest_carrier(&p.assembly, cache, |_| true)
}

/// Like [`min_controllable_subassembly`], restricted to blocks that fit
/// inside some placement of `target` around the faulty unit, so the target
/// can be built around the carrier without moving it.
pub fn min_carrier_for_target(
    p: &Configuration,
    target: &Configuration,
    cache: &mut CmCache,
) -> Result<Configuration, PlanError> {
    let a = &p.assembly;
    smallest_carrier(a, cache, |cells| align(a, &target.assembly, cells).is_ok())
}

fn smallest_carrier(
    a: &Assembly,
    cache: &mut CmCache,
    admissible: impl Fn(&BTreeSet<Cell>) -> bool,
) -> Result<Configuration, PlanError> {
    let faulty = faulty_unit(a)?;
    let allowed = a.cells();
    let n_total = a.len();
    for n in 1..n_total.saturating_sub(1) {
        let mut best: Option<((i64, Vec<(i32, i32)>), Configuration)> = None;
        for cells in connected_subsets(&allowed, faulty.cell, n + 1, None) {
            if cells.len() != n + 1 || !admissible(&cells.iter().copied().collect()) {
                continue;
            }
            let ids: Vec<u32> = cells.iter().map(|c| a.unit_at(*c).expect("cell is occupied").id).collect();
            let sub = a.subassembly(&ids)?;
            let cm = cache.cm(&sub)?;
            let mut order: Vec<(i32, i32)> = cells.iter().map(|c: &Cell| cell_order(*c)).collect();
            order.sort_unstable();
            let key = (-cm_key(cm), order);
            if best.as_ref().is_none_or(|b| key < b.0) {
                best = Some((key, Configuration::evaluated(sub, cm)));
            }
        }
        if let Some((_, config)) = best {
            if config.cm.is_some_and(|cm| cm > 0.0) {
                return Ok(config);
            }
        }
    }
    Err(PlanError::NoControllableSubassembly)
}
