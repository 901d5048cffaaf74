use std::collections::HashMap;

use super::{cell_order, cm_key, faulty_unit, CmCache, Configuration};
use crate::error::PlanError;
use crate::model::{Assembly, AssemblyKey, Cell, Yaw};
use crate::symmetry::class_key;

/// One symmetry class of faulty-unit placements.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    /// First member in row-major order.
    pub config: Configuration,
    /// Every `(cell, yaw)` placement of the faulty unit in this class.
    pub members: Vec<(Cell, Yaw)>,
}

/// Faulty unit moved to `cell` (swapping with the unit there) and given
/// `yaw`.
fn place(p: &Assembly, faulty: u32, cell: Cell, yaw: Yaw) -> Result<Assembly, PlanError> {
    let from = p.unit(faulty).expect("faulty unit exists").cell;
    let units = p
        .units()
        .iter()
        .map(|u| {
            let mut u = u.clone();
            if u.id == faulty {
                u.cell = cell;
                u.yaw = yaw;
            } else if u.cell == cell {
                u.cell = from;
            }
            u
        })
        .collect();
    Ok(p.with_units(units)?)
}

fn yaw_options(p: &Assembly, faulty: u32) -> Vec<Yaw> {
    let u = p.unit(faulty).expect("faulty unit exists");
    if u.is_complete_failure() {
        vec![u.yaw]
    } else {
        (0..4).map(|q| u.yaw.compose(Yaw::from_quarters(q))).collect()
    }
}

/// All placements of the single faulty unit over the fixed footprint,
/// grouped into symmetry classes. Partially failed units are also tried in
/// the three other yaw orientations.
pub fn enumerate_candidates(p: &Configuration) -> Result<Vec<Candidate>, PlanError> {
    let a = &p.assembly;
    let faulty = faulty_unit(a)?.id;
    let mut cells: Vec<Cell> = a.cells().into_iter().collect();
    cells.sort_by_key(|c| cell_order(*c));
    let mut classes: Vec<Candidate> = Vec::new();
    let mut index: HashMap<AssemblyKey, usize> = HashMap::new();
    for &cell in &cells {
        for yaw in yaw_options(a, faulty) {
            let placed = place(a, faulty, cell, yaw)?;
            let key = class_key(&placed)?;
            match index.get(&key) {
                Some(&i) => classes[i].members.push((cell, yaw)),
                None => {
                    index.insert(key, classes.len());
                    classes.push(Candidate { config: Configuration::new(placed), members: vec![(cell, yaw)] });
                }
            }
        }
    }
    Ok(classes)
}

/// The margin-maximizing placement. Ties, including the members of the
/// winning class, go to the smallest Manhattan move of the faulty unit,
/// then the lowest row-major cell, then the smallest extra yaw.
pub fn find_optimal_reconfiguration(p: &Configuration, cache: &mut CmCache) -> Result<Configuration, PlanError> {
    let a = &p.assembly;
    let faulty = faulty_unit(a)?;
    let (id, from, yaw0) = (faulty.id, faulty.cell, faulty.yaw);
    let mut best: Option<((i64, i32, (i32, i32), u8), Cell, Yaw, f64)> = None;
    for mut cand in enumerate_candidates(p)? {
        let cm = cand.config.cm(cache)?;
        for &(cell, yaw) in &cand.members {
            let turn = yaw.compose(yaw0.inverse()).quarters();
            let key = (-cm_key(cm), cell.manhattan(from), cell_order(cell), turn);
            if best.as_ref().is_none_or(|b| key < b.0) {
                best = Some((key, cell, yaw, cm));
            }
        }
    }
    let (_, cell, yaw, cm) = best.expect("footprint is never empty");
    if cell == from && yaw == yaw0 {
        return Ok(Configuration::evaluated(a.clone(), cm));
    }
    Ok(Configuration::evaluated(place(a, id, cell, yaw)?, cm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{apply_fault, Fault, UnitGeometry, DEFAULT_PITCH};

    fn faulty_grid(c: i32, r: i32, fault: Fault) -> Configuration {
        let a = Assembly::grid(c, r, DEFAULT_PITCH, UnitGeometry::default()).unwrap();
        Configuration::new(apply_fault(&a, &fault).unwrap())
    }

    #[test]
    fn class_counts() {
        assert_eq!(enumerate_candidates(&faulty_grid(3, 2, Fault::complete(3))).unwrap().len(), 2);
        assert_eq!(enumerate_candidates(&faulty_grid(3, 3, Fault::complete(8))).unwrap().len(), 3);
        assert_eq!(enumerate_candidates(&faulty_grid(1, 1, Fault::complete(1))).unwrap().len(), 1);
        let members: usize =
            enumerate_candidates(&faulty_grid(3, 3, Fault::complete(1))).unwrap().iter().map(|c| c.members.len()).sum();
        assert_eq!(members, 9);
    }

    #[test]
    fn requires_exactly_one_fault() {
        let a = Assembly::grid(2, 1, DEFAULT_PITCH, UnitGeometry::default()).unwrap();
        assert_eq!(enumerate_candidates(&Configuration::new(a.clone())), Err(PlanError::NoFaultPresent));
        let two = apply_fault(&apply_fault(&a, &Fault::complete(1)).unwrap(), &Fault::complete(2)).unwrap();
        assert_eq!(enumerate_candidates(&Configuration::new(two)), Err(PlanError::MultipleFaults(2)));
    }

    #[test]
    fn corner_failure_moves_to_nearest_center() {
        let mut cache = CmCache::new();
        let best = find_optimal_reconfiguration(&faulty_grid(3, 2, Fault::complete(3)), &mut cache).unwrap();
        assert_eq!(best.assembly.unit(3).unwrap().cell, Cell::new(1, 0));
    }

    #[test]
    fn optimal_input_is_a_fixed_point() {
        let mut cache = CmCache::new();
        let p = faulty_grid(3, 2, Fault::complete(2));
        let best = find_optimal_reconfiguration(&p, &mut cache).unwrap();
        assert_eq!(best.assembly, p.assembly);
    }

    #[test]
    fn partial_failure_tries_all_yaws() {
        let p = faulty_grid(3, 2, Fault::rotor(4, 1));
        let members: usize = enumerate_candidates(&p).unwrap().iter().map(|c| c.members.len()).sum();
        assert_eq!(members, 24);
    }
}
