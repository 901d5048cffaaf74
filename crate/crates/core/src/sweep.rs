//! Fault-family sweeps: one row per symmetry class of fault patterns.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::controllability::controllability_margin;
use crate::error::PlanError;
use crate::model::{apply_fault, Assembly, AssemblyKey, Fault};
use crate::symmetry::class_key;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultFamily {
    /// Every unit failed completely, one at a time.
    SingleUnit,
    /// Every unordered pair of units failed completely.
    UnitPairs,
    /// Every rotor of one unit failed, one at a time.
    SingleRotor { unit: u32 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub class: usize,
    /// Fault patterns in this row, in enumeration order.
    pub faults: Vec<String>,
    pub cm: f64,
    pub controllable: bool,
}

fn patterns(base: &Assembly, family: &FaultFamily) -> Result<Vec<(String, Vec<Fault>)>, PlanError> {
    let ids = base.ids();
    Ok(match family {
        FaultFamily::SingleUnit => ids.iter().map(|&i| (format!("unit {i}"), vec![Fault::complete(i)])).collect(),
        FaultFamily::UnitPairs => {
            let mut out = Vec::new();
            for (k, &i) in ids.iter().enumerate() {
                for &j in &ids[k + 1..] {
                    out.push((format!("units {i}+{j}"), vec![Fault::complete(i), Fault::complete(j)]));
                }
            }
            out
        }
        FaultFamily::SingleRotor { unit } => {
            if base.unit(*unit).is_none() {
                return Err(crate::error::ModelError::UnknownUnit(*unit).into());
            }
            (0..4).map(|r| (format!("unit {unit} rotor {r}"), vec![Fault::rotor(*unit, r)])).collect()
        }
    })
}

/// Evaluates every fault pattern of `family` on `base`, one margin per
/// symmetry class. Classes whose margins agree to 1e-9 (relative) share a
/// row, since they are indistinguishable in a margin table.
pub fn sweep(base: &Assembly, family: &FaultFamily) -> Result<Vec<SweepRow>, PlanError> {
    let mut classes: Vec<(Vec<String>, f64, bool)> = Vec::new();
    let mut index: HashMap<AssemblyKey, usize> = HashMap::new();
    for (label, faults) in patterns(base, family)? {
        let mut a = base.clone();
        for f in &faults {
            a = apply_fault(&a, f)?;
        }
        let key = class_key(&a)?;
        if let Some(&i) = index.get(&key) {
            classes[i].0.push(label);
            continue;
        }
        let report = controllability_margin(&a)?;
        index.insert(key, classes.len());
        classes.push((vec![label], report.cm, report.controllable));
    }

    let mut rows: Vec<SweepRow> = Vec::new();
    for (faults, cm, controllable) in classes {
        let same = |r: &SweepRow| (r.cm - cm).abs() <= 1e-9 * cm.abs().max(1.0) && r.controllable == controllable;
        match rows.iter_mut().find(|r| same(r)) {
            Some(r) => r.faults.extend(faults),
            None => rows.push(SweepRow { class: rows.len(), faults, cm, controllable }),
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{UnitGeometry, DEFAULT_PITCH};

    fn grid(c: i32, r: i32) -> Assembly {
        Assembly::grid(c, r, DEFAULT_PITCH, UnitGeometry::default()).unwrap()
    }

    #[test]
    fn row_counts() {
        assert_eq!(sweep(&grid(3, 2), &FaultFamily::SingleUnit).unwrap().len(), 2);
        assert_eq!(sweep(&grid(3, 2), &FaultFamily::UnitPairs).unwrap().len(), 5);
        assert_eq!(sweep(&grid(3, 2), &FaultFamily::SingleRotor { unit: 4 }).unwrap().len(), 4);
        assert_eq!(sweep(&grid(1, 1), &FaultFamily::SingleUnit).unwrap().len(), 1);
    }

    #[test]
    fn every_pattern_lands_in_one_row() {
        let rows = sweep(&grid(3, 2), &FaultFamily::UnitPairs).unwrap();
        assert_eq!(rows.iter().map(|r| r.faults.len()).sum::<usize>(), 15);
    }

    #[test]
    fn unknown_unit() {
        assert!(sweep(&grid(2, 1), &FaultFamily::SingleRotor { unit: 9 }).is_err());
    }
}
