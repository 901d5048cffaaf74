//! Controllability margin: signed distance from the hover wrench to the
//! boundary of the attainable wrench set, plus the Kalman rank test.

use nalgebra::{SMatrix, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::GeometryError;
use crate::model::{aggregate_rigid_body, linear_model_from, wrench_map, Assembly, LinearModel};
use crate::zonotope::{control_set, Zonotope, MEMBERSHIP_TOL};

#[derive(Clone, Debug, PartialEq)]
pub enum Witness {
    /// Outward normal of the nearest facet (hover wrench inside).
    Facet(Vector4<f64>),
    /// Nearest attainable wrench (hover wrench outside).
    Projection(Vector4<f64>),
    /// Hover wrench on the boundary or the set is flat.
    None,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CmReport {
    pub cm: f64,
    pub controllable: bool,
    pub rank_ok: bool,
    pub degenerate: bool,
    pub witness: Witness,
}

/// Serialized form of a [`CmReport`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CmSummary {
    pub cm: f64,
    pub controllable: bool,
    pub rank_ok: bool,
    pub degenerate: bool,
}

impl CmReport {
    pub fn summary(&self) -> CmSummary {
        CmSummary { cm: self.cm, controllable: self.controllable, rank_ok: self.rank_ok, degenerate: self.degenerate }
    }
}

/// Signed distance of `point` to the boundary of `z`: positive inside,
/// negative projection distance outside, zero on the boundary or when
/// the set is flat.
pub fn signed_distance(z: &Zonotope, point: &Vector4<f64>) -> Result<(f64, bool, Witness), GeometryError> {
    let degenerate = !z.is_full_dimensional();
    let proj = z.project(point)?;
    if proj.dist > MEMBERSHIP_TOL {
        return Ok((-proj.dist, degenerate, Witness::Projection(proj.nearest)));
    }
    if degenerate {
        return Ok((0.0, true, Witness::None));
    }
    let inner = z.interior_distance(point)?;
    if inner.distance <= MEMBERSHIP_TOL {
        return Ok((0.0, false, Witness::None));
    }
    Ok((inner.distance, false, Witness::Facet(inner.normal)))
}

pub fn controllability_margin(assembly: &Assembly) -> Result<CmReport, GeometryError> {
    controllability_margin_scaled(assembly, &Vector4::repeat(1.0))
}

/// Margin measured after scaling the four wrench coordinates by `weights`.
pub fn controllability_margin_scaled(assembly: &Assembly, weights: &Vector4<f64>) -> Result<CmReport, GeometryError> {
    let model = linear_model_from(&aggregate_rigid_body(assembly));
    let rank_ok = rank_condition(&model);
    let z = control_set(&wrench_map(assembly)).scaled(weights);
    let g = model.gravity_wrench.component_mul(weights);
    let (cm, degenerate, witness) = signed_distance(&z, &g)?;
    Ok(CmReport { cm, controllable: rank_ok && cm > 0.0 && !degenerate, rank_ok, degenerate, witness })
}

/// `rank [B, AB, ..., A^7 B] == 8` with relative tolerance 1e-9.
pub fn rank_condition(model: &LinearModel) -> bool {
    let mut ctrb = SMatrix::<f64, 8, 32>::zeros();
    let mut block = model.b_matrix;
    for k in 0..8 {
        ctrb.fixed_view_mut::<8, 4>(0, 4 * k).copy_from(&block);
        block = model.a_matrix * block;
    }
    let sv = ctrb.singular_values();
    let smax = sv.max();
    smax > 0.0 && sv.iter().filter(|s| **s > 1e-9 * smax).count() == 8
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{apply_fault, Fault, UnitGeometry, DEFAULT_PITCH};

    fn grid(c: i32, r: i32) -> Assembly {
        Assembly::grid(c, r, DEFAULT_PITCH, UnitGeometry::default()).unwrap()
    }

    #[test]
    fn intact_three_by_two_is_controllable() {
        let rep = controllability_margin(&grid(3, 2)).unwrap();
        assert!(rep.cm > 0.0 && rep.controllable && rep.rank_ok && !rep.degenerate);
        assert!(matches!(rep.witness, Witness::Facet(_)));
    }

    #[test]
    fn all_failed_is_negative() {
        let mut a = grid(2, 1);
        for id in [1, 2] {
            a = apply_fault(&a, &Fault::complete(id)).unwrap();
        }
        let rep = controllability_margin(&a).unwrap();
        assert!((rep.cm + 2.0 * crate::model::GRAVITY).abs() < 1e-9);
        assert!(!rep.controllable && rep.degenerate);
    }

    #[test]
    fn adjacent_pair_failure_is_negative() {
        let mut a = grid(3, 2);
        for id in [1, 2] {
            a = apply_fault(&a, &Fault::complete(id)).unwrap();
        }
        let rep = controllability_margin(&a).unwrap();
        assert!(rep.cm < 0.0 && !rep.controllable);
        assert!(matches!(rep.witness, Witness::Projection(_)));
    }

    #[test]
    fn zero_input_map_fails_rank() {
        let mut m = crate::model::linear_model(&grid(1, 1));
        assert!(rank_condition(&m));
        m.b_matrix = SMatrix::zeros();
        assert!(!rank_condition(&m));
    }

    #[test]
    fn identity_scaling_matches_default() {
        let a = grid(3, 2);
        let w = Vector4::repeat(1.0);
        assert_eq!(controllability_margin(&a).unwrap(), controllability_margin_scaled(&a, &w).unwrap());
        let doubled = controllability_margin_scaled(&a, &Vector4::repeat(2.0)).unwrap();
        assert!((doubled.cm - 2.0 * controllability_margin(&a).unwrap().cm).abs() < 1e-9);
    }

    #[test]
    fn summary_round_trips_through_json() {
        let s = controllability_margin(&grid(3, 2)).unwrap().summary();
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<CmSummary>(&text).unwrap(), s);
    }
}
