//! Grid-assembly model: units, rigid-body aggregation, the rotor-to-wrench
//! map and the hover-linearized state-space model.
//!
//! Units sit on a square lattice with spacing `pitch`. A unit's rotor
//! offsets are expressed in its own frame and rotated by its yaw, which is
//! always a whole number of quarter turns. All lengths are meters, forces
//! newtons, moments newton-meters.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::f64::consts::FRAC_PI_2;

use nalgebra::{SMatrix, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Gravitational acceleration, m/s^2.
pub const GRAVITY: f64 = 9.81;

/// Integer lattice coordinate of a unit, serialized as `[col, row]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[i32; 2]", into = "[i32; 2]")]
pub struct Cell {
    pub col: i32,
    pub row: i32,
}

impl Cell {
    pub const fn new(col: i32, row: i32) -> Self {
        Self { col, row }
    }

    pub fn neighbors(self) -> [Cell; 4] {
        [
            Cell::new(self.col + 1, self.row),
            Cell::new(self.col - 1, self.row),
            Cell::new(self.col, self.row + 1),
            Cell::new(self.col, self.row - 1),
        ]
    }

    pub fn is_adjacent(self, other: Cell) -> bool {
        (self.col - other.col).abs() + (self.row - other.row).abs() == 1
    }

    pub fn manhattan(self, other: Cell) -> i32 {
        (self.col - other.col).abs() + (self.row - other.row).abs()
    }

    pub fn offset(self, dc: i32, dr: i32) -> Cell {
        Cell::new(self.col + dc, self.row + dr)
    }
}

impl From<[i32; 2]> for Cell {
    fn from(v: [i32; 2]) -> Self {
        Cell::new(v[0], v[1])
    }
}

impl From<Cell> for [i32; 2] {
    fn from(c: Cell) -> Self {
        [c.col, c.row]
    }
}

/// Yaw orientation of a unit as a number of counter-clockwise quarter turns.
/// Serialized as radians.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Yaw(u8);

impl Yaw {
    pub const ZERO: Yaw = Yaw(0);
    pub const QUARTER: Yaw = Yaw(1);
    pub const HALF: Yaw = Yaw(2);
    pub const THREE_QUARTERS: Yaw = Yaw(3);
    pub const ALL: [Yaw; 4] = [Yaw(0), Yaw(1), Yaw(2), Yaw(3)];

    pub fn from_quarters(q: i32) -> Self {
        Yaw(q.rem_euclid(4) as u8)
    }

    pub fn quarters(self) -> u8 {
        self.0
    }

    pub fn radians(self) -> f64 {
        f64::from(self.0) * FRAC_PI_2
    }

    /// Accepts any angle within 1e-6 rad of a multiple of pi/2.
    pub fn from_radians(rad: f64) -> Result<Self, ModelError> {
        let q = rad / FRAC_PI_2;
        let r = q.round();
        if !rad.is_finite() || (q - r).abs() * FRAC_PI_2 > 1e-6 {
            return Err(ModelError::InvalidYaw(rad));
        }
        Ok(Yaw::from_quarters(r as i32))
    }

    pub fn compose(self, other: Yaw) -> Yaw {
        Yaw((self.0 + other.0) % 4)
    }

    pub fn inverse(self) -> Yaw {
        Yaw((4 - self.0) % 4)
    }

    /// Rotates a planar vector by this yaw. Quarter turns are applied
    /// exactly, without trigonometric round-off.
    pub fn rotate(self, v: [f64; 2]) -> [f64; 2] {
        let [x, y] = v;
        match self.0 {
            0 => [x, y],
            1 => [-y, x],
            2 => [-x, -y],
            _ => [y, -x],
        }
    }

    pub fn rotate_cell(self, c: Cell) -> Cell {
        match self.0 {
            0 => c,
            1 => Cell::new(-c.row, c.col),
            2 => Cell::new(-c.col, -c.row),
            _ => Cell::new(c.row, -c.col),
        }
    }
}

impl Serialize for Yaw {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.radians())
    }
}

impl<'de> Deserialize<'de> for Yaw {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rad = f64::deserialize(d)?;
        Yaw::from_radians(rad).map_err(serde::de::Error::custom)
    }
}

/// Geometry and mass properties shared by every unit of an assembly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitGeometry {
    pub arm_length: f64,
    /// Rotor positions in the unit frame, meters.
    pub rotor_offsets: [[f64; 2]; 4],
    /// +1 / -1 per rotor; yaw moment is `spin * torque_coefficient * thrust`.
    pub spin_directions: [i8; 4],
    pub thrust_max_per_rotor: f64,
    pub torque_coefficient: f64,
    pub unit_mass: f64,
    /// Principal moments of inertia about the unit center (xx, yy, zz).
    pub unit_inertia: [f64; 3],
}

impl UnitGeometry {
    /// X-configuration quadrotor: rotors on the diagonals at `arm_length`
    /// from the center, diagonal pairs sharing a spin direction.
    pub fn x_config(
        arm_length: f64,
        thrust_max_per_rotor: f64,
        torque_coefficient: f64,
        unit_mass: f64,
        unit_inertia: [f64; 3],
    ) -> Self {
        let a = arm_length / std::f64::consts::SQRT_2;
        Self {
            arm_length,
            rotor_offsets: [[a, a], [-a, a], [-a, -a], [a, -a]],
            spin_directions: [1, -1, 1, -1],
            thrust_max_per_rotor,
            torque_coefficient,
            unit_mass,
            unit_inertia,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidGeometry(m.to_string()));
        if !(self.arm_length > 0.0 && self.arm_length.is_finite()) {
            return bad("arm_length must be positive");
        }
        if !(self.thrust_max_per_rotor > 0.0 && self.thrust_max_per_rotor.is_finite()) {
            return bad("thrust_max_per_rotor must be positive");
        }
        if !(self.unit_mass > 0.0 && self.unit_mass.is_finite()) {
            return bad("unit_mass must be positive");
        }
        if self.unit_inertia.iter().any(|j| !(*j > 0.0 && j.is_finite())) {
            return bad("unit_inertia entries must be positive");
        }
        if !self.torque_coefficient.is_finite() {
            return bad("torque_coefficient must be finite");
        }
        if self.spin_directions.iter().any(|s| *s != 1 && *s != -1) {
            return bad("spin directions must be +1 or -1");
        }
        if self.spin_directions.iter().map(|s| i32::from(*s)).sum::<i32>() != 0 {
            return bad("spin directions must cancel (two CW, two CCW)");
        }
        if self.rotor_offsets.iter().flatten().any(|v| !v.is_finite()) {
            return bad("rotor offsets must be finite");
        }
        Ok(())
    }

    /// Inertia of a unit after a yaw rotation. Quarter turns swap xx and yy.
    fn rotated_inertia(&self, yaw: Yaw) -> [f64; 3] {
        let [jx, jy, jz] = self.unit_inertia;
        if yaw.quarters() % 2 == 1 {
            [jy, jx, jz]
        } else {
            [jx, jy, jz]
        }
    }
}

impl Default for UnitGeometry {
    /// Desk-scale parameters used throughout the tests and the CLI.
    fn default() -> Self {
        UnitGeometry::x_config(0.1, 5.0, 0.05, 1.0, [0.01, 0.01, 0.02])
    }
}

/// Default center-to-center spacing of adjacent units, meters.
pub const DEFAULT_PITCH: f64 = 0.3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotorState {
    pub efficiency: f64,
}

impl RotorState {
    pub const HEALTHY: RotorState = RotorState { efficiency: 1.0 };
    pub const FAILED: RotorState = RotorState { efficiency: 0.0 };
}

#[derive(Clone, Debug, PartialEq)]
pub struct Unit {
    pub id: u32,
    pub cell: Cell,
    pub yaw: Yaw,
    pub rotors: [RotorState; 4],
}

impl Unit {
    pub fn healthy(id: u32, cell: Cell) -> Self {
        Self { id, cell, yaw: Yaw::ZERO, rotors: [RotorState::HEALTHY; 4] }
    }

    pub fn with_efficiencies(mut self, eta: [f64; 4]) -> Self {
        self.rotors = eta.map(|efficiency| RotorState { efficiency });
        self
    }

    pub fn efficiencies(&self) -> [f64; 4] {
        self.rotors.map(|r| r.efficiency)
    }

    /// All four rotors dead.
    pub fn is_complete_failure(&self) -> bool {
        self.rotors.iter().all(|r| r.efficiency == 0.0)
    }

    /// Any rotor below full efficiency.
    pub fn is_faulty(&self) -> bool {
        self.rotors.iter().any(|r| r.efficiency < 1.0)
    }
}

/// A rigidly connected set of units on the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Assembly {
    units: Vec<Unit>,
    pitch: f64,
    geometry: UnitGeometry,
}

impl Assembly {
    /// Validates and builds an assembly. Units are stored sorted by id.
    pub fn new(mut units: Vec<Unit>, pitch: f64, geometry: UnitGeometry) -> Result<Self, ModelError> {
        geometry.validate()?;
        if !(pitch > 0.0 && pitch.is_finite()) {
            return Err(ModelError::InvalidGeometry("pitch must be positive".into()));
        }
        if units.is_empty() {
            return Err(ModelError::EmptyAssembly);
        }
        units.sort_by_key(|u| u.id);
        for w in units.windows(2) {
            if w[0].id == w[1].id {
                return Err(ModelError::DuplicateUnitId(w[0].id));
            }
        }
        let mut seen = HashSet::new();
        for u in &units {
            if !seen.insert(u.cell) {
                return Err(ModelError::DuplicateCell(u.cell));
            }
            for r in &u.rotors {
                if !(0.0..=1.0).contains(&r.efficiency) {
                    return Err(ModelError::EfficiencyOutOfRange { unit: u.id, value: r.efficiency });
                }
            }
        }
        let cells: Vec<Cell> = units.iter().map(|u| u.cell).collect();
        if !is_connected(&cells) {
            return Err(ModelError::DisconnectedAssembly);
        }
        Ok(Self { units, pitch, geometry })
    }

    /// `cols x rows` rectangle of healthy units, ids assigned row-major from 1.
    pub fn grid(cols: i32, rows: i32, pitch: f64, geometry: UnitGeometry) -> Result<Self, ModelError> {
        let mut units = Vec::new();
        for row in 0..rows {
            for col in 0..cols {
                let id = (row * cols + col + 1) as u32;
                units.push(Unit::healthy(id, Cell::new(col, row)));
            }
        }
        Assembly::new(units, pitch, geometry)
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn geometry(&self) -> &UnitGeometry {
        &self.geometry
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn unit(&self, id: u32) -> Option<&Unit> {
        self.units.binary_search_by_key(&id, |u| u.id).ok().map(|i| &self.units[i])
    }

    pub fn unit_at(&self, cell: Cell) -> Option<&Unit> {
        self.units.iter().find(|u| u.cell == cell)
    }

    pub fn cells(&self) -> BTreeSet<Cell> {
        self.units.iter().map(|u| u.cell).collect()
    }

    pub fn ids(&self) -> Vec<u32> {
        self.units.iter().map(|u| u.id).collect()
    }

    /// Units with at least one degraded rotor.
    pub fn faulty_units(&self) -> Vec<&Unit> {
        self.units.iter().filter(|u| u.is_faulty()).collect()
    }

    /// Same pitch and geometry, different unit set.
    pub fn with_units(&self, units: Vec<Unit>) -> Result<Self, ModelError> {
        Assembly::new(units, self.pitch, self.geometry.clone())
    }

    /// The units with the given ids as a standalone structure.
    pub fn subassembly(&self, ids: &[u32]) -> Result<Self, ModelError> {
        let mut units = Vec::with_capacity(ids.len());
        for id in ids {
            units.push(self.unit(*id).ok_or(ModelError::UnknownUnit(*id))?.clone());
        }
        self.with_units(units)
    }

    /// Everything except the given ids.
    pub fn without(&self, ids: &[u32]) -> Result<Self, ModelError> {
        let units = self.units.iter().filter(|u| !ids.contains(&u.id)).cloned().collect();
        self.with_units(units)
    }

    /// Planar position of a cell center, meters.
    pub fn cell_position(&self, cell: Cell) -> [f64; 2] {
        [f64::from(cell.col) * self.pitch, f64::from(cell.row) * self.pitch]
    }

    /// Translation-invariant physical description: per unit, the relative
    /// cell and its rotors as (world offset on a 1e-9 grid, spin,
    /// efficiency), sorted. Two yaw/efficiency combinations that put the
    /// same rotors in the same places give the same key.
    pub fn canonical_key(&self) -> AssemblyKey {
        let min_c = self.units.iter().map(|u| u.cell.col).min().unwrap_or(0);
        let min_r = self.units.iter().map(|u| u.cell.row).min().unwrap_or(0);
        let mut key: AssemblyKey = self
            .units
            .iter()
            .map(|u| (u.cell.col - min_c, u.cell.row - min_r, unit_signature(&self.geometry, u)))
            .collect();
        key.sort_unstable();
        key
    }
}

/// A unit's rotors as (world offset on a 1e-9 grid, spin, efficiency bits),
/// sorted, so equal signatures mean physically identical units.
pub fn unit_signature(geometry: &UnitGeometry, u: &Unit) -> [(i64, i64, i8, u64); 4] {
    let mut rotors = [(0, 0, 0, 0); 4];
    for k in 0..4 {
        let [x, y] = u.yaw.rotate(geometry.rotor_offsets[k]);
        rotors[k] = (
            (x * 1e9).round() as i64,
            (y * 1e9).round() as i64,
            geometry.spin_directions[k],
            u.rotors[k].efficiency.to_bits(),
        );
    }
    rotors.sort_unstable();
    rotors
}

/// See [`Assembly::canonical_key`].
pub type AssemblyKey = Vec<(i32, i32, [(i64, i64, i8, u64); 4])>;

/// 4-connectivity of a cell set. The empty set counts as connected.
pub fn is_connected(cells: &[Cell]) -> bool {
    let Some(&start) = cells.first() else {
        return true;
    };
    let set: HashSet<Cell> = cells.iter().copied().collect();
    let mut seen = HashSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(c) = queue.pop_front() {
        for n in c.neighbors() {
            if set.contains(&n) && seen.insert(n) {
                queue.push_back(n);
            }
        }
    }
    seen.len() == set.len()
}

/// Aggregated mass properties of an assembly.
#[derive(Clone, Debug, PartialEq)]
pub struct RigidBodyModel {
    pub total_mass: f64,
    pub com: [f64; 3],
    /// Diagonal inertia about the CoM (xx, yy, zz).
    pub inertia: [f64; 3],
    pub n_units: usize,
    /// Product of inertia Jxy left out of the diagonal model.
    pub dropped_product: f64,
}

pub fn aggregate_rigid_body(assembly: &Assembly) -> RigidBodyModel {
    let m = assembly.geometry.unit_mass;
    let n = assembly.len();
    let (mut sx, mut sy) = (0.0, 0.0);
    for u in &assembly.units {
        let [x, y] = assembly.cell_position(u.cell);
        sx += x;
        sy += y;
    }
    let com = [sx / n as f64, sy / n as f64, 0.0];

    let mut inertia = [0.0; 3];
    let mut product = 0.0;
    for u in &assembly.units {
        let [x, y] = assembly.cell_position(u.cell);
        let (dx, dy) = (x - com[0], y - com[1]);
        let j = assembly.geometry.rotated_inertia(u.yaw);
        inertia[0] += j[0] + m * dy * dy;
        inertia[1] += j[1] + m * dx * dx;
        inertia[2] += j[2] + m * (dx * dx + dy * dy);
        product -= m * dx * dy;
    }
    RigidBodyModel { total_mass: m * n as f64, com, inertia, n_units: n, dropped_product: product }
}

/// Identifies a rotor by owning unit and index within the unit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RotorRef {
    pub unit: u32,
    pub rotor: usize,
}

/// Linear map from individual rotor thrusts to the collective wrench
/// `[F, Mx, My, Mz]` about the CoM.
#[derive(Clone, Debug, PartialEq)]
pub struct WrenchMap {
    pub columns: Vec<Vector4<f64>>,
    pub thrust_bounds: Vec<f64>,
    pub rotors: Vec<RotorRef>,
}

impl WrenchMap {
    pub fn n_rotors(&self) -> usize {
        self.columns.len()
    }

    /// `B_f f`.
    pub fn apply(&self, thrusts: &[f64]) -> Vector4<f64> {
        self.columns.iter().zip(thrusts).fold(Vector4::zeros(), |acc, (c, t)| acc + c * *t)
    }
}

/// Planar rotor positions relative to the assembly CoM, with spins and
/// efficiencies, in unit-id then rotor-index order.
pub(crate) fn rotor_layout(assembly: &Assembly) -> Vec<(RotorRef, [f64; 2], i8, f64)> {
    let body = aggregate_rigid_body(assembly);
    let g = &assembly.geometry;
    let mut out = Vec::with_capacity(4 * assembly.len());
    for u in &assembly.units {
        let [cx, cy] = assembly.cell_position(u.cell);
        for k in 0..4 {
            let [ox, oy] = u.yaw.rotate(g.rotor_offsets[k]);
            let r = [cx + ox - body.com[0], cy + oy - body.com[1]];
            out.push((RotorRef { unit: u.id, rotor: k }, r, g.spin_directions[k], u.rotors[k].efficiency));
        }
    }
    out
}

pub fn wrench_map(assembly: &Assembly) -> WrenchMap {
    let c_tau = assembly.geometry.torque_coefficient;
    let k = assembly.geometry.thrust_max_per_rotor;
    let layout = rotor_layout(assembly);
    let mut columns = Vec::with_capacity(layout.len());
    let mut rotors = Vec::with_capacity(layout.len());
    for (rotor, [rx, ry], spin, eta) in layout {
        columns.push(Vector4::new(eta, eta * ry, -eta * rx, f64::from(spin) * c_tau * eta));
        rotors.push(rotor);
    }
    WrenchMap { thrust_bounds: vec![k; columns.len()], columns, rotors }
}

/// Hover-linearized model `x' = A x + B (u_f - g)` with state
/// `[p_z, phi, theta, psi, v_z, w_x, w_y, w_z]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    pub a_matrix: SMatrix<f64, 8, 8>,
    pub b_matrix: SMatrix<f64, 8, 4>,
    pub gravity_wrench: Vector4<f64>,
}

pub fn linear_model(assembly: &Assembly) -> LinearModel {
    let body = aggregate_rigid_body(assembly);
    if body.dropped_product.abs() > 1e-9 * body.inertia[2] {
        log::warn!("dropping product of inertia Jxy = {:.3e} kg m^2 for a non-symmetric layout", body.dropped_product);
    }
    linear_model_from(&body)
}

/// [`linear_model`] from precomputed mass properties, without the
/// truncation warning.
pub(crate) fn linear_model_from(body: &RigidBodyModel) -> LinearModel {
    let mut a = SMatrix::<f64, 8, 8>::zeros();
    for i in 0..4 {
        a[(i, i + 4)] = 1.0;
    }
    let mut b = SMatrix::<f64, 8, 4>::zeros();
    b[(4, 0)] = -1.0 / body.total_mass;
    b[(5, 1)] = 1.0 / body.inertia[0];
    b[(6, 2)] = 1.0 / body.inertia[1];
    b[(7, 3)] = 1.0 / body.inertia[2];
    LinearModel {
        a_matrix: a,
        b_matrix: b,
        gravity_wrench: Vector4::new(body.total_mass * GRAVITY, 0.0, 0.0, 0.0),
    }
}

/// Per-rotor efficiencies to impose on one unit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fault {
    pub unit: u32,
    pub efficiencies: [f64; 4],
}

impl Fault {
    pub fn complete(unit: u32) -> Self {
        Self { unit, efficiencies: [0.0; 4] }
    }

    pub fn rotor(unit: u32, rotor: usize) -> Self {
        let mut efficiencies = [1.0; 4];
        efficiencies[rotor] = 0.0;
        Self { unit, efficiencies }
    }
}

pub fn apply_fault(assembly: &Assembly, fault: &Fault) -> Result<Assembly, ModelError> {
    if let Some(bad) = fault.efficiencies.iter().find(|e| !(0.0..=1.0).contains(*e)) {
        return Err(ModelError::EfficiencyOutOfRange { unit: fault.unit, value: *bad });
    }
    let mut units = assembly.units.clone();
    let unit = units
        .iter_mut()
        .find(|u| u.id == fault.unit)
        .ok_or(ModelError::UnknownUnit(fault.unit))?;
    unit.rotors = fault.efficiencies.map(|efficiency| RotorState { efficiency });
    Ok(Assembly { units, pitch: assembly.pitch, geometry: assembly.geometry.clone() })
}

/// Composes `yaw` onto the unit's current orientation.
pub fn rotate_unit(assembly: &Assembly, unit_id: u32, yaw: Yaw) -> Result<Assembly, ModelError> {
    let mut units = assembly.units.clone();
    let unit = units.iter_mut().find(|u| u.id == unit_id).ok_or(ModelError::UnknownUnit(unit_id))?;
    unit.yaw = unit.yaw.compose(yaw);
    Ok(Assembly { units, pitch: assembly.pitch, geometry: assembly.geometry.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk_grid(cols: i32, rows: i32) -> Assembly {
        Assembly::grid(cols, rows, DEFAULT_PITCH, UnitGeometry::default()).unwrap()
    }

    #[test]
    fn three_by_two_has_six_units_and_24_rotors() {
        let a = desk_grid(3, 2);
        assert_eq!(a.len(), 6);
        assert_eq!(wrench_map(&a).n_rotors(), 24);
    }

    #[test]
    fn complete_failure_is_flagged() {
        let a = apply_fault(&desk_grid(3, 2), &Fault::complete(3)).unwrap();
        assert!(a.unit(3).unwrap().is_complete_failure());
        assert_eq!(a.faulty_units().len(), 1);
    }

    #[test]
    fn rejects_gap_between_cells() {
        let units = vec![Unit::healthy(1, Cell::new(0, 0)), Unit::healthy(2, Cell::new(2, 0))];
        let err = Assembly::new(units, DEFAULT_PITCH, UnitGeometry::default()).unwrap_err();
        assert_eq!(err, ModelError::DisconnectedAssembly);
    }

    #[test]
    fn rejects_duplicate_cell_and_bad_geometry() {
        let units = vec![Unit::healthy(1, Cell::new(0, 0)), Unit::healthy(2, Cell::new(0, 0))];
        assert!(matches!(
            Assembly::new(units, DEFAULT_PITCH, UnitGeometry::default()),
            Err(ModelError::DuplicateCell(_))
        ));
        let mut g = UnitGeometry::default();
        g.unit_mass = 0.0;
        assert!(matches!(Assembly::grid(1, 1, 0.3, g), Err(ModelError::InvalidGeometry(_))));
        let mut g = UnitGeometry::default();
        g.spin_directions = [1, 1, 1, -1];
        assert!(matches!(Assembly::grid(1, 1, 0.3, g), Err(ModelError::InvalidGeometry(_))));
    }

    #[test]
    fn single_unit_rigid_body() {
        let a = desk_grid(1, 1);
        let rb = aggregate_rigid_body(&a);
        assert_eq!(rb.total_mass, 1.0);
        assert_eq!(rb.com, [0.0, 0.0, 0.0]);
        assert_eq!(rb.inertia, [0.01, 0.01, 0.02]);
    }

    #[test]
    fn three_by_two_rigid_body_by_hand() {
        // Cells at x in {0, .3, .6}, y in {0, .3}; CoM (.3, .15).
        // Jxx: 6 * (.01 + .15^2) = .195; Jyy: 6 * .01 + 4 * .09 = .42;
        // Jzz: 6 * .02 + 6 * .0225 + 4 * .09 = .615.
        let rb = aggregate_rigid_body(&desk_grid(3, 2));
        assert_eq!(rb.total_mass, 6.0);
        assert!((rb.com[0] - 0.3).abs() < 1e-12 && (rb.com[1] - 0.15).abs() < 1e-12);
        assert!((rb.inertia[0] - 0.195).abs() < 1e-12);
        assert!((rb.inertia[1] - 0.42).abs() < 1e-12);
        assert!((rb.inertia[2] - 0.615).abs() < 1e-12);
    }

    #[test]
    fn two_by_one_long_axis_has_no_offset_term() {
        // Units along x: the x-axis passes through both centers.
        let rb = aggregate_rigid_body(&desk_grid(2, 1));
        assert!((rb.com[0] - 0.15).abs() < 1e-12);
        assert!((rb.inertia[0] - 0.02).abs() < 1e-12);
        assert!((rb.inertia[1] - (0.02 + 2.0 * 0.0225)).abs() < 1e-12);
    }

    #[test]
    fn single_unit_columns_sum_to_collective_thrust() {
        let w = wrench_map(&desk_grid(1, 1));
        let sum = w.apply(&[1.0; 4]);
        assert!((sum - Vector4::new(4.0, 0.0, 0.0, 0.0)).norm() < 1e-15);
        let arm = 0.1 / std::f64::consts::SQRT_2;
        for c in &w.columns {
            assert!((c[1].abs() - arm).abs() < 1e-15 && (c[2].abs() - arm).abs() < 1e-15);
        }
    }

    #[test]
    fn failed_unit_has_zero_columns() {
        let a = apply_fault(&desk_grid(3, 2), &Fault::complete(3)).unwrap();
        let w = wrench_map(&a);
        for (c, r) in w.columns.iter().zip(&w.rotors) {
            assert_eq!(r.unit == 3, c.norm() == 0.0);
            assert!(c[0] >= 0.0);
        }
    }

    #[test]
    fn half_turn_negates_moment_arm_of_rotor() {
        let base = apply_fault(&desk_grid(1, 1), &Fault::rotor(1, 0)).unwrap();
        let turned = rotate_unit(&base, 1, Yaw::HALF).unwrap();
        let before = wrench_map(&base);
        let after = wrench_map(&turned);
        let arm = 0.1 / std::f64::consts::SQRT_2;
        // Rotor 0 sits at (+a, +a) and moves to (-a, -a).
        let lay = rotor_layout(&turned);
        assert!((lay[0].1[0] + arm).abs() < 1e-15 && (lay[0].1[1] + arm).abs() < 1e-15);
        for k in 1..4 {
            assert!((after.columns[k][1] + before.columns[k][1]).abs() < 1e-15);
            assert!((after.columns[k][2] + before.columns[k][2]).abs() < 1e-15);
        }
    }

    #[test]
    fn linear_model_structure() {
        let lm = linear_model(&desk_grid(3, 2));
        assert_eq!(lm.a_matrix * lm.a_matrix, SMatrix::<f64, 8, 8>::zeros());
        assert!((lm.gravity_wrench[0] - 6.0 * GRAVITY).abs() < 1e-12);
        assert!((lm.b_matrix[(4, 0)] + 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(lm.b_matrix.fixed_rows::<4>(0), SMatrix::<f64, 4, 4>::zeros());
    }

    #[test]
    fn fault_errors_and_identity_fault() {
        let a = desk_grid(3, 2);
        assert_eq!(apply_fault(&a, &Fault::complete(9)), Err(ModelError::UnknownUnit(9)));
        let bad = Fault { unit: 1, efficiencies: [1.2, 1.0, 1.0, 1.0] };
        assert!(matches!(apply_fault(&a, &bad), Err(ModelError::EfficiencyOutOfRange { .. })));
        let same = apply_fault(&a, &Fault { unit: 2, efficiencies: [1.0; 4] }).unwrap();
        assert_eq!(same, a);
        assert_eq!(rotate_unit(&a, 7, Yaw::HALF), Err(ModelError::UnknownUnit(7)));
    }

    #[test]
    fn yaw_group() {
        let a = desk_grid(2, 1);
        let twice = rotate_unit(&rotate_unit(&a, 1, Yaw::QUARTER).unwrap(), 1, Yaw::QUARTER).unwrap();
        assert_eq!(twice, rotate_unit(&a, 1, Yaw::HALF).unwrap());
        assert_eq!(Yaw::from_radians(3.0 * FRAC_PI_2).unwrap(), Yaw::THREE_QUARTERS);
        assert!(Yaw::from_radians(0.3).is_err());
    }

    #[test]
    fn fault_round_trip_restores_map() {
        let a = desk_grid(3, 2);
        let f = apply_fault(&a, &Fault { unit: 4, efficiencies: [0.2, 1.0, 0.0, 0.7] }).unwrap();
        let back = apply_fault(&f, &Fault { unit: 4, efficiencies: [1.0; 4] }).unwrap();
        assert_eq!(wrench_map(&back), wrench_map(&a));
    }
}
