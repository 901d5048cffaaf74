//! Planar symmetries of grid assemblies: the eight elements of the square's
//! dihedral group acting on cells, unit yaws and rotor indices.
//!
//! A transformed assembly is the physical mirror image or rotation of the
//! original, so its attainable wrench set is an orthogonal image of the
//! original's and the margin is unchanged.

use std::collections::BTreeSet;

use nalgebra::{Matrix2, Matrix4};

use crate::error::ModelError;
use crate::model::{Assembly, AssemblyKey, Cell, Unit, UnitGeometry, Yaw};

/// Integer orthogonal 2x2 matrix acting on planar coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Transform {
    m: [[i32; 2]; 2],
}

impl Transform {
    pub const IDENTITY: Transform = Transform { m: [[1, 0], [0, 1]] };
    /// `y -> -y`.
    pub const REFLECT_X: Transform = Transform { m: [[1, 0], [0, -1]] };
    /// `x -> -x`.
    pub const REFLECT_Y: Transform = Transform { m: [[-1, 0], [0, 1]] };
    pub const ROTATE_90: Transform = Transform { m: [[0, -1], [1, 0]] };
    pub const ROTATE_180: Transform = Transform { m: [[-1, 0], [0, -1]] };
    pub const ROTATE_270: Transform = Transform { m: [[0, 1], [-1, 0]] };
    /// `(x, y) -> (y, x)`.
    pub const REFLECT_DIAG: Transform = Transform { m: [[0, 1], [1, 0]] };
    /// `(x, y) -> (-y, -x)`.
    pub const REFLECT_ANTI: Transform = Transform { m: [[0, -1], [-1, 0]] };

    pub const ALL: [Transform; 8] = [
        Self::IDENTITY,
        Self::REFLECT_X,
        Self::REFLECT_Y,
        Self::ROTATE_180,
        Self::ROTATE_90,
        Self::ROTATE_270,
        Self::REFLECT_DIAG,
        Self::REFLECT_ANTI,
    ];

    pub fn det(self) -> i32 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn apply_cell(self, c: Cell) -> Cell {
        Cell::new(
            self.m[0][0] * c.col + self.m[0][1] * c.row,
            self.m[1][0] * c.col + self.m[1][1] * c.row,
        )
    }

    pub fn apply_vec(self, v: [f64; 2]) -> [f64; 2] {
        let m = self.m.map(|r| r.map(f64::from));
        [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
    }

    /// Linear map taking a wrench `[F, Mx, My, Mz]` of the original assembly
    /// to the corresponding wrench of the transformed one.
    pub fn wrench_matrix(self) -> Matrix4<f64> {
        // Planar moment is F J r with J = [[0, 1], [-1, 0]], so it maps by
        // J M J^T; yaw moments flip with orientation.
        let m = Matrix2::from_fn(|r, c| f64::from(self.m[r][c]));
        let j = Matrix2::new(0.0, 1.0, -1.0, 0.0);
        let jmjt = j * m * j.transpose();
        let mut w = Matrix4::zeros();
        w[(0, 0)] = 1.0;
        w[(1, 1)] = jmjt[(0, 0)];
        w[(1, 2)] = jmjt[(0, 1)];
        w[(2, 1)] = jmjt[(1, 0)];
        w[(2, 2)] = jmjt[(1, 1)];
        w[(3, 3)] = f64::from(self.det());
        w
    }
}

/// New yaw and rotor permutation (`perm[k]` is the new index of old rotor
/// `k`) that realize the mirrored or rotated unit with the same rotor
/// layout and spins flipped by reflections.
pub fn unit_image(geometry: &UnitGeometry, yaw: Yaw, t: Transform) -> Option<(Yaw, [usize; 4])> {
    let flip = t.det() as i8;
    'yaw: for new_yaw in Yaw::ALL {
        let mut perm = [usize::MAX; 4];
        for k in 0..4 {
            let target = t.apply_vec(yaw.rotate(geometry.rotor_offsets[k]));
            let spin = geometry.spin_directions[k] * flip;
            let hit = (0..4).find(|&j| {
                let p = new_yaw.rotate(geometry.rotor_offsets[j]);
                geometry.spin_directions[j] == spin
                    && (p[0] - target[0]).abs() < 1e-12
                    && (p[1] - target[1]).abs() < 1e-12
            });
            match hit {
                Some(j) if !perm.contains(&j) => perm[k] = j,
                _ => continue 'yaw,
            }
        }
        return Some((new_yaw, perm));
    }
    None
}

/// Mirror image or rotation of a whole assembly. Unit ids are kept.
pub fn transform_assembly(a: &Assembly, t: Transform) -> Result<Assembly, ModelError> {
    let g = a.geometry();
    let mut units = Vec::with_capacity(a.len());
    for u in a.units() {
        let (yaw, perm) = unit_image(g, u.yaw, t)
            .ok_or_else(|| ModelError::InvalidGeometry("rotor layout is not symmetric under the transform".into()))?;
        let mut rotors = u.rotors;
        for k in 0..4 {
            rotors[perm[k]] = u.rotors[k];
        }
        units.push(Unit { id: u.id, cell: t.apply_cell(u.cell), yaw, rotors });
    }
    a.with_units(units)
}

fn normalized(cells: impl IntoIterator<Item = Cell>) -> BTreeSet<Cell> {
    let v: Vec<Cell> = cells.into_iter().collect();
    let c0 = v.iter().map(|c| c.col).min().unwrap_or(0);
    let r0 = v.iter().map(|c| c.row).min().unwrap_or(0);
    v.into_iter().map(|c| c.offset(-c0, -r0)).collect()
}

/// Transforms that map the footprint onto itself up to translation.
pub fn footprint_symmetries(cells: &BTreeSet<Cell>) -> Vec<Transform> {
    let base = normalized(cells.iter().copied());
    Transform::ALL
        .into_iter()
        .filter(|t| normalized(cells.iter().map(|c| t.apply_cell(*c))) == base)
        .collect()
}

/// Translation to apply after `t` so the footprint lands on itself.
pub fn footprint_shift(cells: &BTreeSet<Cell>, t: Transform) -> (i32, i32) {
    let img: Vec<Cell> = cells.iter().map(|c| t.apply_cell(*c)).collect();
    let dc = cells.iter().map(|c| c.col).min().unwrap_or(0) - img.iter().map(|c| c.col).min().unwrap_or(0);
    let dr = cells.iter().map(|c| c.row).min().unwrap_or(0) - img.iter().map(|c| c.row).min().unwrap_or(0);
    (dc, dr)
}

/// Identifies an assembly up to footprint symmetry, translation and unit
/// ids. Units whose rotors all have the same efficiency are keyed without
/// their spin layout: for dead units it has no effect at all, and for
/// healthy ones a quarter-turn of a single unit leaves the margin unchanged
/// to round-off.
pub fn class_key(a: &Assembly) -> Result<AssemblyKey, ModelError> {
    let mut best: Option<AssemblyKey> = None;
    for t in footprint_symmetries(&a.cells()) {
        let mut key = transform_assembly(a, t)?.canonical_key();
        for (_, _, rotors) in &mut key {
            if rotors.iter().all(|r| r.3 == rotors[0].3) {
                for r in rotors.iter_mut() {
                    r.2 = 0;
                }
            }
        }
        key.sort_unstable();
        if best.as_ref().is_none_or(|b| key < *b) {
            best = Some(key);
        }
    }
    Ok(best.expect("identity is always a footprint symmetry"))
}
