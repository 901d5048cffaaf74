//! The attainable wrench set as a 4-D zonotope, with projection, exact
//! interior distance by facet enumeration, and a ray-casting cross-check.

use std::collections::HashSet;

use nalgebra::{DMatrix, Matrix3, Vector4};

use crate::bvls::{Bvls, BvlsSolution};
use crate::error::GeometryError;
use crate::model::WrenchMap;

/// Absolute tolerance on projection distance for set membership.
pub const MEMBERSHIP_TOL: f64 = 1e-8;

/// `{center + sum_i s_i g_i : s_i in [-1, 1]}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Zonotope {
    pub generators: Vec<Vector4<f64>>,
    pub center: Vector4<f64>,
    /// Zero generators removed at construction.
    pub dropped: usize,
    /// For each kept generator, the index of the column it came from.
    pub source: Vec<usize>,
}

impl Zonotope {
    pub fn new(center: Vector4<f64>, generators: Vec<Vector4<f64>>) -> Self {
        let total = generators.len();
        let mut kept = Vec::with_capacity(total);
        let mut source = Vec::with_capacity(total);
        for (i, g) in generators.into_iter().enumerate() {
            if g.norm() > 0.0 {
                kept.push(g);
                source.push(i);
            }
        }
        Self { dropped: total - kept.len(), generators: kept, center, source }
    }

    /// `[0, 1]^4` as a zonotope.
    pub fn unit_box() -> Self {
        let gens = (0..4)
            .map(|i| {
                let mut v = Vector4::zeros();
                v[i] = 0.5;
                v
            })
            .collect();
        Zonotope::new(Vector4::repeat(0.5), gens)
    }

    pub fn ambient_dim(&self) -> usize {
        4
    }

    /// Numerical rank of the generator matrix, relative tolerance 1e-9.
    pub fn rank(&self) -> usize {
        if self.generators.is_empty() {
            return 0;
        }
        let m = DMatrix::from_fn(4, self.generators.len(), |r, c| self.generators[c][r]);
        let sv = m.singular_values();
        let smax = sv.max();
        if smax == 0.0 {
            return 0;
        }
        sv.iter().filter(|s| **s > 1e-9 * smax).count()
    }

    pub fn is_full_dimensional(&self) -> bool {
        self.rank() == 4
    }

    /// Support function `h(v) = max_{x in Z} v.x`.
    pub fn support(&self, v: &Vector4<f64>) -> f64 {
        v.dot(&self.center) + self.generators.iter().map(|g| v.dot(g).abs()).sum::<f64>()
    }

    /// Diagonal rescaling of the ambient coordinates.
    pub fn scaled(&self, weights: &Vector4<f64>) -> Self {
        Self {
            generators: self.generators.iter().map(|g| g.component_mul(weights)).collect(),
            center: self.center.component_mul(weights),
            dropped: self.dropped,
            source: self.source.clone(),
        }
    }

    /// Nearest point of the set and its distance, by box-constrained least
    /// squares on the generator coefficients.
    pub fn project(&self, point: &Vector4<f64>) -> Result<Projection, GeometryError> {
        if self.generators.is_empty() {
            return Ok(Projection {
                nearest: self.center,
                dist: (point - self.center).norm(),
                coefficients: Vec::new(),
            });
        }
        let n = self.generators.len();
        let lo = vec![-1.0; n];
        let hi = vec![1.0; n];
        let sol: BvlsSolution = Bvls::new(&self.generators, &lo, &hi).solve(&(point - self.center))?;
        Ok(Projection { nearest: self.center + sol.fitted, dist: sol.residual_norm, coefficients: sol.x })
    }

    pub fn contains(&self, point: &Vector4<f64>) -> Result<bool, GeometryError> {
        Ok(self.project(point)?.dist <= MEMBERSHIP_TOL)
    }

    /// Unit normals of every hyperplane spanned by three independent
    /// generators, one orientation each, deduplicated on a 1e-9 grid.
    pub fn facet_normals(&self) -> Vec<Vector4<f64>> {
        let g = &self.generators;
        let n = g.len();
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    if let Some(v) = normal_of(&g[i], &g[j], &g[k]) {
                        if seen.insert(normal_key(&v)) {
                            out.push(v);
                        }
                    }
                }
            }
        }
        out
    }

    /// Distance from an interior point to the boundary: the smallest facet
    /// slack `h(v) - v.p` over both orientations of every facet normal.
    /// The caller is responsible for `point` being inside.
    ///
    /// Facets are visited per generator pair: every facet through `g_i` and
    /// `g_j` has its normal in the plane orthogonal to both, and the support
    /// sum along that circle is piecewise linear with breakpoints at the
    /// facet normals, so one angular sweep evaluates them all.
    pub fn interior_distance(&self, point: &Vector4<f64>) -> Result<InteriorDistance, GeometryError> {
        let rank = self.rank();
        if rank < 4 {
            return Err(GeometryError::DegenerateZonotope { rank });
        }
        let offset = self.center - point;
        let g = &self.generators;
        let n = g.len();
        let mut best = f64::INFINITY;
        let mut normal = Vector4::zeros();
        let mut events: Vec<(f64, usize, f64, [f64; 2])> = Vec::with_capacity(n);
        let mut proj = vec![[0.0; 2]; n];
        for i in 0..n {
            for j in i + 1..n {
                let Some([e1, e2]) = complement_basis(&g[i], &g[j]) else {
                    continue;
                };
                events.clear();
                let mut sum = [0.0; 2];
                for (l, gl) in g.iter().enumerate() {
                    let q = [e1.dot(gl), e2.dot(gl)];
                    proj[l] = q;
                    if l == i || l == j || q[0].hypot(q[1]) <= 1e-10 * gl.norm() {
                        continue;
                    }
                    // Unit normal to q in the upper half plane, and the sign
                    // of u.q just before the sweep reaches it.
                    let r = q[0].hypot(q[1]);
                    let mut u = [-q[1] / r, q[0] / r];
                    if u[1] < 0.0 || (u[1] == 0.0 && u[0] < 0.0) {
                        u = [-u[0], -u[1]];
                    }
                    let rate = -u[1] * q[0] + u[0] * q[1];
                    let sign = if rate > 0.0 { -1.0 } else { 1.0 };
                    sum[0] += sign * q[0];
                    sum[1] += sign * q[1];
                    events.push((pseudo_angle(u), l, sign, u));
                }
                events.sort_by(|a, b| a.0.total_cmp(&b.0));
                let w = [e1.dot(&offset), e2.dot(&offset)];
                for &(_, l, sign, u) in &events {
                    let spread = u[0] * sum[0] + u[1] * sum[1];
                    let shift = u[0] * w[0] + u[1] * w[1];
                    let slack = spread - shift.abs();
                    if slack < best {
                        best = slack;
                        let v = e1 * u[0] + e2 * u[1];
                        normal = if shift >= 0.0 { -v } else { v };
                    }
                    sum[0] -= 2.0 * sign * proj[l][0];
                    sum[1] -= 2.0 * sign * proj[l][1];
                }
            }
        }
        Ok(InteriorDistance { distance: best, normal })
    }

    /// Same quantity as [`Zonotope::interior_distance`] by enumerating every
    /// generator triple and hashing the normals. Cubic in the generator count
    /// times a linear support evaluation; kept as a reference.
    pub fn interior_distance_enumerated(&self, point: &Vector4<f64>) -> Result<InteriorDistance, GeometryError> {
        let rank = self.rank();
        if rank < 4 {
            return Err(GeometryError::DegenerateZonotope { rank });
        }
        let offset = self.center - point;
        let mut best = f64::INFINITY;
        let mut normal = Vector4::zeros();
        for v in self.facet_normals() {
            let spread: f64 = self.generators.iter().map(|g| v.dot(g).abs()).sum();
            let shift = v.dot(&offset);
            let slack = spread - shift.abs();
            if slack < best {
                best = slack;
                normal = if shift >= 0.0 { -v } else { v };
            }
        }
        Ok(InteriorDistance { distance: best, normal })
    }

    /// Upper bound on the interior distance by casting `n_dirs` rays from
    /// `point` and bisecting on membership. The eight signed axes are cast
    /// first, then super-Fibonacci points on the 3-sphere.
    pub fn raycast_distance(&self, point: &Vector4<f64>, n_dirs: usize) -> Result<f64, GeometryError> {
        let mut best = f64::INFINITY;
        for d in ray_directions(n_dirs) {
            let t_hi = self.support(&d) - d.dot(point);
            if t_hi <= 0.0 {
                return Ok(0.0);
            }
            let mut hi = t_hi.min(best);
            if best.is_finite() && self.contains(&(point + d * best))? {
                continue;
            }
            let mut lo = 0.0;
            if self.contains(&(point + d * hi))? {
                best = best.min(hi);
                continue;
            }
            while hi - lo > 1e-12 * (1.0 + hi) {
                let mid = 0.5 * (lo + hi);
                if self.contains(&(point + d * mid))? {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            best = best.min(hi);
        }
        Ok(best)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub nearest: Vector4<f64>,
    pub dist: f64,
    /// Generator coefficients in `[-1, 1]` realizing `nearest`.
    pub coefficients: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InteriorDistance {
    pub distance: f64,
    /// Outward unit normal of the closest facet.
    pub normal: Vector4<f64>,
}

/// Zonotope of a wrench map: generators `K_i b_i / 2`, center at half thrust.
pub fn control_set(wrench_map: &WrenchMap) -> Zonotope {
    let mut center = Vector4::zeros();
    let mut gens = Vec::with_capacity(wrench_map.n_rotors());
    for (c, k) in wrench_map.columns.iter().zip(&wrench_map.thrust_bounds) {
        let g = c * (0.5 * k);
        center += g;
        gens.push(g);
    }
    Zonotope::new(center, gens)
}

/// Monotone in the angle of a unit vector with `u[1] >= 0`, on `[0, 2)`.
fn pseudo_angle(u: [f64; 2]) -> f64 {
    1.0 - u[0] / (u[0].abs() + u[1])
}

/// Orthonormal basis of the plane orthogonal to `a` and `b`, or `None` if
/// they are parallel.
fn complement_basis(a: &Vector4<f64>, b: &Vector4<f64>) -> Option<[Vector4<f64>; 2]> {
    let a1 = a.normalize();
    let b0 = b - a1 * a1.dot(b);
    if b0.norm() <= 1e-10 * b.norm() {
        return None;
    }
    let b1 = b0.normalize();
    let mut basis: Vec<Vector4<f64>> = Vec::with_capacity(2);
    let mut candidates: Vec<Vector4<f64>> = (0..4)
        .map(|k| {
            let mut e = Vector4::zeros();
            e[k] = 1.0;
            e - a1 * a1[k] - b1 * b1[k]
        })
        .collect();
    candidates.sort_by(|x, y| y.norm_squared().total_cmp(&x.norm_squared()));
    for mut c in candidates {
        for e in &basis {
            c -= e * e.dot(&c);
        }
        let nc = c.norm();
        if nc > 1e-6 {
            basis.push(c / nc);
            if basis.len() == 2 {
                return Some([basis[0], basis[1]]);
            }
        }
    }
    None
}

/// Generalized cross product of three 4-vectors, normalized. `None` when
/// they are (numerically) dependent.
fn normal_of(a: &Vector4<f64>, b: &Vector4<f64>, c: &Vector4<f64>) -> Option<Vector4<f64>> {
    let minor = |skip: usize| {
        let idx: Vec<usize> = (0..4).filter(|t| *t != skip).collect();
        Matrix3::from_fn(|r, col| {
            let v = [a, b, c][r];
            v[idx[col]]
        })
        .determinant()
    };
    let v = Vector4::new(-minor(0), minor(1), -minor(2), minor(3));
    let norm = v.norm();
    let scale = a.norm() * b.norm() * c.norm();
    if norm <= 1e-10 * scale {
        return None;
    }
    let v = v / norm;
    // Fix the sign so the first non-negligible entry is positive.
    let lead = v.iter().find(|x| x.abs() > 1e-9).copied().unwrap_or(1.0);
    Some(if lead < 0.0 { -v } else { v })
}

fn normal_key(v: &Vector4<f64>) -> [i64; 4] {
    v.map(|x| (x * 1e9).round() as i64).into()
}

const PHI: f64 = std::f64::consts::SQRT_2;
const PSI: f64 = 1.533_751_168_755_204_3;

/// The eight signed axes followed by `n - 8` super-Fibonacci unit quaternions.
pub fn ray_directions(n: usize) -> Vec<Vector4<f64>> {
    let mut dirs = Vec::with_capacity(n);
    for i in 0..4 {
        for s in [1.0, -1.0] {
            if dirs.len() < n {
                let mut v = Vector4::zeros();
                v[i] = s;
                dirs.push(v);
            }
        }
    }
    let m = n.saturating_sub(dirs.len());
    for i in 0..m {
        let s = i as f64 + 0.5;
        let r = (s / m as f64).sqrt();
        let big_r = (1.0 - s / m as f64).sqrt();
        let alpha = 2.0 * std::f64::consts::PI * s / PHI;
        let beta = 2.0 * std::f64::consts::PI * s / PSI;
        dirs.push(Vector4::new(r * alpha.sin(), r * alpha.cos(), big_r * beta.sin(), big_r * beta.cos()));
    }
    dirs
}
