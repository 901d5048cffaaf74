//! Bounded-variable least squares for short, wide systems.
//!
//! Solves `min ||A x - b||` subject to `lo <= x <= hi` for an `A` with four
//! rows and any number of columns. Active-set method in the style of
//! Stark and Parker: variables start at a bound (or at a warm start), the
//! most violating bound variable is freed, and the free subproblem is solved
//! by unconstrained least squares with step-halving back into the box.
//!
//! Because the residual is orthogonal to the span of the free columns at
//! every inner optimum, a column can only enter with a nonzero gradient if
//! it is independent of the free ones, so at most four variables are free.

use nalgebra::{DMatrix, DVector, Vector4};

use crate::error::GeometryError;

/// Default target for the Frank-Wolfe duality gap.
pub const DEFAULT_GAP_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct BvlsSolution {
    pub x: Vec<f64>,
    /// `A x`.
    pub fitted: Vector4<f64>,
    pub residual_norm: f64,
    /// `sum_i max over the box of w_i (y_i - x_i)` with `w = A^T (b - A x)`.
    pub gap: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Status {
    Lower,
    Upper,
    Free,
}

pub struct Bvls<'a> {
    columns: &'a [Vector4<f64>],
    lo: &'a [f64],
    hi: &'a [f64],
    gap_tol: f64,
    max_iter: usize,
}

impl<'a> Bvls<'a> {
    pub fn new(columns: &'a [Vector4<f64>], lo: &'a [f64], hi: &'a [f64]) -> Self {
        assert_eq!(columns.len(), lo.len());
        assert_eq!(columns.len(), hi.len());
        Self { columns, lo, hi, gap_tol: DEFAULT_GAP_TOL, max_iter: 100 + 20 * columns.len() }
    }

    pub fn gap_tol(mut self, tol: f64) -> Self {
        self.gap_tol = tol;
        self
    }

    pub fn max_iter(mut self, n: usize) -> Self {
        self.max_iter = n;
        self
    }

    fn fitted(&self, x: &[f64]) -> Vector4<f64> {
        self.columns.iter().zip(x).fold(Vector4::zeros(), |acc, (c, v)| acc + c * *v)
    }

    fn gap(&self, x: &[f64], w: &[f64]) -> f64 {
        let mut gap = 0.0;
        for i in 0..x.len() {
            if w[i] > 0.0 {
                gap += w[i] * (self.hi[i] - x[i]);
            } else if w[i] < 0.0 {
                gap += w[i] * (self.lo[i] - x[i]);
            }
        }
        gap
    }

    /// Solves from the lower bound.
    pub fn solve(&self, b: &Vector4<f64>) -> Result<BvlsSolution, GeometryError> {
        self.solve_from(b, None)
    }

    /// Solves from an optional warm start, which is clipped into the box.
    /// Warm-start variables strictly inside the box start free.
    pub fn solve_from(&self, b: &Vector4<f64>, start: Option<&[f64]>) -> Result<BvlsSolution, GeometryError> {
        let n = self.columns.len();
        let mut x = vec![0.0; n];
        let mut status = vec![Status::Lower; n];
        for i in 0..n {
            let v = start.map_or(self.lo[i], |s| s[i].clamp(self.lo[i], self.hi[i]));
            x[i] = v;
            status[i] = if self.hi[i] <= self.lo[i] || v <= self.lo[i] {
                Status::Lower
            } else if v >= self.hi[i] {
                Status::Upper
            } else {
                Status::Free
            };
        }
        // A warm start may free more columns than the rank allows; the first
        // inner solve collapses them to a basic solution.
        if status.iter().filter(|s| **s == Status::Free).count() > 4 {
            for (i, s) in status.iter_mut().enumerate() {
                if *s == Status::Free {
                    *s = if x[i] - self.lo[i] <= self.hi[i] - x[i] { Status::Lower } else { Status::Upper };
                    x[i] = if *s == Status::Lower { self.lo[i] } else { self.hi[i] };
                }
            }
        }

        let scale = self.columns.iter().map(|c| c.norm_squared()).fold(0.0, f64::max).sqrt().max(1e-300);
        let mut iterations = 0;
        let mut banned: Option<usize> = None;
        if status.contains(&Status::Free) {
            self.inner(b, &mut x, &mut status, None, &mut iterations)?;
        }
        loop {
            let fitted = self.fitted(&x);
            let r = b - fitted;
            let w: Vec<f64> = self.columns.iter().map(|c| c.dot(&r)).collect();
            let gap = self.gap(&x, &w);
            // Gradient entries below this are round-off.
            let w_floor = 1e-14 * scale * (b.norm() + scale);
            let mut enter = None;
            let mut best = w_floor;
            for i in 0..n {
                if Some(i) == banned || status[i] == Status::Free || self.hi[i] <= self.lo[i] {
                    continue;
                }
                let push = match status[i] {
                    Status::Lower => w[i],
                    Status::Upper => -w[i],
                    Status::Free => 0.0,
                };
                if push > best {
                    best = push;
                    enter = Some(i);
                }
            }
            let Some(j) = enter.filter(|_| gap > self.gap_tol) else {
                return Ok(BvlsSolution {
                    residual_norm: r.norm(),
                    x,
                    fitted,
                    gap: gap.max(0.0),
                    iterations,
                });
            };
            iterations += 1;
            if iterations > self.max_iter {
                return Err(GeometryError::NonConvergence { iterations });
            }
            let from = status[j];
            status[j] = Status::Free;
            let saved = (x.clone(), status.clone());
            if self.inner(b, &mut x, &mut status, Some((j, from)), &mut iterations)? {
                banned = None;
            } else {
                // Entering variable moved the wrong way: numerical noise in
                // the gradient. Undo and try the next candidate.
                (x, status) = saved;
                status[j] = from;
                banned = Some(j);
            }
        }
    }

    /// Solves the free subproblem, stepping back into the box as needed.
    /// Returns `false` if the entering variable would leave through the
    /// bound it entered from.
    fn inner(
        &self,
        b: &Vector4<f64>,
        x: &mut [f64],
        status: &mut [Status],
        entering: Option<(usize, Status)>,
        iterations: &mut usize,
    ) -> Result<bool, GeometryError> {
        let mut first = true;
        loop {
            let free: Vec<usize> = (0..x.len()).filter(|i| status[*i] == Status::Free).collect();
            if free.is_empty() {
                return Ok(true);
            }
            let mut rhs = *b;
            for i in 0..x.len() {
                if status[i] != Status::Free {
                    rhs -= self.columns[i] * x[i];
                }
            }
            let a = DMatrix::from_fn(4, free.len(), |r, c| self.columns[free[c]][r]);
            let z = least_squares(&a, &rhs);

            if first {
                if let Some((j, from)) = entering {
                    let k = free.iter().position(|i| *i == j).expect("entering variable is free");
                    let wrong = match from {
                        Status::Lower => z[k] <= self.lo[j],
                        Status::Upper => z[k] >= self.hi[j],
                        Status::Free => false,
                    };
                    if wrong {
                        return Ok(false);
                    }
                }
                first = false;
            }

            let mut alpha = 1.0_f64;
            let mut blocking = None;
            for (k, &i) in free.iter().enumerate() {
                let (xi, zi) = (x[i], z[k]);
                let step = if zi > self.hi[i] {
                    (self.hi[i] - xi) / (zi - xi)
                } else if zi < self.lo[i] {
                    (self.lo[i] - xi) / (zi - xi)
                } else {
                    continue;
                };
                if step < alpha {
                    alpha = step.max(0.0);
                    blocking = Some(i);
                }
            }
            if blocking.is_none() {
                for (k, &i) in free.iter().enumerate() {
                    x[i] = z[k];
                }
                return Ok(true);
            }
            *iterations += 1;
            if *iterations > self.max_iter {
                return Err(GeometryError::NonConvergence { iterations: *iterations });
            }
            for (k, &i) in free.iter().enumerate() {
                x[i] += alpha * (z[k] - x[i]);
                let span = (self.hi[i] - self.lo[i]).max(1.0);
                if Some(i) == blocking || x[i] <= self.lo[i] + 1e-14 * span || x[i] >= self.hi[i] - 1e-14 * span {
                    if x[i] - self.lo[i] <= self.hi[i] - x[i] {
                        x[i] = self.lo[i];
                        status[i] = Status::Lower;
                    } else {
                        x[i] = self.hi[i];
                        status[i] = Status::Upper;
                    }
                }
            }
        }
    }
}

/// Minimum-norm least-squares solution of `a z = rhs` via SVD.
fn least_squares(a: &DMatrix<f64>, rhs: &Vector4<f64>) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = (smax * 1e-12).max(1e-300);
    let b = DVector::from_column_slice(rhs.as_slice());
    svd.solve(&b, eps).expect("U and V were computed")
}
