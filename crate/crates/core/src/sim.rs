//! Quasi-static tracking surrogate: the 8-state hover model under an
//! infinite-horizon quadratic regulator and saturated rotor allocation.

use nalgebra::{Matrix4, SMatrix, SVector, Vector4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::bvls::Bvls;
use crate::controllability::rank_condition;
use crate::error::SimError;
use crate::model::{linear_model, wrench_map, Assembly, LinearModel, RotorState, WrenchMap};
use crate::planner::{find_optimal_reconfiguration, CmCache, Configuration};

pub type State = SVector<f64, 8>;
pub type Gain = SMatrix<f64, 4, 8>;

/// State weight and input weight of the regulator.
pub const STATE_WEIGHT: f64 = 1.0;
pub const INPUT_WEIGHT: f64 = 0.1;

/// Norm above which a run counts as crashed.
pub const CRASH_NORM: f64 = 1e6;

const SAT_TOL: f64 = 1e-9;

/// Infinite-horizon LQR gain `K` for `u = -K x`, with `Q = I` and
/// `R = 0.1 I`, from the Riccati solution obtained by the matrix sign
/// function of the Hamiltonian.
pub fn design_regulator(model: &LinearModel) -> Result<Gain, SimError> {
    let (a, b) = (model.a_matrix, model.b_matrix);
    if b.iter().all(|v| *v == 0.0) {
        return Err(SimError::RegulatorFailure("input matrix is zero".into()));
    }
    if !rank_condition(model) {
        return Err(SimError::RegulatorFailure("(A, B) is not controllable".into()));
    }
    let q = SMatrix::<f64, 8, 8>::identity() * STATE_WEIGHT;
    let r_inv = Matrix4::<f64>::identity() / INPUT_WEIGHT;
    let g = b * r_inv * b.transpose();

    let mut h = SMatrix::<f64, 16, 16>::zeros();
    h.fixed_view_mut::<8, 8>(0, 0).copy_from(&a);
    h.fixed_view_mut::<8, 8>(0, 8).copy_from(&(-g));
    h.fixed_view_mut::<8, 8>(8, 0).copy_from(&(-q));
    h.fixed_view_mut::<8, 8>(8, 8).copy_from(&(-a.transpose()));

    let mut z = h;
    let mut converged = false;
    for _ in 0..100 {
        let det = z.determinant().abs();
        if !det.is_finite() || det == 0.0 {
            return Err(SimError::RegulatorFailure("Hamiltonian has eigenvalues on the imaginary axis".into()));
        }
        let c = det.powf(-1.0 / 16.0);
        let inv = (z * c).try_inverse().ok_or_else(|| SimError::RegulatorFailure("singular sign iterate".into()))?;
        let next = (z * c + inv) * 0.5;
        let delta = (next - z).norm();
        z = next;
        if delta <= 1e-12 * z.norm() {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(SimError::RegulatorFailure("sign iteration did not converge".into()));
    }

    // Stable subspace [I; P] is the kernel of sign(H) + I.
    let id = SMatrix::<f64, 8, 8>::identity();
    let mut lhs = SMatrix::<f64, 16, 8>::zeros();
    lhs.fixed_view_mut::<8, 8>(0, 0).copy_from(&z.fixed_view::<8, 8>(0, 8));
    lhs.fixed_view_mut::<8, 8>(8, 0).copy_from(&(z.fixed_view::<8, 8>(8, 8) + id));
    let mut rhs = SMatrix::<f64, 16, 8>::zeros();
    rhs.fixed_view_mut::<8, 8>(0, 0).copy_from(&(-(z.fixed_view::<8, 8>(0, 0) + id)));
    rhs.fixed_view_mut::<8, 8>(8, 0).copy_from(&(-z.fixed_view::<8, 8>(8, 0)));
    let p = lhs
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .map_err(|e| SimError::RegulatorFailure(e.to_string()))?;
    let p = (p + p.transpose()) * 0.5;
    let k = r_inv * b.transpose() * p;

    let abscissa = spectral_abscissa(&(a - b * k));
    if !(abscissa < 0.0) {
        return Err(SimError::RegulatorFailure(format!("closed loop not stable (abscissa {abscissa})")));
    }
    Ok(k)
}

/// Largest real part of the eigenvalues.
pub fn spectral_abscissa(m: &SMatrix<f64, 8, 8>) -> f64 {
    m.complex_eigenvalues().iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub thrusts: Vec<f64>,
    pub achieved: [f64; 4],
    pub residual: f64,
}

/// Rotor allocator with warm starts. Stage one finds the attainable wrench
/// closest to the command; stage two picks the minimum-norm thrusts that
/// produce it.
pub struct Allocator {
    map: WrenchMap,
    active: Vec<usize>,
    columns: Vec<Vector4<f64>>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    warm: Option<Vec<f64>>,
    dual: Option<Vector4<f64>>,
}

impl Allocator {
    pub fn new(map: &WrenchMap) -> Self {
        let active: Vec<usize> = (0..map.n_rotors()).filter(|&i| map.columns[i].norm() > 0.0).collect();
        Self {
            columns: active.iter().map(|&i| map.columns[i]).collect(),
            lo: vec![0.0; active.len()],
            hi: active.iter().map(|&i| map.thrust_bounds[i]).collect(),
            active,
            map: map.clone(),
            warm: None,
            dual: None,
        }
    }

    pub fn map(&self) -> &WrenchMap {
        &self.map
    }

    pub fn allocate(&mut self, u_cmd: &Vector4<f64>) -> Allocation {
        let mut thrusts = vec![0.0; self.map.n_rotors()];
        if self.active.is_empty() {
            return Allocation { thrusts, achieved: [0.0; 4], residual: u_cmd.norm() };
        }
        let stage1 = match Bvls::new(&self.columns, &self.lo, &self.hi).solve_from(u_cmd, self.warm.as_deref()) {
            Ok(s) => s,
            Err(_) => {
                self.warm = None;
                Bvls::new(&self.columns, &self.lo, &self.hi)
                    .max_iter(10_000)
                    .solve(u_cmd)
                    .expect("cold start converges")
            }
        };
        let f = self.min_norm(&stage1.fitted, &stage1.x).unwrap_or_else(|| stage1.x.clone());
        for (k, &i) in self.active.iter().enumerate() {
            thrusts[i] = f[k];
        }
        let achieved = self.map.apply(&thrusts);
        self.warm = Some(stage1.x);
        Allocation { residual: (u_cmd - achieved).norm(), achieved: achieved.into(), thrusts }
    }

    /// Semismooth Newton on the dual of `min |f|^2 / 2` s.t. `B f = y`,
    /// `lo <= f <= hi`. `None` when it fails, e.g. `y` on the boundary.
    fn min_norm(&mut self, y: &Vector4<f64>, fallback: &[f64]) -> Option<Vec<f64>> {
        let clip = |s: f64, i: usize| s.clamp(self.lo[i], self.hi[i]);
        let phi = |l: &Vector4<f64>| -> f64 {
            let mut v = -l.dot(y);
            for (i, c) in self.columns.iter().enumerate() {
                let s = c.dot(l);
                let k = self.hi[i];
                v += if s <= 0.0 {
                    0.0
                } else if s < k {
                    0.5 * s * s
                } else {
                    k * s - 0.5 * k * k
                };
            }
            v
        };
        let grad = |l: &Vector4<f64>| -> Vector4<f64> {
            self.columns.iter().enumerate().fold(-y, |acc, (i, c)| acc + c * clip(c.dot(l), i))
        };
        let gram = self.columns.iter().fold(Matrix4::zeros(), |acc, c| acc + c * c.transpose());
        let mut lambda = self.dual.unwrap_or_else(|| {
            let bf = self.columns.iter().zip(fallback).fold(Vector4::zeros(), |acc, (c, v)| acc + c * *v);
            gram.pseudo_inverse(1e-12).map(|g| g * bf).unwrap_or_else(|_| Vector4::zeros())
        });
        let tol = 1e-12 * (1.0 + y.norm());
        let reg = 1e-12 * (1.0 + gram.norm());
        for _ in 0..60 {
            let gvec = grad(&lambda);
            if gvec.norm() <= tol {
                self.dual = Some(lambda);
                return Some(self.columns.iter().enumerate().map(|(i, c)| clip(c.dot(&lambda), i)).collect());
            }
            let mut hess = Matrix4::identity() * reg;
            for (i, c) in self.columns.iter().enumerate() {
                let s = c.dot(&lambda);
                if s > self.lo[i] && s < self.hi[i] {
                    hess += c * c.transpose();
                }
            }
            let step = hess.lu().solve(&(-gvec))?;
            let f0 = phi(&lambda);
            let slope = gvec.dot(&step);
            let mut t = 1.0;
            while phi(&(lambda + step * t)) > f0 + 1e-4 * t * slope {
                t *= 0.5;
                if t < 1e-12 {
                    self.dual = None;
                    return None;
                }
            }
            lambda += step * t;
        }
        self.dual = None;
        None
    }
}

/// One-shot allocation of `u_cmd` over `wmap`.
pub fn allocate(u_cmd: &Vector4<f64>, wmap: &WrenchMap) -> Allocation {
    Allocator::new(wmap).allocate(u_cmd)
}

/// Holds `(p_z, psi)` from time `t` on. `p_z` points down, so a climb is a
/// negative setpoint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Setpoint {
    pub t: f64,
    pub p_z: f64,
    pub psi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSettings {
    pub duration: f64,
    pub dt: f64,
    pub schedule: Vec<Setpoint>,
    /// Standard deviation of white noise added to the measured state; 0
    /// disables it.
    pub noise_std: f64,
    pub seed: u64,
    /// Keep every n-th state in the trace.
    pub trace_every: usize,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            duration: 20.0,
            dt: 1e-3,
            schedule: vec![
                Setpoint { t: 0.0, p_z: 0.0, psi: 0.0 },
                Setpoint { t: 1.0, p_z: -1.0, psi: 1.0 },
                Setpoint { t: 10.0, p_z: 0.0, psi: 0.0 },
            ],
            noise_std: 0.0,
            seed: 0,
            trace_every: 10,
        }
    }
}

impl SimSettings {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dt > 0.0 && self.dt <= 0.05) {
            return Err(SimError::InvalidSettings(format!("dt {} outside (0, 0.05]", self.dt)));
        }
        if !(self.duration > 0.0 && self.duration <= 120.0) {
            return Err(SimError::InvalidSettings(format!("duration {} outside (0, 120]", self.duration)));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(SimError::InvalidSettings("noise_std must be finite and >= 0".into()));
        }
        if self.trace_every == 0 {
            return Err(SimError::InvalidSettings("trace_every must be >= 1".into()));
        }
        if self.schedule.windows(2).any(|w| w[1].t < w[0].t) {
            return Err(SimError::InvalidSettings("schedule times must be non-decreasing".into()));
        }
        Ok(())
    }

    /// Reference state at time `t`: the last setpoint at or before `t`.
    pub fn reference(&self, t: f64) -> State {
        let mut x = State::zeros();
        if let Some(sp) = self.schedule.iter().take_while(|s| s.t <= t).last() {
            x[0] = sp.p_z;
            x[3] = sp.psi;
        }
        x
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t: f64,
    pub x: [f64; 8],
}

/// Per-channel errors are over `p_z, phi, theta, psi`; the aggregate is
/// the RMS of the error vector norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackingResult {
    pub rmse: [f64; 4],
    pub rmse_total: f64,
    pub crashed: bool,
    /// Time of divergence, if any; errors are averaged up to it.
    pub crash_time: Option<f64>,
    pub saturation_fraction: f64,
    pub steps: usize,
    pub trace: Vec<TracePoint>,
}

/// Closed-loop run with allocation over the plant's own wrench map.
pub fn run_tracking(assembly: &Assembly, settings: &SimSettings) -> Result<TrackingResult, SimError> {
    run_tracking_with(assembly, &wrench_map(assembly), settings)
}

/// Closed-loop run where thrusts are allocated over `allocation_map` but
/// act through the plant's actual wrench map. Both maps must list rotors
/// in the same order.
pub fn run_tracking_with(
    plant: &Assembly,
    allocation_map: &WrenchMap,
    settings: &SimSettings,
) -> Result<TrackingResult, SimError> {
    settings.validate()?;
    let model = linear_model(plant);
    let gain = design_regulator(&model)?;
    let actual = wrench_map(plant);
    if actual.rotors != allocation_map.rotors {
        return Err(SimError::InvalidSettings("allocation map does not match the plant's rotors".into()));
    }
    let functional: Vec<usize> = (0..actual.n_rotors()).filter(|&i| actual.columns[i].norm() > 0.0).collect();
    let mut allocator = Allocator::new(allocation_map);
    let noise = Normal::new(0.0, settings.noise_std.max(0.0)).map_err(|e| SimError::InvalidSettings(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);

    let g = model.gravity_wrench;
    let n_steps = (settings.duration / settings.dt).round() as usize;
    let mut x = State::zeros();
    let mut sq = [0.0; 4];
    let mut saturated = 0usize;
    let mut trace = vec![TracePoint { t: 0.0, x: x.into() }];
    let mut crash_time = None;
    let mut done = 0usize;
    for k in 0..n_steps {
        let t = k as f64 * settings.dt;
        let reference = settings.reference(t);
        let mut measured = x;
        if settings.noise_std > 0.0 {
            for v in measured.iter_mut() {
                *v += noise.sample(&mut rng);
            }
        }
        let u_cmd = gain * (reference - measured) + g;
        let alloc = allocator.allocate(&u_cmd);
        let f = &alloc.thrusts;
        if functional.iter().any(|&i| f[i] <= SAT_TOL || f[i] >= actual.thrust_bounds[i] - SAT_TOL) {
            saturated += 1;
        }
        let u_f = actual.apply(f);
        x += (model.a_matrix * x + model.b_matrix * (u_f - g)) * settings.dt;
        done = k + 1;
        let e = settings.reference(t + settings.dt) - x;
        for c in 0..4 {
            sq[c] += e[c] * e[c];
        }
        if done % settings.trace_every == 0 {
            trace.push(TracePoint { t: done as f64 * settings.dt, x: x.into() });
        }
        if !(x.norm() <= CRASH_NORM) {
            crash_time = Some(done as f64 * settings.dt);
            if done % settings.trace_every != 0 {
                trace.push(TracePoint { t: done as f64 * settings.dt, x: x.into() });
            }
            break;
        }
    }
    let denom = done.max(1) as f64;
    let rmse = sq.map(|s| (s / denom).sqrt());
    let rmse_total = (sq.iter().sum::<f64>() / denom).sqrt();
    Ok(TrackingResult {
        rmse,
        rmse_total,
        crashed: crash_time.is_some(),
        crash_time,
        saturation_fraction: saturated as f64 / denom,
        steps: done,
        trace,
    })
}

/// The four comparison conditions for a faulty assembly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Same layout with every rotor restored.
    Normal,
    /// Faulty layout, allocation aware of the fault.
    FaultyFtc,
    /// Margin-optimal placement of the faulty unit, allocation aware of the fault.
    ReconfiguredFtc,
    /// Faulty layout, allocation frozen to the pre-fault wrench map.
    FaultyNoFtc,
}

impl Scenario {
    pub const ALL: [Scenario; 4] =
        [Scenario::Normal, Scenario::ReconfiguredFtc, Scenario::FaultyFtc, Scenario::FaultyNoFtc];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Normal => "normal",
            Scenario::FaultyFtc => "faulty_ftc",
            Scenario::ReconfiguredFtc => "reconfigured_ftc",
            Scenario::FaultyNoFtc => "faulty_no_ftc",
        }
    }
}

fn restored(a: &Assembly) -> Result<Assembly, SimError> {
    let units = a.units().iter().map(|u| crate::model::Unit { rotors: [RotorState::HEALTHY; 4], ..u.clone() }).collect();
    Ok(a.with_units(units).map_err(crate::error::PlanError::from)?)
}

/// Plant and allocation map for `scenario`, starting from a faulty layout.
pub fn scenario_setup(faulty: &Assembly, scenario: Scenario) -> Result<(Assembly, WrenchMap), SimError> {
    Ok(match scenario {
        Scenario::Normal => {
            let healthy = restored(faulty)?;
            let map = wrench_map(&healthy);
            (healthy, map)
        }
        Scenario::FaultyFtc => (faulty.clone(), wrench_map(faulty)),
        Scenario::ReconfiguredFtc => {
            let mut cache = CmCache::new();
            let target = find_optimal_reconfiguration(&Configuration::new(faulty.clone()), &mut cache)?;
            let map = wrench_map(&target.assembly);
            (target.assembly, map)
        }
        Scenario::FaultyNoFtc => (faulty.clone(), wrench_map(&restored(faulty)?)),
    })
}

pub fn run_scenario(faulty: &Assembly, scenario: Scenario, settings: &SimSettings) -> Result<TrackingResult, SimError> {
    let (plant, map) = scenario_setup(faulty, scenario)?;
    run_tracking_with(&plant, &map, settings)
}
