//! Euler–Maruyama integration of the conditioned cumulant equations.

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{drift, increments};
use crate::params::SystemParams;
use crate::state::{CumulantState, InitialKind, Moment};

/// Largest accepted `dt × fastest rate`.
pub const MAX_STEP_RESOLUTION: f64 = 0.05;

/// Tolerance on the imaginary part of Hermitian moments, relative to 1 + |m|.
pub const REALNESS_TOL: f64 = 1e-9;

/// Gaussian increments of variance `dt` from a seeded counter-based stream.
///
/// Stream `i` of seed `s` never overlaps stream `j != i`, so ensemble members
/// can be generated in any order.
pub struct WienerStream {
    rng: ChaCha8Rng,
    sqrt_dt: f64,
}

impl WienerStream {
    pub fn new(seed: u64, stream: u64, dt: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self {
            rng,
            sqrt_dt: dt.sqrt(),
        }
    }

    pub fn next_increment(&mut self) -> f64 {
        let z: f64 = StandardNormal.sample(&mut self.rng);
        self.sqrt_dt * z
    }
}

impl Iterator for WienerStream {
    type Item = f64;
    fn next(&mut self) -> Option<f64> {
        Some(self.next_increment())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub t_end: f64,
    pub dt: f64,
    /// Store every `stride`-th state.
    pub stride: usize,
    pub initial: InitialKind,
}

impl RunConfig {
    pub fn new(t_end: f64, dt: f64) -> Self {
        Self {
            t_end,
            dt,
            stride: 1,
            initial: InitialKind::Ground,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn with_initial(mut self, initial: InitialKind) -> Self {
        self.initial = initial;
        self
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    pub fn validate(&self, params: &SystemParams) -> Result<()> {
        params.validate()?;
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::param("t_end", "must be positive"));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::param("dt", "must be positive"));
        }
        if self.stride == 0 {
            return Err(Error::param("stride", "must be at least 1"));
        }
        let resolution = self.dt * params.fastest_rate();
        if resolution > MAX_STEP_RESOLUTION {
            return Err(Error::param(
                "dt",
                format!(
                    "dt x fastest rate = {resolution:.3} exceeds {MAX_STEP_RESOLUTION}; reduce dt"
                ),
            ));
        }
        Ok(())
    }
}

/// Positivity monitoring of quantities the closure does not keep physical.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PositivityReport {
    pub min_photon_number: f64,
    pub min_excited: f64,
    pub max_excited: f64,
    /// Steps at which ⟨â†â⟩ < −1e-9 or ⟨σ²²⟩ left [0, 1] by more than 1e-9.
    pub violations: usize,
    /// Set once a violation exceeds 1e-6·N in magnitude.
    pub invalid: bool,
}

impl PositivityReport {
    fn new() -> Self {
        Self {
            min_photon_number: f64::INFINITY,
            min_excited: f64::INFINITY,
            max_excited: f64::NEG_INFINITY,
            ..Self::default()
        }
    }

    fn observe(&mut self, st: &CumulantState, n_atoms: f64) {
        let n = st.ada.re;
        let p = st.s22.re;
        self.min_photon_number = self.min_photon_number.min(n);
        self.min_excited = self.min_excited.min(p);
        self.max_excited = self.max_excited.max(p);
        let photon_excess = (-n).max(0.0);
        let population_excess = (-p).max(p - 1.0).max(0.0);
        if photon_excess > 1e-9 || population_excess > 1e-9 {
            self.violations += 1;
        }
        if photon_excess.max(n_atoms * population_excess) > 1e-6 * n_atoms {
            self.invalid = true;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub stream: u64,
    pub params: SystemParams,
    pub dt: f64,
    pub stride: usize,
    /// Times of the stored states (every `stride`-th step).
    pub times: Vec<f64>,
    pub states: Vec<CumulantState>,
    /// Wiener increment of every step; `dws[i]` drives step `i → i + 1`.
    pub dws: Vec<f64>,
    /// ⟨â⟩ at every step, undecimated (`len == dws.len() + 1`).
    pub field: Vec<C64>,
    pub positivity: PositivityReport,
}

impl TrajectoryRecord {
    pub fn n_steps(&self) -> usize {
        self.dws.len()
    }

    pub fn final_state(&self) -> &CumulantState {
        self.states
            .last()
            .expect("records hold at least the initial state")
    }

    /// Stored series of one moment.
    pub fn series(&self, m: Moment) -> Vec<C64> {
        self.states.iter().map(|s| s.get(m)).collect()
    }
}

fn check_step(next: &CumulantState, params: &SystemParams, t: f64) -> Result<CumulantState> {
    let limit = 1e6 * params.n();
    let mut v = next.to_array();
    for (m, z) in Moment::ALL.into_iter().zip(v.iter_mut()) {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite {
                moment: m.name(),
                time: t,
            });
        }
        let value = z.norm();
        if value > limit {
            return Err(Error::Divergence {
                moment: m.name(),
                value,
                limit,
                time: t,
            });
        }
        if m.is_real() {
            if z.im.abs() > REALNESS_TOL * (1.0 + value) {
                return Err(Error::NonRealMoment {
                    moment: m.name(),
                    imag: z.im,
                    time: t,
                });
            }
            z.im = 0.0;
        }
    }
    Ok(CumulantState::from_array(v))
}

/// One explicit Euler–Maruyama step: `x + drift·dt + backaction·dW`.
pub fn step(
    state: &CumulantState,
    params: &SystemParams,
    t: f64,
    dt: f64,
    dw: f64,
) -> Result<CumulantState> {
    if !(dt > 0.0) {
        return Err(Error::param("dt", "must be positive"));
    }
    if !dw.is_finite() {
        return Err(Error::param("dW", "must be finite"));
    }
    let inc = increments(state, params, t)?;
    let next = state
        .axpy(C64::new(dt, 0.0), &inc.drift)
        .axpy(C64::new(dw, 0.0), &inc.backaction);
    check_step(&next, params, t + dt)
}

fn integrate(
    params: &SystemParams,
    config: &RunConfig,
    seed: u64,
    stream: u64,
) -> Result<TrajectoryRecord> {
    config.validate(params)?;
    let n_steps = config.n_steps();
    let dt = config.dt;
    let mut wiener = WienerStream::new(seed, stream, dt);
    let mut state = CumulantState::initial(config.initial)?;

    let stored = n_steps / config.stride + 1;
    let mut times = Vec::with_capacity(stored);
    let mut states = Vec::with_capacity(stored);
    let mut dws = Vec::with_capacity(n_steps);
    let mut field = Vec::with_capacity(n_steps + 1);
    let mut positivity = PositivityReport::new();

    times.push(0.0);
    states.push(state);
    field.push(state.a);
    positivity.observe(&state, params.n());

    for i in 0..n_steps {
        let t = i as f64 * dt;
        let dw = wiener.next_increment();
        state = step(&state, params, t, dt, dw)?;
        dws.push(dw);
        field.push(state.a);
        positivity.observe(&state, params.n());
        if (i + 1) % config.stride == 0 {
            times.push((i + 1) as f64 * dt);
            states.push(state);
        }
    }

    Ok(TrajectoryRecord {
        seed,
        stream,
        params: params.clone(),
        dt,
        stride: config.stride,
        times,
        states,
        dws,
        field,
        positivity,
    })
}

/// Single conditioned trajectory on stream 0 of `seed`.
pub fn run_trajectory(
    params: &SystemParams,
    config: &RunConfig,
    seed: u64,
) -> Result<TrajectoryRecord> {
    run_stream(params, config, seed, 0)
}

/// Trajectory driven by stream `stream` of `seed`; the same record
/// `run_ensemble` produces for member `stream`.
pub fn run_stream(
    params: &SystemParams,
    config: &RunConfig,
    seed: u64,
    stream: u64,
) -> Result<TrajectoryRecord> {
    integrate(params, config, seed, stream).map_err(|e| wrap(stream as usize, e))
}

fn wrap(index: usize, e: Error) -> Error {
    match e {
        e @ Error::InvalidParameter { .. } => e,
        e => Error::Trajectory {
            index,
            source: Box::new(e),
        },
    }
}

/// Per-time ensemble statistics. Real and imaginary parts are treated as
/// independent real observables: `std_err.x.re` is the standard error of
/// `Re x`, `std_err.x.im` that of `Im x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub mean: Vec<CumulantState>,
    pub std_err: Vec<CumulantState>,
    pub count: usize,
}

impl EnsembleStats {
    pub fn from_records(records: &[TrajectoryRecord]) -> Option<Self> {
        let first = records.first()?;
        let len = records.iter().map(|r| r.states.len()).min()?;
        let m = records.len() as f64;
        let mut mean = vec![CumulantState::zero(); len];
        let mut std_err = vec![CumulantState::zero(); len];
        for k in 0..len {
            let mut sum = [C64::new(0.0, 0.0); 12];
            for r in records {
                for (acc, z) in sum.iter_mut().zip(r.states[k].to_array()) {
                    *acc += z;
                }
            }
            let mu = sum.map(|z| z / m);
            let mut var = [C64::new(0.0, 0.0); 12];
            for r in records {
                for ((acc, z), mu) in var.iter_mut().zip(r.states[k].to_array()).zip(mu) {
                    let d = z - mu;
                    *acc += C64::new(d.re * d.re, d.im * d.im);
                }
            }
            let se = if records.len() > 1 {
                var.map(|v| C64::new((v.re / (m - 1.0) / m).sqrt(), (v.im / (m - 1.0) / m).sqrt()))
            } else {
                [C64::new(0.0, 0.0); 12]
            };
            mean[k] = CumulantState::from_array(mu);
            std_err[k] = CumulantState::from_array(se);
        }
        Some(Self {
            times: first.times[..len].to_vec(),
            mean,
            std_err,
            count: records.len(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub records: Vec<TrajectoryRecord>,
    pub failures: Vec<(usize, Error)>,
    /// `None` when every trajectory failed.
    pub stats: Option<EnsembleStats>,
}

impl EnsembleResult {
    pub fn successes(&self) -> usize {
        self.records.len()
    }
}

/// `n_traj` trajectories; trajectory `i` uses stream `i` of `base_seed`.
/// Statistics cover successful trajectories only.
pub fn run_ensemble(
    params: &SystemParams,
    config: &RunConfig,
    n_traj: usize,
    base_seed: u64,
) -> Result<EnsembleResult> {
    if n_traj == 0 {
        return Err(Error::param("n_traj", "must be at least 1"));
    }
    config.validate(params)?;
    let outcomes: Vec<_> = (0..n_traj)
        .into_par_iter()
        .map(|i| integrate(params, config, base_seed, i as u64).map_err(|e| wrap(i, e)))
        .collect();
    let mut records = Vec::with_capacity(n_traj);
    let mut failures = Vec::new();
    for (i, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(r) => records.push(r),
            Err(e) => failures.push((i, e)),
        }
    }
    let stats = EnsembleStats::from_records(&records);
    Ok(EnsembleResult {
        records,
        failures,
        stats,
    })
}

/// Unconditioned (ξ = 0) solution by classical fourth-order Runge–Kutta,
/// used as a high-accuracy reference for the Euler–Maruyama path.
pub fn rk4_path(
    params: &SystemParams,
    initial: CumulantState,
    t_end: f64,
    dt: f64,
    stride: usize,
) -> Result<Vec<(f64, CumulantState)>> {
    let n_steps = (t_end / dt).round() as usize;
    let stride = stride.max(1);
    let mut out = Vec::with_capacity(n_steps / stride + 1);
    let mut x = initial;
    out.push((0.0, x));
    let h = C64::new(dt, 0.0);
    for i in 0..n_steps {
        let t = i as f64 * dt;
        let k1 = drift(&x, params, t)?;
        let k2 = drift(&x.axpy(h * 0.5, &k1), params, t + 0.5 * dt)?;
        let k3 = drift(&x.axpy(h * 0.5, &k2), params, t + 0.5 * dt)?;
        let k4 = drift(&x.axpy(h, &k3), params, t + dt)?;
        x = x
            .axpy(h / 6.0, &k1)
            .axpy(h / 3.0, &k2)
            .axpy(h / 3.0, &k3)
            .axpy(h / 6.0, &k4);
        if (i + 1) % stride == 0 {
            out.push(((i + 1) as f64 * dt, x));
        }
    }
    Ok(out)
}
