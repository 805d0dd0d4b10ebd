use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::density::{DensityState, MomentOperators, ThirdCumulants};
use crate::oracle::space::{Monomial, Space};
use crate::params::SystemParams;
use crate::state::CumulantState;

pub const MAX_ATOMS: usize = 6;
pub const MAX_PHOTONS: usize = 16;
/// Largest admissible population of the top Fock level.
pub const CUTOFF_TOL: f64 = 1e-6;

/// Default Fock cutoff max(8, 4N).
pub fn default_cutoff(n_atoms: usize) -> usize {
    (4 * n_atoms).max(8)
}

/// Full master-equation generator in the frame rotating at ω_c:
///
/// ```text
/// Ĥ = Δ Σ σ_k²² + g Σ (â†σ_k¹² + σ_k²¹â) + ε(t) â + ε*(t) â†
/// L(ρ) = −i(Ĥ_eff ρ − ρ Ĥ_eff†) + κ âρâ† + Σ_k [γ σ_k¹²ρσ_k²¹ + η σ_k²¹ρσ_k¹² + (χ/2) Z_k ρ Z_k]
/// ```
///
/// with Ĥ_eff = Ĥ − (i/2) Σ_c r_c L̂_c†L̂_c and Z_k = σ_k²² − σ_k¹¹.
#[derive(Debug, Clone)]
pub struct Lindblad {
    space: Space,
    params: SystemParams,
    a: Monomial,
    lower: Vec<Monomial>,
    raise: Vec<Monomial>,
    /// Entries (row, col, g·value) of the Hermitian exchange coupling.
    exchange: Vec<(usize, usize, f64)>,
}

impl Lindblad {
    pub fn new(params: &SystemParams, n_max: usize) -> Result<Self> {
        params.validate()?;
        let n = params.n_atoms as usize;
        if n > MAX_ATOMS {
            return Err(Error::param(
                "n_atoms",
                format!("exact solver limited to {MAX_ATOMS} atoms"),
            ));
        }
        if !(1..=MAX_PHOTONS).contains(&n_max) {
            return Err(Error::param(
                "n_max",
                format!("must lie in 1..={MAX_PHOTONS}"),
            ));
        }
        let space = Space::new(n, n_max);
        let a = space.annihilate();
        let ad = a.adjoint();
        let lower: Vec<_> = (0..n).map(|k| space.lower(k)).collect();
        let raise: Vec<_> = (0..n).map(|k| space.raise(k)).collect();
        let mut exchange = Vec::new();
        for s in &lower {
            for (r, c, v) in ad.then(s).entries() {
                exchange.push((r, c, params.coupling * v));
                exchange.push((c, r, params.coupling * v));
            }
        }
        Ok(Self {
            space,
            params: params.clone(),
            a,
            lower,
            raise,
            exchange,
        })
    }

    pub fn space(&self) -> Space {
        self.space
    }

    fn drive(&self, t: f64) -> C64 {
        let p = &self.params;
        let omega = p.drive().at(t);
        if omega == 0.0 {
            return C64::new(0.0, 0.0);
        }
        (p.cavity_loss / 2.0).sqrt() * omega * C64::from_polar(1.0, p.drive_detuning * t)
    }

    /// Fastest frequency the integrator must resolve on this space.
    pub fn max_rate(&self) -> f64 {
        let p = &self.params;
        let s = self.space;
        let ladder = ((s.n_max + 1) as f64).sqrt();
        [
            p.coupling * ladder * (s.n_atoms as f64).sqrt(),
            (p.cavity_loss * s.n_max as f64),
            p.atom_decay * s.n_atoms as f64,
            p.pump_rate * s.n_atoms as f64,
            p.dephasing * s.n_atoms as f64,
            p.atom_detuning.abs() * s.n_atoms as f64,
            (p.cavity_loss / 2.0).sqrt() * p.drive_strength * ladder,
            p.drive_detuning.abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    /// L(ρ) at time t, written into `out`.
    pub fn apply(&self, rho: &DensityState, t: f64, out: &mut DensityState) {
        let p = &self.params;
        let s = self.space;
        let d = s.dim();
        let n_at = s.n_atoms as f64;
        let eta = p.pump().at(t);
        let eps = self.drive(t);
        let (x, y) = (&rho.rho, &mut out.rho);

        // diagonal part of Ĥ_eff
        let h_diag: Vec<C64> = (0..d)
            .map(|i| {
                let exc = s.bits(i).count_ones() as f64;
                let decay = p.cavity_loss * s.photons(i) as f64
                    + p.atom_decay * exc
                    + eta * (n_at - exc)
                    + 0.5 * p.dephasing * n_at;
                C64::new(p.atom_detuning * exc, -0.5 * decay)
            })
            .collect();
        let half_chi = 0.5 * p.dephasing;
        for i in 0..d {
            let bi = s.bits(i);
            for j in 0..d {
                let flips = (bi ^ s.bits(j)).count_ones() as f64;
                let rate =
                    -C64::i() * (h_diag[i] - h_diag[j].conj()) + half_chi * (n_at - 2.0 * flips);
                y[i * d + j] = rate * x[i * d + j];
            }
        }

        // Hermitian off-diagonal part: −i[H_off, ρ]
        let mut hop = |r: usize, c: usize, v: C64| {
            let mi = -C64::i() * v;
            for k in 0..d {
                y[r * d + k] += mi * x[c * d + k];
            }
            for k in 0..d {
                // ρ H: entry H[r][c] feeds column c from column r
                y[k * d + c] -= mi * x[k * d + r];
            }
        };
        for &(r, c, v) in &self.exchange {
            hop(r, c, C64::new(v, 0.0));
        }
        if eps.norm() > 0.0 {
            for (r, c, v) in self.a.entries() {
                hop(r, c, eps * v);
                hop(c, r, eps.conj() * v);
            }
        }

        // recycling terms L ρ L†
        let mut jump = |op: &Monomial, rate: f64| {
            if rate == 0.0 {
                return;
            }
            let entries: Vec<_> = op.entries().collect();
            for &(r1, c1, v1) in &entries {
                for &(r2, c2, v2) in &entries {
                    y[r1 * d + r2] += rate * v1 * v2 * x[c1 * d + c2];
                }
            }
        };
        jump(&self.a, p.cavity_loss);
        for k in 0..s.n_atoms {
            jump(&self.lower[k], p.atom_decay);
            jump(&self.raise[k], eta);
        }
    }

    /// One classical RK4 step of size h.
    pub fn rk4_step(&self, rho: &DensityState, t: f64, h: f64) -> DensityState {
        let mut k = DensityState::zeros(self.space);
        let mut acc = rho.clone();
        let mut probe = rho.clone();
        let stages = [
            (0.0, 1.0 / 6.0),
            (0.5, 1.0 / 3.0),
            (0.5, 1.0 / 3.0),
            (1.0, 1.0 / 6.0),
        ];
        for (idx, &(c, w)) in stages.iter().enumerate() {
            self.apply(&probe, t + c * h, &mut k);
            for (a, kv) in acc.rho.iter_mut().zip(&k.rho) {
                *a += h * w * kv;
            }
            if let Some(&(c_next, _)) = stages.get(idx + 1) {
                for ((pv, r), kv) in probe.rho.iter_mut().zip(&rho.rho).zip(&k.rho) {
                    *pv = r + h * c_next * kv;
                }
            }
        }
        acc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleSample {
    pub time: f64,
    pub moments: CumulantState,
    pub third: ThirdCumulants,
    /// Raw trace before renormalization.
    pub trace: f64,
    pub purity: f64,
    pub spin_squared: f64,
    pub excitations: f64,
    pub top_population: f64,
}

#[derive(Debug, Clone)]
pub struct OracleRun {
    /// Step actually used, min(dt, 0.1 / fastest rate).
    pub dt: f64,
    pub samples: Vec<OracleSample>,
    pub final_state: DensityState,
}

impl OracleRun {
    pub fn max_trace_drift(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| (s.trace - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Integrates ρ from `rho0` to `t_end`, sampling every `stride` steps.
///
/// Aborts with [`Error::CutoffExceeded`] as soon as a sample puts more than
/// [`CUTOFF_TOL`] into the top Fock level.
pub fn evolve(
    params: &SystemParams,
    rho0: &DensityState,
    t_end: f64,
    dt: f64,
    stride: usize,
) -> Result<OracleRun> {
    let lind = Lindblad::new(params, rho0.space.n_max)?;
    if lind.space() != rho0.space {
        return Err(Error::param("rho0", "space does not match the parameters"));
    }
    if !(t_end >= 0.0 && dt > 0.0) {
        return Err(Error::param("dt", "t_end must be >= 0 and dt > 0"));
    }
    let rate = lind.max_rate();
    let dt_rk = if rate > 0.0 { dt.min(0.1 / rate) } else { dt };
    let n_steps = (t_end / dt_rk).ceil() as usize;
    let h = if n_steps > 0 {
        t_end / n_steps as f64
    } else {
        dt_rk
    };
    let stride = stride.max(1);
    let ops = MomentOperators::new(lind.space());

    let sample = |rho: &DensityState, time: f64| -> Result<OracleSample> {
        let top_population = rho.top_population();
        if top_population >= CUTOFF_TOL {
            let n_max = rho.space.n_max;
            return Err(Error::CutoffExceeded {
                n_max,
                population: top_population,
                required: n_max + 4,
            });
        }
        Ok(OracleSample {
            time,
            moments: ops.moments(rho)?,
            third: ops.third_cumulants(rho)?,
            trace: rho.trace().re,
            purity: rho.purity(),
            spin_squared: ops.spin_squared(rho),
            excitations: ops.excitations(rho),
            top_population,
        })
    };

    let mut rho = rho0.clone();
    let mut samples = vec![sample(&rho, 0.0)?];
    for i in 0..n_steps {
        rho = lind.rk4_step(&rho, i as f64 * h, h);
        if (i + 1) % stride == 0 || i + 1 == n_steps {
            samples.push(sample(&rho, (i + 1) as f64 * h)?);
        }
    }
    Ok(OracleRun {
        dt: h,
        samples,
        final_state: rho,
    })
}

/// Exact time derivative of the stored moments at ρ: Tr(Ô L(ρ)) / Tr ρ.
pub fn moment_derivative(
    params: &SystemParams,
    rho: &DensityState,
    t: f64,
) -> Result<CumulantState> {
    let lind = Lindblad::new(params, rho.space.n_max)?;
    let mut d = DensityState::zeros(rho.space);
    lind.apply(rho, t, &mut d);
    let tr = rho.trace().re;
    let raw = MomentOperators::new(rho.space).expectations(&d);
    Ok(raw * (1.0 / tr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::drift;
    use crate::state::Moment;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn silent(n_atoms: u64) -> SystemParams {
        SystemParams {
            n_atoms,
            cavity_loss: 0.0,
            atom_decay: 0.0,
            pump_rate: 0.0,
            dephasing: 0.0,
            coupling: 2.0 * PI * 0.1e6,
            ..SystemParams::default()
        }
    }

    #[test]
    fn vacuum_rabi_oscillation() {
        let p = silent(1);
        let space = Space::new(1, 4);
        let mut psi = vec![c(0.0, 0.0); space.dim()];
        psi[space.index(0, 1)] = c(1.0, 0.0);
        let rho0 = DensityState::from_pure(space, &psi).unwrap();
        let run = evolve(&p, &rho0, 5e-6, 1e-8, 10).unwrap();
        let g = p.coupling;
        for s in &run.samples {
            let expect = (g * s.time).cos().powi(2);
            assert!((s.moments.s22.re - expect).abs() < 1e-8, "t={}", s.time);
        }
    }

    #[test]
    fn single_atom_pumping() {
        let p = SystemParams {
            coupling: 0.0,
            pump_rate: 2.0 * PI * 0.1e6,
            pump_duration: 1.0,
            ..silent(1)
        };
        let space = Space::new(1, 2);
        let run = evolve(&p, &DensityState::ground(space), 5e-6, 1e-8, 50).unwrap();
        for s in &run.samples {
            let expect = 1.0 - (-p.pump_rate * s.time).exp();
            assert!((s.moments.s22.re - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn closed_system_conserves_excitations_and_purity() {
        let p = SystemParams {
            atom_detuning: 2.0 * PI * 0.03e6,
            ..silent(3)
        };
        let space = Space::new(3, 8);
        let rho0 = DensityState::product(space, c(0.4, 0.2), c(0.6, 0.0), c(0.0, 0.8)).unwrap();
        let run = evolve(&p, &rho0, 4e-6, 1e-8, 40).unwrap();
        let n0 = run.samples[0].excitations;
        for s in &run.samples {
            assert!((s.excitations / n0 - 1.0).abs() < 1e-9);
            assert!(s.purity <= 1.0 + 1e-9);
            assert!((s.purity - 1.0).abs() < 1e-8);
        }
        assert!(run.max_trace_drift() < 1e-12);
    }

    #[test]
    fn open_system_stays_physical() {
        let p = SystemParams::desk(2);
        let space = Space::new(2, default_cutoff(2));
        let run = evolve(&p, &DensityState::ground(space), 2e-6, 1e-8, 20).unwrap();
        for s in &run.samples {
            assert!(s.purity <= 1.0 + 1e-9);
        }
        assert!(run.max_trace_drift() < 1e-9);
        assert!(run.final_state.hermiticity_defect() < 1e-12);
        assert!(run.final_state.is_positive(1e-9));
    }

    #[test]
    fn cutoff_violation_names_a_larger_cutoff() {
        let p = SystemParams {
            drive_strength: 2e4,
            drive_duration: 1.0,
            cavity_loss: 2.0 * PI * 0.05e6,
            ..silent(1)
        };
        let space = Space::new(1, 2);
        match evolve(&p, &DensityState::ground(space), 20e-6, 1e-8, 10) {
            Err(Error::CutoffExceeded {
                n_max: 2, required, ..
            }) => assert!(required > 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_oversized_problems() {
        let p = SystemParams::desk(7);
        assert!(Lindblad::new(&p, 8).is_err());
        assert!(Lindblad::new(&SystemParams::desk(2), 17).is_err());
    }

    /// On product states the closure is exact, so the cumulant drift must
    /// reproduce the exact derivative of every stored moment.
    #[test]
    fn drift_matches_exact_derivative_on_product_states() {
        let p = SystemParams {
            n_atoms: 3,
            atom_detuning: 2.0 * PI * 0.02e6,
            dephasing: 2.0 * PI * 0.004e6,
            drive_strength: 300.0,
            drive_detuning: 2.0 * PI * 0.01e6,
            drive_duration: 1.0,
            ..SystemParams::desk(3)
        };
        let space = Space::new(3, 16);
        for (alpha, cg, ce, t) in [
            (c(0.3, -0.2), c(0.8, 0.0), c(0.36, 0.48), 1e-6),
            (c(-0.1, 0.25), c(0.0, 0.6), c(0.8, 0.0), 3.3e-6),
        ] {
            let rho = DensityState::product(space, alpha, cg, ce).unwrap();
            let exact = moment_derivative(&p, &rho, t).unwrap();
            let m = MomentOperators::new(space).moments(&rho).unwrap();
            let model = drift(&m, &p, t).unwrap();
            for k in Moment::ALL {
                let (e, a) = (exact.get(k), model.get(k));
                let scale = e.norm().max(1.0);
                assert!(
                    (e - a).norm() < 1e-9 * scale,
                    "{}: exact {e} model {a}",
                    k.name()
                );
            }
        }
    }
}
