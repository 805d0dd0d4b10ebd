//! Drift and measurement-backaction coefficients of the second-order
//! cumulant equations.
//!
//! Every row is obtained from the adjoint Lindblad equation in the frame
//! rotating at ω_c,
//!
//! ```text
//! d⟨ô⟩/dt = i⟨[Ĥ, ô]⟩ + Σ_c r_c ⟨L̂_c† ô L̂_c − ½{L̂_c† L̂_c, ô}⟩
//! Ĥ = Δ Σ σ_k²² + g Σ (â† σ_k¹² + σ_k²¹ â) + ε(t) â + ε*(t) â†,   ε = √(κ/2) Ω e^{iΔ_d t}
//! ```
//!
//! with channels (κ, â), (γ, σ_k¹²), (η, σ_k²¹) and (χ/2, σ_k²² − σ_k¹¹).
//! Sums over atoms collapse onto the representative atom and pair with
//! factors N, N − 1. Third-order moments are replaced by
//! ⟨xyz⟩ ≈ ⟨xy⟩⟨z⟩ + ⟨xz⟩⟨y⟩ + ⟨yz⟩⟨x⟩ − 2⟨x⟩⟨y⟩⟨z⟩.
//!
//! The heterodyne backaction coefficient of ô multiplies dW:
//!
//! ```text
//! √(ξκ/2) [ e^{iδ_l t}(⟨ô â⟩ − ⟨ô⟩⟨â⟩) + e^{−iδ_l t}(⟨â† ô⟩ − ⟨â†⟩⟨ô⟩) ]
//! ```

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::params::SystemParams;
use crate::state::CumulantState;

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[inline]
fn close(xy: C64, xz: C64, yz: C64, x: C64, y: C64, z: C64) -> C64 {
    xy * z + xz * y + yz * x - 2.0 * x * y * z
}

/// Closed third-order moments. Atom indices 1, 2 refer to the representative
/// pair; by symmetry ⟨â†σ₁¹²σ₂²²⟩ = ⟨â†σ₁²²σ₂¹²⟩ and so on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThirdMoments {
    /// ⟨â†â σ₁²²⟩
    pub ada_s22: C64,
    /// ⟨ââ σ₁²²⟩
    pub aa_s22: C64,
    /// ⟨â†â σ₁¹²⟩
    pub ada_s12: C64,
    /// ⟨ââ σ₁²¹⟩
    pub aa_s21: C64,
    /// ⟨â† σ₁²² σ₂¹²⟩
    pub ad_s22_s12: C64,
    /// ⟨â σ₁²² σ₂¹²⟩
    pub a_s22_s12: C64,
    /// ⟨â† σ₁¹² σ₂¹²⟩
    pub ad_s12_s12: C64,
    /// ⟨â σ₁²¹ σ₂¹²⟩
    pub a_s21_s12: C64,
    /// ⟨â σ₁²² σ₂²²⟩
    pub a_s22_s22: C64,
    /// ⟨â†ââ⟩
    pub ada_a: C64,
    /// ⟨âââ⟩
    pub aaa: C64,
    /// ⟨â†â† σ₁¹²⟩
    pub adad_s12: C64,
    /// ⟨ââ σ₁¹²⟩
    pub aa_s12: C64,
    /// ⟨â σ₁¹² σ₂¹²⟩
    pub a_s12_s12: C64,
}

impl ThirdMoments {
    pub fn close(st: &CumulantState) -> Self {
        let a = st.a;
        let ad = a.conj();
        let s = st.s12;
        let sd = s.conj();
        let p = st.s22;
        let n = st.ada;
        let ap = st.a_s22;
        let ads = st.ad_s12;
        let as_ = st.a_s12;
        Self {
            ada_s22: close(n, ap.conj(), ap, ad, a, p),
            aa_s22: close(st.aa, ap, ap, a, a, p),
            ada_s12: close(n, ads, as_, ad, a, s),
            aa_s21: close(st.aa, ads.conj(), ads.conj(), a, a, sd),
            ad_s22_s12: close(ap.conj(), ads, st.s22s12, ad, p, s),
            a_s22_s12: close(ap, as_, st.s22s12, a, p, s),
            ad_s12_s12: close(ads, ads, st.s12s12, ad, s, s),
            a_s21_s12: close(ads.conj(), as_, st.s21s12, a, sd, s),
            a_s22_s22: close(ap, ap, st.s22s22, a, p, p),
            ada_a: close(n, n, st.aa, ad, a, a),
            aaa: close(st.aa, st.aa, st.aa, a, a, a),
            adad_s12: close(st.aa.conj(), ads, ads, ad, ad, s),
            aa_s12: close(st.aa, as_, as_, a, a, s),
            a_s12_s12: close(as_, as_, st.s12s12, a, s, s),
        }
    }
}

/// Drift and dW-coefficient of every stored moment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Increments {
    pub drift: CumulantState,
    pub backaction: CumulantState,
}

fn check_finite(state: &CumulantState, t: f64) -> Result<()> {
    match state.first_non_finite() {
        Some(m) => Err(Error::NonFinite {
            moment: m.name(),
            time: t,
        }),
        None => Ok(()),
    }
}

/// Coherent drive amplitude ε(t) = √(κ/2) Ω(t) e^{iΔ_d t}.
#[inline]
fn drive_amplitude(params: &SystemParams, t: f64) -> C64 {
    let omega = params.drive().at(t);
    if omega == 0.0 {
        return C64::new(0.0, 0.0);
    }
    (params.cavity_loss / 2.0).sqrt() * omega * C64::from_polar(1.0, params.drive_detuning * t)
}

fn drift_with(
    st: &CumulantState,
    th: &ThirdMoments,
    params: &SystemParams,
    t: f64,
) -> CumulantState {
    let n_at = params.n();
    let kappa = params.cavity_loss;
    let g = params.coupling;
    let ig = I * g;
    let eta = params.pump().at(t);
    let gamma_p = params.atom_decay + eta;
    let gamma_2 = 0.5 * gamma_p + params.dephasing;
    let delta = params.atom_detuning;
    let eps = drive_amplitude(params, t);
    let eps_c = eps.conj();

    let a = st.a;
    let s = st.s12;
    let p = st.s22;
    let n = st.ada;
    let ads = st.ad_s12;
    let as_ = st.a_s12;
    let ap = st.a_s22;
    let c = st.s21s12;
    let ss = st.s12s12;
    let ps = st.s22s12;
    let pp = st.s22s22;

    let coh = C64::new(gamma_2, delta);
    let field_coh = C64::new(0.5 * kappa + gamma_2, delta);
    let real = |x: f64| C64::new(x, 0.0);

    CumulantState {
        a: -0.5 * kappa * a - ig * n_at * s - I * eps_c,
        aa: -kappa * st.aa - 2.0 * ig * n_at * as_ - 2.0 * I * eps_c * a,
        ada: real(-kappa * n.re + 2.0 * g * n_at * ads.im - 2.0 * (eps * a).im),
        s12: -coh * s + ig * (2.0 * ap - a),
        s22: real(-gamma_p * p.re + eta - 2.0 * g * ads.im),
        ad_s12: -field_coh * ads + ig * (p + (n_at - 1.0) * c + 2.0 * th.ada_s22 - n) + I * eps * s,
        a_s12: -field_coh * as_ + ig * (2.0 * th.aa_s22 - st.aa - (n_at - 1.0) * ss)
            - I * eps_c * s,
        a_s22: -(0.5 * kappa + gamma_p) * ap
            + eta * a
            + ig * (th.ada_s12 - th.aa_s21 - (n_at - 1.0) * ps)
            - I * eps_c * p,
        s21s12: real(-2.0 * gamma_2 * c.re - 2.0 * g * ads.im + 4.0 * g * th.ad_s22_s12.im),
        s12s12: -2.0 * coh * ss + 2.0 * ig * (2.0 * th.a_s22_s12 - as_),
        s22s12: -(gamma_p + coh) * ps
            + eta * s
            + ig * (th.ad_s12_s12 - th.a_s21_s12 + 2.0 * th.a_s22_s22 - ap),
        s22s22: real(-2.0 * gamma_p * pp.re + 2.0 * eta * p.re - 4.0 * g * th.ad_s22_s12.im),
    }
}

fn backaction_with(
    st: &CumulantState,
    th: &ThirdMoments,
    params: &SystemParams,
    t: f64,
) -> CumulantState {
    let xi = params.detection_efficiency;
    if xi == 0.0 {
        return CumulantState::zero();
    }
    let k = (xi * params.cavity_loss / 2.0).sqrt();
    let ph = C64::from_polar(1.0, params.lo_detuning * t);
    let php = ph.conj();
    let a = st.a;
    let ad = a.conj();

    // k [ph (⟨ô â⟩ − ⟨ô⟩⟨â⟩) + ph* (⟨â† ô⟩ − ⟨â†⟩⟨ô⟩)]
    let coeff = |o: C64, o_a: C64, ad_o: C64| k * (ph * (o_a - o * a) + php * (ad_o - ad * o));
    // Hermitian ô: the two terms are conjugates.
    let real = |o: f64, o_a: C64| C64::new(2.0 * k * (ph * (o_a - o * a)).re, 0.0);

    CumulantState {
        a: coeff(a, st.aa, st.ada),
        aa: coeff(st.aa, th.aaa, th.ada_a),
        ada: real(st.ada.re, th.ada_a),
        s12: coeff(st.s12, st.a_s12, st.ad_s12),
        s22: real(st.s22.re, st.a_s22),
        ad_s12: coeff(st.ad_s12, th.ada_s12, th.adad_s12),
        a_s12: coeff(st.a_s12, th.aa_s12, th.ada_s12),
        a_s22: coeff(st.a_s22, th.aa_s22, th.ada_s22),
        s21s12: real(st.s21s12.re, th.a_s21_s12),
        s12s12: coeff(st.s12s12, th.a_s12_s12, th.ad_s12_s12),
        s22s12: coeff(st.s22s12, th.a_s22_s12, th.ad_s22_s12),
        s22s22: real(st.s22s22.re, th.a_s22_s22),
    }
}

/// Deterministic time derivative of every stored moment.
pub fn drift(state: &CumulantState, params: &SystemParams, t: f64) -> Result<CumulantState> {
    check_finite(state, t)?;
    let th = ThirdMoments::close(state);
    Ok(drift_with(state, &th, params, t))
}

/// Coefficient multiplying dW for every stored moment (all zero when ξ = 0).
pub fn backaction(state: &CumulantState, params: &SystemParams, t: f64) -> Result<CumulantState> {
    check_finite(state, t)?;
    let th = ThirdMoments::close(state);
    Ok(backaction_with(state, &th, params, t))
}

/// Drift and backaction sharing one closure evaluation.
pub fn increments(state: &CumulantState, params: &SystemParams, t: f64) -> Result<Increments> {
    check_finite(state, t)?;
    let th = ThirdMoments::close(state);
    Ok(Increments {
        drift: drift_with(state, &th, params, t),
        backaction: backaction_with(state, &th, params, t),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{InitialKind, Moment};
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_state(seed: u64) -> CumulantState {
        // xorshift, enough for a handful of arbitrary values
        let mut x = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
        let mut next = || {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let mut v = [C64::new(0.0, 0.0); 12];
        for (m, z) in Moment::ALL.into_iter().zip(v.iter_mut()) {
            *z = if m.is_real() {
                c(next(), 0.0)
            } else {
                c(next(), next())
            };
        }
        CumulantState::from_array(v)
    }

    #[test]
    fn vacuum_is_fixed_point() {
        let mut p = SystemParams::default();
        p.pump_rate = 0.0;
        let ground = CumulantState::initial(InitialKind::Ground).unwrap();
        let d = drift(&ground, &p, 0.0).unwrap();
        assert_eq!(d.max_abs(), 0.0);
    }

    #[test]
    fn field_row_matches_mean_field_amplitude_equation() {
        let p = SystemParams::default();
        let x = c(0.013, -0.002); // ⟨σ²¹⟩
        let y = c(-3.0, 1.5); // ⟨â†⟩
        let st = CumulantState {
            a: y.conj(),
            s12: x.conj(),
            ..CumulantState::zero()
        };
        let d = drift(&st, &p, 5e-6).unwrap();
        let expected = -0.5 * p.cavity_loss * y + I * p.n() * p.coupling * x;
        assert!((d.a.conj() - expected).norm() <= 1e-12 * expected.norm());
    }

    #[test]
    fn field_backaction_from_photon_number() {
        let p = SystemParams::default();
        let n = 42.0;
        let st = CumulantState {
            ada: c(n, 0.0),
            ..CumulantState::zero()
        };
        let t = 0.37e-6;
        let b = backaction(&st, &p, t).unwrap();
        let k = (p.detection_efficiency * p.cavity_loss / 2.0).sqrt();
        let expected = k * C64::from_polar(1.0, p.lo_detuning * t) * n;
        assert!((b.a.conj() - expected).norm() <= 1e-12 * expected.norm());
    }

    #[test]
    fn field_backaction_reproduces_both_stochastic_lines() {
        let p = SystemParams::default();
        let st = random_state(7);
        let t = 1.234e-6;
        let b = backaction(&st, &p, t).unwrap();
        let k = (p.detection_efficiency * p.cavity_loss / 2.0).sqrt();
        let ad = st.a.conj();
        let expected = k * C64::from_polar(1.0, p.lo_detuning * t) * (st.ada - ad * st.a)
            + k * C64::from_polar(1.0, -p.lo_detuning * t) * (st.aa.conj() - ad * ad);
        assert!((b.a.conj() - expected).norm() <= 1e-12 * (1.0 + expected.norm()));
    }

    #[test]
    fn no_measurement_no_backaction() {
        let mut p = SystemParams::default();
        p.detection_efficiency = 0.0;
        let b = backaction(&random_state(3), &p, 1e-6).unwrap();
        assert_eq!(b.max_abs(), 0.0);
    }

    #[test]
    fn coherent_field_has_no_field_backaction() {
        let p = SystemParams::default();
        let alpha = c(0.8, -2.1);
        let st = CumulantState {
            a: alpha,
            ada: c(alpha.norm_sqr(), 0.0),
            aa: alpha * alpha,
            ..CumulantState::zero()
        };
        let b = backaction(&st, &p, 2e-6).unwrap();
        assert!(b.a.norm() < 1e-12);
    }

    #[test]
    fn real_moments_have_real_coefficients() {
        let p = SystemParams::coherent_drive();
        for seed in 1..20 {
            let st = random_state(seed);
            let inc = increments(&st, &p, 3e-6).unwrap();
            for m in Moment::ALL.into_iter().filter(|m| m.is_real()) {
                assert_eq!(inc.drift.get(m).im, 0.0, "{}", m.name());
                assert_eq!(inc.backaction.get(m).im, 0.0, "{}", m.name());
            }
        }
    }

    #[test]
    fn closed_system_conserves_excitations() {
        let p = SystemParams {
            cavity_loss: 0.0,
            atom_decay: 0.0,
            pump_rate: 0.0,
            detection_efficiency: 0.0,
            dephasing: 2.0 * PI * 3.0,
            n_atoms: 1000,
            ..SystemParams::default()
        };
        for seed in 1..10 {
            let d = drift(&random_state(seed), &p, 0.0).unwrap();
            let rate = d.ada.re + p.n() * d.s22.re;
            let scale = d.ada.norm() + p.n() * d.s22.norm();
            assert!(rate.abs() <= 1e-12 * scale.max(1.0));
        }
    }

    #[test]
    fn phase_invariant_states_stay_phase_invariant() {
        let p = SystemParams {
            detection_efficiency: 0.0,
            ..SystemParams::default()
        };
        let mut st = random_state(11);
        for m in Moment::ALL.into_iter().filter(|m| m.is_phase_odd()) {
            st.set(m, c(0.0, 0.0));
        }
        let d = drift(&st, &p, 1e-6).unwrap();
        for m in Moment::ALL.into_iter().filter(|m| m.is_phase_odd()) {
            assert_eq!(d.get(m), c(0.0, 0.0), "{}", m.name());
        }
    }

    #[test]
    fn non_finite_state_is_rejected_with_its_name() {
        let mut st = CumulantState::zero();
        st.s22s12 = c(f64::NAN, 0.0);
        match drift(&st, &SystemParams::default(), 2.5e-6) {
            Err(Error::NonFinite { moment, time }) => {
                assert_eq!(moment, "s22s12");
                assert_eq!(time, 2.5e-6);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(backaction(&st, &SystemParams::default(), 0.0).is_err());
    }

    #[test]
    fn closure_is_exact_on_product_states() {
        let st = CumulantState::initial(InitialKind::Product {
            s22: 0.3,
            s12: c(0.2, 0.35),
        })
        .unwrap();
        let th = ThirdMoments::close(&st);
        let (s, p) = (st.s12, st.s22);
        assert!((th.ad_s12_s12).norm() < 1e-15);
        assert!((th.a_s21_s12).norm() < 1e-15);
        // with a field: check one mixed moment against the plain product
        let alpha = c(0.5, 0.1);
        let mixed = CumulantState {
            a: alpha,
            aa: alpha * alpha,
            ada: c(alpha.norm_sqr(), 0.0),
            ad_s12: alpha.conj() * s,
            a_s12: alpha * s,
            a_s22: alpha * p,
            ..st
        };
        let th = ThirdMoments::close(&mixed);
        assert!((th.ad_s22_s12 - alpha.conj() * p * s).norm() < 1e-15);
        assert!((th.ada_s22 - alpha.norm_sqr() * p).norm() < 1e-15);
    }
}
