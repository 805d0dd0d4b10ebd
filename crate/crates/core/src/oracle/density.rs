use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ThirdMoments;
use crate::oracle::space::{product, Monomial, Space};
use crate::state::{CumulantState, Moment};

/// Largest permitted deviation between atom-1 and atom-2 marginals.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Dense density matrix on [`Space`], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityState {
    pub space: Space,
    pub rho: Vec<C64>,
}

impl DensityState {
    pub fn zeros(space: Space) -> Self {
        let d = space.dim();
        Self {
            space,
            rho: vec![C64::new(0.0, 0.0); d * d],
        }
    }

    /// |ψ⟩⟨ψ| for a (not necessarily normalized) state vector.
    pub fn from_pure(space: Space, psi: &[C64]) -> Result<Self> {
        let d = space.dim();
        if psi.len() != d {
            return Err(Error::param(
                "psi",
                format!("length {} != dimension {d}", psi.len()),
            ));
        }
        let norm: f64 = psi.iter().map(|c| c.norm_sqr()).sum();
        if !(norm > 0.0) {
            return Err(Error::param("psi", "zero vector"));
        }
        let mut out = Self::zeros(space);
        for i in 0..d {
            for j in 0..d {
                out.rho[i * d + j] = psi[i] * psi[j].conj() / norm;
            }
        }
        Ok(out)
    }

    /// All atoms in `c_g|1⟩ + c_e|2⟩`, field in a coherent state |α⟩ cut at
    /// the Fock limit and renormalized.
    pub fn product(space: Space, alpha: C64, c_g: C64, c_e: C64) -> Result<Self> {
        let mut field = vec![C64::new(0.0, 0.0); space.n_max + 1];
        field[0] = C64::new(1.0, 0.0);
        for n in 1..=space.n_max {
            field[n] = field[n - 1] * alpha / (n as f64).sqrt();
        }
        let psi: Vec<C64> = (0..space.dim())
            .map(|i| {
                let bits = space.bits(i);
                let atoms = (0..space.n_atoms).fold(C64::new(1.0, 0.0), |acc, k| {
                    acc * if bits & (1 << k) != 0 { c_e } else { c_g }
                });
                field[space.photons(i)] * atoms
            })
            .collect();
        Self::from_pure(space, &psi)
    }

    pub fn ground(space: Space) -> Self {
        let mut out = Self::zeros(space);
        out.rho[0] = C64::new(1.0, 0.0);
        out
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.rho[i * self.space.dim() + j]
    }

    pub fn trace(&self) -> C64 {
        let d = self.space.dim();
        (0..d).map(|i| self.rho[i * d + i]).sum()
    }

    /// Tr(Ô ρ) without renormalization.
    pub fn expect(&self, op: &Monomial) -> C64 {
        op.entries().map(|(r, c, v)| v * self.at(c, r)).sum()
    }

    /// Tr ρ² / (Tr ρ)².
    pub fn purity(&self) -> f64 {
        let tr = self.trace().re;
        self.rho.iter().map(|c| c.norm_sqr()).sum::<f64>() / (tr * tr)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let d = self.space.dim();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.at(i, j) - self.at(j, i).conj()).norm());
            }
        }
        worst
    }

    /// Population of the highest Fock level.
    pub fn top_population(&self) -> f64 {
        let s = self.space;
        let tr = self.trace().re;
        (0..s.atom_dim())
            .map(|b| {
                let i = s.index(s.n_max, b);
                self.at(i, i).re
            })
            .sum::<f64>()
            / tr
    }

    /// Whether ρ + tol·𝟙 admits a Cholesky factorization, i.e. all
    /// eigenvalues of ρ exceed −tol.
    pub fn is_positive(&self, tol: f64) -> bool {
        let d = self.space.dim();
        let mut l = vec![C64::new(0.0, 0.0); d * d];
        for j in 0..d {
            let mut diag = self.at(j, j).re + tol;
            for k in 0..j {
                diag -= l[j * d + k].norm_sqr();
            }
            if diag <= 0.0 {
                return false;
            }
            let ljj = diag.sqrt();
            l[j * d + j] = C64::new(ljj, 0.0);
            for i in j + 1..d {
                let mut s = self.at(i, j);
                for k in 0..j {
                    s -= l[i * d + k] * l[j * d + k].conj();
                }
                l[i * d + j] = s / ljj;
            }
        }
        true
    }
}

/// Operators of the stored moments and of the closed third-order moments,
/// built once per space. Atom indices 0 and 1 play the representative pair.
#[derive(Debug, Clone)]
pub struct MomentOperators {
    space: Space,
    a: Monomial,
    ad: Monomial,
    lower: Vec<Monomial>,
    raise: Vec<Monomial>,
    excited: Vec<Monomial>,
}

/// Exact third-order moments next to their closed approximations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThirdCumulants {
    /// max |⟨xyz⟩ − closure| over the third-order moments the drift uses.
    pub max_abs: f64,
    /// max |second-order stored moment|, the scale of the gating ratio.
    pub second_scale: f64,
}

impl ThirdCumulants {
    pub fn relative(&self) -> f64 {
        if self.second_scale > 0.0 {
            self.max_abs / self.second_scale
        } else if self.max_abs == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

impl MomentOperators {
    pub fn new(space: Space) -> Self {
        let a = space.annihilate();
        Self {
            ad: a.adjoint(),
            a,
            lower: (0..space.n_atoms).map(|k| space.lower(k)).collect(),
            raise: (0..space.n_atoms).map(|k| space.raise(k)).collect(),
            excited: (0..space.n_atoms).map(|k| space.excited(k)).collect(),
            space,
        }
    }

    pub fn space(&self) -> Space {
        self.space
    }

    fn ev(&self, st: &DensityState, factors: &[&Monomial]) -> C64 {
        st.expect(&product(factors))
    }

    /// Raw expectations Tr(Ô X) for any matrix X on the space (a density
    /// matrix or its time derivative); pair moments are zero for N = 1.
    pub fn expectations(&self, x: &DensityState) -> CumulantState {
        let (a, ad) = (&self.a, &self.ad);
        let (s1, p1) = (&self.lower[0], &self.excited[0]);
        let mut out = CumulantState {
            a: x.expect(a),
            aa: self.ev(x, &[a, a]),
            ada: self.ev(x, &[ad, a]),
            s12: x.expect(s1),
            s22: x.expect(p1),
            ad_s12: self.ev(x, &[ad, s1]),
            a_s12: self.ev(x, &[a, s1]),
            a_s22: self.ev(x, &[a, p1]),
            ..CumulantState::zero()
        };
        if self.space.n_atoms >= 2 {
            let (r1, s2, p2) = (&self.raise[0], &self.lower[1], &self.excited[1]);
            out.s21s12 = self.ev(x, &[r1, s2]);
            out.s12s12 = self.ev(x, &[s1, s2]);
            out.s22s12 = self.ev(x, &[p1, s2]);
            out.s22s22 = self.ev(x, &[p1, p2]);
        }
        out
    }

    /// Normalized moments with the permutation-symmetry check.
    pub fn moments(&self, st: &DensityState) -> Result<CumulantState> {
        let tr = st.trace().re;
        let raw = self.expectations(st);
        let mut m = CumulantState::zero();
        for (k, v) in raw.iter() {
            m.set(k, v / tr);
        }
        if self.space.n_atoms >= 2 {
            let checks = [
                (&self.lower[0], &self.lower[1]),
                (&self.excited[0], &self.excited[1]),
            ];
            let mut deviation: f64 = 0.0;
            for (o1, o2) in checks {
                deviation = deviation.max((st.expect(o1) - st.expect(o2)).norm() / tr);
                deviation = deviation
                    .max((self.ev(st, &[&self.ad, o1]) - self.ev(st, &[&self.ad, o2])).norm() / tr);
                deviation = deviation
                    .max((self.ev(st, &[&self.a, o1]) - self.ev(st, &[&self.a, o2])).norm() / tr);
            }
            if deviation > SYMMETRY_TOL {
                return Err(Error::BrokenSymmetry { deviation });
            }
        }
        for k in Moment::ALL {
            if k.is_real() {
                let v = m.get(k);
                m.set(k, C64::new(v.re, 0.0));
            }
        }
        Ok(m)
    }

    /// Exact third-order moments in the layout of [`ThirdMoments`].
    pub fn third_moments(&self, st: &DensityState) -> ThirdMoments {
        let tr = st.trace().re;
        let (a, ad) = (&self.a, &self.ad);
        let (s1, r1, p1) = (&self.lower[0], &self.raise[0], &self.excited[0]);
        let unused = self.space.identity();
        let pair = self.space.n_atoms >= 2;
        let (s2, p2) = if pair {
            (&self.lower[1], &self.excited[1])
        } else {
            (&unused, &unused)
        };
        let ev = |f: &[&Monomial]| self.ev(st, f) / tr;
        let pair_ev = |f: &[&Monomial]| if pair { ev(f) } else { C64::new(0.0, 0.0) };
        ThirdMoments {
            ada_s22: ev(&[ad, a, p1]),
            aa_s22: ev(&[a, a, p1]),
            ada_s12: ev(&[ad, a, s1]),
            aa_s21: ev(&[a, a, r1]),
            ad_s22_s12: pair_ev(&[ad, p1, s2]),
            a_s22_s12: pair_ev(&[a, p1, s2]),
            ad_s12_s12: pair_ev(&[ad, s1, s2]),
            a_s21_s12: pair_ev(&[a, r1, s2]),
            a_s22_s22: pair_ev(&[a, p1, p2]),
            ada_a: ev(&[ad, a, a]),
            aaa: ev(&[a, a, a]),
            adad_s12: ev(&[ad, ad, s1]),
            aa_s12: ev(&[a, a, s1]),
            a_s12_s12: pair_ev(&[a, s1, s2]),
        }
    }

    /// Third cumulants: exact third moments minus the closure built from the
    /// exact first and second moments.
    pub fn third_cumulants(&self, st: &DensityState) -> Result<ThirdCumulants> {
        let m = self.moments(st)?;
        let exact = third_array(&self.third_moments(st));
        let closed = third_array(&ThirdMoments::close(&m));
        let pair = self.space.n_atoms >= 2;
        let mut max_abs: f64 = 0.0;
        for (k, (e, c)) in exact.iter().zip(&closed).enumerate() {
            if pair || !PAIR_SLOTS.contains(&k) {
                max_abs = max_abs.max((e - c).norm());
            }
        }
        let second_scale = Moment::ALL
            .iter()
            .filter(|k| k.is_second_order())
            .map(|&k| m.get(k).norm())
            .fold(0.0, f64::max);
        Ok(ThirdCumulants {
            max_abs,
            second_scale,
        })
    }

    /// ⟨Ĵ²⟩ = ⟨Ĵ₊Ĵ₋⟩ + ⟨Ĵ_z²⟩ − ⟨Ĵ_z⟩ contracted over all atom pairs.
    pub fn spin_squared(&self, st: &DensityState) -> f64 {
        let tr = st.trace().re;
        let n = self.space.n_atoms;
        let mut jpjm = 0.0;
        for k in 0..n {
            for l in 0..n {
                jpjm += self.ev(st, &[&self.raise[k], &self.lower[l]]).re;
            }
        }
        let s = self.space;
        let (mut jz, mut jz2) = (0.0, 0.0);
        for i in 0..s.dim() {
            let m = s.bits(i).count_ones() as f64 - 0.5 * n as f64;
            let w = st.at(i, i).re;
            jz += m * w;
            jz2 += m * m * w;
        }
        (jpjm + jz2 - jz) / tr
    }

    /// ⟨â†â + Σ σ_k²²⟩.
    pub fn excitations(&self, st: &DensityState) -> f64 {
        let s = self.space;
        let tr = st.trace().re;
        (0..s.dim())
            .map(|i| (s.photons(i) + s.bits(i).count_ones() as usize) as f64 * st.at(i, i).re)
            .sum::<f64>()
            / tr
    }
}

/// Entries of [`third_array`] that involve two distinct atoms.
const PAIR_SLOTS: [usize; 6] = [4, 5, 6, 7, 8, 13];

fn third_array(t: &ThirdMoments) -> [C64; 14] {
    [
        t.ada_s22,
        t.aa_s22,
        t.ada_s12,
        t.aa_s21,
        t.ad_s22_s12,
        t.a_s22_s12,
        t.ad_s12_s12,
        t.a_s21_s12,
        t.a_s22_s22,
        t.ada_a,
        t.aaa,
        t.adad_s12,
        t.aa_s12,
        t.a_s12_s12,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::dicke_numbers;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn ground_state_moments_vanish() {
        let s = Space::new(3, 4);
        let ops = MomentOperators::new(s);
        let m = ops.moments(&DensityState::ground(s)).unwrap();
        assert_eq!(m, CumulantState::zero());
        assert_eq!(ops.spin_squared(&DensityState::ground(s)), 0.75 * 3.0 + 1.5);
    }

    #[test]
    fn dicke_one_zero_of_two_atoms() {
        let s = Space::new(2, 3);
        let mut psi = vec![c(0.0, 0.0); s.dim()];
        psi[s.index(0, 0b01)] = c(1.0, 0.0);
        psi[s.index(0, 0b10)] = c(1.0, 0.0);
        let st = DensityState::from_pure(s, &psi).unwrap();
        let ops = MomentOperators::new(s);
        let m = ops.moments(&st).unwrap();
        assert!((m.s21s12 - c(0.5, 0.0)).norm() < 1e-15);
        assert!((m.s22 - c(0.5, 0.0)).norm() < 1e-15);
        assert_eq!(m.s22s22, c(0.0, 0.0));
        // J = 1: ⟨Ĵ²⟩ = 2
        assert!((ops.spin_squared(&st) - 2.0).abs() < 1e-14);
        assert!((dicke_numbers(&m, 2).j_bar - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn product_states_have_no_third_cumulants() {
        let s = Space::new(3, 14);
        let ops = MomentOperators::new(s);
        for (alpha, cg, ce) in [
            (c(0.3, -0.2), c(0.8, 0.0), c(0.36, 0.48)),
            (c(0.0, 0.5), c(0.0, 0.6), c(0.8, 0.0)),
        ] {
            let st = DensityState::product(s, alpha, cg, ce).unwrap();
            let t = ops.third_cumulants(&st).unwrap();
            assert!(t.max_abs < 1e-12, "{t:?}");
        }
    }

    #[test]
    fn asymmetric_state_is_rejected() {
        let s = Space::new(2, 2);
        let mut psi = vec![c(0.0, 0.0); s.dim()];
        psi[s.index(0, 0b01)] = c(1.0, 0.0);
        let st = DensityState::from_pure(s, &psi).unwrap();
        assert!(matches!(
            MomentOperators::new(s).moments(&st),
            Err(Error::BrokenSymmetry { .. })
        ));
    }

    #[test]
    fn diagnostics_of_pure_state() {
        let s = Space::new(2, 8);
        let st = DensityState::product(s, c(0.4, 0.1), c(0.6, 0.0), c(0.0, 0.8)).unwrap();
        assert!((st.purity() - 1.0).abs() < 1e-12);
        assert!(st.hermiticity_defect() < 1e-15);
        assert!(st.is_positive(1e-9));
        assert!(st.top_population() < 1e-6);
        let mut bad = st.clone();
        bad.rho[0] -= 0.5;
        assert!(!bad.is_positive(1e-9));
    }
}
