//! The closed set of first- and second-order moments.
//!
//! Identical atoms make every single-atom moment equal to that of atom 1 and
//! every pair moment equal to that of the pair (1, 2). Conjugate moments such
//! as ⟨â†⟩ or ⟨σ²¹⟩ are never stored; they are the complex conjugates of the
//! stored ones.

use std::ops::{Add, Mul};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_MOMENTS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Moment {
    A,
    Aa,
    Ada,
    S12,
    S22,
    AdS12,
    AS12,
    AS22,
    S21S12,
    S12S12,
    S22S12,
    S22S22,
}

impl Moment {
    pub const ALL: [Moment; N_MOMENTS] = [
        Moment::A,
        Moment::Aa,
        Moment::Ada,
        Moment::S12,
        Moment::S22,
        Moment::AdS12,
        Moment::AS12,
        Moment::AS22,
        Moment::S21S12,
        Moment::S12S12,
        Moment::S22S12,
        Moment::S22S22,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Moment::A => "a",
            Moment::Aa => "aa",
            Moment::Ada => "ada",
            Moment::S12 => "s12",
            Moment::S22 => "s22",
            Moment::AdS12 => "ad_s12",
            Moment::AS12 => "a_s12",
            Moment::AS22 => "a_s22",
            Moment::S21S12 => "s21s12",
            Moment::S12S12 => "s12s12",
            Moment::S22S12 => "s22s12",
            Moment::S22S22 => "s22s22",
        }
    }

    /// Expectation values of Hermitian operators.
    pub fn is_real(self) -> bool {
        matches!(
            self,
            Moment::Ada | Moment::S22 | Moment::S21S12 | Moment::S22S22
        )
    }

    /// Moments that carry a net U(1) charge and vanish for phase-invariant
    /// states.
    pub fn is_phase_odd(self) -> bool {
        matches!(
            self,
            Moment::A
                | Moment::Aa
                | Moment::S12
                | Moment::AS12
                | Moment::AS22
                | Moment::S12S12
                | Moment::S22S12
        )
    }

    pub fn is_second_order(self) -> bool {
        !matches!(self, Moment::A | Moment::S12 | Moment::S22)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CumulantState {
    /// ⟨â⟩
    pub a: C64,
    /// ⟨ââ⟩
    pub aa: C64,
    /// ⟨â†â⟩
    pub ada: C64,
    /// ⟨σ₁¹²⟩
    pub s12: C64,
    /// ⟨σ₁²²⟩
    pub s22: C64,
    /// ⟨â†σ₁¹²⟩
    pub ad_s12: C64,
    /// ⟨âσ₁¹²⟩
    pub a_s12: C64,
    /// ⟨âσ₁²²⟩
    pub a_s22: C64,
    /// ⟨σ₁²¹σ₂¹²⟩
    pub s21s12: C64,
    /// ⟨σ₁¹²σ₂¹²⟩
    pub s12s12: C64,
    /// ⟨σ₁²²σ₂¹²⟩
    pub s22s12: C64,
    /// ⟨σ₁²²σ₂²²⟩
    pub s22s22: C64,
}

/// Initial-state families. Second-order moments are always the factorized
/// products of the first-order ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    Ground,
    Excited,
    /// Identical product state of every atom with excited population `s22`
    /// and coherence ⟨σ¹²⟩ = `s12`, cavity in vacuum.
    Product {
        s22: f64,
        s12: C64,
    },
}

impl CumulantState {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn initial(kind: InitialKind) -> Result<Self> {
        let (p, s) = match kind {
            InitialKind::Ground => (0.0, C64::new(0.0, 0.0)),
            InitialKind::Excited => (1.0, C64::new(0.0, 0.0)),
            InitialKind::Product { s22, s12 } => {
                if !(0.0..=1.0).contains(&s22) {
                    return Err(Error::param(
                        "s22",
                        format!("must lie in [0, 1], got {s22}"),
                    ));
                }
                // Pure states sit on the bound; allow rounding there.
                if s12.norm_sqr() > s22 * (1.0 - s22) + 1e-15 {
                    return Err(Error::param(
                        "s12",
                        format!("|s12|^2 = {} exceeds s22(1 - s22)", s12.norm_sqr()),
                    ));
                }
                (s22, s12)
            }
        };
        let p = C64::new(p, 0.0);
        Ok(Self {
            s12: s,
            s22: p,
            s21s12: C64::new(s.norm_sqr(), 0.0),
            s12s12: s * s,
            s22s12: p * s,
            s22s22: p * p,
            ..Self::zero()
        })
    }

    pub fn get(&self, m: Moment) -> C64 {
        self.to_array()[m.index()]
    }

    pub fn set(&mut self, m: Moment, value: C64) {
        let mut v = self.to_array();
        v[m.index()] = value;
        *self = Self::from_array(v);
    }

    pub fn to_array(&self) -> [C64; N_MOMENTS] {
        [
            self.a,
            self.aa,
            self.ada,
            self.s12,
            self.s22,
            self.ad_s12,
            self.a_s12,
            self.a_s22,
            self.s21s12,
            self.s12s12,
            self.s22s12,
            self.s22s22,
        ]
    }

    pub fn from_array(v: [C64; N_MOMENTS]) -> Self {
        Self {
            a: v[0],
            aa: v[1],
            ada: v[2],
            s12: v[3],
            s22: v[4],
            ad_s12: v[5],
            a_s12: v[6],
            a_s22: v[7],
            s21s12: v[8],
            s12s12: v[9],
            s22s12: v[10],
            s22s22: v[11],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Moment, C64)> {
        Moment::ALL.into_iter().zip(self.to_array())
    }

    /// `self + k * other`, component-wise.
    pub fn axpy(&self, k: C64, other: &Self) -> Self {
        let mut out = self.to_array();
        for (o, x) in out.iter_mut().zip(other.to_array()) {
            *o += k * x;
        }
        Self::from_array(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.to_array().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// First moment that is NaN or infinite.
    pub fn first_non_finite(&self) -> Option<Moment> {
        self.iter()
            .find(|(_, z)| !(z.re.is_finite() && z.im.is_finite()))
            .map(|(m, _)| m)
    }

    /// Largest deviation of the second-order moments from the products of the
    /// first-order ones (zero for product states).
    pub fn factorization_defect(&self) -> f64 {
        let (a, s, p) = (self.a, self.s12, self.s22);
        [
            self.aa - a * a,
            self.ada - a.conj() * a,
            self.ad_s12 - a.conj() * s,
            self.a_s12 - a * s,
            self.a_s22 - a * p,
            self.s21s12 - s.conj() * s,
            self.s12s12 - s * s,
            self.s22s12 - p * s,
            self.s22s22 - p * p,
        ]
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
    }
}

impl Add for CumulantState {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.axpy(C64::new(1.0, 0.0), &rhs)
    }
}

impl Mul<f64> for CumulantState {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        Self::zero().axpy(C64::new(k, 0.0), &self)
    }
}
