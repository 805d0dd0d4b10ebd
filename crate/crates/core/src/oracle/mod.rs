//! Exact master-equation reference for a handful of atoms.
//!
//! The full 2^N atomic product space times a truncated Fock ladder is
//! integrated with fixed-step RK4; the resulting density matrices supply the
//! exact values of every moment the cumulant model stores, the third-order
//! cumulants its closure discards, and ⟨Ĵ²⟩.

mod compare;
mod density;
mod lindblad;
mod space;

pub use compare::{compare_from_ground, Comparison, Deviation, NEGLIGIBLE_MOMENT};
pub use density::{DensityState, MomentOperators, ThirdCumulants, SYMMETRY_TOL};
pub use lindblad::{
    default_cutoff, evolve, moment_derivative, Lindblad, OracleRun, OracleSample, CUTOFF_TOL,
    MAX_ATOMS, MAX_PHOTONS,
};
pub use space::{product, Monomial, Space};
