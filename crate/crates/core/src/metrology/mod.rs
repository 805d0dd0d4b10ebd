//! From conditioned trajectories to clock statistics: heterodyne current,
//! periodogram, Lorentzian line fit, per-cycle fractional frequency and the
//! Allan deviation of repeated cycles.

mod allan;
mod cycle;
mod fit;
mod photocurrent;
mod spectrum;

pub use allan::{allan_deviation, AllanSeries, PowerLaw};
pub use cycle::{
    analyze_current, measurement_cycle, run_cycles, CycleConfig, CycleOutcome, CycleSet,
};
pub use fit::{
    fit_lorentzian, lorentzian_fit, FitOptions, FitStatus, Lorentzian, LorentzianFit, SpectrumFit,
    MIN_BINS,
};
pub use photocurrent::{photocurrent, quadrature, PhotocurrentRecord};
pub use spectrum::{periodogram, power_spectrum, PowerSpectrum, Window, WindowPolicy};
