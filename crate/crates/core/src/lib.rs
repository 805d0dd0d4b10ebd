//! Second-order cumulant simulation of superradiant pulses from pumped atoms
//! in a cavity, conditioned on heterodyne detection, plus the metrology chain
//! that turns simulated photocurrents into clock-frequency estimates.
//!
//! * [`model`]: drift and backaction of the closed moment equations
//! * [`sde`]: Euler–Maruyama trajectories and ensembles
//! * [`observables`]: photon number, Dicke numbers, collective spin
//! * [`metrology`]: photocurrent, spectra, Lorentzian fits, Allan deviation
//! * [`oracle`]: exact Lindblad integration for a few atoms

pub mod error;
pub mod metrology;
pub mod model;
pub mod observables;
pub mod oracle;
pub mod params;
pub mod sde;
pub mod state;

pub use error::{Error, Result};
pub use params::{SystemParams, TopHat};
pub use state::{CumulantState, InitialKind, Moment};
