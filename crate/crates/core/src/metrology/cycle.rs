use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrology::{
    lorentzian_fit, photocurrent, power_spectrum, quadrature, FitOptions, PhotocurrentRecord,
    SpectrumFit, WindowPolicy,
};
use crate::params::SystemParams;
use crate::sde::{run_stream, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CycleConfig {
    /// Fourier span starting at the beginning of the pump, in seconds.
    pub span: f64,
    /// Integration step, also the photocurrent sampling interval.
    pub dt: f64,
    pub window: WindowPolicy,
    pub fit: FitOptions,
    /// Replace the photocurrent by its noiseless quadrature (test harness).
    pub noiseless: bool,
}

impl Default for CycleConfig {
    fn default() -> Self {
        Self {
            span: 1e-4,
            dt: 2e-9,
            window: WindowPolicy::default(),
            fit: FitOptions::default(),
            noiseless: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CycleOutcome {
    Sample { y: f64, fit: SpectrumFit },
    Rejected { reason: String },
}

impl CycleOutcome {
    pub fn sample(&self) -> Option<f64> {
        match self {
            CycleOutcome::Sample { y, .. } => Some(*y),
            CycleOutcome::Rejected { .. } => None,
        }
    }

    pub fn fit(&self) -> Option<&SpectrumFit> {
        match self {
            CycleOutcome::Sample { fit, .. } => Some(fit),
            CycleOutcome::Rejected { .. } => None,
        }
    }
}

/// Spectrum and fit of an already recorded current.
pub fn analyze_current(
    current: &PhotocurrentRecord,
    params: &SystemParams,
    config: &CycleConfig,
) -> Result<CycleOutcome> {
    let spec = power_spectrum(current, config.span, &config.window)?;
    match lorentzian_fit(&spec, params, &config.fit) {
        Ok(fit) if fit.converged() => Ok(CycleOutcome::Sample {
            y: fit.fractional_diff,
            fit,
        }),
        Ok(fit) => Ok(CycleOutcome::Rejected {
            reason: format!("fit not converged: {:?}", fit.fit.status),
        }),
        Err(e @ (Error::FrequencyAmbiguity { .. } | Error::TooFewBins { .. })) => {
            Ok(CycleOutcome::Rejected {
                reason: e.to_string(),
            })
        }
        Err(e) => Err(e),
    }
}

/// One cycle: conditioned run over the span, photocurrent, spectrum, fit.
///
/// Numerical failures of the run reject the cycle; invalid inputs are errors.
pub fn measurement_cycle(
    params: &SystemParams,
    config: &CycleConfig,
    seed: u64,
    stream: u64,
) -> Result<CycleOutcome> {
    let run = RunConfig::new(config.span, config.dt).with_stride(usize::MAX);
    let traj = match run_stream(params, &run, seed, stream) {
        Ok(t) => t,
        Err(e @ Error::Trajectory { .. }) => {
            return Ok(CycleOutcome::Rejected {
                reason: e.to_string(),
            })
        }
        Err(e) => return Err(e),
    };
    let current = if config.noiseless {
        quadrature(&traj)?
    } else {
        photocurrent(&traj)?
    };
    analyze_current(&current, params, config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleSet {
    pub outcomes: Vec<CycleOutcome>,
}

impl CycleSet {
    /// Fractional-frequency samples of the accepted cycles, in cycle order.
    pub fn samples(&self) -> Vec<f64> {
        self.outcomes
            .iter()
            .filter_map(CycleOutcome::sample)
            .collect()
    }

    pub fn fits(&self) -> Vec<&SpectrumFit> {
        self.outcomes.iter().filter_map(CycleOutcome::fit).collect()
    }

    pub fn rejected(&self) -> usize {
        self.outcomes.len() - self.fits().len()
    }

    pub fn rejection_rate(&self) -> f64 {
        self.rejected() as f64 / self.outcomes.len().max(1) as f64
    }
}

/// `n_cycles` independent cycles; cycle `i` uses stream `i` of `base_seed`.
pub fn run_cycles(
    params: &SystemParams,
    config: &CycleConfig,
    n_cycles: usize,
    base_seed: u64,
) -> Result<CycleSet> {
    let outcomes = (0..n_cycles as u64)
        .into_par_iter()
        .map(|i| measurement_cycle(params, config, base_seed, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(CycleSet { outcomes })
}
