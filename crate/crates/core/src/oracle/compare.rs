use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::oracle::{evolve, DensityState, OracleRun, Space};
use crate::params::SystemParams;
use crate::sde::rk4_path;
use crate::state::{CumulantState, Moment};

/// Moments whose exact magnitude stays below this over a window are not
/// scored (they vanish identically in both descriptions).
pub const NEGLIGIBLE_MOMENT: f64 = 1e-14;

/// Exact and closed-model moments on a common time grid.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub times: Vec<f64>,
    pub exact: Vec<CumulantState>,
    pub model: Vec<CumulantState>,
    /// max |third cumulant| / max |second-order moment| of the exact state.
    pub third_relative: Vec<f64>,
    pub run: OracleRun,
}

/// Per-moment deviation over a window of samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    /// max_t |model − exact| / max_t |exact|, worst moment.
    pub max_relative: f64,
    pub worst_moment: Option<&'static str>,
    /// Samples in the window.
    pub samples: usize,
    pub window_end: f64,
}

impl Comparison {
    /// Length of the leading run of samples whose third-cumulant ratio stays
    /// below `gate`.
    pub fn gated_len(&self, gate: f64) -> usize {
        self.third_relative
            .iter()
            .position(|&r| !(r < gate))
            .unwrap_or(self.third_relative.len())
    }

    /// Deviation over the first `len` samples.
    pub fn deviation(&self, len: usize) -> Deviation {
        let len = len.min(self.times.len());
        let mut worst = (0.0, None);
        for m in Moment::ALL {
            let scale = self.exact[..len]
                .iter()
                .map(|s| s.get(m).norm())
                .fold(0.0, f64::max);
            if scale < NEGLIGIBLE_MOMENT {
                continue;
            }
            let diff = self.exact[..len]
                .iter()
                .zip(&self.model[..len])
                .map(|(e, c)| (e.get(m) - c.get(m)).norm())
                .fold(0.0, f64::max);
            if diff / scale > worst.0 {
                worst = (diff / scale, Some(m.name()));
            }
        }
        Deviation {
            max_relative: worst.0,
            worst_moment: worst.1,
            samples: len,
            window_end: if len > 0 { self.times[len - 1] } else { 0.0 },
        }
    }
}

/// Integrates the exact master equation and the closed (unconditioned)
/// moment equations from the ground state, cavity in vacuum.
pub fn compare_from_ground(
    params: &SystemParams,
    n_max: usize,
    t_end: f64,
    dt: f64,
    stride: usize,
) -> Result<Comparison> {
    let space = Space::new(params.n_atoms as usize, n_max);
    let run = evolve(params, &DensityState::ground(space), t_end, dt, stride)?;
    let path = rk4_path(params, CumulantState::zero(), t_end, run.dt, stride)?;
    let mut times = Vec::new();
    let mut exact = Vec::new();
    let mut model = Vec::new();
    let mut third_relative = Vec::new();
    let mut j = 0;
    let tol = 1e-6 * run.dt;
    for s in &run.samples {
        while j < path.len() && path[j].0 < s.time - tol {
            j += 1;
        }
        if j < path.len() && (path[j].0 - s.time).abs() <= tol {
            times.push(s.time);
            exact.push(s.moments);
            model.push(path[j].1);
            third_relative.push(s.third.relative());
        }
    }
    Ok(Comparison {
        times,
        exact,
        model,
        third_relative,
        run,
    })
}
