use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllanSeries {
    pub cycle_time: f64,
    pub y: Vec<f64>,
    /// Averaging factors m; τ = m·T_c.
    pub m: Vec<usize>,
    pub taus: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Adjacent block pairs entering each σ.
    pub pairs: Vec<usize>,
}

/// σ(τ) = A·(τ / 1 s)^p
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    pub amplitude: f64,
    pub exponent: f64,
}

impl PowerLaw {
    pub fn eval(&self, tau: f64) -> f64 {
        self.amplitude * tau.powf(self.exponent)
    }
}

/// Non-overlapping Allan deviation for m = 1, 2, 4, … ≤ `max_m`, keeping
/// only factors with at least two adjacent block pairs (three blocks).
pub fn allan_deviation(y: &[f64], cycle_time: f64, max_m: usize) -> Result<AllanSeries> {
    if y.len() < 4 {
        return Err(Error::InsufficientSamples {
            required: 4,
            got: y.len(),
        });
    }
    if !(cycle_time > 0.0) {
        return Err(Error::param("cycle_time", "must be positive"));
    }
    let mut out = AllanSeries {
        cycle_time,
        y: y.to_vec(),
        m: vec![],
        taus: vec![],
        sigma: vec![],
        pairs: vec![],
    };
    let mut m = 1;
    while m <= max_m {
        let blocks: Vec<f64> = y
            .chunks_exact(m)
            .map(|c| c.iter().sum::<f64>() / m as f64)
            .collect();
        if blocks.len() < 3 {
            break;
        }
        let pairs = blocks.len() - 1;
        let avar = blocks
            .windows(2)
            .map(|w| (w[1] - w[0]).powi(2))
            .sum::<f64>()
            / (2.0 * pairs as f64);
        out.m.push(m);
        out.taus.push(m as f64 * cycle_time);
        out.sigma.push(avar.sqrt());
        out.pairs.push(pairs);
        m *= 2;
    }
    Ok(out)
}

impl AllanSeries {
    /// Log-log least-squares power law over τ ∈ [tau_min, tau_max], each
    /// point weighted by its number of block pairs (var ln σ ∝ 1/pairs).
    pub fn power_law(&self, tau_min: f64, tau_max: f64) -> Option<PowerLaw> {
        let pts: Vec<(f64, f64, f64)> = self
            .taus
            .iter()
            .zip(&self.sigma)
            .zip(&self.pairs)
            .filter(|((&t, &s), _)| {
                t >= tau_min * (1.0 - 1e-12) && t <= tau_max * (1.0 + 1e-12) && s > 0.0
            })
            .map(|((&t, &s), &n)| (t.ln(), s.ln(), n as f64))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let sw: f64 = pts.iter().map(|p| p.2).sum();
        let mx = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
        let my = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
        let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
        let exponent = sxy / sxx;
        Some(PowerLaw {
            amplitude: (my - exponent * mx).exp(),
            exponent,
        })
    }
}
