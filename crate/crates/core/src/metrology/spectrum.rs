use std::cell::RefCell;

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrology::PhotocurrentRecord;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    #[default]
    Rectangular,
    Hann,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowPolicy {
    pub window: Window,
    /// FFT length as a multiple of the sample count (1 = no padding).
    pub zero_pad: usize,
}

impl Default for WindowPolicy {
    fn default() -> Self {
        Self {
            window: Window::Rectangular,
            zero_pad: 1,
        }
    }
}

/// One-sided power spectral density on a uniform grid starting at 0 Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSpectrum {
    pub df: f64,
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
}

impl PowerSpectrum {
    pub fn len(&self) -> usize {
        self.power.len()
    }

    pub fn is_empty(&self) -> bool {
        self.power.is_empty()
    }

    /// ∫ S(f) df as a Riemann sum.
    pub fn total_power(&self) -> f64 {
        self.power.iter().sum::<f64>() * self.df
    }

    /// Spectrum on an arbitrary uniform grid, e.g. a synthetic line shape.
    pub fn from_fn(df: f64, n_bins: usize, f: impl Fn(f64) -> f64) -> Self {
        let freqs: Vec<f64> = (0..n_bins).map(|k| k as f64 * df).collect();
        let power = freqs.iter().map(|&x| f(x)).collect();
        Self { df, freqs, power }
    }
}

/// One-sided periodogram of uniformly sampled data.
///
/// Normalized so that `Σ power · df` equals the mean square of the windowed
/// samples divided by the mean square of the window (the plain mean square
/// for the rectangular window).
pub fn periodogram(samples: &[f64], dt: f64, policy: &WindowPolicy) -> PowerSpectrum {
    let m = samples.len();
    let len = m * policy.zero_pad.max(1);
    let weights: Vec<f64> = match policy.window {
        Window::Rectangular => vec![1.0; m],
        Window::Hann => (0..m)
            .map(|i| {
                let x = (std::f64::consts::PI * i as f64 / m as f64).sin();
                x * x
            })
            .collect(),
    };
    let norm: f64 = weights.iter().map(|w| w * w).sum();
    let mut buf: Vec<C64> = samples
        .iter()
        .zip(&weights)
        .map(|(x, w)| C64::new(x * w, 0.0))
        .chain(std::iter::repeat(C64::new(0.0, 0.0)))
        .take(len)
        .collect();
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len).process(&mut buf));

    let half = len / 2;
    let df = 1.0 / (len as f64 * dt);
    let scale = dt / norm;
    let power = (0..=half)
        .map(|k| {
            let folded = if k == 0 || (len % 2 == 0 && k == half) {
                1.0
            } else {
                2.0
            };
            folded * scale * buf[k].norm_sqr()
        })
        .collect();
    let freqs = (0..=half).map(|k| k as f64 * df).collect();
    PowerSpectrum { df, freqs, power }
}

/// Spectrum of the first `span` seconds of the record.
pub fn power_spectrum(
    record: &PhotocurrentRecord,
    span: f64,
    policy: &WindowPolicy,
) -> Result<PowerSpectrum> {
    let duration = record.duration();
    let n = (span / record.dt).round() as usize;
    if !(span > 0.0) || n == 0 || n > record.len() {
        return Err(Error::InvalidSpan { span, duration });
    }
    let tol = 1e-6 * record.dt;
    for (i, w) in record.times[..n].windows(2).enumerate() {
        if ((w[1] - w[0]) - record.dt).abs() > tol {
            return Err(Error::NonUniformSampling { index: i + 1 });
        }
    }
    Ok(periodogram(&record.current[..n], record.dt, policy))
}
