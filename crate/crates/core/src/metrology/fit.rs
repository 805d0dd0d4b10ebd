use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrology::PowerSpectrum;
use crate::params::SystemParams;

/// Minimum bins for a fit.
pub const MIN_BINS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    /// Only bins within this distance (Hz) of the initial peak enter the fit;
    /// `None` fits every bin above DC.
    pub half_window: Option<f64>,
    pub max_iter: usize,
    /// Relative parameter change that counts as converged.
    pub tol: f64,
    /// A peak must exceed this multiple of the median bin.
    pub min_peak_ratio: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            half_window: None,
            max_iter: 200,
            tol: 1e-8,
            min_peak_ratio: 3.0,
        }
    }
}

/// L(f) = A w² / ((f − f₀)² + w²) + B
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lorentzian {
    pub center: f64,
    pub hwhm: f64,
    pub amplitude: f64,
    pub offset: f64,
}

impl Lorentzian {
    pub fn eval(&self, f: f64) -> f64 {
        let d = f - self.center;
        let w2 = self.hwhm * self.hwhm;
        self.amplitude * w2 / (d * d + w2) + self.offset
    }

    fn to_array(self) -> [f64; 4] {
        [self.center, self.hwhm, self.amplitude, self.offset]
    }

    fn from_array(p: [f64; 4]) -> Self {
        Self {
            center: p[0],
            hwhm: p[1],
            amplitude: p[2],
            offset: p[3],
        }
    }

    /// Value and gradient with respect to (f₀, w, A, B).
    fn eval_grad(&self, f: f64) -> (f64, [f64; 4]) {
        let d = f - self.center;
        let w = self.hwhm;
        let den = d * d + w * w;
        let shape = w * w / den;
        let a = self.amplitude;
        let grad = [
            2.0 * a * w * w * d / (den * den),
            2.0 * a * w * d * d / (den * den),
            shape,
            1.0,
        ];
        (a * shape + self.offset, grad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Converged,
    MaxIterations,
    NoDominantPeak,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzianFit {
    pub line: Lorentzian,
    pub status: FitStatus,
    pub iterations: usize,
    /// RMS residual over the fitted bins.
    pub residual_rms: f64,
    pub bins_used: usize,
}

impl LorentzianFit {
    pub fn converged(&self) -> bool {
        self.status == FitStatus::Converged
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn initial_guess(freqs: &[f64], power: &[f64], floor: f64) -> Lorentzian {
    let (k, &peak) = power
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let half = floor + 0.5 * (peak - floor);
    let left = (0..k).rev().find(|&i| power[i] < half).unwrap_or(0);
    let right = (k + 1..power.len())
        .find(|&i| power[i] < half)
        .unwrap_or(power.len() - 1);
    let df = freqs.get(1).map_or(1.0, |f| f - freqs[0]);
    let hwhm = (0.5 * (freqs[right] - freqs[left])).max(0.5 * df);
    Lorentzian {
        center: freqs[k],
        hwhm,
        amplitude: peak - floor,
        offset: floor,
    }
}

fn cost(line: &Lorentzian, freqs: &[f64], power: &[f64]) -> f64 {
    freqs
        .iter()
        .zip(power)
        .map(|(&f, &s)| {
            let r = s - line.eval(f);
            r * r
        })
        .sum()
}

/// Solves the 4×4 system by Gaussian elimination with partial pivoting.
fn solve4(mut m: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let piv = (col..4).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-300 || !m[piv][col].is_finite() {
            return None;
        }
        m.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..4 {
            let f = m[row][col] / m[col][col];
            for c in col..4 {
                m[row][c] -= f * m[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let s: f64 = (row + 1..4).map(|c| m[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / m[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Least-squares Lorentzian fit of the spectrum above DC.
///
/// Damped Gauss–Newton (diagonally scaled) with a step-halving line search.
pub fn fit_lorentzian(spec: &PowerSpectrum, opts: &FitOptions) -> Result<LorentzianFit> {
    if spec.len() < MIN_BINS {
        return Err(Error::TooFewBins {
            bins: spec.len(),
            required: MIN_BINS,
        });
    }
    let (mut freqs, mut power) = (&spec.freqs[1..], &spec.power[1..]);
    if let Some(hw) = opts.half_window {
        let k = power
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .unwrap_or(0);
        let lo = freqs.partition_point(|&f| f < freqs[k] - hw);
        let hi = freqs.partition_point(|&f| f <= freqs[k] + hw);
        freqs = &freqs[lo..hi];
        power = &power[lo..hi];
    }
    if freqs.len() < MIN_BINS {
        return Err(Error::TooFewBins {
            bins: freqs.len(),
            required: MIN_BINS,
        });
    }

    let floor = median(power);
    let mut line = initial_guess(freqs, power, floor);
    let peak = line.amplitude + floor;
    let done = |line: Lorentzian, status, iterations| {
        let residual_rms = (cost(&line, freqs, power) / freqs.len() as f64).sqrt();
        Ok(LorentzianFit {
            line,
            status,
            iterations,
            residual_rms,
            bins_used: freqs.len(),
        })
    };
    if !(peak > opts.min_peak_ratio * floor) || !(peak > 0.0) {
        return done(line, FitStatus::NoDominantPeak, 0);
    }

    let mut current = cost(&line, freqs, power);
    let mut lambda = 1e-3;
    for iter in 1..=opts.max_iter {
        let mut jtj = [[0.0; 4]; 4];
        let mut jtr = [0.0; 4];
        for (&f, &s) in freqs.iter().zip(power) {
            let (v, g) = line.eval_grad(f);
            let r = s - v;
            for i in 0..4 {
                jtr[i] += g[i] * r;
                for j in 0..4 {
                    jtj[i][j] += g[i] * g[j];
                }
            }
        }
        let mut damped = jtj;
        for (i, row) in damped.iter_mut().enumerate() {
            row[i] += lambda * jtj[i][i];
        }
        let Some(mut delta) = solve4(damped, jtr) else {
            lambda *= 10.0;
            continue;
        };

        let base = line.to_array();
        let mut accepted = None;
        for _ in 0..40 {
            let mut trial = base;
            for i in 0..4 {
                trial[i] += delta[i];
            }
            let cand = Lorentzian::from_array(trial);
            if cand.hwhm > 0.0 {
                let c = cost(&cand, freqs, power);
                if c <= current {
                    accepted = Some((cand, c));
                    break;
                }
            }
            delta.iter_mut().for_each(|d| *d *= 0.5);
        }
        let Some((cand, c)) = accepted else {
            // no descent direction left at working precision
            return done(line, FitStatus::Converged, iter);
        };
        let rel = (0..4)
            .map(|i| (cand.to_array()[i] - base[i]).abs() / base[i].abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        line = cand;
        current = c;
        lambda = (lambda * 0.3).max(1e-12);
        if rel < opts.tol {
            return done(line, FitStatus::Converged, iter);
        }
    }
    done(line, FitStatus::MaxIterations, opts.max_iter)
}

/// Fit result in the absolute-frequency bookkeeping of the heterodyne setup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumFit {
    pub fit: LorentzianFit,
    /// Beat frequency ω_beat = 2π f₀ (rad/s).
    pub beat_freq: f64,
    /// Half width at half maximum in rad/s.
    pub hwhm: f64,
    /// Peak-to-floor ratio A/B.
    pub snr: f64,
    /// ω_f = ω_l − ω_beat.
    pub inferred_atom_freq: f64,
    /// (ω_f − ω_a)/ω_a.
    pub fractional_diff: f64,
}

impl SpectrumFit {
    pub fn converged(&self) -> bool {
        self.fit.converged()
    }
}

/// Fits the beat note and infers the emitter frequency from it.
///
/// Errors with `FrequencyAmbiguity` when the inferred frequency sits farther
/// than |δ_l| from the atomic line, i.e. when the beat could belong to the
/// image side of the local oscillator.
pub fn lorentzian_fit(
    spec: &PowerSpectrum,
    params: &SystemParams,
    opts: &FitOptions,
) -> Result<SpectrumFit> {
    let fit = fit_lorentzian(spec, opts)?;
    let beat_freq = 2.0 * PI * fit.line.center;
    // ω_f − ω_a = δ_l − ω_beat − (ω_a − ω_c), formed without the optical
    // carrier so the difference keeps full precision
    let offset = params.lo_detuning - beat_freq - params.atom_detuning;
    let inferred_atom_freq = params.atom_freq() + offset;
    if fit.converged() && offset.abs() > params.lo_detuning.abs() {
        return Err(Error::FrequencyAmbiguity {
            offset,
            lo: params.lo_detuning,
        });
    }
    Ok(SpectrumFit {
        fit,
        beat_freq,
        hwhm: 2.0 * PI * fit.line.hwhm,
        snr: fit.line.amplitude / fit.line.offset,
        inferred_atom_freq,
        fractional_diff: offset / params.atom_freq(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(line: Lorentzian, df: f64, bins: usize) -> PowerSpectrum {
        PowerSpectrum::from_fn(df, bins, |f| line.eval(f))
    }

    #[test]
    fn recovers_noiseless_line() {
        let truth = Lorentzian {
            center: 1e6,
            hwhm: 14e3,
            amplitude: 5.0,
            offset: 0.1,
        };
        let spec = synthetic(truth, 1e3, 2001);
        for half_window in [None, Some(0.3e6)] {
            let opts = FitOptions {
                half_window,
                ..Default::default()
            };
            let fit = fit_lorentzian(&spec, &opts).unwrap();
            assert!(fit.converged(), "{fit:?}");
            let got = fit.line.to_array();
            for (g, t) in got.iter().zip(truth.to_array()) {
                assert!((g / t - 1.0).abs() < 1e-6, "{got:?}");
            }
        }
    }

    #[test]
    fn off_grid_center_recovered() {
        let truth = Lorentzian {
            center: 987_654.3,
            hwhm: 9.1e3,
            amplitude: 40.0,
            offset: 2.0,
        };
        let fit = fit_lorentzian(&synthetic(truth, 2.5e3, 1000), &FitOptions::default()).unwrap();
        assert!(fit.converged());
        assert!((fit.line.center - truth.center).abs() < 1e-6 * truth.center);
        assert!((fit.line.hwhm / truth.hwhm - 1.0).abs() < 1e-6);
    }

    #[test]
    fn flat_spectrum_is_not_converged() {
        let spec = PowerSpectrum::from_fn(1e3, 500, |_| 2.0);
        let fit = fit_lorentzian(&spec, &FitOptions::default()).unwrap();
        assert_eq!(fit.status, FitStatus::NoDominantPeak);
        assert!(!fit.converged());
    }

    #[test]
    fn too_few_bins() {
        let spec = PowerSpectrum::from_fn(1e3, 5, |_| 1.0);
        assert!(matches!(
            fit_lorentzian(&spec, &FitOptions::default()),
            Err(Error::TooFewBins { bins: 5, .. })
        ));
    }

    #[test]
    fn inferred_frequency_bookkeeping() {
        let p = SystemParams::default();
        let beat_hz = p.lo_detuning / (2.0 * PI) - 250.0;
        let truth = Lorentzian {
            center: beat_hz,
            hwhm: 14e3,
            amplitude: 100.0,
            offset: 2.0,
        };
        let out = lorentzian_fit(&synthetic(truth, 1e3, 3000), &p, &FitOptions::default()).unwrap();
        // ω_f − ω_a = δ_l − ω_beat = 2π·250 Hz
        let expected = 2.0 * PI * 250.0 / p.atom_freq();
        assert!((out.fractional_diff - expected).abs() < 1e-6 * expected.abs());
        assert!((out.snr - 50.0).abs() < 1e-6);
        assert!((out.hwhm / (2.0 * PI * 14e3) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn beat_beyond_lo_offset_is_ambiguous() {
        let p = SystemParams {
            lo_detuning: 2.0 * PI * 0.2e6,
            ..SystemParams::default()
        };
        // beat at 0.5 MHz implies ω_f − ω_a = −2π·0.3 MHz, outside |δ_l|
        let truth = Lorentzian {
            center: 0.5e6,
            hwhm: 10e3,
            amplitude: 10.0,
            offset: 1.0,
        };
        assert!(matches!(
            lorentzian_fit(&synthetic(truth, 1e3, 1000), &p, &FitOptions::default()),
            Err(Error::FrequencyAmbiguity { .. })
        ));
    }

    #[test]
    fn solve4_matches_known_solution() {
        let m = [
            [4.0, 1.0, 0.0, 0.0],
            [1.0, 3.0, 1.0, 0.0],
            [0.0, 1.0, 2.0, 0.5],
            [0.0, 0.0, 0.5, 1.0],
        ];
        let x = [1.0, -2.0, 0.5, 3.0];
        let b: [f64; 4] = std::array::from_fn(|i| (0..4).map(|j| m[i][j] * x[j]).sum());
        let got = solve4(m, b).unwrap();
        for i in 0..4 {
            assert!((got[i] - x[i]).abs() < 1e-12);
        }
    }
}
