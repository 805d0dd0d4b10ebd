//! Photon number, mean Dicke quantum numbers and the collective spin vector.

use serde::{Deserialize, Serialize};

use crate::state::CumulantState;

/// Tolerance on the imaginary parts of A_x, A_y.
pub const SPIN_REALNESS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DickeNumbers {
    pub j_bar: f64,
    pub m_bar: f64,
    /// The J̄ radicand fell below −1e-9·N² (closure breakdown); `j_bar` is
    /// clamped to zero.
    pub flagged: bool,
}

/// M̄ = N(⟨σ²²⟩ − ½), J̄ = √(3N/4 + N(N−1)(⟨σ₁²¹σ₂¹²⟩ + ⟨σ₁²²σ₂²²⟩ − ⟨σ²²⟩ + ¼)).
pub fn dicke_numbers(state: &CumulantState, n_atoms: u64) -> DickeNumbers {
    let n = n_atoms as f64;
    let m_bar = n * (state.s22.re - 0.5);
    let radicand =
        0.75 * n + n * (n - 1.0) * (state.s21s12.re + state.s22s22.re - state.s22.re + 0.25);
    let flagged = radicand < -1e-9 * n * n;
    DickeNumbers {
        j_bar: radicand.max(0.0).sqrt(),
        m_bar,
        flagged,
    }
}

/// (A_x, A_y, A_z) of the collective spin. A_z is computed as M̄.
pub fn spin_vector(state: &CumulantState, n_atoms: u64) -> [f64; 3] {
    let n = n_atoms as f64;
    // ⟨σ¹²⟩ + ⟨σ²¹⟩ = 2 Re s12,  i(⟨σ¹²⟩ − ⟨σ²¹⟩) = −2 Im s12
    let ax = n * state.s12.re;
    let ay = -n * state.s12.im;
    [ax, ay, n * (state.s22.re - 0.5)]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservableRecord {
    pub time: f64,
    pub photon_number: f64,
    pub j_bar: f64,
    pub m_bar: f64,
    pub spin: [f64; 3],
    pub j_bar_per_atom: f64,
    pub m_bar_per_atom: f64,
    pub spin_per_atom: [f64; 3],
    pub flagged: bool,
}

impl ObservableRecord {
    pub fn new(time: f64, state: &CumulantState, n_atoms: u64) -> Self {
        let n = n_atoms as f64;
        let d = dicke_numbers(state, n_atoms);
        let spin = spin_vector(state, n_atoms);
        Self {
            time,
            photon_number: state.ada.re,
            j_bar: d.j_bar,
            m_bar: d.m_bar,
            spin,
            j_bar_per_atom: d.j_bar / n,
            m_bar_per_atom: d.m_bar / n,
            spin_per_atom: spin.map(|x| x / n),
            flagged: d.flagged,
        }
    }

    pub fn spin_length(&self) -> f64 {
        self.spin.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

pub fn observe(times: &[f64], states: &[CumulantState], n_atoms: u64) -> Vec<ObservableRecord> {
    times
        .iter()
        .zip(states)
        .map(|(&t, s)| ObservableRecord::new(t, s, n_atoms))
        .collect()
}

/// Peak, width and end of a photon-number pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseShape {
    pub peak_index: usize,
    pub peak_time: f64,
    pub peak_photons: f64,
    /// Full width at half maximum, linearly interpolated; `None` when the
    /// record does not contain both half-maximum crossings.
    pub fwhm: Option<f64>,
    /// First sample after the peak below `tail_fraction` of the peak.
    pub tail_index: Option<usize>,
}

/// Pulse shape of a photon-number series.
pub fn pulse_shape(times: &[f64], photons: &[f64], tail_fraction: f64) -> Option<PulseShape> {
    let (peak_index, &peak_photons) = photons
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    let half = 0.5 * peak_photons;
    let cross = |i: usize, j: usize| {
        let (y0, y1) = (photons[i], photons[j]);
        times[i] + (half - y0) / (y1 - y0) * (times[j] - times[i])
    };
    let rise = (1..=peak_index)
        .rev()
        .find(|&i| photons[i - 1] < half)
        .map(|i| cross(i - 1, i));
    let fall = (peak_index + 1..photons.len())
        .find(|&i| photons[i] < half)
        .map(|i| cross(i - 1, i));
    Some(PulseShape {
        peak_index,
        peak_time: times[peak_index],
        peak_photons,
        fwhm: rise.zip(fall).map(|(a, b)| b - a),
        tail_index: (peak_index..photons.len())
            .find(|&i| photons[i] < tail_fraction * peak_photons),
    })
}
