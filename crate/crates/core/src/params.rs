//! Physical parameters and the pump / drive pulse schedules.
//!
//! All rates and detunings are angular (rad/s). Dynamics run in the frame
//! rotating at the cavity frequency, so `cavity_freq` only enters absolute
//! frequency bookkeeping in the metrology layer.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemParams {
    /// Number of atoms N.
    pub n_atoms: u64,
    /// Cavity resonance ω_c.
    pub cavity_freq: f64,
    /// ω_a − ω_c.
    pub atom_detuning: f64,
    /// Photon loss rate κ.
    pub cavity_loss: f64,
    /// Single-atom coupling g.
    pub coupling: f64,
    /// Spontaneous emission rate γ.
    pub atom_decay: f64,
    /// Peak incoherent pump rate η.
    pub pump_rate: f64,
    /// Length of the top-hat pump window starting at t = 0, in seconds.
    pub pump_duration: f64,
    /// Dephasing rate χ.
    pub dephasing: f64,
    /// Coherent drive strength Ω in √(rad/s); zero disables the drive.
    pub drive_strength: f64,
    /// ω_d − ω_c.
    pub drive_detuning: f64,
    /// Length of the coherent drive window starting at t = 0, in seconds.
    pub drive_duration: f64,
    /// Local-oscillator detuning δ_l = ω_l − ω_c.
    pub lo_detuning: f64,
    /// Heterodyne detection efficiency ξ.
    pub detection_efficiency: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            n_atoms: 50_000,
            cavity_freq: TWO_PI * 456.6e12,
            atom_detuning: 0.0,
            cavity_loss: TWO_PI * 2.26e6,
            coupling: 6.53e3,
            atom_decay: TWO_PI * 0.38e3,
            pump_rate: TWO_PI * 20e3,
            pump_duration: 20e-6,
            dephasing: TWO_PI * 0.1,
            drive_strength: 0.0,
            drive_detuning: 0.0,
            drive_duration: 0.0,
            lo_detuning: TWO_PI * 1e6,
            detection_efficiency: 0.12,
        }
    }
}

impl SystemParams {
    /// Parameters of the coherently driven variant: no incoherent pump, a
    /// resonant drive of strength 2.9π×10⁴ √Hz for 10 µs.
    pub fn coherent_drive() -> Self {
        Self {
            pump_rate: 0.0,
            pump_duration: 0.0,
            drive_strength: 2.9 * PI * 1e4,
            drive_detuning: 0.0,
            drive_duration: 10e-6,
            ..Self::default()
        }
    }

    /// Small-N parameter set used for exact cross-checks:
    /// (g, κ, γ, η) = 2π × (0.1, 0.05, 0.01, 0.1) MHz with the pump left on.
    pub fn desk(n_atoms: u64) -> Self {
        Self {
            n_atoms,
            coupling: TWO_PI * 0.1e6,
            cavity_loss: TWO_PI * 0.05e6,
            atom_decay: TWO_PI * 0.01e6,
            pump_rate: TWO_PI * 0.1e6,
            pump_duration: 1.0,
            dephasing: 0.0,
            ..Self::default()
        }
    }

    pub fn n(&self) -> f64 {
        self.n_atoms as f64
    }

    pub fn atom_freq(&self) -> f64 {
        self.cavity_freq + self.atom_detuning
    }

    pub fn lo_freq(&self) -> f64 {
        self.cavity_freq + self.lo_detuning
    }

    pub fn pump(&self) -> TopHat {
        TopHat::new(self.pump_rate, self.pump_duration)
    }

    pub fn drive(&self) -> TopHat {
        TopHat::new(self.drive_strength, self.drive_duration)
    }

    /// Largest rate the integrator has to resolve.
    pub fn fastest_rate(&self) -> f64 {
        let n = self.n();
        let collective = self.coupling * n.sqrt();
        let superradiant = if self.cavity_loss > 0.0 {
            n * self.coupling * self.coupling / self.cavity_loss
        } else {
            collective
        };
        [
            self.cavity_loss,
            collective,
            superradiant,
            self.pump_rate,
            self.atom_decay,
            2.0 * self.dephasing,
            self.atom_detuning.abs(),
            self.drive_detuning.abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_atoms < 1 {
            return Err(Error::param("n_atoms", "must be at least 1"));
        }
        let non_negative = [
            ("cavity_loss", self.cavity_loss),
            ("coupling", self.coupling),
            ("atom_decay", self.atom_decay),
            ("pump_rate", self.pump_rate),
            ("pump_duration", self.pump_duration),
            ("dephasing", self.dephasing),
            ("drive_strength", self.drive_strength),
            ("drive_duration", self.drive_duration),
        ];
        for (name, value) in non_negative {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::param(
                    name,
                    format!("must be finite and >= 0, got {value}"),
                ));
            }
        }
        let finite = [
            ("cavity_freq", self.cavity_freq),
            ("atom_detuning", self.atom_detuning),
            ("drive_detuning", self.drive_detuning),
            ("lo_detuning", self.lo_detuning),
        ];
        for (name, value) in finite {
            if !value.is_finite() {
                return Err(Error::param(name, "must be finite"));
            }
        }
        if !(0.0..=1.0).contains(&self.detection_efficiency) {
            return Err(Error::param(
                "detection_efficiency",
                format!("must lie in [0, 1], got {}", self.detection_efficiency),
            ));
        }
        Ok(())
    }
}

/// Piecewise-constant pulse: `level` on `[0, duration)`, zero elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopHat {
    pub level: f64,
    pub duration: f64,
}

impl TopHat {
    pub fn new(level: f64, duration: f64) -> Self {
        Self { level, duration }
    }

    #[inline]
    pub fn at(&self, t: f64) -> f64 {
        if (0.0..self.duration).contains(&t) {
            self.level
        } else {
            0.0
        }
    }
}
