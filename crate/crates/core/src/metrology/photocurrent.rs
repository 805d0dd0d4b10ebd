use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sde::TrajectoryRecord;

/// Heterodyne current sampled at the integration step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotocurrentRecord {
    pub dt: f64,
    pub times: Vec<f64>,
    pub current: Vec<f64>,
}

impl PhotocurrentRecord {
    pub fn from_samples(dt: f64, current: Vec<f64>) -> Self {
        let times = (0..current.len()).map(|i| i as f64 * dt).collect();
        Self { dt, times, current }
    }

    pub fn duration(&self) -> f64 {
        self.current.len() as f64 * self.dt
    }

    pub fn len(&self) -> usize {
        self.current.len()
    }

    pub fn is_empty(&self) -> bool {
        self.current.is_empty()
    }
}

/// √(ξκ/2) Re[e^{−iδ_l t} ⟨â†⟩(t)] at every step, without shot noise.
pub fn quadrature(traj: &TrajectoryRecord) -> Result<PhotocurrentRecord> {
    if traj.dws.is_empty() {
        return Err(Error::MissingIncrements);
    }
    let p = &traj.params;
    let k = (p.detection_efficiency * p.cavity_loss / 2.0).sqrt();
    let current = (0..traj.n_steps())
        .map(|i| {
            let t = i as f64 * traj.dt;
            k * (C64::from_polar(1.0, -p.lo_detuning * t) * traj.field[i].conj()).re
        })
        .collect();
    Ok(PhotocurrentRecord::from_samples(traj.dt, current))
}

/// J(tᵢ) = √(ξκ/2) Re[e^{−iδ_l tᵢ} ⟨â†⟩(tᵢ)] + dWᵢ/dt, with dWᵢ the increment
/// that drove step i of the state.
pub fn photocurrent(traj: &TrajectoryRecord) -> Result<PhotocurrentRecord> {
    if traj.params.detection_efficiency <= 0.0 {
        return Err(Error::param(
            "detection_efficiency",
            "photocurrent needs a trajectory recorded with detection (ξ > 0)",
        ));
    }
    let mut rec = quadrature(traj)?;
    for (j, dw) in rec.current.iter_mut().zip(&traj.dws) {
        *j += dw / traj.dt;
    }
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::SystemParams;
    use crate::sde::{run_trajectory, RunConfig};
    use crate::state::CumulantState;

    fn record_with_field(field: Vec<C64>, dws: Vec<f64>, dt: f64) -> TrajectoryRecord {
        TrajectoryRecord {
            seed: 0,
            stream: 0,
            params: SystemParams::default(),
            dt,
            stride: 1,
            times: (0..field.len()).map(|i| i as f64 * dt).collect(),
            states: vec![CumulantState::zero(); field.len()],
            dws,
            field,
            positivity: Default::default(),
        }
    }

    #[test]
    fn empty_field_gives_pure_shot_noise() {
        let p = SystemParams {
            pump_rate: 0.0,
            ..SystemParams::default()
        };
        let traj = run_trajectory(&p, &RunConfig::new(2e-5, 1e-9), 4).unwrap();
        let j = photocurrent(&traj).unwrap();
        assert_eq!(j.len(), traj.dws.len());
        for (x, dw) in j.current.iter().zip(&traj.dws) {
            assert_eq!(*x, dw / 1e-9);
        }
        let var = j.current.iter().map(|x| x * x).sum::<f64>() / j.len() as f64;
        assert!(
            (var * 1e-9 - 1.0).abs() < 0.05,
            "variance x dt = {}",
            var * 1e-9
        );
    }

    #[test]
    fn real_amplitude_reads_out_its_quadrature() {
        let alpha = 3.5;
        let rec = record_with_field(vec![C64::new(alpha, 0.0); 3], vec![0.0; 2], 1e-9);
        let j = photocurrent(&rec).unwrap();
        let p = SystemParams::default();
        let k = (p.detection_efficiency * p.cavity_loss / 2.0).sqrt();
        // t = 0: e^{-iδ t} = 1
        assert!((j.current[0] - k * alpha).abs() < 1e-12 * k * alpha);
    }

    #[test]
    fn missing_increments_rejected() {
        let rec = record_with_field(vec![C64::new(0.0, 0.0)], vec![], 1e-9);
        assert!(matches!(photocurrent(&rec), Err(Error::MissingIncrements)));
    }
}
