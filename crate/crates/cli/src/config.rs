//! Scenario configuration: TOML (or JSON) file, then command-line overrides.
//!
//! Angular rates in the `[params]` table are written in Hz; `two_pi = true`
//! must accompany them and means "multiply by 2π". With `two_pi = false`
//! they are read as rad/s unchanged.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use srmetro::metrology::{FitOptions, WindowPolicy};
use srmetro::SystemParams;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    PulseScan,
    Heterodyne,
    Coherent,
    Metrology,
    OracleCheck,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::PulseScan => "pulse-scan",
            Scenario::Heterodyne => "heterodyne",
            Scenario::Coherent => "coherent",
            Scenario::Metrology => "metrology",
            Scenario::OracleCheck => "oracle-check",
        }
    }
}

/// Starting parameter set before overrides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Base {
    Default,
    Coherent,
    Desk,
}

/// Fields whose values are angular frequencies.
const ANGULAR: [&str; 9] = [
    "cavity_freq",
    "atom_detuning",
    "cavity_loss",
    "coupling",
    "atom_decay",
    "pump_rate",
    "dephasing",
    "drive_detuning",
    "lo_detuning",
];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamOverrides {
    pub two_pi: Option<bool>,
    pub n_atoms: Option<u64>,
    pub cavity_freq: Option<f64>,
    pub atom_detuning: Option<f64>,
    pub cavity_loss: Option<f64>,
    pub coupling: Option<f64>,
    pub atom_decay: Option<f64>,
    pub pump_rate: Option<f64>,
    pub pump_duration: Option<f64>,
    pub dephasing: Option<f64>,
    pub drive_strength: Option<f64>,
    pub drive_detuning: Option<f64>,
    pub drive_duration: Option<f64>,
    pub lo_detuning: Option<f64>,
    pub detection_efficiency: Option<f64>,
}

impl ParamOverrides {
    fn values(&self) -> [(&'static str, Option<f64>); 14] {
        [
            ("n_atoms", self.n_atoms.map(|n| n as f64)),
            ("cavity_freq", self.cavity_freq),
            ("atom_detuning", self.atom_detuning),
            ("cavity_loss", self.cavity_loss),
            ("coupling", self.coupling),
            ("atom_decay", self.atom_decay),
            ("pump_rate", self.pump_rate),
            ("pump_duration", self.pump_duration),
            ("dephasing", self.dephasing),
            ("drive_strength", self.drive_strength),
            ("drive_detuning", self.drive_detuning),
            ("drive_duration", self.drive_duration),
            ("lo_detuning", self.lo_detuning),
            ("detection_efficiency", self.detection_efficiency),
        ]
    }
}

/// Sets `field` of `params`, converting Hz to rad/s for angular fields when
/// `two_pi` holds.
pub fn set_field(
    params: &mut SystemParams,
    field: &str,
    value: f64,
    two_pi: bool,
) -> Result<(), CliError> {
    let v = if two_pi && ANGULAR.contains(&field) {
        2.0 * PI * value
    } else {
        value
    };
    match field {
        "n_atoms" => {
            if !(value >= 1.0 && value.fract() == 0.0 && value < 2f64.powi(53)) {
                return Err(CliError::Config(format!(
                    "n_atoms must be a positive integer, got {value}"
                )));
            }
            params.n_atoms = value as u64;
        }
        "cavity_freq" => params.cavity_freq = v,
        "atom_detuning" => params.atom_detuning = v,
        "cavity_loss" => params.cavity_loss = v,
        "coupling" => params.coupling = v,
        "atom_decay" => params.atom_decay = v,
        "pump_rate" => params.pump_rate = v,
        "pump_duration" => params.pump_duration = v,
        "dephasing" => params.dephasing = v,
        "drive_strength" => params.drive_strength = v,
        "drive_detuning" => params.drive_detuning = v,
        "drive_duration" => params.drive_duration = v,
        "lo_detuning" => params.lo_detuning = v,
        "detection_efficiency" => params.detection_efficiency = v,
        other => return Err(CliError::Config(format!("unknown parameter '{other}'"))),
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub field: String,
    pub values: Vec<f64>,
}

impl Sweep {
    /// Parses `field=v1,v2,...`.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let (field, list) = text.split_once('=').ok_or_else(|| {
            CliError::Config(format!("sweep '{text}' is not of the form field=v1,v2"))
        })?;
        let values = list
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|e| CliError::Config(format!("sweep value '{v}': {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            field: field.trim().to_string(),
            values,
        })
    }
}

/// Noiseless Lorentzian spectrum fed straight into the fitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticLine {
    pub center_hz: f64,
    pub hwhm_hz: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub bin_hz: f64,
    pub bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleOptions {
    pub n_atoms: Vec<usize>,
    pub t_end: f64,
    pub dt: f64,
    pub stride: usize,
    /// Fock cutoff; `None` uses max(8, 4N).
    pub n_max: Option<usize>,
    /// Third-cumulant ratio below which cumulant and exact moments must agree.
    pub gate: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            n_atoms: vec![2, 3, 4],
            t_end: 1e-6,
            dt: 1e-8,
            stride: 1,
            n_max: None,
            gate: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub scenario: Option<Scenario>,
    pub base: Option<Base>,
    pub params: ParamOverrides,
    pub sweep: Option<Sweep>,
    pub seed: u64,
    pub trajectories: usize,
    /// Trajectories written individually (heterodyne).
    pub keep_trajectories: usize,
    /// Integration step; `None` picks 1 ns for the coherent scenario and
    /// 2 ns otherwise.
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub stride: usize,
    /// Fourier span per cycle, seconds.
    pub span: f64,
    /// Spans for the span scan (metrology).
    pub spans: Vec<f64>,
    pub span_cycles: usize,
    pub cycles: usize,
    /// Cycle times T_c for the Allan deviation. T_c only labels the samples;
    /// dead time is assumed to be folded into it.
    pub cycle_times: Vec<f64>,
    pub max_m: usize,
    pub window: WindowPolicy,
    pub fit: FitOptions,
    pub synthetic: Option<SyntheticLine>,
    pub oracle: OracleOptions,
    /// Largest tolerated share of rejected cycles.
    pub max_rejection: f64,
    pub out_dir: PathBuf,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scenario: None,
            base: None,
            params: ParamOverrides::default(),
            sweep: None,
            seed: 1,
            trajectories: 200,
            keep_trajectories: 10,
            dt: None,
            t_end: None,
            stride: 50,
            span: 1e-4,
            spans: vec![0.05e-3, 0.1e-3, 0.2e-3, 0.4e-3],
            span_cycles: 20,
            cycles: 200,
            cycle_times: vec![0.25, 0.5, 1.0],
            max_m: 64,
            window: WindowPolicy::default(),
            fit: FitOptions::default(),
            synthetic: None,
            oracle: OracleOptions::default(),
            max_rejection: 0.5,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads a `.json` file as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"))
        {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn scenario(&self) -> Result<Scenario, CliError> {
        self.scenario
            .ok_or_else(|| CliError::Config("no scenario given".into()))
    }

    /// Base parameters with every override applied.
    pub fn params(&self) -> Result<SystemParams, CliError> {
        let scenario = self.scenario()?;
        let base = self.base.unwrap_or(match scenario {
            Scenario::Coherent => Base::Coherent,
            Scenario::OracleCheck => Base::Desk,
            _ => Base::Default,
        });
        let mut p = match base {
            Base::Default => SystemParams::default(),
            Base::Coherent => SystemParams::coherent_drive(),
            Base::Desk => SystemParams::desk(2),
        };
        let angular_given = self
            .params
            .values()
            .iter()
            .any(|(name, v)| v.is_some() && ANGULAR.contains(name));
        let two_pi = match self.params.two_pi {
            Some(flag) => flag,
            None if angular_given => {
                return Err(CliError::Config(
                    "angular rates given without params.two_pi; set it to true for Hz or false for rad/s".into(),
                ))
            }
            None => false,
        };
        for (name, value) in self.params.values() {
            if let Some(v) = value {
                set_field(&mut p, name, v, two_pi)?;
            }
        }
        p.validate()?;
        Ok(p)
    }

    /// Parameter sets of the sweep (a single set without one).
    pub fn sweep_params(&self) -> Result<Vec<(Option<f64>, SystemParams)>, CliError> {
        let base = self.params()?;
        let Some(sweep) = &self.sweep else {
            return Ok(vec![(None, base)]);
        };
        if sweep.values.is_empty() {
            return Err(CliError::Config("sweep has no values".into()));
        }
        let two_pi = self.params.two_pi.unwrap_or(false);
        if ANGULAR.contains(&sweep.field.as_str()) && self.params.two_pi.is_none() {
            return Err(CliError::Config(
                "sweeping an angular rate requires params.two_pi".into(),
            ));
        }
        sweep
            .values
            .iter()
            .map(|&v| {
                let mut p = base.clone();
                set_field(&mut p, &sweep.field, v, two_pi)?;
                p.validate()?;
                Ok((Some(v), p))
            })
            .collect()
    }

    pub fn dt(&self) -> f64 {
        self.dt.unwrap_or(match self.scenario {
            // the drive's coherent field makes conditioned covariances stiff
            Some(Scenario::Coherent) => 1e-9,
            _ => 2e-9,
        })
    }

    pub fn t_end(&self) -> f64 {
        self.t_end.unwrap_or(match self.scenario {
            Some(Scenario::PulseScan) => 3e-4,
            _ => 1e-4,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hz_rates_need_the_flag() {
        let cfg =
            ScenarioConfig::from_toml("scenario = \"pulse-scan\"\n[params]\npump_rate = 20e3\n")
                .unwrap();
        assert!(matches!(cfg.params(), Err(CliError::Config(_))));
        let cfg = ScenarioConfig::from_toml(
            "scenario = \"pulse-scan\"\n[params]\ntwo_pi = true\npump_rate = 20e3\nn_atoms = 30000\n",
        )
        .unwrap();
        let p = cfg.params().unwrap();
        assert!((p.pump_rate - 2.0 * PI * 20e3).abs() < 1e-9);
        assert_eq!(p.n_atoms, 30_000);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(ScenarioConfig::from_toml("[params]\nwarp_factor = 9\n").is_err());
        assert!(ScenarioConfig::from_toml("scenario = \"teleport\"\n").is_err());
        assert!(ScenarioConfig::from_toml("[params]\nn_atoms = \"many\"\n").is_err());
    }

    #[test]
    fn json_is_equivalent() {
        let toml_cfg = ScenarioConfig::from_toml(
            "scenario = \"metrology\"\nseed = 9\n[sweep]\nfield = \"n_atoms\"\nvalues = [1e4, 2e4]\n",
        )
        .unwrap();
        let json_cfg = ScenarioConfig::from_json(
            r#"{"scenario": "metrology", "seed": 9, "sweep": {"field": "n_atoms", "values": [1e4, 2e4]}}"#,
        )
        .unwrap();
        assert_eq!(toml_cfg, json_cfg);
    }

    #[test]
    fn sweep_parsing_and_expansion() {
        let s = Sweep::parse("n_atoms=1e4, 2e4,3e4").unwrap();
        assert_eq!(s.values, vec![1e4, 2e4, 3e4]);
        assert!(Sweep::parse("n_atoms").is_err());
        let cfg = ScenarioConfig {
            scenario: Some(Scenario::PulseScan),
            sweep: Some(s),
            ..Default::default()
        };
        let sets = cfg.sweep_params().unwrap();
        assert_eq!(sets.len(), 3);
        assert_eq!(sets[2].1.n_atoms, 30_000);
        let bad = ScenarioConfig {
            scenario: Some(Scenario::PulseScan),
            sweep: Some(Sweep::parse("n_atoms=0.5").unwrap()),
            ..Default::default()
        };
        assert!(bad.sweep_params().is_err());
    }
}
