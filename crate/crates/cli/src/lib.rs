//! Configuration-driven scenario runner for the `srmetro` crate.

pub mod config;
pub mod error;
pub mod output;
pub mod scenarios;

use serde_json::Value;

pub use config::{Scenario, ScenarioConfig, Sweep};
pub use error::CliError;
pub use output::{Manifest, OutputDir, Table};

/// Result of one scenario run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: Value,
    pub manifest: Manifest,
}

/// Runs the configured scenario and writes its outputs, `summary.json` and
/// `manifest.json` into `cfg.out_dir`.
pub fn run(cfg: &ScenarioConfig) -> Result<RunOutput, CliError> {
    let scenario = cfg.scenario()?;
    cfg.params()?;
    let mut out = OutputDir::create(&cfg.out_dir)?;
    let summary = scenarios::run_scenario(cfg, &mut out)?;
    out.json("summary.json", &summary)?;
    let manifest = out.finish(scenario.name(), cfg.seed, cfg)?;
    Ok(RunOutput { summary, manifest })
}
