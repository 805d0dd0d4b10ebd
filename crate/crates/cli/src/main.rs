use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use srmetro_cli::{run, CliError, Scenario, ScenarioConfig, Sweep};

#[derive(Parser)]
#[command(
    name = "srmetro",
    version,
    about = "Superradiant pulse and clock-metrology scenarios"
)]
struct Cli {
    #[command(subcommand)]
    scenario: Command,

    /// TOML or JSON scenario file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trajectories: Option<usize>,
    #[arg(long, global = true)]
    cycles: Option<usize>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Integration step in seconds.
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Simulated duration in seconds.
    #[arg(long, global = true)]
    t_end: Option<f64>,
    /// Fourier span in seconds.
    #[arg(long, global = true)]
    span: Option<f64>,
    /// Parameter sweep, `field=v1,v2,...`.
    #[arg(long, global = true)]
    sweep: Option<String>,
    /// Worker threads.
    #[arg(long, global = true, env = "SRMETRO_WORKERS")]
    workers: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Unconditioned pulses, optionally swept over one parameter.
    PulseScan,
    /// Conditioned ensemble against the unconditioned reference.
    Heterodyne,
    /// Coherently driven variant.
    Coherent,
    /// Spectra, Lorentzian fits, span scan and Allan deviation.
    Metrology,
    /// Cumulant model against the exact master equation for a few atoms.
    OracleCheck,
}

impl From<Command> for Scenario {
    fn from(c: Command) -> Self {
        match c {
            Command::PulseScan => Scenario::PulseScan,
            Command::Heterodyne => Scenario::Heterodyne,
            Command::Coherent => Scenario::Coherent,
            Command::Metrology => Scenario::Metrology,
            Command::OracleCheck => Scenario::OracleCheck,
        }
    }
}

fn resolve(cli: &Cli) -> Result<ScenarioConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    let wanted = Scenario::from(cli.scenario);
    match cfg.scenario {
        Some(s) if s != wanted => {
            return Err(CliError::Config(format!(
                "config is for scenario {}, not {}",
                s.name(),
                wanted.name()
            )))
        }
        _ => cfg.scenario = Some(wanted),
    }
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    if let Some(v) = cli.trajectories {
        cfg.trajectories = v;
    }
    if let Some(v) = cli.cycles {
        cfg.cycles = v;
    }
    if let Some(v) = &cli.out_dir {
        cfg.out_dir = v.clone();
    }
    if let Some(v) = cli.dt {
        cfg.dt = Some(v);
    }
    if let Some(v) = cli.t_end {
        cfg.t_end = Some(v);
    }
    if let Some(v) = cli.span {
        cfg.span = v;
    }
    if let Some(s) = &cli.sweep {
        cfg.sweep = Some(Sweep::parse(s)?);
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = (|| {
        if let Some(n) = cli.workers {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::Config(format!("workers: {e}")))?;
        }
        let cfg = resolve(&cli)?;
        run(&cfg)
    })();
    match result {
        Ok(out) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&out.summary).unwrap_or_default()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            let report = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{report}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
