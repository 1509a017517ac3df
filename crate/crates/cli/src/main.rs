//! `son-flha`: collect history, train FLHA artifacts, run and compare
//! handover mechanisms.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use log::info;

use son_flha::handover::MechanismKind;
use son_flha::pipeline;
use son_flha::scenario::ConfigError;
use son_flha::{sim, HistoryDataset, ScenarioConfig};

#[derive(Debug, Parser)]
#[command(name = "son-flha", version, about = "Self-optimising fuzzy-logic handover simulator")]
struct Cli {
    /// Scenario file (TOML). Desk-scale defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Run seed; overrides `rng_seed` from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Record serving-link history under the A3 baseline into <out>/history.csv.
    Collect {
        /// Steps to simulate; defaults to the config duration.
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Build FLHA-SON, FLHA-Q and expert artifacts into <out>.
    Train {
        /// History file; defaults to <out>/history.csv.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Simulate one mechanism and write its event log and KPIs into <out>.
    Run {
        /// a3, flha-expert, flha-q or flha-son.
        #[arg(long)]
        mechanism: MechanismKind,
        /// Artifact directory produced by `train`.
        #[arg(long, default_value = "out")]
        artifacts: PathBuf,
    },
    /// Run the speed x mechanism x seed cross-product and write comparison tables into <out>.
    Compare {
        #[arg(long, value_delimiter = ',', default_values_t = [30.0, 75.0, 120.0])]
        speeds: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = MechanismKind::ALL)]
        mechanisms: Vec<MechanismKind>,
        #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3])]
        seeds: Vec<u64>,
        /// Artifact directory produced by `train`.
        #[arg(long, default_value = "out")]
        artifacts: PathBuf,
    },
}

/// Errors that map to the usage exit code.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn load_config(cli: &Cli) -> anyhow::Result<ScenarioConfig> {
    let config = match &cli.config {
        None => ScenarioConfig::default(),
        Some(path) => ScenarioConfig::load(path).map_err(|e| match e {
            ConfigError::Io { path, source } => {
                anyhow::Error::new(UsageError(format!("cannot read config file {path}: {source}")))
            }
            other => anyhow::Error::new(other),
        })?,
    };
    Ok(match cli.seed {
        Some(seed) => config.with_seed(seed),
        None => config,
    })
}

fn collect(config: &ScenarioConfig, out: &Path, steps: Option<u64>) -> anyhow::Result<()> {
    let steps = steps.unwrap_or(config.sim_duration_steps);
    let history = sim::collect_history(config, steps, config.rng_seed)?;
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let path = out.join(pipeline::HISTORY_FILE);
    history.write_csv(&path)?;
    info!("wrote {} samples to {}", history.len(), path.display());
    Ok(())
}

fn train(config: &ScenarioConfig, out: &Path, history: Option<PathBuf>) -> anyhow::Result<()> {
    let path = history.unwrap_or_else(|| out.join(pipeline::HISTORY_FILE));
    if !path.exists() {
        anyhow::bail!("history file {} not found (run `collect` first)", path.display());
    }
    let history = HistoryDataset::read_csv(&path).with_context(|| format!("reading {}", path.display()))?;
    pipeline::train_all(config, &history, config.rng_seed, out)?;
    info!("wrote artifacts to {}", out.display());
    Ok(())
}

fn run(config: &ScenarioConfig, out: &Path, kind: MechanismKind, artifacts: &Path) -> anyhow::Result<()> {
    let mechanism = pipeline::load_mechanism(kind, config, artifacts)?;
    let output = sim::run(config, &mechanism, config.rng_seed)?;
    pipeline::write_run(out, &output)?;
    info!(
        "{kind}: {} handovers, HO ratio {}, written to {}",
        output.report.handovers,
        output.report.ho_ratio,
        out.display()
    );
    Ok(())
}

fn compare(
    config: &ScenarioConfig,
    out: &Path,
    speeds: &[f64],
    mechanisms: &[MechanismKind],
    seeds: &[u64],
    artifacts: &Path,
) -> anyhow::Result<()> {
    if speeds.is_empty() || mechanisms.is_empty() || seeds.is_empty() {
        return Err(UsageError("speeds, mechanisms and seeds must each be non-empty".into()).into());
    }
    let cells = pipeline::compare_runs(config, speeds, mechanisms, seeds, artifacts)?;
    pipeline::write_comparison(out, &cells)?;
    info!("{} runs compared, tables written to {}", cells.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();

    let result = load_config(&cli).and_then(|config| match &cli.command {
        Command::Collect { steps } => collect(&config, &cli.out, *steps),
        Command::Train { history } => train(&config, &cli.out, history.clone()),
        Command::Run { mechanism, artifacts } => run(&config, &cli.out, *mechanism, artifacts),
        Command::Compare {
            speeds,
            mechanisms,
            seeds,
            artifacts,
        } => compare(&config, &cli.out, speeds, mechanisms, seeds, artifacts),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<UsageError>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
