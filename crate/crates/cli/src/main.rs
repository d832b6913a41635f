use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use mmsim::sim::output::{
    drops_file_name, summary_file_name, summary_json, sweep_file_name, write_run_artifacts,
    write_sweep_artifact, ArtifactWriter,
};
use mmsim::sim::{
    preset, run_experiment, sweep_tx_power, ScenarioConfig, CONFIG_KEYS_HELP, PRESETS,
    SWEEP_POWERS_DBM,
};

#[derive(Parser)]
#[command(
    name = "mmsim",
    version = mmsim::sim::version(),
    about = "Monte Carlo evaluation of MU-MIMO precoders over mmWave channels",
    after_long_help = CONFIG_KEYS_HELP,
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write <name>_drops.csv and <name>_summary.json.
    #[command(after_long_help = CONFIG_KEYS_HELP)]
    Run(RunArgs),
    /// Sweep the transmit power and write <name>_sweep.csv.
    #[command(after_long_help = CONFIG_KEYS_HELP)]
    Sweep(RunArgs),
    /// Print a preset as a scenario file.
    Preset { name: String },
    /// List the available presets.
    ListPresets,
    /// Check a scenario without running it.
    #[command(after_long_help = CONFIG_KEYS_HELP)]
    Validate(SourceArgs),
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct SourceArgs {
    /// Named preset (see `list-presets`).
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Scenario file (TOML).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Output directory, created if absent.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Override the scenario's master seed.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads; 0 runs on the calling thread. Defaults to the core count.
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
    /// Overwrite existing artifacts.
    #[arg(long)]
    force: bool,
    /// Also print the aggregate JSON to stdout.
    #[arg(long)]
    summary: bool,
}

impl SourceArgs {
    fn load(&self) -> mmsim::Result<ScenarioConfig> {
        let cfg = match (&self.preset, &self.config) {
            (Some(name), _) => preset(name)?,
            (None, Some(path)) => ScenarioConfig::load(path)?,
            (None, None) => unreachable!("clap enforces one source"),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunArgs {
    fn scenario(&self) -> mmsim::Result<ScenarioConfig> {
        let mut cfg = self.source.load()?;
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        Ok(cfg)
    }

    fn jobs(&self) -> usize {
        self.jobs
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}

/// Writes one document to stdout. A closed pipe (`| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    let mut out = io::stdout().lock();
    match writeln!(out, "{text}").and_then(|()| out.flush()) {
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn run(args: &RunArgs) -> Result<()> {
    let cfg = args.scenario()?;
    let out = ArtifactWriter::new(&args.out, args.force)
        .with_context(|| format!("cannot prepare output directory {}", args.out.display()))?;
    out.check(&[&drops_file_name(&cfg.name), &summary_file_name(&cfg.name)])?;

    let result = run_experiment(&cfg, args.jobs())?;
    for path in write_run_artifacts(&result, &out)? {
        info!("wrote {}", path.display());
    }
    if args.summary {
        emit(&summary_json(&result)?)?;
    }
    Ok(())
}

fn sweep(args: &RunArgs) -> Result<()> {
    let cfg = args.scenario()?;
    let powers = cfg
        .sweep
        .as_ref()
        .map_or_else(|| SWEEP_POWERS_DBM.to_vec(), |s| s.tx_powers_dbm.clone());
    let out = ArtifactWriter::new(&args.out, args.force)
        .with_context(|| format!("cannot prepare output directory {}", args.out.display()))?;
    out.check(&[&sweep_file_name(&cfg.name)])?;

    let result = sweep_tx_power(&cfg, &powers, args.jobs())?;
    let path = write_sweep_artifact(&result, &out)?;
    info!("wrote {}", path.display());
    if args.summary {
        emit(&serde_json::to_string_pretty(&result)?)?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => run(&args),
        Command::Sweep(args) => sweep(&args),
        Command::Preset { name } => emit(preset(&name)?.to_toml_string().trim_end()),
        Command::ListPresets => {
            let lines: Vec<String> = PRESETS
                .iter()
                .map(|(name, description)| format!("{name:<8} {description}"))
                .collect();
            emit(&lines.join("\n"))
        }
        Command::Validate(source) => {
            let cfg = source.load()?;
            eprintln!(
                "ok: {} ({} cells, {} drops each)",
                cfg.name,
                cfg.cells().len(),
                cfg.drops
            );
            Ok(())
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<mmsim::Error>() {
        Some(e) if e.is_config_error() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MMSIM_LOG", "warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
