mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use slowave_core::detect::SystemKind;
use slowave_core::eval::{CvMode, Level};

use config::RunConfig;
use error::CliError;

#[derive(Parser)]
#[command(name = "slowave", version, about = "Detect pathological slowing in scalp EEG")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file or directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[arg(long, global = true, value_parser = parse::<SystemKind>)]
    system: Option<SystemKind>,
    #[arg(long, global = true, value_parser = parse::<Level>)]
    level: Option<Level>,
    #[arg(long, global = true, value_parser = parse::<CvMode>)]
    mode: Option<CvMode>,
    /// Cohort directory with a manifest.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Saved model.
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    /// EDF or CSV recording.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic cohort (EDF files, ground truth, manifest).
    Synth,
    /// Fit a system on a cohort and save the model.
    Train,
    /// Score one recording.
    Predict,
    /// Cross-validate a system on a cohort.
    Eval,
    /// Degrees-of-slowing report with a per-channel CSV.
    Report,
}

fn parse<T: std::str::FromStr<Err = slowave_core::Error>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: slowave_core::Error| e.to_string())
}

fn resolve(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    if let Some(s) = common.system {
        cfg.system = s;
    }
    if let Some(l) = common.level {
        cfg.level = l;
    }
    if let Some(m) = common.mode {
        cfg.mode = m;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    for (flag, slot) in [(&common.data, &mut cfg.data), (&common.model, &mut cfg.model), (&common.input, &mut cfg.input)] {
        if flag.is_some() {
            slot.clone_from(flag);
        }
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve(&cli.common)?;
    let out = cli.common.out.as_deref();
    let need_out = || out.ok_or_else(|| CliError::Config("--out is required".into()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.common.jobs.max(1))
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;
    pool.install(|| match cli.command {
        Command::Synth => commands::synth(&cfg, need_out()?),
        Command::Train => commands::train(&cfg, need_out()?),
        Command::Predict => commands::predict(&cfg, out),
        Command::Eval => commands::eval(&cfg, out, cli.common.jobs),
        Command::Report => commands::report(&cfg, out),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SLOWAVE_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
