use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use deid_audit_cli::{CliError, CrfMode, Pipeline, RunConfig, Stage};

/// Memorization audit pipeline for de-identification taggers.
#[derive(Debug, Parser)]
#[command(name = "deid-audit", version)]
struct Args {
    /// Stage to run: gen-corpus, train, perturb, extract, ks, cutoff, brute,
    /// mia, report or all. Missing prerequisites run first.
    #[arg(value_name = "STAGE")]
    stage_pos: Option<String>,
    #[arg(long, value_name = "NAME", conflicts_with = "stage_pos")]
    stage: Option<String>,
    /// TOML config; built-in defaults when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    crf: Option<CrfMode>,
    /// Truncate the train split to its first N reports.
    #[arg(long, value_name = "N")]
    overfit_dial: Option<usize>,
    /// Repeat for more log output.
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

fn run(args: Args) -> Result<(), CliError> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = args.out {
        cfg.out_dir = o;
    }
    if let Some(c) = args.crf {
        cfg.crf = c;
    }
    if let Some(n) = args.overfit_dial {
        cfg.overfit_dial = Some(n);
    }
    let stage = args.stage.or(args.stage_pos).unwrap_or_else(|| "all".to_string());
    let target = if stage == "all" { None } else { Some(stage.parse::<Stage>()?) };
    let mut pipeline = Pipeline::new(cfg)?;
    match target {
        None => pipeline.run_all(),
        Some(s) => pipeline.run(s),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let level = match args.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
