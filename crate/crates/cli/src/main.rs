mod commands;
mod config;
mod mock_scorer;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser};

use commands::Command;
use config::RunConfig;
use output::{OutputDir, Summary};

/// Legal document retrieval toolkit: BM25 retrieval, passage segmentation,
/// training-pair generation, n-gram in-domain selection, reranking runs and
/// F2 evaluation.
#[derive(Parser, Debug)]
#[command(name = "legalret", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// TOML run configuration. Flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random choice (the dev split).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, env = "LEGALRET_OUT")]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Command::MockScorer(args) = &cli.command {
        return match mock_scorer::run(args) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("mock-scorer: {e:#}");
                ExitCode::FAILURE
            }
        };
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.global.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.global.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.global.out {
        cfg.paths.out = Some(out.clone());
    }
    let command = cli.command;
    command.apply_overrides(&mut cfg)?;
    cfg.validate().context("invalid configuration")?;
    command.preflight(&cfg)?;

    if let Some(n) = cli.global.workers {
        if n == 0 {
            anyhow::bail!("--workers must be >= 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker pool")?;
    }

    let out_dir = cfg
        .paths
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("out"));
    let mut out = OutputDir::create(&out_dir)?;
    let name = command.name();
    let mut summary = Summary::default();
    let started = Instant::now();
    let mut steps = || -> Result<()> {
        out.write("config.effective.toml", cfg.to_toml().as_bytes())?;
        command.execute(&cfg, &mut out, &mut summary)?;
        summary.elapsed("total", started);
        let summary_name = format!("{name}.summary.json");
        let mut listed = out.file_names();
        listed.push(summary_name.clone());
        let json = std::mem::take(&mut summary).into_json(name, &cfg.hash(), listed);
        out.write_json(&summary_name, &json)
    };
    let result = steps();
    match result {
        Ok(()) => {
            eprintln!("{name}: wrote {}", out.dir().display());
            Ok(())
        }
        Err(e) => {
            out.discard();
            Err(e)
        }
    }
}
