mod config;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use apr_core::artifacts::{read_jsonl, RunLayout, UnitId};
use apr_core::assemble::PatchCandidate;
use apr_core::corpus::{convert_directory, load_benchmark};
use apr_core::pipeline::{default_run_id, PipelineError, Run};
use apr_core::rank::{validation_order, RankingStrategy, StrategyKind};
use apr_core::report::{self, RunReport};
use apr_core::validate::sanity_gates;
use clap::{Args, Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use crate::config::ConfigArgs;

/// Sample, filter, rank and validate language-model patches for a benchmark
/// of known bugs.
#[derive(Debug, Parser)]
#[command(name = "repair", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Every stage end to end, resuming from whatever is already on disk.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        dir: RunDirArgs,
    },
    /// Build a benchmark manifest from bug directories holding meta.json,
    /// the buggy file and the fixed file.
    Convert {
        input: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Sanity gates and sampling for every bug and setting.
    Generate {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        dir: RunDirArgs,
    },
    /// Filter, rank and validate a generated run.
    Validate {
        #[command(flatten)]
        dir: RunDirArgs,
    },
    /// Print validation orders under a ranking strategy without touching the
    /// run.
    Rank {
        #[command(flatten)]
        dir: RunDirArgs,
        /// JSON lines of candidates to rank instead of a run directory.
        #[arg(long, conflicts_with_all = ["run_dir", "resume"])]
        candidates: Option<PathBuf>,
        #[arg(long)]
        strategy: StrategyKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Summarize a run directory into report files.
    Report {
        #[command(flatten)]
        dir: RunDirArgs,
    },
    /// Check that every reference fix passes and every buggy version fails.
    Sanity {
        #[command(flatten)]
        config: ConfigArgs,
    },
}

#[derive(Debug, Clone, Default, Args)]
struct RunDirArgs {
    #[arg(long)]
    run_dir: Option<PathBuf>,
    /// Continue `runs/<RUN_ID>`.
    #[arg(long, value_name = "RUN_ID", conflicts_with = "run_dir")]
    resume: Option<String>,
}

impl RunDirArgs {
    fn existing(&self) -> Result<PathBuf> {
        match (&self.run_dir, &self.resume) {
            (Some(d), _) => Ok(d.clone()),
            (None, Some(id)) => Ok(Path::new("runs").join(id)),
            (None, None) => bail!("give --run-dir or --resume"),
        }
    }
}

fn start(config: &ConfigArgs, dir: &RunDirArgs) -> Result<Run> {
    if dir.run_dir.is_none() {
        if let Some(id) = &dir.resume {
            return Ok(Run::open(&Path::new("runs").join(id))?);
        }
    }
    let config = config.resolve()?;
    let path = match &dir.run_dir {
        Some(d) => d.clone(),
        None => Path::new("runs").join(default_run_id(&config)),
    };
    let run = Run::create(&path, config)?;
    tracing::info!(run_dir = %path.display(), bugs = run.bugs().len(), "run directory ready");
    Ok(run)
}

fn print_report(report: &RunReport, dir: &Path) {
    print!("{}", report::render_table(report));
    println!("run directory: {}", dir.display());
}

fn rank_file(path: &Path, strategy: RankingStrategy) -> Result<()> {
    let candidates: Vec<PatchCandidate> = read_jsonl(path)?;
    let by_index: HashMap<usize, &PatchCandidate> =
        candidates.iter().map(|c| (c.sample_index, c)).collect();
    for i in validation_order(&candidates, strategy) {
        let c = by_index[&i];
        let entropy = match strategy.kind {
            StrategyKind::MeanEntropy => c.mean_entropy,
            _ => c.sum_entropy,
        };
        match entropy {
            Some(e) => println!("{}\t{e:.6}", c.sample_index),
            None => println!("{}\t-", c.sample_index),
        }
    }
    Ok(())
}

fn rank_run(dir: &Path, kind: StrategyKind, seed: u64) -> Result<()> {
    let run = Run::open(dir)?;
    let plan = run.plan()?;
    let layout: &RunLayout = run.layout();
    for unit in &plan.units {
        let path = layout.filtered(unit);
        if !path.exists() {
            bail!("{} ({}) has not been filtered; run validate first", unit.bug_id, unit.setting);
        }
        let candidates: Vec<PatchCandidate> = read_jsonl(&path)?;
        let alive: Vec<PatchCandidate> = candidates
            .into_iter()
            .filter(|c| !c.status.is_filtered_out())
            .collect();
        let strategy = RankingStrategy::new(kind, seed).keyed(&unit_key(unit));
        let order: Vec<String> = validation_order(&alive, strategy)
            .into_iter()
            .map(|i| i.to_string())
            .collect();
        println!("{}\t{}\t{}", unit.bug_id, unit.setting, order.join(" "));
    }
    Ok(())
}

fn unit_key(unit: &UnitId) -> String {
    format!("{}/{}", unit.bug_id, unit.setting)
}

fn sanity(config: &ConfigArgs) -> Result<()> {
    let config = config.resolve()?;
    if config.benchmark.as_os_str().is_empty() {
        bail!("give --benchmark");
    }
    let bugs = load_benchmark(&config.benchmark)?;
    let failures = sanity_gates(&bugs, config.parallel_validate)?;
    if failures.is_empty() {
        println!("sanity gates passed for {} bugs", bugs.len());
        Ok(())
    } else {
        Err(PipelineError::Sanity(failures).into())
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, dir } => {
            let run = start(&config, &dir)?;
            let report = run.run()?;
            print_report(&report, run.layout().root());
        }
        Command::Convert { input, output } => {
            let records = convert_directory(&input, &output)
                .with_context(|| format!("converting {}", input.display()))?;
            println!("wrote {} records to {}", records.len(), output.display());
        }
        Command::Generate { config, dir } => {
            let run = start(&config, &dir)?;
            let plan = run.generate_all()?;
            println!(
                "generated {} units ({} skipped) in {}",
                plan.units.len(),
                plan.skipped.len(),
                run.layout().root().display()
            );
        }
        Command::Validate { dir } => {
            let run = Run::open(&dir.existing()?)?;
            let plan = run.validate_all()?;
            println!("validated {} units", plan.units.len());
        }
        Command::Rank {
            dir,
            candidates,
            strategy,
            seed,
        } => match candidates {
            Some(path) => rank_file(&path, RankingStrategy::new(strategy, seed))?,
            None => rank_run(&dir.existing()?, strategy, seed)?,
        },
        Command::Report { dir } => {
            let dir = dir.existing()?;
            let report = report::write_run_report(&RunLayout::new(&dir))?;
            print_report(&report, &dir);
        }
        Command::Sanity { config } => sanity(&config)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e
                .downcast_ref::<PipelineError>()
                .map_or(1, PipelineError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
