use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use rulepomdp::cdpi::export_ilasp;
use rulepomdp_bench::config::ExperimentConfig;
use rulepomdp_bench::learn::{default_biases, examples, induce, load_biases, read_traces};
use rulepomdp_bench::run::{run_experiment, write_outputs, RunOptions};
use rulepomdp_bench::summary::{summarize, write_summary};

#[derive(Parser)]
#[command(name = "bench", about = "Run and summarise rule-guided POMDP planning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every sweep point, arm and episode of a config.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        /// Override the episode count.
        #[arg(long)]
        episodes: Option<usize>,
        /// Run only the first K sweep points.
        #[arg(long)]
        sweep_limit: Option<usize>,
        #[arg(long)]
        max_steps: Option<usize>,
    },
    /// Mean, standard deviation and standard error per arm and sweep point.
    Summarize { csv: PathBuf },
    /// Learn rules from a trace file.
    Induce {
        traces: PathBuf,
        /// Bias file, or `rocksample`, `rocksample:<head>,..`, `pocman`.
        bias: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write one ILASP task per head predicate.
    ExportIlasp {
        traces: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        bias: Option<String>,
    },
    /// Record episode traces with the first arm of a config.
    Trace {
        config: PathBuf,
        #[arg(long)]
        episodes: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, out, workers, episodes, sweep_limit, max_steps } => {
            let cfg = ExperimentConfig::load(&config)?;
            let result = run_experiment(&cfg, &RunOptions { workers, episodes, sweep_limit, max_steps })?;
            write_outputs(&result.rows, &out)?;
            let failures = result.rows.iter().filter(|r| !r.failure.is_empty()).count();
            let bad_bounds: u64 = result.rows.iter().map(|r| r.violations + r.gap_increases).sum();
            eprintln!("{}: {} rows, {failures} failures, {bad_bounds} bound violations", cfg.name, result.rows.len());
        }
        Command::Summarize { csv } => {
            let file = std::fs::File::open(&csv).with_context(|| format!("opening {}", csv.display()))?;
            write_summary(&summarize(file)?, std::io::stdout().lock())?;
        }
        Command::Induce { traces, bias, out } => {
            let ex = examples(read_traces(&traces)?)?;
            if ex.unfiltered {
                eprintln!("warning: no trace beat the mean return; using all traces");
            }
            let (rules, notes) = induce(&ex, &load_biases(&bias)?)?;
            for n in notes {
                eprintln!("{n}");
            }
            std::fs::write(&out, rules.to_string()).with_context(|| format!("writing {}", out.display()))?;
        }
        Command::ExportIlasp { traces, out, bias } => {
            let ex = examples(read_traces(&traces)?)?;
            let biases = match bias {
                Some(b) => load_biases(&b)?,
                None => default_biases(ex.kind),
            };
            std::fs::create_dir_all(&out)?;
            for p in export_ilasp(&ex.cdpis, &biases, &out)? {
                println!("{}", p.display());
            }
        }
        Command::Trace { config, episodes, out, workers } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.arms.truncate(1);
            let opts = RunOptions { workers, episodes: Some(episodes), sweep_limit: Some(1), max_steps: None };
            let result = run_experiment(&cfg, &opts)?;
            let mut file = std::io::BufWriter::new(
                std::fs::File::create(&out).with_context(|| format!("creating {}", out.display()))?,
            );
            for t in &result.traces {
                write!(file, "{t}")?;
            }
            file.flush()?;
            for r in result.rows.iter().filter(|r| !r.failure.is_empty()) {
                eprintln!("seed {}: {}", r.seed, r.failure);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
