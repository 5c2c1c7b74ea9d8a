use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use dpg_core::harness::{fmt_g6, read_csv, run_experiment, scenario_catalog, summarize, write_csv, ExperimentConfig};

#[derive(Parser)]
#[command(name = "dpg", version, about = "Directed Policy Gradient experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a scenario over several seeds and write its learning curve as CSV.
    Run {
        scenario: String,
        /// Number of seeds, 0..N.
        #[arg(long)]
        seeds: Option<u64>,
        #[arg(long)]
        episodes: Option<usize>,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Config override, repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// List the scenario presets.
    ListScenarios,
    /// Windowed mean and standard deviation across seeds of a curve CSV.
    Summarize {
        csv: PathBuf,
        #[arg(long, default_value_t = 100)]
        window: usize,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run {
            scenario,
            seeds,
            episodes,
            out,
            set,
        } => {
            let mut cfg = ExperimentConfig::scenario(&scenario)?;
            for pair in &set {
                cfg.set_pair(pair)?;
            }
            if let Some(n) = seeds {
                cfg.seeds = (0..n).collect();
            }
            if let Some(n) = episodes {
                cfg.episodes = n;
            }
            if out.is_some() {
                cfg.out = out;
            }
            cfg.validate()?;
            let started = Instant::now();
            let result = run_experiment(&cfg)?;
            log::info!(
                "{}: {} seeds x {} episodes in {:.1}s, final-100 mean return {}",
                cfg.name,
                cfg.seeds.len(),
                cfg.episodes,
                started.elapsed().as_secs_f64(),
                fmt_g6(result.curve.final_mean(100))
            );
            match &cfg.out {
                Some(path) => {
                    let mut buf = Vec::new();
                    write_csv(&result.curve, &mut buf)?;
                    fs::write(path, buf).with_context(|| format!("writing {}", path.display()))?;
                }
                None => write_csv(&result.curve, &mut io::stdout().lock())?,
            }
        }
        Command::ListScenarios => {
            let mut out = io::stdout().lock();
            for s in scenario_catalog() {
                writeln!(out, "{:<24} {}", s.name, s.description)?;
            }
        }
        Command::Summarize { csv, window } => {
            let text = fs::read_to_string(&csv).with_context(|| format!("reading {}", csv.display()))?;
            let curve = read_csv(&text)?;
            let mut out = io::stdout().lock();
            writeln!(out, "start,end,mean,std,seeds")?;
            for r in summarize(&curve, window)? {
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    r.start,
                    r.end,
                    fmt_g6(r.mean),
                    fmt_g6(r.std),
                    r.seeds
                )?;
            }
        }
    }
    Ok(())
}
