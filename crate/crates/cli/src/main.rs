use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use acore_cli::{
    run_confset, run_critical, run_diagnose, run_region_2d, run_simulate, run_table_sweep, run_train_odds,
    ExperimentConfig, RunContext,
};
use anyhow::Result;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "acore", version, about = "Likelihood-free tests and confidence sets from estimated odds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides `experiment.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to all cores. Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw an observed dataset and a labeled sample.
    Simulate(Common),
    /// Train odds for every classifier and B; report held-out cross-entropy.
    TrainOdds(Common),
    /// Simulate (θ, τ) pairs and fit the critical-value surface.
    Critical(Common),
    /// Build one confidence set with a staged timing report.
    Confset(Common),
    /// Coverage diagnostic for each B′ in `experiment.b_prime_list`.
    Diagnose(Common),
    /// Repeated-experiment table: one row per classifier and B, plus the exact row.
    TableSweep(Common),
    /// Two-parameter regions for the signal/background model against the exact oracle.
    #[command(name = "region-2d")]
    Region2d(Common),
}

fn run(cli: Cli) -> Result<()> {
    let (name, common) = match &cli.command {
        Command::Simulate(c) => ("simulate", c),
        Command::TrainOdds(c) => ("train-odds", c),
        Command::Critical(c) => ("critical", c),
        Command::Confset(c) => ("confset", c),
        Command::Diagnose(c) => ("diagnose", c),
        Command::TableSweep(c) => ("table-sweep", c),
        Command::Region2d(c) => ("region-2d", c),
    };
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    let ctx = RunContext::new(&common.config, common.out.as_deref(), &cfg)?;
    let start = Instant::now();
    let outputs: Vec<String> = match cli.command {
        Command::Simulate(_) => run_simulate(&cfg, &ctx)?,
        Command::TrainOdds(_) => run_train_odds(&cfg, &ctx)?,
        Command::Critical(_) => run_critical(&cfg, &ctx)?,
        Command::Confset(_) => {
            let (set, _) = run_confset(&cfg, &ctx)?;
            println!("accepted {} of {} grid points", set.accepted.len(), set.grid_len());
            vec!["confset.csv".into(), "critical.csv".into(), "timings.txt".into()]
        }
        Command::Diagnose(_) => {
            let runs = run_diagnose(&cfg, &ctx)?;
            let mut out = vec!["diagnose_summary.csv".to_string()];
            for r in &runs {
                let verdict = if r.report.passed { "pass" } else { "fail" };
                println!("B'={}: {verdict} ({} flagged grid points)", r.b_prime, r.report.flagged.len());
                out.push(format!("coverage_bp{}.csv", r.b_prime));
            }
            out
        }
        Command::TableSweep(_) => {
            for r in run_table_sweep(&cfg, &ctx)? {
                println!(
                    "{:<9} B={:<6} CE {:.3} ± {:.3}  power {:.3}  size {:.1}% ± {:.1}  coverage {:.2}",
                    r.classifier,
                    r.b,
                    r.cross_entropy_mean,
                    r.cross_entropy_sd,
                    r.power_mean,
                    r.size_mean,
                    r.size_sd,
                    r.coverage
                );
            }
            vec!["table.csv".into()]
        }
        Command::Region2d(_) => {
            for r in run_region_2d(&cfg, &ctx)?.rows {
                println!(
                    "{:<9} B={:<6} size {:.3}  sym. diff. {:.3}  coverage {:.2}",
                    r.method, r.b, r.mean_size, r.mean_symmetric_difference, r.coverage
                );
            }
            vec!["region.csv".into(), "region_summary.csv".into()]
        }
    };
    ctx.write_manifest(name, &cfg, &outputs)?;
    eprintln!("{name} finished in {:.2}s; outputs in {}", start.elapsed().as_secs_f64(), ctx.out_dir.display());
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
