//! Experiment runner behind the `acore` binary. Every command reads an
//! [`ExperimentConfig`], writes CSV files with a header row into the output
//! directory and records a `manifest.txt` with the config hash and versions.
//!
//! All randomness flows from the config seed, and parallel work is seeded per
//! task index, so every CSV is bit-identical across reruns and thread counts.
//! Wall-clock timings go to `timings.txt` only.

pub mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use acore::model_zoo::{Dataset, ModelKind, ModelSpec, ParamGrid};
use acore::pipeline::surface_for;
use acore::rng::{child_seed, seeded, SimRng};
use acore::{
    calibrate, collect_coverage, confidence_set, critical_surface, cross_entropy, fit_coverage_curve,
    fit_quantile, generate_labeled_sample, mc_critical_surface, replicate, replicate_exact, simulate_tau_set,
    train_odds, ClassifierSpec, ConfidenceSet, CoverageReport, CoverageSample, CriticalSurface, ExactOddsOracle,
    LogOdds, NullMode, PipelineConfig, QuantileKind, StageTimings, SweepRow,
};
use anyhow::{bail, Context, Result};
use sha2::{Digest, Sha256};

pub use config::{ConfigError, ExperimentConfig};

/// Where a command writes and what goes into its manifest.
#[derive(Clone, Debug)]
pub struct RunContext {
    pub out_dir: PathBuf,
    pub config_path: PathBuf,
    pub config_text: String,
}

impl RunContext {
    pub fn new(config_path: &Path, out_override: Option<&Path>, cfg: &ExperimentConfig) -> Result<Self> {
        let config_text = std::fs::read_to_string(config_path)
            .with_context(|| format!("cannot read config {}", config_path.display()))?;
        let out_dir = match (out_override, &cfg.output_dir) {
            (Some(p), _) => p.to_path_buf(),
            (None, Some(d)) => config_path.parent().unwrap_or(Path::new(".")).join(d),
            (None, None) => PathBuf::from("out"),
        };
        std::fs::create_dir_all(&out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
        Ok(Self { out_dir, config_path: config_path.to_path_buf(), config_text })
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.out_dir.join(name);
        let f = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
        Ok(BufWriter::new(f))
    }

    pub fn write_manifest(&self, command: &str, cfg: &ExperimentConfig, outputs: &[String]) -> Result<()> {
        let digest = Sha256::digest(self.config_text.as_bytes());
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        let mut w = self.create("manifest.txt")?;
        writeln!(w, "command = {command}")?;
        writeln!(w, "config = {}", self.config_path.display())?;
        writeln!(w, "config_sha256 = {hex}")?;
        writeln!(w, "seed = {}", cfg.seed)?;
        writeln!(w, "model = {}", cfg.model.kind.name())?;
        writeln!(w, "acore_version = {}", acore::VERSION)?;
        writeln!(w, "acore_cli_version = {}", env!("CARGO_PKG_VERSION"))?;
        writeln!(w, "threads = {}", rayon::current_num_threads())?;
        for o in outputs {
            writeln!(w, "output = {o}")?;
        }
        w.flush()?;
        Ok(())
    }
}

fn write_dataset<W: Write>(data: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record((0..data.dim()).map(|i| format!("x{i}")))?;
    for row in data.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn pipeline_config(cfg: &ExperimentConfig, classifier: &ClassifierSpec, b: usize, b_prime: usize) -> PipelineConfig {
    PipelineConfig {
        classifier: classifier.clone(),
        b,
        b_prime,
        p: 0.5,
        alpha: cfg.alpha,
        quantile: cfg.quantile.clone(),
    }
}

fn observed(cfg: &ExperimentConfig, rng: &mut SimRng) -> Result<Dataset> {
    match &cfg.observed {
        Some(d) => Ok(d.clone()),
        None => Ok(cfg.model.simulate(&cfg.true_theta, cfg.model.n_obs, rng)?),
    }
}

/// Draws one observed dataset at the true θ and a labeled sample of size `b[0]`.
pub fn run_simulate(cfg: &ExperimentConfig, ctx: &RunContext) -> Result<Vec<String>> {
    let mut rng = seeded(cfg.seed);
    let data = cfg.model.simulate(&cfg.true_theta, cfg.model.n_obs, &mut rng)?;
    write_dataset(&data, ctx.create("observed.csv")?)?;
    let sample = generate_labeled_sample(&cfg.model, cfg.b[0], 0.5, &mut rng)?;
    sample.write_csv(ctx.create("labeled.csv")?)?;
    Ok(vec!["observed.csv".into(), "labeled.csv".into()])
}

/// Trains every (classifier, B) pair, saves the models as JSON and reports
/// held-out cross-entropy.
pub fn run_train_odds(cfg: &ExperimentConfig, ctx: &RunContext) -> Result<Vec<String>> {
    let mut outputs = Vec::new();
    let mut w = csv::Writer::from_writer(ctx.create("odds.csv")?);
    w.write_record(["classifier", "b", "cross_entropy"])?;
    let mut k = 0;
    for c in &cfg.classifiers {
        for &b in &cfg.b {
            let mut rng = seeded(child_seed(cfg.seed, k));
            k += 1;
            let sample = generate_labeled_sample(&cfg.model, b, 0.5, &mut rng)?;
            let odds = train_odds(&cfg.model, &sample, c, &mut rng)?;
            let hold = generate_labeled_sample(&cfg.model, cfg.holdout, 0.5, &mut rng)?;
            let ce = cross_entropy(&odds, &hold)?;
            let name = format!("odds_{}_b{b}.json", c.name());
            ctx.create(&name)?.write_all(odds.to_json()?.as_bytes())?;
            w.write_record([c.name().to_string(), b.to_string(), ce.to_string()])?;
            outputs.push(name);
        }
    }
    w.flush()?;
    outputs.insert(0, "odds.csv".into());
    Ok(outputs)
}

/// Simulated (θ, τ) pairs and the fitted critical surface for the first
/// classifier and B.
pub fn run_critical(cfg: &ExperimentConfig, ctx: &RunContext) -> Result<Vec<String>> {
    let mut rng = seeded(cfg.seed);
    let grid = cfg.model.grid();
    let sample = generate_labeled_sample(&cfg.model, cfg.b[0], 0.5, &mut rng)?;
    let odds = train_odds(&cfg.model, &sample, &cfg.classifiers[0], &mut rng)?;
    let train = simulate_tau_set(&cfg.model, &odds, &grid, cfg.b_prime, &NullMode::Pointwise, &mut rng)?;
    train.write_csv(ctx.create("tau_train.csv")?)?;
    let qm = fit_quantile(&train, cfg.alpha, &cfg.quantile)?;
    critical_surface(&qm, &grid).write_csv(&grid, ctx.create("critical.csv")?)?;
    Ok(vec!["tau_train.csv".into(), "critical.csv".into()])
}

pub fn timing_report(t: &StageTimings) -> String {
    let mut s = String::from("stage seconds\n");
    for (name, d) in t.rows() {
        s += &format!("{name} {:.4}\n", d.as_secs_f64());
    }
    s
}

/// Full pipeline for one observed dataset with a staged timing report.
pub fn run_confset(cfg: &ExperimentConfig, ctx: &RunContext) -> Result<(ConfidenceSet, StageTimings)> {
    let mut rng = seeded(cfg.seed);
    let grid = cfg.model.grid();
    let pc = pipeline_config(cfg, &cfg.classifiers[0], cfg.b[0], cfg.b_prime);
    let mut cal = calibrate(&cfg.model, &grid, &pc, &mut rng)?;
    let data = observed(cfg, &mut rng)?;
    let set = cal.confidence_set(&data, &grid)?;
    set.write_csv(&grid, ctx.create("confset.csv")?)?;
    cal.surface.write_csv(&grid, ctx.create("critical.csv")?)?;
    let report = timing_report(&cal.timings);
    ctx.create("timings.txt")?.write_all(report.as_bytes())?;
    eprint!("{report}");
    Ok((set, cal.timings))
}

/// One coverage curve per B′, all sharing the same trained odds.
#[derive(Clone, Debug)]
pub struct DiagnosticRun {
    pub b_prime: usize,
    pub sample: CoverageSample,
    pub report: CoverageReport,
}

#[allow(clippy::too_many_arguments)]
pub fn coverage_diagnostic(
    model: &ModelSpec,
    grid: &ParamGrid,
    classifier: &ClassifierSpec,
    b: usize,
    b_primes: &[usize],
    b_dd: usize,
    alpha: f64,
    quantile: &QuantileKind,
    rng: &mut SimRng,
) -> Result<Vec<DiagnosticRun>> {
    let sample = generate_labeled_sample(model, b, 0.5, rng)?;
    let odds = train_odds(model, &sample, classifier, rng)?;
    let mut runs = Vec::with_capacity(b_primes.len());
    for &bp in b_primes {
        let pc = PipelineConfig {
            classifier: classifier.clone(),
            b,
            b_prime: bp,
            p: 0.5,
            alpha,
            quantile: quantile.clone(),
        };
        let surface = surface_for(model, &odds, grid, &pc, rng, &mut StageTimings::default())?;
        let cov = collect_coverage(model, &odds, &surface, grid, b_dd, rng)?;
        let report = fit_coverage_curve(&cov, grid, &model.space, 1.0 - alpha)?;
        runs.push(DiagnosticRun { b_prime: bp, sample: cov, report });
    }
    Ok(runs)
}

pub fn run_diagnose(cfg: &ExperimentConfig, ctx: &RunContext) -> Result<Vec<DiagnosticRun>> {
    let grid = cfg.model.grid();
    let runs = coverage_diagnostic(
        &cfg.model,
        &grid,
        &cfg.classifiers[0],
        cfg.b[0],
        &cfg.b_prime_list,
        cfg.b_dd,
        cfg.alpha,
        &cfg.quantile,
        &mut seeded(cfg.seed),
    )?;
    let mut w = csv::Writer::from_writer(ctx.create("diagnose_summary.csv")?);
    w.write_record(["b_prime", "raw_coverage", "min_estimate", "flagged_points", "passed"])?;
    for r in &runs {
        r.report.write_csv(&grid, ctx.create(&format!("coverage_bp{}.csv", r.b_prime))?)?;
        if grid.dim() == 2 {
            r.report.write_heatmap_csv(&grid, ctx.create(&format!("coverage_bp{}_heatmap.csv", r.b_prime))?)?;
        }
        let min = r.report.estimate.iter().copied().fold(f64::INFINITY, f64::min);
        w.write_record([
            r.b_prime.to_string(),
            r.sample.raw_coverage().to_string(),
            min.to_string(),
            r.report.flagged.len().to_string(),
            r.report.passed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(runs)
}

/// One row per (classifier, B) plus the exact-oracle row. Every row uses the
/// same master seed, so rows differ only by the method.
pub fn table_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let grid = cfg.model.grid();
    let mut rows = Vec::new();
    for c in &cfg.classifiers {
        for &b in &cfg.b {
            let pc = pipeline_config(cfg, c, b, cfg.b_prime);
            let reps = replicate(&cfg.model, &grid, &pc, &cfg.true_theta, cfg.n_reps, cfg.holdout, cfg.seed)?;
            rows.push(SweepRow::from_repetitions(c.name(), b, &reps));
        }
    }
    let reps = replicate_exact(
        &cfg.model,
        &grid,
        cfg.alpha,
        cfg.mc_reps,
        &cfg.true_theta,
        cfg.n_reps,
        cfg.holdout,
        cfg.seed,
    )?;
    rows.push(SweepRow::from_repetitions("exact", 0, &reps));
    Ok(rows)
}

pub fn write_table<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn run_table_sweep(cfg: &ExperimentConfig, ctx: &RunContext) -> Result<Vec<SweepRow>> {
    let rows = table_sweep(cfg)?;
    write_table(&rows, ctx.create("table.csv")?)?;
    Ok(rows)
}

/// Per-method summary of the two-parameter regions over `n_reps` observed
/// datasets at the true (ν, b).
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct RegionRow {
    pub method: String,
    pub b: usize,
    pub mean_size: f64,
    /// Mean fraction of the grid on which the region disagrees with the oracle region.
    pub mean_symmetric_difference: f64,
    pub coverage: f64,
}

pub struct RegionResult {
    pub grid: ParamGrid,
    /// First observed dataset: oracle region, then one region per B.
    pub example: Vec<ConfidenceSet>,
    pub rows: Vec<RegionRow>,
}

fn region_row(
    method: &str,
    b: usize,
    est: &dyn LogOdds,
    surface: &CriticalSurface,
    datasets: &[Dataset],
    oracle_sets: &[ConfidenceSet],
    grid: &ParamGrid,
    truth: usize,
) -> Result<(RegionRow, ConfidenceSet)> {
    let sets = datasets.iter().map(|d| confidence_set(est, surface, d, grid)).collect::<acore::Result<Vec<_>>>()?;
    let n = sets.len() as f64;
    let sym = sets
        .iter()
        .zip(oracle_sets)
        .map(|(s, o)| (0..grid.len()).filter(|&j| s.contains(j) != o.contains(j)).count() as f64 / grid.len() as f64)
        .sum::<f64>()
        / n;
    let row = RegionRow {
        method: method.to_string(),
        b,
        mean_size: sets.iter().map(|s| s.size_fraction).sum::<f64>() / n,
        mean_symmetric_difference: sym,
        coverage: sets.iter().filter(|s| s.contains(truth)).count() as f64 / n,
    };
    Ok((row, sets.into_iter().next().expect("at least one dataset")))
}

/// Oracle region with Monte Carlo critical values next to estimated regions
/// for each B, on the signal/background model at the configured grid.
pub fn region_2d(cfg: &ExperimentConfig) -> Result<RegionResult> {
    if cfg.model.kind != ModelKind::SignalBackground {
        bail!("region-2d needs the signal_background model, got {}", cfg.model.kind.name());
    }
    let grid = cfg.model.grid();
    let truth = grid.nearest(&cfg.true_theta);
    let mut rng = seeded(cfg.seed);
    let mut datasets = Vec::with_capacity(cfg.n_reps);
    if let Some(d) = &cfg.observed {
        datasets.push(d.clone());
    }
    while datasets.len() < cfg.n_reps.max(1) {
        datasets.push(cfg.model.simulate(&cfg.true_theta, cfg.model.n_obs, &mut rng)?);
    }

    let oracle = ExactOddsOracle::new(&cfg.model, 0.5)?;
    let oracle_surface = mc_critical_surface(&cfg.model, &oracle, &grid, cfg.alpha, cfg.mc_reps, &mut rng)?;
    let oracle_sets = datasets
        .iter()
        .map(|d| confidence_set(&oracle, &oracle_surface, d, &grid))
        .collect::<acore::Result<Vec<_>>>()?;
    let (row, first) = region_row("exact", 0, &oracle, &oracle_surface, &datasets, &oracle_sets, &grid, truth)?;
    let mut rows = vec![row];
    let mut example = vec![first];

    let c = &cfg.classifiers[0];
    for (k, &b) in cfg.b.iter().enumerate() {
        let pc = pipeline_config(cfg, c, b, cfg.b_prime);
        let cal = calibrate(&cfg.model, &grid, &pc, &mut seeded(child_seed(cfg.seed, k as u64)))?;
        let (row, first) = region_row(c.name(), b, &cal.odds, &cal.surface, &datasets, &oracle_sets, &grid, truth)?;
        rows.push(row);
        example.push(first);
    }
    Ok(RegionResult { grid, example, rows })
}

pub fn run_region_2d(cfg: &ExperimentConfig, ctx: &RunContext) -> Result<RegionResult> {
    let res = region_2d(cfg)?;
    let mut w = csv::Writer::from_writer(ctx.create("region.csv")?);
    let mut header = vec!["theta0".to_string(), "theta1".to_string(), "exact".to_string()];
    header.extend(cfg.b.iter().map(|b| format!("{}_b{b}", cfg.classifiers[0].name())));
    w.write_record(&header)?;
    for (j, t) in res.grid.iter().enumerate() {
        let mut rec = vec![t[0].to_string(), t[1].to_string()];
        rec.extend(res.example.iter().map(|s| u8::from(s.contains(j)).to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_writer(ctx.create("region_summary.csv")?);
    for r in &res.rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(res)
}
