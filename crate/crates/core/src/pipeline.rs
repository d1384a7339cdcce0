//! End-to-end construction of a confidence set with per-stage timings:
//! odds training, simulation of τ over B′ draws, quantile fit, inversion.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::ClassifierSpec;
use crate::critical_values::{critical_surface, fit_quantile, simulate_tau_set, CriticalSurface, NullMode, QuantileKind};
use crate::error::Result;
use crate::labeled::generate_labeled_sample;
use crate::model_zoo::{Dataset, ModelSpec, ParamGrid};
use crate::neyman::{confidence_set, ConfidenceSet};
use crate::odds::{acore_statistic, cross_entropy, train_odds, LogOdds, OddsModel};
use crate::oracle::{mc_exact_critical, ExactOddsOracle};
use crate::rng::{child_seed, fork, seeded, stream, SimRng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub classifier: ClassifierSpec,
    /// Labeled sample size for odds training.
    pub b: usize,
    /// Number of (θ, τ) pairs for the quantile regression.
    pub b_prime: usize,
    /// Bernoulli label probability for the labeled sample.
    pub p: f64,
    pub alpha: f64,
    pub quantile: QuantileKind,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            classifier: ClassifierSpec::Qda,
            b: 1000,
            b_prime: 5000,
            p: 0.5,
            alpha: 0.1,
            quantile: QuantileKind::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StageTimings {
    pub odds_training: Duration,
    pub tau_simulation: Duration,
    pub quantile_fit: Duration,
    pub inversion: Duration,
}

impl StageTimings {
    pub fn total(&self) -> Duration {
        self.odds_training + self.tau_simulation + self.quantile_fit + self.inversion
    }

    pub fn rows(&self) -> [(&'static str, Duration); 5] {
        [
            ("odds_training", self.odds_training),
            ("tau_simulation", self.tau_simulation),
            ("quantile_fit", self.quantile_fit),
            ("inversion", self.inversion),
            ("total", self.total()),
        ]
    }
}

/// Trained odds plus the critical surface built from them.
#[derive(Clone, Debug)]
pub struct Calibrated {
    pub odds: OddsModel,
    pub surface: CriticalSurface,
    pub timings: StageTimings,
}

impl Calibrated {
    pub fn confidence_set(&mut self, data: &Dataset, grid: &ParamGrid) -> Result<ConfidenceSet> {
        let t = Instant::now();
        let set = confidence_set(&self.odds, &self.surface, data, grid)?;
        self.timings.inversion = t.elapsed();
        Ok(set)
    }
}

/// Trains odds on a fresh labeled sample and fits pointwise critical values.
pub fn calibrate(model: &ModelSpec, grid: &ParamGrid, cfg: &PipelineConfig, rng: &mut SimRng) -> Result<Calibrated> {
    let mut timings = StageTimings::default();
    let t = Instant::now();
    let sample = generate_labeled_sample(model, cfg.b, cfg.p, rng)?;
    let odds = train_odds(model, &sample, &cfg.classifier, rng)?;
    timings.odds_training = t.elapsed();
    let surface = surface_for(model, &odds, grid, cfg, rng, &mut timings)?;
    Ok(Calibrated { odds, surface, timings })
}

/// Critical surface from quantile regression for an already trained estimator.
pub fn surface_for(
    model: &ModelSpec,
    est: &dyn LogOdds,
    grid: &ParamGrid,
    cfg: &PipelineConfig,
    rng: &mut SimRng,
    timings: &mut StageTimings,
) -> Result<CriticalSurface> {
    let t = Instant::now();
    let train = simulate_tau_set(model, est, grid, cfg.b_prime, &NullMode::Pointwise, rng)?;
    timings.tau_simulation = t.elapsed();
    let t = Instant::now();
    let qm = fit_quantile(&train, cfg.alpha, &cfg.quantile)?;
    let surface = critical_surface(&qm, grid);
    timings.quantile_fit = t.elapsed();
    Ok(surface)
}

/// Monte Carlo critical value at every grid point from `reps` datasets drawn
/// there, using the same statistic the inversion uses.
pub fn mc_critical_surface(
    model: &ModelSpec,
    est: &dyn LogOdds,
    grid: &ParamGrid,
    alpha: f64,
    reps: usize,
    rng: &mut SimRng,
) -> Result<CriticalSurface> {
    let base = fork(rng);
    let values = (0..grid.len())
        .into_par_iter()
        .map(|j| {
            let stat = |d: &Dataset| acore_statistic(est, d, &[j], grid).map(|r| r.tau).unwrap_or(f64::NEG_INFINITY);
            mc_exact_critical(model, stat, grid.point(j), alpha, reps, &mut stream(base, j as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CriticalSurface { alpha, values })
}

/// Result of one full repetition: fresh labeled sample, odds, critical
/// values, one observed dataset at θ* and its confidence set.
#[derive(Clone, Debug, PartialEq)]
pub struct Repetition {
    pub cross_entropy: f64,
    pub power: f64,
    pub size_fraction: f64,
    pub covered: bool,
}

/// Mean and spread over repetitions, in the layout of a results table row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub classifier: String,
    pub b: usize,
    pub reps: usize,
    pub cross_entropy_mean: f64,
    pub cross_entropy_sd: f64,
    pub power_mean: f64,
    pub power_se: f64,
    /// Percent of the grid.
    pub size_mean: f64,
    pub size_sd: f64,
    pub coverage: f64,
}

fn mean_sd(v: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = v.clone().count() as f64;
    let m = v.clone().sum::<f64>() / n;
    let var = if n > 1.0 { v.map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (m, var.sqrt())
}

impl SweepRow {
    pub fn from_repetitions(classifier: &str, b: usize, reps: &[Repetition]) -> Self {
        let n = reps.len();
        let (ce_m, ce_s) = mean_sd(reps.iter().map(|r| r.cross_entropy));
        let (p_m, p_s) = mean_sd(reps.iter().map(|r| r.power));
        let (s_m, s_s) = mean_sd(reps.iter().map(|r| 100.0 * r.size_fraction));
        Self {
            classifier: classifier.to_string(),
            b,
            reps: n,
            cross_entropy_mean: ce_m,
            cross_entropy_sd: ce_s,
            power_mean: p_m,
            power_se: p_s / (n as f64).sqrt(),
            size_mean: s_m,
            size_sd: s_s,
            coverage: reps.iter().filter(|r| r.covered).count() as f64 / n as f64,
        }
    }
}

fn observe(
    model: &ModelSpec,
    est: &dyn LogOdds,
    surface: &CriticalSurface,
    grid: &ParamGrid,
    theta_star: &[f64],
    holdout: usize,
    rng: &mut SimRng,
) -> Result<Repetition> {
    let hold = generate_labeled_sample(model, holdout, 0.5, rng)?;
    let ce = cross_entropy(est, &hold)?;
    let data = model.simulate(theta_star, model.n_obs, rng)?;
    let set = confidence_set(est, surface, &data, grid)?;
    let truth = grid.nearest(theta_star);
    Ok(Repetition {
        cross_entropy: ce,
        power: set.power_excluding(truth),
        size_fraction: set.size_fraction,
        covered: set.contains(truth),
    })
}

/// `reps` independent runs of the whole pipeline; repetition r is seeded
/// with `child_seed(seed, r)`, so results do not depend on thread count.
pub fn replicate(
    model: &ModelSpec,
    grid: &ParamGrid,
    cfg: &PipelineConfig,
    theta_star: &[f64],
    reps: usize,
    holdout: usize,
    seed: u64,
) -> Result<Vec<Repetition>> {
    model.space.check(theta_star)?;
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = seeded(child_seed(seed, r as u64));
            let cal = calibrate(model, grid, cfg, &mut rng)?;
            observe(model, &cal.odds, &cal.surface, grid, theta_star, holdout, &mut rng)
        })
        .collect()
}

/// Exact-likelihood reference row: the true odds with Monte Carlo critical
/// values, computed once and shared across repetitions.
pub fn replicate_exact(
    model: &ModelSpec,
    grid: &ParamGrid,
    alpha: f64,
    mc_reps: usize,
    theta_star: &[f64],
    reps: usize,
    holdout: usize,
    seed: u64,
) -> Result<Vec<Repetition>> {
    model.space.check(theta_star)?;
    let oracle = ExactOddsOracle::new(model, 0.5)?;
    let surface = mc_critical_surface(model, &oracle, grid, alpha, mc_reps, &mut seeded(seed))?;
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = seeded(child_seed(seed, r as u64));
            observe(model, &oracle, &surface, grid, theta_star, holdout, &mut rng)
        })
        .collect()
}
