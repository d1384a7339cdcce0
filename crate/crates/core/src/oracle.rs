//! Exact-likelihood baselines: the true odds, the grid likelihood-ratio
//! statistic, Monte Carlo critical values and odds-ratio error.

use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, AcoreError, Result};
use crate::model_zoo::{Dataset, ModelKind, ModelSpec, ParamGrid};
use crate::odds::{check_data, first_argmax, log_odds_ratio, LogOdds};
use crate::quantile::lower_quantile;
use crate::rng::{fork, stream, SimRng};

/// True odds p·f_θ(x) / ((1 − p)·g(x)) for a model with a closed-form density.
#[derive(Clone, Debug)]
pub struct ExactOddsOracle {
    model: ModelSpec,
    log_prior_odds: f64,
}

impl ExactOddsOracle {
    pub fn new(model: &ModelSpec, p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return domain("oracle p must lie in (0, 1)");
        }
        Ok(Self { model: model.clone(), log_prior_odds: p.ln() - (-p).ln_1p() })
    }
}

impl LogOdds for ExactOddsOracle {
    fn model(&self) -> &ModelSpec {
        &self.model
    }

    fn log_odds(&self, theta: &[f64], x: &[f64]) -> f64 {
        self.log_prior_odds + self.model.log_density(theta, x) - self.model.reference_log_density(x)
    }

    /// Uses sufficient statistics where the model has them.
    fn profile(&self, grid: &ParamGrid, data: &Dataset) -> Vec<f64> {
        let n = data.len() as f64;
        let constant = n * self.log_prior_odds - data.rows().map(|x| self.model.reference_log_density(x)).sum::<f64>();
        let counts_ok = |col: usize| data.rows().all(|x| x[col] >= 0.0);
        match self.model.kind {
            ModelKind::PoissonCounting if counts_ok(0) => {
                let sum: f64 = data.rows().map(|x| x[0]).sum();
                let log_fact: f64 = data.rows().map(|x| ln_gamma(x[0] + 1.0)).sum();
                grid.iter()
                    .map(|t| {
                        let lambda = 100.0 + t[0];
                        sum * lambda.ln() - n * lambda - log_fact + constant
                    })
                    .collect()
            }
            ModelKind::SignalBackground if counts_ok(0) && counts_ok(1) => {
                let sn: f64 = data.rows().map(|x| x[0]).sum();
                let sm: f64 = data.rows().map(|x| x[1]).sum();
                let log_fact: f64 = data.rows().map(|x| ln_gamma(x[0] + 1.0) + ln_gamma(x[1] + 1.0)).sum();
                grid.iter()
                    .map(|t| {
                        let (ls, lb) = (t[1] + t[0], t[1]);
                        sn * ls.ln() - n * ls + sm * lb.ln() - n * lb - log_fact + constant
                    })
                    .collect()
            }
            _ => grid
                .iter()
                .map(|t| data.rows().map(|x| self.model.log_density(t, x)).sum::<f64>() + constant)
                .collect(),
        }
    }
}

/// Λ(D; Θ0) = max_{Θ0} log L − max_Θ log L, both maxima over the grid.
pub fn exact_lr_statistic(model: &ModelSpec, data: &Dataset, theta0_region: &[usize], grid: &ParamGrid) -> Result<f64> {
    if theta0_region.is_empty() {
        return domain("null region contains no grid points");
    }
    check_data(model, data)?;
    let loglik: Vec<f64> = grid.iter().map(|t| model.exact_loglik(t, data)).collect();
    let all = first_argmax(&loglik, 0..loglik.len()).expect("non-empty grid");
    let mut region = theta0_region.to_vec();
    region.sort_unstable();
    let null = first_argmax(&loglik, region).expect("non-empty region");
    if loglik[all] == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(loglik[null] - loglik[all])
}

/// Lower empirical α-quantile of `statistic` over `reps` datasets drawn at θ0.
pub fn mc_exact_critical<F>(
    model: &ModelSpec,
    statistic: F,
    theta0: &[f64],
    alpha: f64,
    reps: usize,
    rng: &mut SimRng,
) -> Result<f64>
where
    F: Fn(&Dataset) -> f64 + Sync,
{
    Ok(lower_quantile(&mut null_statistics(model, &statistic, theta0, reps, rng)?, alpha)?)
}

/// Null draws of `statistic` at θ0.
pub fn null_statistics<F>(
    model: &ModelSpec,
    statistic: &F,
    theta0: &[f64],
    reps: usize,
    rng: &mut SimRng,
) -> Result<Vec<f64>>
where
    F: Fn(&Dataset) -> f64 + Sync,
{
    if reps < 100 {
        return domain("Monte Carlo critical values need at least 100 repetitions");
    }
    model.space.check(theta0)?;
    let base = fork(rng);
    Ok((0..reps)
        .into_par_iter()
        .map(|r| {
            let data = model
                .simulate(theta0, model.n_obs, &mut stream(base, r as u64))
                .expect("θ0 checked");
            statistic(&data)
        })
        .collect())
}

/// Mean squared error of the estimated log odds ratio against the exact one.
pub fn lr_mse(est: &dyn LogOdds, model: &ModelSpec, probe: &[(Vec<f64>, Vec<f64>, Vec<f64>)]) -> Result<f64> {
    if probe.is_empty() {
        return Err(AcoreError::InvalidInput("empty probe set".into()));
    }
    let total: f64 = probe
        .iter()
        .map(|(t0, t1, x)| {
            let exact = model.log_density(t0, x) - model.log_density(t1, x);
            (log_odds_ratio(est, x, t0, t1) - exact).powi(2)
        })
        .sum();
    Ok(total / probe.len() as f64)
}
