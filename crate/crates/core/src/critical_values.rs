//! Critical values from quantile regression of simulated statistics on θ.
//!
//! Instead of a separate Monte Carlo run per parameter value, pairs (θᵢ, τᵢ)
//! are simulated across the parameter space and a conditional α-quantile
//! surface ĉ_α(θ) is fitted in one regression. A composite null uses the
//! minimum of the surface over Θ0; Neyman inversion uses the whole surface.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::model_zoo::{ModelSpec, ParamGrid, Region};
use crate::odds::{acore_statistic, simple_null_tau, LogOdds};
use crate::quantile::{BoostedConfig, BoostedQuantileTrees, KnnQuantile};
use crate::rng::{fork, stream, SimRng};

/// How the null is posed when simulating statistics.
#[derive(Clone, Debug, PartialEq)]
pub enum NullMode {
    /// θᵢ ~ uniform on Θ0 and τᵢ = τ(Dᵢ; Θ0).
    Composite(Region),
    /// θᵢ ~ r_Θ and τᵢ = τ(Dᵢ; {θᵢ}).
    Pointwise,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct TauTrainingSet {
    pub dim: usize,
    /// Row-major θᵢ.
    pub thetas: Vec<f64>,
    pub taus: Vec<f64>,
}

impl TauTrainingSet {
    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    pub fn theta(&self, i: usize) -> &[f64] {
        &self.thetas[i * self.dim..(i + 1) * self.dim]
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..self.dim).map(|i| format!("theta{i}")).collect();
        header.push("tau".into());
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec: Vec<String> = self.theta(i).iter().map(|v| v.to_string()).collect();
            rec.push(self.taus[i].to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Simulates B′ pairs (θᵢ, τᵢ), one random stream per pair.
pub fn simulate_tau_set(
    model: &ModelSpec,
    est: &dyn LogOdds,
    grid: &ParamGrid,
    b_prime: usize,
    mode: &NullMode,
    rng: &mut SimRng,
) -> Result<TauTrainingSet> {
    if b_prime == 0 {
        return domain("B' must be at least 1");
    }
    let (draw_region, null_indices) = match mode {
        NullMode::Composite(region) => {
            let idx = region.grid_indices(grid);
            if idx.is_empty() {
                return domain("null region contains no grid points");
            }
            (region.clone(), idx)
        }
        NullMode::Pointwise => (model.proposal.clone(), Vec::new()),
    };
    let base = fork(rng);
    let pairs = (0..b_prime)
        .into_par_iter()
        .map(|i| {
            let mut r = stream(base, i as u64);
            let theta = model.prior_draw(&draw_region, &mut r)?;
            let data = model.simulate(&theta, model.n_obs, &mut r)?;
            let tau = match mode {
                NullMode::Composite(_) => acore_statistic(est, &data, &null_indices, grid)?.tau,
                NullMode::Pointwise => simple_null_tau(est, &data, &theta, grid),
            };
            Ok((theta, tau))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut set = TauTrainingSet { dim: model.space.dim(), ..Default::default() };
    for (theta, tau) in pairs {
        set.thetas.extend_from_slice(&theta);
        set.taus.push(tau);
    }
    Ok(set)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QuantileKind {
    BoostedTrees(BoostedConfig),
    /// `k = None` means round(√B′).
    KnnQuantile { k: Option<usize> },
}

impl Default for QuantileKind {
    fn default() -> Self {
        QuantileKind::BoostedTrees(BoostedConfig::default())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum Regressor {
    Boosted(BoostedQuantileTrees),
    Knn(KnnQuantile),
}

/// Fitted surface θ ↦ ĉ_α(θ).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantileModel {
    pub alpha: f64,
    pub kind: QuantileKind,
    regressor: Regressor,
}

impl QuantileModel {
    pub fn predict(&self, theta: &[f64]) -> f64 {
        match &self.regressor {
            Regressor::Boosted(m) => m.predict(theta),
            Regressor::Knn(m) => m.predict(theta),
        }
    }
}

/// Quantile regression of τ on θ at level α. Both estimators are
/// deterministic given the training set.
pub fn fit_quantile(train: &TauTrainingSet, alpha: f64, kind: &QuantileKind) -> Result<QuantileModel> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return domain(format!("alpha must lie in (0, 1), got {alpha}"));
    }
    if train.len() < 50 {
        return domain(format!("quantile regression needs at least 50 pairs, got {}", train.len()));
    }
    if train.taus.iter().any(|t| !t.is_finite()) {
        return domain("statistics must be finite");
    }
    let regressor = match kind {
        QuantileKind::BoostedTrees(cfg) => {
            Regressor::Boosted(BoostedQuantileTrees::fit(&train.thetas, train.dim, &train.taus, alpha, cfg)?)
        }
        QuantileKind::KnnQuantile { k } => {
            Regressor::Knn(KnnQuantile::fit(&train.thetas, train.dim, &train.taus, alpha, *k)?)
        }
    };
    Ok(QuantileModel { alpha, kind: kind.clone(), regressor })
}

/// Ĉ = min over the region's grid points of ĉ_α.
pub fn critical_value_composite(qm: &QuantileModel, grid: &ParamGrid, theta0_region: &[usize]) -> Result<f64> {
    if theta0_region.is_empty() {
        return domain("null region contains no grid points");
    }
    Ok(theta0_region.iter().map(|&i| qm.predict(grid.point(i))).fold(f64::INFINITY, f64::min))
}

/// Critical values Ĉ_θ at every grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalSurface {
    pub alpha: f64,
    pub values: Vec<f64>,
}

impl CriticalSurface {
    /// Never rejects.
    pub fn vacuous(len: usize, alpha: f64) -> Self {
        Self { alpha, values: vec![f64::NEG_INFINITY; len] }
    }

    pub fn constant(len: usize, alpha: f64, value: f64) -> Self {
        Self { alpha, values: vec![value; len] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn write_csv<W: Write>(&self, grid: &ParamGrid, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..grid.dim()).map(|i| format!("theta{i}")).collect();
        header.push("critical".into());
        w.write_record(&header)?;
        for (t, c) in grid.iter().zip(&self.values) {
            let mut rec: Vec<String> = t.iter().map(|v| v.to_string()).collect();
            rec.push(c.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn critical_surface(qm: &QuantileModel, grid: &ParamGrid) -> CriticalSurface {
    CriticalSurface { alpha: qm.alpha, values: grid.iter().map(|t| qm.predict(t)).collect() }
}
