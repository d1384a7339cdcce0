//! Parametrized odds, odds ratios, the ACORE statistic and cross-entropy.
//!
//! A classifier trained to tell simulator draws (y = 1) from reference draws
//! (y = 0) at parameter θ estimates the odds O(x; θ) = P(y=1|θ,x)/P(y=0|θ,x).
//! Ratios of these odds at two parameters estimate the likelihood ratio, so
//!
//! ```text
//! τ(D; Θ0) = max_{θ0 ∈ Θ0} min_{θ1 ∈ Θ} Σᵢ log OR(xᵢ; θ0, θ1)
//!          = max_{θ0 ∈ Θ0} S(θ0) − max_{θ1 ∈ Θ} S(θ1),   S(θ) = Σᵢ log O(xᵢ; θ)
//! ```
//!
//! plays the role of the log likelihood-ratio statistic. Both extrema are
//! exhaustive scans of the parameter grid.

use serde::{Deserialize, Serialize};

use crate::classifier::{self, ClassifierSpec, Fitted, Score, Standardizer};
use crate::error::{domain, AcoreError, Result};
use crate::irls::softplus;
use crate::labeled::LabeledSet;
use crate::model_zoo::{Dataset, ModelSpec, ParamGrid};
use crate::rng::SimRng;

/// Current on-disk format of [`OddsModel`].
pub const ODDS_FORMAT_VERSION: u32 = 1;

/// Default probability clipping.
pub const CLIP_EPS: f64 = 1e-12;

/// Anything that can evaluate log odds log O(x; θ).
pub trait LogOdds: Send + Sync {
    fn model(&self) -> &ModelSpec;

    fn log_odds(&self, theta: &[f64], x: &[f64]) -> f64;

    fn sum_log_odds(&self, theta: &[f64], data: &Dataset) -> f64 {
        data.rows().map(|x| self.log_odds(theta, x)).sum()
    }

    /// S(θ) = Σᵢ log O(xᵢ; θ) at every grid point.
    fn profile(&self, grid: &ParamGrid, data: &Dataset) -> Vec<f64> {
        grid.iter().map(|t| self.sum_log_odds(t, data)).collect()
    }
}

/// Odds O(x; θ).
pub fn odds(est: &dyn LogOdds, theta: &[f64], x: &[f64]) -> f64 {
    est.log_odds(theta, x).exp()
}

pub fn log_odds_ratio(est: &dyn LogOdds, x: &[f64], theta0: &[f64], theta1: &[f64]) -> f64 {
    est.log_odds(theta0, x) - est.log_odds(theta1, x)
}

/// OR(x; θ0, θ1) = O(x; θ0) / O(x; θ1).
pub fn odds_ratio(est: &dyn LogOdds, x: &[f64], theta0: &[f64], theta1: &[f64]) -> f64 {
    log_odds_ratio(est, x, theta0, theta1).exp()
}

/// Value and extremizers of the ACORE statistic (grid indices).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TauResult {
    pub tau: f64,
    pub argmax_theta0: usize,
    pub argmin_theta1: usize,
}

/// First index of the maximum of `values` over `indices`.
pub(crate) fn first_argmax(values: &[f64], indices: impl IntoIterator<Item = usize>) -> Option<usize> {
    let mut best: Option<usize> = None;
    for i in indices {
        match best {
            Some(b) if !(values[i] > values[b]) => {}
            _ => best = Some(i),
        }
    }
    best
}

pub(crate) fn check_data(model: &ModelSpec, data: &Dataset) -> Result<()> {
    if data.len() != model.n_obs || data.dim() != model.data_dim() {
        return Err(AcoreError::InvalidInput(format!(
            "expected {} observations of dimension {}, got {} of dimension {}",
            model.n_obs,
            model.data_dim(),
            data.len(),
            data.dim()
        )));
    }
    Ok(())
}

/// τ(D; Θ0) with Θ0 given as grid indices; ties resolve to the lowest index.
pub fn acore_statistic(est: &dyn LogOdds, data: &Dataset, theta0_region: &[usize], grid: &ParamGrid) -> Result<TauResult> {
    if theta0_region.is_empty() {
        return domain("null region contains no grid points");
    }
    if let Some(&bad) = theta0_region.iter().find(|&&i| i >= grid.len()) {
        return domain(format!("grid index {bad} out of range"));
    }
    check_data(est.model(), data)?;
    let profile = est.profile(grid, &data.canonical());
    Ok(tau_from_profile(&profile, theta0_region))
}

pub(crate) fn tau_from_profile(profile: &[f64], theta0_region: &[usize]) -> TauResult {
    let mut region = theta0_region.to_vec();
    region.sort_unstable();
    let all = first_argmax(profile, 0..profile.len()).expect("non-empty grid");
    let null = first_argmax(profile, region).expect("non-empty region");
    TauResult { tau: profile[null] - profile[all], argmax_theta0: null, argmin_theta1: all }
}

/// τ for the simple null {θ0} at an arbitrary (possibly off-grid) θ0.
/// The inner minimum runs over the grid plus θ0 itself, so τ ≤ 0.
pub fn simple_null_tau(est: &dyn LogOdds, data: &Dataset, theta0: &[f64], grid: &ParamGrid) -> f64 {
    let canon = data.canonical();
    let profile = est.profile(grid, &canon);
    let at = est.sum_log_odds(theta0, &canon);
    let top = profile.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (at - top.max(at)).min(0.0)
}

/// Mean log loss of the implied class posterior on `holdout`.
pub fn cross_entropy(est: &dyn LogOdds, holdout: &LabeledSet) -> Result<f64> {
    if holdout.is_empty() {
        return Err(AcoreError::InvalidInput("empty holdout".into()));
    }
    let total: f64 = holdout
        .examples
        .iter()
        .map(|e| {
            let l = est.log_odds(&e.theta, &e.x);
            if e.y {
                softplus(-l)
            } else {
                softplus(l)
            }
        })
        .sum();
    Ok(total / holdout.len() as f64)
}

/// Trained classifier exposed as parametrized odds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OddsModel {
    pub format_version: u32,
    pub spec: ClassifierSpec,
    pub standardizer: Standardizer,
    pub classifier: Fitted,
    pub clip_eps: f64,
    pub model: ModelSpec,
}

impl OddsModel {
    /// Largest |log odds| allowed by probability clipping.
    pub fn max_log_odds(&self) -> f64 {
        ((1.0 - self.clip_eps) / self.clip_eps).ln()
    }

    fn param_dim(&self) -> usize {
        self.model.space.dim()
    }

    /// Clipped class-1 probability at (θ, x).
    pub fn probability(&self, theta: &[f64], x: &[f64]) -> f64 {
        crate::irls::sigmoid(self.log_odds(theta, x))
    }

    #[inline]
    fn clip(&self, score: Score) -> f64 {
        match score {
            Score::Logit(l) => {
                let m = self.max_log_odds();
                l.clamp(-m, m)
            }
            Score::Prob(p) => {
                let p = p.clamp(self.clip_eps, 1.0 - self.clip_eps);
                p.ln() - (-p).ln_1p()
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: OddsModel = serde_json::from_str(text)?;
        if m.format_version != ODDS_FORMAT_VERSION {
            return Err(AcoreError::InvalidInput(format!(
                "unsupported odds model format version {}",
                m.format_version
            )));
        }
        Ok(m)
    }
}

impl LogOdds for OddsModel {
    fn model(&self) -> &ModelSpec {
        &self.model
    }

    fn log_odds(&self, theta: &[f64], x: &[f64]) -> f64 {
        let mut raw = [0.0; 8];
        let d = theta.len() + x.len();
        raw[..theta.len()].copy_from_slice(theta);
        raw[theta.len()..d].copy_from_slice(x);
        let mut z = [0.0; 8];
        self.standardizer.apply(&raw[..d], &mut z[..d]);
        self.clip(self.classifier.score(&z[..d]))
    }

    fn profile(&self, grid: &ParamGrid, data: &Dataset) -> Vec<f64> {
        let Fitted::Mlp(mlp) = &self.classifier else {
            return grid.iter().map(|t| self.sum_log_odds(t, data)).collect();
        };
        // The first layer is linear, so the θ and x parts of the hidden
        // pre-activation are computed once per grid point and per row.
        let pd = self.param_dim();
        let h = mlp.hidden();
        let mut z = [0.0; 8];
        let x_parts: Vec<Vec<f64>> = data
            .rows()
            .map(|x| {
                let mut raw = [0.0; 8];
                raw[pd..pd + x.len()].copy_from_slice(x);
                self.standardizer.apply(&raw[..pd + x.len()], &mut z[..pd + x.len()]);
                let mut part = vec![0.0; h];
                mlp.partial_preactivation(&z[pd..pd + x.len()], pd, &mut part);
                part
            })
            .collect();
        let mut theta_part = vec![0.0; h];
        grid.iter()
            .map(|t| {
                let mut raw = [0.0; 8];
                raw[..pd].copy_from_slice(t);
                self.standardizer.apply(&raw[..pd], &mut z[..pd]);
                mlp.partial_preactivation(&z[..pd], 0, &mut theta_part);
                x_parts
                    .iter()
                    .map(|xp| self.clip(Score::Logit(mlp.logit_from_parts(&theta_part, xp))))
                    .sum()
            })
            .collect()
    }
}

/// Fits a classifier on [θ; x] features and wraps it as parametrized odds.
pub fn train_odds(model: &ModelSpec, sample: &LabeledSet, spec: &ClassifierSpec, rng: &mut SimRng) -> Result<OddsModel> {
    if sample.is_empty() {
        return Err(AcoreError::Training("empty training sample".into()));
    }
    let dim = model.space.dim() + model.data_dim();
    let mut features = Vec::with_capacity(sample.len() * dim);
    for e in &sample.examples {
        if e.theta.len() + e.x.len() != dim {
            return Err(AcoreError::InvalidInput("example dimension does not match the model".into()));
        }
        features.extend_from_slice(&e.theta);
        features.extend_from_slice(&e.x);
    }
    let standardizer = Standardizer::fit(&features, dim);
    let z = standardizer.transform_all(&features);
    let y: Vec<bool> = sample.examples.iter().map(|e| e.y).collect();
    let classifier = classifier::fit(spec, &z, dim, &y, rng)?;
    Ok(OddsModel {
        format_version: ODDS_FORMAT_VERSION,
        spec: spec.clone(),
        standardizer,
        classifier,
        clip_eps: CLIP_EPS,
        model: model.clone(),
    })
}

/// A classifier that always answers `prob`, without training.
pub fn constant_odds(model: &ModelSpec, prob: f64) -> OddsModel {
    let dim = model.space.dim() + model.data_dim();
    OddsModel {
        format_version: ODDS_FORMAT_VERSION,
        spec: ClassifierSpec::Constant { prob },
        standardizer: Standardizer { mean: vec![0.0; dim], sd: vec![1.0; dim] },
        classifier: Fitted::Constant { prob },
        clip_eps: CLIP_EPS,
        model: model.clone(),
    }
}
