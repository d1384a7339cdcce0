//! Probabilistic classifiers over concatenated [θ; x] features.

pub(crate) mod knn;
mod logistic;
mod mlp;
mod qda;

use serde::{Deserialize, Serialize};

use crate::error::{AcoreError, Result};
use crate::rng::SimRng;

pub use knn::KnnModel;
pub use logistic::LogisticModel;
pub use mlp::{MlpConfig, MlpModel};
pub use qda::QdaModel;

/// Which classifier to train, with its hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierSpec {
    /// Linear logistic regression fitted by IRLS.
    Logistic,
    /// Quadratic discriminant analysis.
    Qda,
    /// k nearest neighbours; `k = None` means round(√B).
    Knn { k: Option<usize> },
    /// One-hidden-layer perceptron.
    Mlp(MlpConfig),
    /// Ignores its input and always predicts `prob`.
    Constant { prob: f64 },
}

impl ClassifierSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ClassifierSpec::Logistic => "logistic",
            ClassifierSpec::Qda => "qda",
            ClassifierSpec::Knn { .. } => "knn",
            ClassifierSpec::Mlp(_) => "mlp",
            ClassifierSpec::Constant { .. } => "constant",
        }
    }

    pub fn mlp() -> Self {
        ClassifierSpec::Mlp(MlpConfig::default())
    }

    pub fn knn() -> Self {
        ClassifierSpec::Knn { k: None }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ClassifierSpec::Knn { k: Some(0) } => invalid("knn needs k >= 1"),
            ClassifierSpec::Constant { prob } if !(*prob > 0.0 && *prob < 1.0) => {
                invalid("constant classifier probability must lie in (0, 1)")
            }
            ClassifierSpec::Mlp(c) => c.validate(),
            _ => Ok(()),
        }
    }
}

impl std::str::FromStr for ClassifierSpec {
    type Err = AcoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "logistic" => Ok(ClassifierSpec::Logistic),
            "qda" => Ok(ClassifierSpec::Qda),
            "knn" | "nn" => Ok(ClassifierSpec::knn()),
            "mlp" => Ok(ClassifierSpec::mlp()),
            "constant" => Ok(ClassifierSpec::Constant { prob: 0.5 }),
            other => invalid(format!("unknown classifier `{other}`")),
        }
    }
}

fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(AcoreError::InvalidInput(msg.into()))
}

/// Per-feature affine standardization fitted on the training set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardizer {
    pub fn fit(features: &[f64], dim: usize) -> Self {
        let n = (features.len() / dim) as f64;
        let mut mean = vec![0.0; dim];
        for row in features.chunks_exact(dim) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for row in features.chunks_exact(dim) {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let sd = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, sd }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    #[inline]
    pub fn apply(&self, raw: &[f64], out: &mut [f64]) {
        for (((o, r), m), s) in out.iter_mut().zip(raw).zip(&self.mean).zip(&self.sd) {
            *o = (r - m) / s;
        }
    }

    pub fn transform_all(&self, features: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; features.len()];
        for (src, dst) in features.chunks_exact(d).zip(out.chunks_exact_mut(d)) {
            self.apply(src, dst);
        }
        out
    }
}

/// Raw classifier output before clipping.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Score {
    Logit(f64),
    Prob(f64),
}

/// A trained classifier operating on standardized features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fitted {
    Logistic(LogisticModel),
    Qda(QdaModel),
    Knn(KnnModel),
    Mlp(MlpModel),
    Constant { prob: f64 },
}

impl Fitted {
    #[inline]
    pub fn score(&self, z: &[f64]) -> Score {
        match self {
            Fitted::Logistic(m) => Score::Logit(m.logit(z)),
            Fitted::Qda(m) => Score::Logit(m.logit(z)),
            Fitted::Knn(m) => Score::Prob(m.prob(z)),
            Fitted::Mlp(m) => Score::Logit(m.logit(z)),
            Fitted::Constant { prob } => Score::Prob(*prob),
        }
    }
}

/// Trains on standardized features `z` (row-major, `dim` columns).
pub(crate) fn fit(spec: &ClassifierSpec, z: &[f64], dim: usize, y: &[bool], rng: &mut SimRng) -> Result<Fitted> {
    spec.validate()?;
    let n1 = y.iter().filter(|&&v| v).count();
    if n1 == 0 || n1 == y.len() {
        return Err(AcoreError::Training("training sample has a single class".into()));
    }
    Ok(match spec {
        ClassifierSpec::Logistic => Fitted::Logistic(LogisticModel::fit(z, dim, y)?),
        ClassifierSpec::Qda => Fitted::Qda(QdaModel::fit(z, dim, y)?),
        ClassifierSpec::Knn { k } => {
            let k = k.unwrap_or_else(|| (y.len() as f64).sqrt().round().max(1.0) as usize);
            Fitted::Knn(KnnModel::fit(z, dim, y, k))
        }
        ClassifierSpec::Mlp(cfg) => Fitted::Mlp(MlpModel::fit(cfg, z, dim, y, rng)?),
        ClassifierSpec::Constant { prob } => Fitted::Constant { prob: *prob },
    })
}
