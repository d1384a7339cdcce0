//! Experiment configuration read from TOML.
//!
//! ```toml
//! [model]
//! name = "poisson_counting"
//! grid_points = 100
//! true_theta = [10.0]
//!
//! [experiment]
//! seed = 7
//! classifiers = ["qda", "mlp"]
//! b = [100, 500, 1000]
//! ```
//!
//! Unset keys take the defaults of the toy-example study (B′ = 5000,
//! B″ = 250, n = 10, α = 0.1, 100 repetitions).

use std::ops::Range;
use std::str::FromStr;

use std::path::Path;

use acore::model_zoo::{Dataset, ModelKind, ModelSpec, ParamSpace};
use acore::{BoostedConfig, ClassifierSpec, QuantileKind};
use serde::Deserialize;
use toml::Spanned;

#[derive(Debug, thiserror::Error)]
#[error("{path}:{line}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: Spanned<RawModel>,
    #[serde(default)]
    experiment: Option<Spanned<RawExperiment>>,
    #[serde(default)]
    output: Option<RawOutput>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    name: Spanned<String>,
    grid_points: Option<Spanned<i64>>,
    n_obs: Option<Spanned<i64>>,
    bounds: Option<Spanned<Vec<[f64; 2]>>>,
    true_theta: Option<Spanned<Vec<f64>>>,
    data: Option<Spanned<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    seed: Option<Spanned<i64>>,
    alpha: Option<Spanned<f64>>,
    classifiers: Option<Spanned<Vec<String>>>,
    b: Option<Spanned<Vec<i64>>>,
    b_prime: Option<Spanned<i64>>,
    b_prime_list: Option<Spanned<Vec<i64>>>,
    b_dd: Option<Spanned<i64>>,
    n_reps: Option<Spanned<i64>>,
    holdout: Option<Spanned<i64>>,
    mc_reps: Option<Spanned<i64>>,
    quantile: Option<Spanned<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub true_theta: Vec<f64>,
    /// Observed dataset read from `model.data`; simulated at `true_theta` when absent.
    pub observed: Option<Dataset>,
    pub seed: u64,
    pub alpha: f64,
    pub classifiers: Vec<ClassifierSpec>,
    pub b: Vec<usize>,
    pub b_prime: usize,
    pub b_prime_list: Vec<usize>,
    pub b_dd: usize,
    pub n_reps: usize,
    pub holdout: usize,
    pub mc_reps: usize,
    pub quantile: QuantileKind,
    pub output_dir: Option<String>,
}

struct Ctx<'a> {
    path: &'a str,
    text: &'a str,
    base: &'a Path,
}

impl Ctx<'_> {
    fn line_of(&self, offset: usize) -> usize {
        self.text[..offset.min(self.text.len())].matches('\n').count() + 1
    }

    fn err(&self, span: Range<usize>, message: impl Into<String>) -> ConfigError {
        ConfigError { path: self.path.to_string(), line: self.line_of(span.start), message: message.into() }
    }

    fn count(&self, v: &Spanned<i64>, what: &str) -> Result<usize, ConfigError> {
        if *v.get_ref() < 1 {
            return Err(self.err(v.span(), format!("{what} must be a positive count, got {}", v.get_ref())));
        }
        Ok(*v.get_ref() as usize)
    }

    fn read_data(&self, file: &Spanned<String>, model: &ModelSpec) -> Result<Dataset, ConfigError> {
        let path = self.base.join(file.get_ref());
        let fail = |msg: String| self.err(file.span(), format!("data file {}: {msg}", path.display()));
        let mut reader = csv::Reader::from_path(&path).map_err(|e| fail(e.to_string()))?;
        let mut data = Dataset::new(model.data_dim());
        for rec in reader.records() {
            let rec = rec.map_err(|e| fail(e.to_string()))?;
            let row = rec
                .iter()
                .map(|v| v.trim().parse::<f64>().map_err(|e| fail(format!("`{v}`: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            if row.len() != model.data_dim() || row.iter().any(|v| !v.is_finite()) {
                return Err(fail(format!("rows need {} finite values", model.data_dim())));
            }
            data.push(&row);
        }
        if data.is_empty() {
            return Err(fail("no observations".into()));
        }
        if data.len() != model.n_obs {
            // critical values are calibrated for datasets of exactly n_obs
            return Err(fail(format!("{} observations but n_obs = {}", data.len(), model.n_obs)));
        }
        Ok(data)
    }

    fn counts(&self, v: &Spanned<Vec<i64>>, what: &str) -> Result<Vec<usize>, ConfigError> {
        if v.get_ref().is_empty() {
            return Err(self.err(v.span(), format!("{what} must not be empty")));
        }
        v.get_ref()
            .iter()
            .map(|&x| {
                if x < 1 {
                    Err(self.err(v.span(), format!("{what} entries must be positive counts, got {x}")))
                } else {
                    Ok(x as usize)
                }
            })
            .collect()
    }
}

fn preset(kind: ModelKind) -> (ModelSpec, Vec<f64>) {
    match kind {
        ModelKind::PoissonCounting => (ModelSpec::poisson_counting(), vec![10.0]),
        ModelKind::Gmm => (ModelSpec::gmm(), vec![5.0]),
        ModelKind::SignalBackground => (ModelSpec::signal_background(), vec![10.0, 90.0]),
        ModelKind::GaussianMean => (ModelSpec::gaussian_mean(), vec![0.0]),
    }
}

impl ExperimentConfig {
    /// Parses `text`; `path` is used in messages and to resolve `model.data`.
    pub fn from_toml(path: &str, text: &str) -> Result<Self, ConfigError> {
        let base = Path::new(path).parent().unwrap_or(Path::new("."));
        let ctx = Ctx { path, text, base };
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let span = e.span().unwrap_or(0..0);
            ctx.err(span, e.message().to_string())
        })?;

        let model_span = raw.model.span();
        let m = raw.model.into_inner();
        let kind = m.name.get_ref().parse::<ModelKind>().map_err(|_| {
            ctx.err(
                m.name.span(),
                format!(
                    "unknown model `{}` (expected poisson_counting, gmm, signal_background or gaussian_mean)",
                    m.name.get_ref()
                ),
            )
        })?;
        let (mut model, mut true_theta) = preset(kind);
        let bounds = match &m.bounds {
            Some(b) => {
                if b.get_ref().len() != kind.param_dim() {
                    return Err(ctx.err(b.span(), format!("bounds need {} intervals", kind.param_dim())));
                }
                b.get_ref().clone()
            }
            None => model.space.bounds().to_vec(),
        };
        let grid_points = match &m.grid_points {
            Some(g) => ctx.count(g, "grid_points")?,
            None => model.space.grid_points_per_dim(),
        };
        let space = ParamSpace::new(bounds, grid_points).map_err(|e| {
            let span = m.bounds.as_ref().map(|b| b.span()).unwrap_or(model_span.clone());
            ctx.err(span, e.to_string())
        })?;
        let n_obs = match &m.n_obs {
            Some(n) => ctx.count(n, "n_obs")?,
            None => model.n_obs,
        };
        let reference = model.reference.clone();
        model = ModelSpec::new(kind, space, n_obs)
            .and_then(|s| s.with_reference(reference))
            .map_err(|e| ctx.err(model_span.clone(), e.to_string()))?;
        if let Some(t) = &m.true_theta {
            if !model.space.contains(t.get_ref()) {
                return Err(ctx.err(t.span(), "true_theta lies outside the parameter bounds"));
            }
            true_theta = t.get_ref().clone();
        }
        if !model.space.contains(&true_theta) {
            return Err(ctx.err(model_span, "default true_theta lies outside the configured bounds; set true_theta"));
        }

        let observed = match &m.data {
            Some(d) => Some(ctx.read_data(d, &model)?),
            None => None,
        };

        let Some(exp) = raw.experiment else {
            return Err(ctx.err(0..0, "missing [experiment] section (the seed is mandatory)"));
        };
        let exp_span = exp.span();
        let e = exp.into_inner();
        let seed = match &e.seed {
            Some(s) if *s.get_ref() >= 0 => *s.get_ref() as u64,
            Some(s) => return Err(ctx.err(s.span(), "seed must be non-negative")),
            None => return Err(ctx.err(exp_span, "experiment.seed is mandatory")),
        };
        let alpha = match &e.alpha {
            Some(a) if *a.get_ref() > 0.0 && *a.get_ref() < 1.0 => *a.get_ref(),
            Some(a) => return Err(ctx.err(a.span(), format!("alpha must lie in (0, 1), got {}", a.get_ref()))),
            None => 0.1,
        };
        let classifiers = match &e.classifiers {
            Some(list) => {
                if list.get_ref().is_empty() {
                    return Err(ctx.err(list.span(), "classifiers must not be empty"));
                }
                list.get_ref()
                    .iter()
                    .map(|c| ClassifierSpec::from_str(c).map_err(|err| ctx.err(list.span(), err.to_string())))
                    .collect::<Result<Vec<_>, _>>()?
            }
            None => vec![ClassifierSpec::Qda],
        };
        let quantile = match &e.quantile {
            None => QuantileKind::BoostedTrees(BoostedConfig::default()),
            Some(q) => match q.get_ref().as_str() {
                "boosted_trees" => QuantileKind::BoostedTrees(BoostedConfig::default()),
                "knn_quantile" => QuantileKind::KnnQuantile { k: None },
                other => {
                    return Err(ctx.err(
                        q.span(),
                        format!("unknown quantile regressor `{other}` (expected boosted_trees or knn_quantile)"),
                    ))
                }
            },
        };
        let opt_count = |v: &Option<Spanned<i64>>, what: &str, default: usize| match v {
            Some(v) => ctx.count(v, what),
            None => Ok(default),
        };
        let opt_counts = |v: &Option<Spanned<Vec<i64>>>, what: &str, default: &[usize]| match v {
            Some(v) => ctx.counts(v, what),
            None => Ok(default.to_vec()),
        };
        Ok(Self {
            model,
            true_theta,
            observed,
            seed,
            alpha,
            classifiers,
            b: opt_counts(&e.b, "b", &[1000])?,
            b_prime: opt_count(&e.b_prime, "b_prime", 5000)?,
            b_prime_list: opt_counts(&e.b_prime_list, "b_prime_list", &[100, 500, 1000])?,
            b_dd: opt_count(&e.b_dd, "b_dd", 250)?,
            n_reps: opt_count(&e.n_reps, "n_reps", 100)?,
            holdout: opt_count(&e.holdout, "holdout", 5000)?,
            mc_reps: match &e.mc_reps {
                Some(v) if *v.get_ref() < 100 => {
                    return Err(ctx.err(v.span(), "mc_reps must be at least 100"));
                }
                v => opt_count(v, "mc_reps", 10_000)?,
            },
            quantile,
            output_dir: raw.output.and_then(|o| o.dir),
        })
    }

    pub fn load(path: &std::path::Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
        Ok(Self::from_toml(&path.display().to_string(), &text)?)
    }
}
