//! Likelihood-free frequentist inference from classifier-estimated odds.
//!
//! A probabilistic classifier trained to tell simulator output at θ apart
//! from a fixed reference distribution yields odds O(x; θ). Summed log odds
//! ratios give the test statistic τ, whose critical values are learned by
//! quantile regression over θ. Inverting the tests over a parameter grid gives
//! confidence sets, and a coverage regression checks them across θ.

pub mod classifier;
pub mod critical_values;
pub mod diagnostics;
pub mod error;
mod irls;
pub mod labeled;
pub mod model_zoo;
pub mod neyman;
pub mod odds;
pub mod oracle;
pub mod pipeline;
pub mod quantile;
pub mod rng;

pub use classifier::{ClassifierSpec, MlpConfig};
pub use critical_values::{
    critical_surface, critical_value_composite, fit_quantile, simulate_tau_set, CriticalSurface, NullMode,
    QuantileKind, QuantileModel, TauTrainingSet,
};
pub use diagnostics::{collect_coverage, fit_coverage_curve, CoverageReport, CoverageSample};
pub use error::{AcoreError, Result};
pub use labeled::{generate_labeled_sample, LabeledExample, LabeledSet};
pub use model_zoo::{Dataset, ModelKind, ModelSpec, Observation, ParamGrid, ParamSpace, Region};
pub use neyman::{average_power, confidence_set, repeated_inversion, test_decision, ConfidenceSet, InversionSummary};
pub use odds::{acore_statistic, constant_odds, cross_entropy, train_odds, LogOdds, OddsModel, TauResult};
pub use oracle::{exact_lr_statistic, mc_exact_critical, ExactOddsOracle};
pub use quantile::BoostedConfig;
pub use rng::SimRng;
pub use pipeline::{
    calibrate, mc_critical_surface, replicate, replicate_exact, Calibrated, PipelineConfig, Repetition, StageTimings,
    SweepRow,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
