//! Simulators, reference distributions and exact likelihoods.
//!
//! Four models are available: the Poisson counting toy, the symmetric
//! two-component Gaussian mixture, the two-region signal/background counting
//! experiment, and a Gaussian-mean model whose likelihood-ratio test has a
//! closed form. All proposals are uniform boxes and all references are
//! independent normals.

use std::f64::consts::LN_2;

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, AcoreError, Result};
use crate::rng::SimRng;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Parameter space: an axis-aligned box with an evenly spaced grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSpace {
    bounds: Vec<[f64; 2]>,
    grid_points_per_dim: usize,
}

impl ParamSpace {
    pub fn new(bounds: Vec<[f64; 2]>, grid_points_per_dim: usize) -> Result<Self> {
        if bounds.is_empty() || bounds.len() > 2 {
            return domain(format!("parameter dimension must be 1 or 2, got {}", bounds.len()));
        }
        for (d, [lo, hi]) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return domain(format!("bounds for dimension {d} must be finite with lower < upper"));
            }
        }
        if grid_points_per_dim == 0 {
            return domain("grid_points_per_dim must be positive");
        }
        Ok(Self { bounds, grid_points_per_dim })
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[[f64; 2]] {
        &self.bounds
    }

    pub fn grid_points_per_dim(&self) -> usize {
        self.grid_points_per_dim
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta.iter().zip(&self.bounds).all(|(t, [lo, hi])| *lo <= *t && *t <= *hi)
    }

    pub fn check(&self, theta: &[f64]) -> Result<()> {
        if self.contains(theta) {
            Ok(())
        } else {
            domain(format!("parameter {theta:?} outside bounds {:?}", self.bounds))
        }
    }

    /// Cartesian product of evenly spaced axes, endpoints included.
    pub fn grid(&self) -> ParamGrid {
        let axes: Vec<Vec<f64>> = self
            .bounds
            .iter()
            .map(|&[lo, hi]| linspace(lo, hi, self.grid_points_per_dim))
            .collect();
        ParamGrid::from_axes(axes)
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
        .collect()
}

/// Enumerated grid points, row-major with the first dimension slowest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    dim: usize,
    axes: Vec<Vec<f64>>,
    points: Vec<f64>,
}

impl ParamGrid {
    pub fn from_axes(axes: Vec<Vec<f64>>) -> Self {
        let dim = axes.len();
        let mut points = Vec::new();
        match dim {
            1 => points.extend_from_slice(&axes[0]),
            2 => {
                for &a in &axes[0] {
                    for &b in &axes[1] {
                        points.push(a);
                        points.push(b);
                    }
                }
            }
            _ => panic!("grids are 1- or 2-dimensional"),
        }
        Self { dim, axes, points }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.points.chunks_exact(self.dim)
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    /// Index of the nearest grid point; exact ties go to the lower index.
    pub fn nearest(&self, theta: &[f64]) -> usize {
        let mut index = 0;
        for (axis, &t) in self.axes.iter().zip(theta) {
            let mut best = 0;
            let mut best_dist = f64::INFINITY;
            for (k, &a) in axis.iter().enumerate() {
                let d = (a - t).abs();
                if d < best_dist {
                    best = k;
                    best_dist = d;
                }
            }
            index = index * axis.len() + best;
        }
        index
    }
}

/// A box-shaped subset of the parameter space. A point is a degenerate box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Region {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        Self { lower, upper }
    }

    pub fn full(space: &ParamSpace) -> Self {
        Self {
            lower: space.bounds().iter().map(|b| b[0]).collect(),
            upper: space.bounds().iter().map(|b| b[1]).collect(),
        }
    }

    pub fn point(theta: &[f64]) -> Self {
        Self { lower: theta.to_vec(), upper: theta.to_vec() }
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
            || self.lower.len() != self.upper.len()
            || self.lower.iter().zip(&self.upper).any(|(lo, hi)| !(lo <= hi))
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.lower.len()
            && theta
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(t, (lo, hi))| lo <= t && t <= hi)
    }

    /// Grid indices that fall inside the region, in grid order.
    pub fn grid_indices(&self, grid: &ParamGrid) -> Vec<usize> {
        (0..grid.len()).filter(|&i| self.contains(grid.point(i))).collect()
    }
}

/// The four supported simulators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    PoissonCounting,
    Gmm,
    SignalBackground,
    GaussianMean,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::PoissonCounting => "poisson_counting",
            ModelKind::Gmm => "gmm",
            ModelKind::SignalBackground => "signal_background",
            ModelKind::GaussianMean => "gaussian_mean",
        }
    }

    pub fn data_dim(self) -> usize {
        match self {
            ModelKind::SignalBackground => 2,
            _ => 1,
        }
    }

    pub fn param_dim(self) -> usize {
        match self {
            ModelKind::SignalBackground => 2,
            _ => 1,
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = AcoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "poisson_counting" | "poisson" => Ok(ModelKind::PoissonCounting),
            "gmm" => Ok(ModelKind::Gmm),
            "signal_background" => Ok(ModelKind::SignalBackground),
            "gaussian_mean" => Ok(ModelKind::GaussianMean),
            other => Err(AcoreError::InvalidInput(format!("unknown model `{other}`"))),
        }
    }
}

/// Independent normal reference distribution G.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalNormal {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl DiagonalNormal {
    pub fn log_density(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.mean.iter().zip(&self.sd))
            .map(|(&v, (&m, &s))| normal_log_density(v, m, s))
            .sum()
    }
}

/// A fully specified simulation model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub space: ParamSpace,
    /// Uniform proposal box r_Θ.
    pub proposal: Region,
    pub reference: DiagonalNormal,
    pub n_obs: usize,
}

impl ModelSpec {
    /// Builds a model with the default reference for `kind` and `space`.
    pub fn new(kind: ModelKind, space: ParamSpace, n_obs: usize) -> Result<Self> {
        if n_obs == 0 {
            return domain("n_obs must be at least 1");
        }
        if space.dim() != kind.param_dim() {
            return domain(format!(
                "{} needs a {}-dimensional parameter space",
                kind.name(),
                kind.param_dim()
            ));
        }
        let reference = default_reference(kind, &space);
        Ok(Self { kind, proposal: Region::full(&space), space, reference, n_obs })
    }

    pub fn with_reference(mut self, reference: DiagonalNormal) -> Result<Self> {
        if reference.mean.len() != self.kind.data_dim()
            || reference.sd.len() != self.kind.data_dim()
            || reference.sd.iter().any(|s| !(*s > 0.0 && s.is_finite()))
        {
            return domain("reference must match the data dimension with positive sds");
        }
        self.reference = reference;
        Ok(self)
    }

    /// X ~ Poisson(100 + θ), θ ∈ [0, 20], G = N(110, 15²), n = 10.
    pub fn poisson_counting() -> Self {
        Self::new(ModelKind::PoissonCounting, ParamSpace::new(vec![[0.0, 20.0]], 100).unwrap(), 10)
            .unwrap()
    }

    /// X ~ ½N(−θ, 1) + ½N(θ, 1), θ ∈ [0, 10], G = N(0, 5²), n = 10.
    pub fn gmm() -> Self {
        Self::new(ModelKind::Gmm, ParamSpace::new(vec![[0.0, 10.0]], 100).unwrap(), 10).unwrap()
    }

    /// X = (N, M), N ~ Poisson(b + ν), M ~ Poisson(b), (ν, b) ∈ [0, 20] × [80, 100].
    pub fn signal_background() -> Self {
        Self::new(
            ModelKind::SignalBackground,
            ParamSpace::new(vec![[0.0, 20.0], [80.0, 100.0]], 100).unwrap(),
            10,
        )
        .unwrap()
    }

    /// X ~ N(θ, 1), θ ∈ [−5, 5], G = N(0, 5²), n = 10.
    pub fn gaussian_mean() -> Self {
        Self::new(ModelKind::GaussianMean, ParamSpace::new(vec![[-5.0, 5.0]], 100).unwrap(), 10)
            .unwrap()
    }

    pub fn data_dim(&self) -> usize {
        self.kind.data_dim()
    }

    pub fn grid(&self) -> ParamGrid {
        self.space.grid()
    }

    /// Draws `n` i.i.d. observations from F_θ.
    pub fn simulate(&self, theta: &[f64], n: usize, rng: &mut SimRng) -> Result<Dataset> {
        self.space.check(theta)?;
        if n == 0 {
            return domain("sample size must be at least 1");
        }
        let mut data = Dataset::with_capacity(self.data_dim(), n);
        let mut row = [0.0; 2];
        for _ in 0..n {
            self.simulate_into(theta, rng, &mut row[..self.data_dim()]);
            data.push(&row[..self.data_dim()]);
        }
        Ok(data)
    }

    /// One draw from F_θ without bounds checking.
    pub(crate) fn simulate_into(&self, theta: &[f64], rng: &mut SimRng, out: &mut [f64]) {
        match self.kind {
            ModelKind::PoissonCounting => out[0] = poisson(100.0 + theta[0], rng),
            ModelKind::Gmm => {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                let centre = if rng.random::<bool>() { theta[0] } else { -theta[0] };
                out[0] = centre + z;
            }
            ModelKind::SignalBackground => {
                let (nu, b) = (theta[0], theta[1]);
                out[0] = poisson(b + nu, rng);
                out[1] = poisson(b, rng);
            }
            ModelKind::GaussianMean => {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                out[0] = theta[0] + z;
            }
        }
    }

    /// One draw from the reference distribution G.
    pub fn reference_draw(&self, rng: &mut SimRng) -> Observation {
        let mut out = vec![0.0; self.data_dim()];
        self.reference_into(rng, &mut out);
        Observation(out)
    }

    pub(crate) fn reference_into(&self, rng: &mut SimRng, out: &mut [f64]) {
        for (o, (&m, &s)) in out.iter_mut().zip(self.reference.mean.iter().zip(&self.reference.sd)) {
            *o = Normal::new(m, s).expect("validated reference").sample(rng);
        }
    }

    /// Uniform draw over `region` (clipped to the parameter space).
    pub fn prior_draw(&self, region: &Region, rng: &mut SimRng) -> Result<Vec<f64>> {
        if region.is_empty() || region.lower.len() != self.space.dim() {
            return domain("proposal region is empty");
        }
        let mut theta = Vec::with_capacity(self.space.dim());
        for (d, [slo, shi]) in self.space.bounds().iter().enumerate() {
            let lo = region.lower[d].max(*slo);
            let hi = region.upper[d].min(*shi);
            if lo > hi {
                return domain("proposal region does not intersect the parameter space");
            }
            theta.push(if lo == hi { lo } else { rng.random_range(lo..hi) });
        }
        Ok(theta)
    }

    /// log f_θ(x) for one observation.
    pub fn log_density(&self, theta: &[f64], x: &[f64]) -> f64 {
        match self.kind {
            ModelKind::PoissonCounting => poisson_log_pmf(x[0], 100.0 + theta[0]),
            ModelKind::Gmm => gmm_log_density(x[0], theta[0]),
            ModelKind::SignalBackground => {
                poisson_log_pmf(x[0], theta[1] + theta[0]) + poisson_log_pmf(x[1], theta[1])
            }
            ModelKind::GaussianMean => normal_log_density(x[0], theta[0], 1.0),
        }
    }

    pub fn reference_log_density(&self, x: &[f64]) -> f64 {
        self.reference.log_density(x)
    }

    /// Σᵢ log f_θ(xᵢ); −∞ when some point has zero density.
    pub fn exact_loglik(&self, theta: &[f64], data: &Dataset) -> f64 {
        data.rows().map(|x| self.log_density(theta, x)).sum()
    }
}

/// Reference defaults: the toy models use the published normals, the
/// counting experiment matches the prior-predictive mean and sd of (N, M).
fn default_reference(kind: ModelKind, space: &ParamSpace) -> DiagonalNormal {
    match kind {
        ModelKind::PoissonCounting => DiagonalNormal { mean: vec![110.0], sd: vec![15.0] },
        ModelKind::Gmm | ModelKind::GaussianMean => DiagonalNormal { mean: vec![0.0], sd: vec![5.0] },
        ModelKind::SignalBackground => {
            let [nlo, nhi] = space.bounds()[0];
            let [blo, bhi] = space.bounds()[1];
            let (mean_nu, var_nu) = ((nlo + nhi) / 2.0, (nhi - nlo).powi(2) / 12.0);
            let (mean_b, var_b) = ((blo + bhi) / 2.0, (bhi - blo).powi(2) / 12.0);
            // law of total variance: E[Var | θ] + Var[E | θ]
            let mean_n = mean_nu + mean_b;
            let var_n = mean_n + var_nu + var_b;
            let var_m = mean_b + var_b;
            DiagonalNormal { mean: vec![mean_n, mean_b], sd: vec![var_n.sqrt(), var_m.sqrt()] }
        }
    }
}

fn poisson(lambda: f64, rng: &mut SimRng) -> f64 {
    Poisson::new(lambda).expect("positive rate").sample(rng)
}

pub(crate) fn normal_log_density(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - LN_SQRT_2PI
}

/// Poisson log pmf, extended to real x ≥ 0 through Γ(x + 1) so that
/// continuous reference draws get a finite density.
pub(crate) fn poisson_log_pmf(x: f64, lambda: f64) -> f64 {
    if x < 0.0 || !x.is_finite() {
        return f64::NEG_INFINITY;
    }
    x * lambda.ln() - lambda - ln_gamma(x + 1.0)
}

/// log(½φ(x+θ) + ½φ(x−θ)) via log-sum-exp.
pub(crate) fn gmm_log_density(x: f64, theta: f64) -> f64 {
    let a = -0.5 * (x + theta) * (x + theta);
    let b = -0.5 * (x - theta) * (x - theta);
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln() - LN_2 - LN_SQRT_2PI
}

/// One observation x ∈ ℝ^d (counts are stored as reals).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation(pub Vec<f64>);

impl Observation {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// A list of observations stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    dim: usize,
    values: Vec<f64>,
}

impl Dataset {
    pub fn new(dim: usize) -> Self {
        Self { dim, values: Vec::new() }
    }

    pub fn with_capacity(dim: usize, rows: usize) -> Self {
        Self { dim, values: Vec::with_capacity(dim * rows) }
    }

    pub fn from_rows<R: AsRef<[f64]>>(dim: usize, rows: impl IntoIterator<Item = R>) -> Result<Self> {
        let mut data = Self::new(dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim || row.iter().any(|v| !v.is_finite()) {
                return Err(AcoreError::InvalidInput(format!(
                    "observation {row:?} must have {dim} finite entries"
                )));
            }
            data.push(row);
        }
        Ok(data)
    }

    pub fn push(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.dim);
        self.values.extend_from_slice(row);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.dim)
    }

    pub fn observations(&self) -> Vec<Observation> {
        self.rows().map(|r| Observation(r.to_vec())).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for r in self.rows() {
            for (a, b) in m.iter_mut().zip(r) {
                *a += b;
            }
        }
        m.iter_mut().for_each(|a| *a /= self.len() as f64);
        m
    }

    /// Rows in lexicographic order; summaries over the canonical order do
    /// not depend on the order the data arrived in.
    pub fn canonical(&self) -> Dataset {
        let mut rows: Vec<&[f64]> = self.rows().collect();
        rows.sort_by(|a, b| {
            a.iter()
                .zip(b.iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut out = Dataset::with_capacity(self.dim, rows.len());
        rows.into_iter().for_each(|r| out.push(r));
        out
    }
}

impl From<Vec<Observation>> for Dataset {
    fn from(obs: Vec<Observation>) -> Self {
        let dim = obs.first().map_or(1, |o| o.0.len());
        let mut data = Dataset::with_capacity(dim, obs.len());
        obs.iter().for_each(|o| data.push(&o.0));
        data
    }
}
