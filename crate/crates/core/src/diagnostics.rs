//! Coverage diagnostics: P(θ ∈ R(D) | θ) estimated from fresh simulations by
//! a logistic regression of containment indicators on θ.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::critical_values::CriticalSurface;
use crate::error::{domain, Result};
use crate::irls::{fit_logistic, sigmoid};
use crate::model_zoo::{ModelSpec, ParamGrid, ParamSpace};
use crate::neyman::confidence_set;
use crate::odds::LogOdds;
use crate::rng::{fork, stream, SimRng};

/// Fitted probabilities above this trigger the pseudo-observation fallback.
const SEPARATION_LIMIT: f64 = 1.0 - 1e-6;

#[derive(Clone, Debug, PartialEq, Default)]
pub struct CoverageSample {
    pub dim: usize,
    pub thetas: Vec<f64>,
    pub contained: Vec<bool>,
}

impl CoverageSample {
    pub fn len(&self) -> usize {
        self.contained.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contained.is_empty()
    }

    pub fn theta(&self, i: usize) -> &[f64] {
        &self.thetas[i * self.dim..(i + 1) * self.dim]
    }

    pub fn raw_coverage(&self) -> f64 {
        self.contained.iter().filter(|&&w| w).count() as f64 / self.len() as f64
    }
}

/// Draws θ′ ~ r_Θ, a dataset at θ′, builds R(D) and records whether the grid
/// point nearest θ′ was accepted.
pub fn collect_coverage(
    model: &ModelSpec,
    est: &dyn LogOdds,
    surface: &CriticalSurface,
    grid: &ParamGrid,
    b_dd: usize,
    rng: &mut SimRng,
) -> Result<CoverageSample> {
    if b_dd == 0 {
        return domain("B'' must be at least 1");
    }
    let base = fork(rng);
    let draws = (0..b_dd)
        .into_par_iter()
        .map(|i| {
            let mut r = stream(base, i as u64);
            let theta = model.prior_draw(&model.proposal, &mut r)?;
            let data = model.simulate(&theta, model.n_obs, &mut r)?;
            let set = confidence_set(est, surface, &data, grid)?;
            Ok((set.contains(grid.nearest(&theta)), theta))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sample = CoverageSample { dim: model.space.dim(), ..Default::default() };
    for (w, theta) in draws {
        sample.thetas.extend_from_slice(&theta);
        sample.contained.push(w);
    }
    Ok(sample)
}

/// Quadratic polynomial features of θ rescaled to [−1, 1] per axis.
fn features(theta: &[f64], space: &ParamSpace, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    let z: Vec<f64> = theta
        .iter()
        .zip(space.bounds())
        .map(|(&t, [lo, hi])| if hi > lo { (2.0 * t - lo - hi) / (hi - lo) } else { 0.0 })
        .collect();
    out.extend_from_slice(&z);
    for j in 0..z.len() {
        for k in j..z.len() {
            out.push(z[j] * z[k]);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoverageReport {
    pub nominal: f64,
    pub n_samples: usize,
    pub estimate: Vec<f64>,
    pub se: Vec<f64>,
    /// Grid points where the estimate sits more than 2 SE below nominal.
    pub flagged: Vec<usize>,
    pub passed: bool,
    /// Whether the pseudo-observation fallback was used.
    pub shrunk: bool,
    pub converged: bool,
}

impl CoverageReport {
    pub fn lower(&self, i: usize) -> f64 {
        (self.estimate[i] - self.se[i]).max(0.0)
    }

    pub fn upper(&self, i: usize) -> f64 {
        (self.estimate[i] + self.se[i]).min(1.0)
    }

    /// One row per grid point; bands are ±1 SE.
    pub fn write_csv<W: Write>(&self, grid: &ParamGrid, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..grid.dim()).map(|i| format!("theta{i}")).collect();
        header.extend(["estimate", "lower", "upper", "nominal"].map(String::from));
        w.write_record(&header)?;
        for (i, t) in grid.iter().enumerate() {
            let mut rec: Vec<String> = t.iter().map(|v| v.to_string()).collect();
            rec.push(self.estimate[i].to_string());
            rec.push(self.lower(i).to_string());
            rec.push(self.upper(i).to_string());
            rec.push(self.nominal.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Estimates as a matrix for a 2-D grid: one row per value of the first
    /// axis, one column per value of the second.
    pub fn write_heatmap_csv<W: Write>(&self, grid: &ParamGrid, out: W) -> Result<()> {
        let axes = grid.axes();
        if axes.len() != 2 {
            return domain("heat map export needs a 2-D grid");
        }
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["theta0\\theta1".to_string()];
        header.extend(axes[1].iter().map(|v| v.to_string()));
        w.write_record(&header)?;
        for (a, &v0) in axes[0].iter().enumerate() {
            let mut rec = vec![v0.to_string()];
            rec.extend((0..axes[1].len()).map(|b| self.estimate[a * axes[1].len() + b].to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Logistic regression of containment on quadratic features of θ, evaluated
/// on the grid with delta-method standard errors. A point fails when
/// estimate + 2·SE < nominal; over-coverage is not a failure.
pub fn fit_coverage_curve(
    sample: &CoverageSample,
    grid: &ParamGrid,
    space: &ParamSpace,
    nominal: f64,
) -> Result<CoverageReport> {
    if sample.is_empty() {
        return domain("empty coverage sample");
    }
    if sample.dim != space.dim() || grid.dim() != space.dim() {
        return domain("coverage sample, grid and parameter space disagree on dimension");
    }
    let mut row = Vec::new();
    let mut design = Vec::new();
    let mut y = Vec::with_capacity(sample.len() + 2);
    for i in 0..sample.len() {
        features(sample.theta(i), space, &mut row);
        design.extend_from_slice(&row);
        y.push(if sample.contained[i] { 1.0 } else { 0.0 });
    }
    let p = row.len();
    let mut w = vec![1.0; sample.len()];

    let fit_once = |design: &[f64], y: &[f64], w: &[f64]| {
        let x = DMatrix::from_row_slice(y.len(), p, design);
        fit_logistic(&x, y, w, 1e-8, 100).map(|f| (f, x))
    };
    let all_one = sample.contained.iter().all(|&c| c);
    let all_zero = sample.contained.iter().all(|&c| !c);
    let mut shrunk = false;
    let mut fit = if all_one || all_zero { None } else { fit_once(&design, &y, &w).ok() };
    let separated = match &fit {
        Some((f, x)) => (x * &f.beta).iter().any(|&e| sigmoid(e) > SEPARATION_LIMIT),
        None => true,
    };
    if separated {
        // one half-weight success and one half-weight failure at the mean θ
        let mut centre = vec![0.0; sample.dim];
        for i in 0..sample.len() {
            for (c, t) in centre.iter_mut().zip(sample.theta(i)) {
                *c += t / sample.len() as f64;
            }
        }
        features(&centre, space, &mut row);
        for label in [1.0, 0.0] {
            design.extend_from_slice(&row);
            y.push(label);
            w.push(0.5);
        }
        fit = Some(fit_once(&design, &y, &w)?);
        shrunk = true;
    }
    let (fit, _) = fit.expect("fitted above");

    let mut estimate = Vec::with_capacity(grid.len());
    let mut se = Vec::with_capacity(grid.len());
    let mut flagged = Vec::new();
    for (i, t) in grid.iter().enumerate() {
        features(t, space, &mut row);
        let eta: f64 = row.iter().zip(fit.beta.iter()).map(|(a, b)| a * b).sum();
        let mut var_eta = 0.0;
        for a in 0..p {
            for b in 0..p {
                var_eta += row[a] * fit.covariance[(a, b)] * row[b];
            }
        }
        let prob = sigmoid(eta);
        let s = prob * (1.0 - prob) * var_eta.max(0.0).sqrt();
        if prob + 2.0 * s < nominal {
            flagged.push(i);
        }
        estimate.push(prob);
        se.push(s);
    }
    Ok(CoverageReport {
        nominal,
        n_samples: sample.len(),
        estimate,
        se,
        passed: flagged.is_empty(),
        flagged,
        shrunk,
        converged: fit.converged,
    })
}
