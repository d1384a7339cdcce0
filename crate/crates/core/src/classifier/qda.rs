use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{AcoreError, Result};

/// Gaussian class-conditional model with full per-class covariance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QdaModel {
    dim: usize,
    /// log π₁ − log π₀ − ½ log|Σ₁| + ½ log|Σ₀|
    offset: f64,
    mean: [Vec<f64>; 2],
    /// Row-major precision matrices.
    precision: [Vec<f64>; 2],
}

impl QdaModel {
    pub(crate) fn fit(z: &[f64], dim: usize, y: &[bool]) -> Result<Self> {
        let mut means = [vec![0.0; dim], vec![0.0; dim]];
        let mut counts = [0usize; 2];
        for (row, &label) in z.chunks_exact(dim).zip(y) {
            let c = usize::from(label);
            counts[c] += 1;
            for (m, v) in means[c].iter_mut().zip(row) {
                *m += v;
            }
        }
        if counts.iter().any(|&c| c < 2) {
            return Err(AcoreError::Training("qda needs two points per class".into()));
        }
        for c in 0..2 {
            means[c].iter_mut().for_each(|m| *m /= counts[c] as f64);
        }
        let mut covs = [DMatrix::<f64>::zeros(dim, dim), DMatrix::<f64>::zeros(dim, dim)];
        for (row, &label) in z.chunks_exact(dim).zip(y) {
            let c = usize::from(label);
            let d = DVector::from_iterator(dim, row.iter().zip(&means[c]).map(|(v, m)| v - m));
            covs[c] += &d * d.transpose();
        }
        let mut precision = [Vec::new(), Vec::new()];
        let mut log_det = [0.0; 2];
        for c in 0..2 {
            let mut cov = covs[c].clone() / (counts[c] - 1) as f64;
            let jitter = 1e-6 * cov.trace() / dim as f64;
            for i in 0..dim {
                cov[(i, i)] += jitter;
            }
            let chol = cov
                .cholesky()
                .ok_or_else(|| AcoreError::Training("qda covariance is not positive definite".into()))?;
            log_det[c] = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
            let inv = chol.inverse();
            precision[c] = (0..dim * dim).map(|k| inv[(k / dim, k % dim)]).collect();
        }
        let n = y.len() as f64;
        let prior = [counts[0] as f64 / n, counts[1] as f64 / n];
        let offset = prior[1].ln() - prior[0].ln() - 0.5 * log_det[1] + 0.5 * log_det[0];
        Ok(Self { dim, offset, mean: means, precision })
    }

    #[inline]
    fn quad(&self, c: usize, z: &[f64]) -> f64 {
        let mut diff = [0.0; 8];
        for i in 0..self.dim {
            diff[i] = z[i] - self.mean[c][i];
        }
        let p = &self.precision[c];
        let mut q = 0.0;
        for i in 0..self.dim {
            let mut s = 0.0;
            for j in 0..self.dim {
                s += p[i * self.dim + j] * diff[j];
            }
            q += diff[i] * s;
        }
        q
    }

    #[inline]
    pub fn logit(&self, z: &[f64]) -> f64 {
        self.offset - 0.5 * self.quad(1, z) + 0.5 * self.quad(0, z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn recovers_gaussian_log_ratio() {
        // class 1: N(1, 1), class 0: N(0, 4); equal priors
        let mut rng = seeded(3);
        let n = 40_000;
        let mut z = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let e: f64 = rng.sample(StandardNormal);
            if i % 2 == 0 {
                z.push(1.0 + e);
                y.push(true);
            } else {
                z.push(2.0 * e);
                y.push(false);
            }
        }
        let m = QdaModel::fit(&z, 1, &y).unwrap();
        for x in [-1.0, 0.0, 0.5, 2.0] {
            let exact = (-0.5 * (x - 1.0f64).powi(2)) - (-0.5 * (x / 2.0f64).powi(2) - 2f64.ln());
            assert!((m.logit(&[x]) - exact).abs() < 0.08, "x={x}: {} vs {exact}", m.logit(&[x]));
        }
    }
}
