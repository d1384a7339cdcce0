use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::irls::fit_logistic;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub intercept: f64,
    pub weights: Vec<f64>,
}

impl LogisticModel {
    pub(crate) fn fit(z: &[f64], dim: usize, y: &[bool]) -> Result<Self> {
        let n = y.len();
        let design = DMatrix::from_fn(n, dim + 1, |i, j| if j == 0 { 1.0 } else { z[i * dim + j - 1] });
        let yf: Vec<f64> = y.iter().map(|&v| f64::from(u8::from(v))).collect();
        let fit = fit_logistic(&design, &yf, &vec![1.0; n], 1e-8, 100)?;
        Ok(Self { intercept: fit.beta[0], weights: fit.beta.iter().skip(1).copied().collect() })
    }

    #[inline]
    pub fn logit(&self, z: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(z).map(|(w, v)| w * v).sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::irls::sigmoid;

    #[test]
    fn constant_features_give_empirical_rate() {
        // standardized constant features are all zero
        let y: Vec<bool> = (0..300).map(|i| i % 3 == 0).collect();
        let z = vec![0.0; 600];
        let m = LogisticModel::fit(&z, 2, &y).unwrap();
        assert!((sigmoid(m.logit(&[0.0, 0.0])) - 1.0 / 3.0).abs() < 1e-9);
        assert!(m.weights.iter().all(|w| w.abs() < 1e-9));
    }
}
