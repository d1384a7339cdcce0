//! Weighted logistic regression by iteratively reweighted least squares.

use nalgebra::{DMatrix, DVector};

use crate::error::{AcoreError, Result};

#[derive(Clone, Debug)]
pub(crate) struct LogisticFit {
    pub beta: DVector<f64>,
    /// Inverse observed Fisher information at `beta`.
    pub covariance: DMatrix<f64>,
    pub converged: bool,
}

pub(crate) fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^z) without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn neg_loglik(x: &DMatrix<f64>, y: &[f64], w: &[f64], beta: &DVector<f64>) -> f64 {
    let eta = x * beta;
    eta.iter()
        .zip(y.iter().zip(w))
        .map(|(&e, (&yi, &wi))| wi * (softplus(e) - yi * e))
        .sum()
}

/// Newton iterations on the weighted Bernoulli log-likelihood until the
/// gradient norm drops below `tol`.
pub(crate) fn fit_logistic(
    x: &DMatrix<f64>,
    y: &[f64],
    w: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<LogisticFit> {
    let (n, p) = x.shape();
    if n == 0 || y.len() != n || w.len() != n {
        return Err(AcoreError::Training("empty or mismatched design".into()));
    }
    let mut beta = DVector::zeros(p);
    let mut loss = neg_loglik(x, y, w, &beta);
    let mut converged = false;
    let mut hessian = DMatrix::zeros(p, p);
    for _ in 0..max_iter {
        let eta = x * &beta;
        let mut grad = DVector::zeros(p);
        hessian.fill(0.0);
        for i in 0..n {
            let mu = sigmoid(eta[i]);
            let row = x.row(i);
            let r = w[i] * (y[i] - mu);
            let v = w[i] * mu * (1.0 - mu);
            for a in 0..p {
                grad[a] += r * row[a];
                for b in 0..=a {
                    hessian[(a, b)] += v * row[a] * row[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                hessian[(b, a)] = hessian[(a, b)];
            }
        }
        if grad.norm() < tol {
            converged = true;
            break;
        }
        let step = solve_spd(&hessian, &grad)?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let candidate = &beta + &step * t;
            let l = neg_loglik(x, y, w, &candidate);
            if l <= loss + 1e-12 * loss.abs().max(1.0) {
                beta = candidate;
                loss = l;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let covariance = invert_spd(&information(x, w, &beta))?;
    Ok(LogisticFit { beta, covariance, converged })
}

fn information(x: &DMatrix<f64>, w: &[f64], beta: &DVector<f64>) -> DMatrix<f64> {
    let eta = x * beta;
    let (n, p) = x.shape();
    let mut h = DMatrix::zeros(p, p);
    for i in 0..n {
        let mu = sigmoid(eta[i]);
        let v = w[i] * mu * (1.0 - mu);
        let row = x.row(i);
        for a in 0..p {
            for b in 0..p {
                h[(a, b)] += v * row[a] * row[b];
            }
        }
    }
    h
}

/// Solves H s = g, adding a vanishing ridge when H is (numerically) singular.
pub(crate) fn solve_spd(h: &DMatrix<f64>, g: &DVector<f64>) -> Result<DVector<f64>> {
    let scale = h.diagonal().iter().cloned().fold(0.0_f64, f64::max).max(1.0);
    let mut ridge = 0.0;
    for _ in 0..8 {
        let mut m = h.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += ridge;
        }
        if let Some(ch) = m.cholesky() {
            return Ok(ch.solve(g));
        }
        ridge = if ridge == 0.0 { 1e-10 * scale } else { ridge * 100.0 };
    }
    Err(AcoreError::Training("singular Hessian".into()))
}

pub(crate) fn invert_spd(h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = h.nrows();
    solve_columns(h, &DMatrix::identity(p, p))
}

fn solve_columns(h: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(rhs.nrows(), rhs.ncols());
    for c in 0..rhs.ncols() {
        let col = solve_spd(h, &rhs.column(c).into_owned())?;
        out.set_column(c, &col);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intercept_only_recovers_logit_of_rate() {
        let n = 40;
        let x = DMatrix::from_element(n, 1, 1.0);
        let y: Vec<f64> = (0..n).map(|i| if i % 4 == 0 { 1.0 } else { 0.0 }).collect();
        let fit = fit_logistic(&x, &y, &vec![1.0; n], 1e-8, 100).unwrap();
        assert!(fit.converged);
        assert!((sigmoid(fit.beta[0]) - 0.25).abs() < 1e-10);
        // variance of the logit MLE is 1 / (n p (1 - p))
        assert!((fit.covariance[(0, 0)] - 1.0 / (n as f64 * 0.25 * 0.75)).abs() < 1e-8);
    }

    #[test]
    fn softplus_is_stable() {
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0 && softplus(-1000.0) < 1e-300);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((sigmoid(-800.0)) >= 0.0);
    }
}
