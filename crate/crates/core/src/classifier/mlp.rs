//! One-hidden-layer ReLU perceptron trained with Adam on the log loss.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AcoreError, Result};
use crate::irls::{sigmoid, softplus};
use crate::rng::SimRng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    /// Held-out fraction monitored for early stopping. With 0 the epoch
    /// training loss is monitored instead.
    pub validation_fraction: f64,
    /// Epochs without an improvement larger than `tol` before stopping.
    pub patience: usize,
    pub tol: f64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: 100,
            learning_rate: 1e-3,
            max_epochs: 200,
            batch_size: 200,
            validation_fraction: 0.0,
            patience: 10,
            tol: 1e-4,
        }
    }
}

impl MlpConfig {
    pub(crate) fn validate(&self) -> Result<()> {
        let ok = self.hidden > 0
            && self.learning_rate > 0.0
            && self.max_epochs > 0
            && self.batch_size > 0
            && (0.0..0.5).contains(&self.validation_fraction);
        if ok {
            Ok(())
        } else {
            Err(AcoreError::InvalidInput(format!("invalid mlp configuration {self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    dim: usize,
    hidden: usize,
    /// hidden × dim, row-major
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, params: &mut [&mut f64], grads: &[f64], lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t);
        let c2 = 1.0 - B2.powi(self.t);
        let lr_t = lr * c2.sqrt() / c1;
        for (k, p) in params.iter_mut().enumerate() {
            let g = grads[k];
            self.m[k] = B1 * self.m[k] + (1.0 - B1) * g;
            self.v[k] = B2 * self.v[k] + (1.0 - B2) * g * g;
            **p -= lr_t * self.m[k] / (self.v[k].sqrt() + 1e-8);
        }
    }
}

impl MlpModel {
    fn init(dim: usize, hidden: usize, rng: &mut SimRng) -> Self {
        let bound1 = (6.0 / (dim + hidden) as f64).sqrt();
        let bound2 = (6.0 / (hidden + 1) as f64).sqrt();
        let mut u = |b: f64| rng.random_range(-b..b);
        let w1 = (0..hidden * dim).map(|_| u(bound1)).collect();
        let b1 = (0..hidden).map(|_| u(bound1)).collect();
        let w2 = (0..hidden).map(|_| u(bound2)).collect();
        let b2 = u(bound2);
        Self { dim, hidden, w1, b1, w2, b2 }
    }

    pub(crate) fn fit(cfg: &MlpConfig, z: &[f64], dim: usize, y: &[bool], rng: &mut SimRng) -> Result<Self> {
        cfg.validate()?;
        let n = y.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let n_val = (n as f64 * cfg.validation_fraction).round() as usize;
        let use_val = cfg.validation_fraction > 0.0 && n_val >= 1 && n - n_val >= 2;
        let (val_idx, mut train_idx) = if use_val {
            let (v, t) = order.split_at(n_val);
            (v.to_vec(), t.to_vec())
        } else {
            (Vec::new(), order)
        };

        let mut model = Self::init(dim, cfg.hidden, rng);
        let h = cfg.hidden;
        let n_params = h * dim + h + h + 1;
        let mut adam = Adam::new(n_params);
        let mut grads = vec![0.0; n_params];
        let mut act = vec![0.0; h];

        let mut best = model.clone();
        let mut best_loss = f64::INFINITY;
        let mut stale = 0;
        for _epoch in 0..cfg.max_epochs {
            train_idx.shuffle(rng);
            let mut epoch_loss = 0.0;
            for batch in train_idx.chunks(cfg.batch_size.min(train_idx.len())) {
                grads.iter_mut().for_each(|g| *g = 0.0);
                let scale = 1.0 / batch.len() as f64;
                for &i in batch {
                    let zi = &z[i * dim..(i + 1) * dim];
                    let out = model.forward(zi, &mut act);
                    let target = f64::from(u8::from(y[i]));
                    epoch_loss += log_loss(out, target);
                    let delta = (sigmoid(out) - target) * scale;
                    let (gw1, rest) = grads.split_at_mut(h * dim);
                    let (gb1, rest) = rest.split_at_mut(h);
                    let (gw2, gb2) = rest.split_at_mut(h);
                    gb2[0] += delta;
                    for j in 0..h {
                        if act[j] <= 0.0 {
                            continue;
                        }
                        gw2[j] += delta * act[j];
                        let d = delta * model.w2[j];
                        gb1[j] += d;
                        for (g, v) in gw1[j * dim..(j + 1) * dim].iter_mut().zip(zi) {
                            *g += d * v;
                        }
                    }
                }
                let mut params: Vec<&mut f64> = model
                    .w1
                    .iter_mut()
                    .chain(model.b1.iter_mut())
                    .chain(model.w2.iter_mut())
                    .chain(std::iter::once(&mut model.b2))
                    .collect();
                adam.step(&mut params, &grads, cfg.learning_rate);
            }
            let monitored = if use_val {
                val_idx
                    .iter()
                    .map(|&i| log_loss(model.forward(&z[i * dim..(i + 1) * dim], &mut act), f64::from(u8::from(y[i]))))
                    .sum::<f64>()
                    / val_idx.len() as f64
            } else {
                epoch_loss / train_idx.len() as f64
            };
            if !monitored.is_finite() {
                return Err(AcoreError::Training("mlp loss diverged".into()));
            }
            if monitored < best_loss - cfg.tol {
                stale = 0;
            } else {
                stale += 1;
            }
            if monitored < best_loss {
                best_loss = monitored;
                best = model.clone();
            }
            if stale >= cfg.patience {
                break;
            }
        }
        Ok(if use_val { best } else { model })
    }

    #[inline]
    fn forward(&self, z: &[f64], act: &mut [f64]) -> f64 {
        let mut out = self.b2;
        for j in 0..self.hidden {
            let w = &self.w1[j * self.dim..(j + 1) * self.dim];
            let a = self.b1[j] + w.iter().zip(z).map(|(a, b)| a * b).sum::<f64>();
            let r = a.max(0.0);
            act[j] = r;
            out += self.w2[j] * r;
        }
        out
    }

    #[inline]
    pub fn logit(&self, z: &[f64]) -> f64 {
        let mut out = self.b2;
        for j in 0..self.hidden {
            let w = &self.w1[j * self.dim..(j + 1) * self.dim];
            let a = self.b1[j] + w.iter().zip(z).map(|(a, b)| a * b).sum::<f64>();
            out += self.w2[j] * a.max(0.0);
        }
        out
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    /// Hidden-layer contribution of features `start..start + z.len()`, without bias.
    pub(crate) fn partial_preactivation(&self, z: &[f64], start: usize, out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            let w = &self.w1[j * self.dim + start..j * self.dim + start + z.len()];
            *o = w.iter().zip(z).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// Output logit from a full pre-activation split into two parts.
    #[inline]
    pub(crate) fn logit_from_parts(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut out = self.b2;
        for j in 0..self.hidden {
            out += self.w2[j] * (self.b1[j] + a[j] + b[j]).max(0.0);
        }
        out
    }
}

fn log_loss(logit: f64, y: f64) -> f64 {
    y * softplus(-logit) + (1.0 - y) * softplus(logit)
}
