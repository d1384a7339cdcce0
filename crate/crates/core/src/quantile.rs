//! Conditional quantile regression: boosted trees on the pinball loss and a
//! nearest-neighbour empirical quantile.

use serde::{Deserialize, Serialize};

use crate::classifier::{knn::nearest_k, Standardizer};
use crate::error::{domain, Result};

/// Lower empirical quantile: the order statistic at ceil(α·m).
/// Reorders `values`.
pub fn lower_quantile(values: &mut [f64], alpha: f64) -> Result<f64> {
    if values.is_empty() {
        return domain("quantile of an empty sample");
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return domain(format!("alpha must lie in (0, 1), got {alpha}"));
    }
    let rank = ((alpha * values.len() as f64).ceil() as usize).clamp(1, values.len());
    let (_, v, _) = values.select_nth_unstable_by(rank - 1, f64::total_cmp);
    Ok(*v)
}

/// Mean pinball loss of `pred` for targets `y` at level α.
pub fn pinball_loss(y: &[f64], pred: &[f64], alpha: f64) -> f64 {
    let total: f64 = y
        .iter()
        .zip(pred)
        .map(|(&t, &p)| {
            let r = t - p;
            if r >= 0.0 {
                alpha * r
            } else {
                (alpha - 1.0) * r
            }
        })
        .sum();
    total / y.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostedConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// Smallest number of training points a leaf may hold.
    #[serde(default = "default_min_leaf")]
    pub min_samples_leaf: usize,
}

fn default_min_leaf() -> usize {
    1
}

impl Default for BoostedConfig {
    fn default() -> Self {
        Self { n_trees: 100, max_depth: 3, learning_rate: 0.1, min_samples_leaf: default_min_leaf() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }
}

/// Stagewise regression trees on pinball-loss gradients with leaf values
/// re-estimated as the lower α-quantile of the residuals in each leaf.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostedQuantileTrees {
    alpha: f64,
    init: f64,
    learning_rate: f64,
    trees: Vec<Tree>,
}

struct TreeBuilder<'a> {
    x: &'a [f64],
    dim: usize,
    grad: &'a [f64],
    residual: &'a [f64],
    alpha: f64,
    max_depth: usize,
    min_leaf: usize,
    nodes: Vec<Node>,
    /// leaf value assigned to each sample
    assigned: Vec<f64>,
}

impl TreeBuilder<'_> {
    fn feature(&self, i: usize, f: usize) -> f64 {
        self.x[i * self.dim + f]
    }

    /// `sorted[f]` lists the node's samples ordered by feature f.
    fn build(&mut self, sorted: Vec<Vec<usize>>, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf(0.0));
        let members = &sorted[0];
        let split = if depth < self.max_depth && members.len() >= 2 { self.best_split(&sorted) } else { None };
        match split {
            Some((feature, threshold)) => {
                let mut left_sorted = Vec::with_capacity(self.dim);
                let mut right_sorted = Vec::with_capacity(self.dim);
                for list in &sorted {
                    let (l, r): (Vec<usize>, Vec<usize>) =
                        list.iter().partition(|&&i| self.feature(i, feature) <= threshold);
                    left_sorted.push(l);
                    right_sorted.push(r);
                }
                drop(sorted);
                let left = self.build(left_sorted, depth + 1);
                let right = self.build(right_sorted, depth + 1);
                self.nodes[id] = Node::Split { feature, threshold, left, right };
            }
            None => {
                let mut res: Vec<f64> = members.iter().map(|&i| self.residual[i]).collect();
                let value = lower_quantile(&mut res, self.alpha).expect("non-empty leaf");
                for &i in members {
                    self.assigned[i] = value;
                }
                self.nodes[id] = Node::Leaf(value);
            }
        }
        id
    }

    /// Best squared-error split; ties keep the first candidate found.
    fn best_split(&self, sorted: &[Vec<usize>]) -> Option<(usize, f64)> {
        let n = sorted[0].len() as f64;
        let total: f64 = sorted[0].iter().map(|&i| self.grad[i]).sum();
        let base = total * total / n;
        let mut best: Option<(f64, usize, f64)> = None;
        for (f, list) in sorted.iter().enumerate() {
            let mut left = 0.0;
            for k in 0..list.len() - 1 {
                left += self.grad[list[k]];
                let (a, b) = (self.feature(list[k], f), self.feature(list[k + 1], f));
                if a >= b {
                    continue;
                }
                if k + 1 < self.min_leaf || list.len() - (k + 1) < self.min_leaf {
                    continue;
                }
                let nl = (k + 1) as f64;
                let right = total - left;
                let gain = left * left / nl + right * right / (n - nl) - base;
                if gain > 1e-12 * n && best.is_none_or(|(g, _, _)| gain > g) {
                    let mid = 0.5 * (a + b);
                    // midpoint can round up to b for adjacent floats
                    let threshold = if mid < b { mid } else { a };
                    best = Some((gain, f, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

impl BoostedQuantileTrees {
    pub fn fit(x: &[f64], dim: usize, y: &[f64], alpha: f64, cfg: &BoostedConfig) -> Result<Self> {
        let n = y.len();
        if n == 0 || x.len() != n * dim {
            return domain("boosted trees need a non-empty, consistent training set");
        }
        let init = lower_quantile(&mut y.to_vec(), alpha)?;
        let mut pred = vec![init; n];
        let presorted: Vec<Vec<usize>> = (0..dim)
            .map(|f| {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.sort_by(|&a, &b| x[a * dim + f].total_cmp(&x[b * dim + f]).then(a.cmp(&b)));
                idx
            })
            .collect();
        let mut trees = Vec::with_capacity(cfg.n_trees);
        for _ in 0..cfg.n_trees {
            let residual: Vec<f64> = y.iter().zip(&pred).map(|(t, p)| t - p).collect();
            let grad: Vec<f64> = residual.iter().map(|&r| if r > 0.0 { alpha } else { alpha - 1.0 }).collect();
            let mut builder = TreeBuilder {
                x,
                dim,
                grad: &grad,
                residual: &residual,
                alpha,
                max_depth: cfg.max_depth,
                min_leaf: cfg.min_samples_leaf.max(1),
                nodes: Vec::new(),
                assigned: vec![0.0; n],
            };
            builder.build(presorted.clone(), 0);
            for (p, v) in pred.iter_mut().zip(&builder.assigned) {
                *p += cfg.learning_rate * v;
            }
            trees.push(Tree { nodes: builder.nodes });
        }
        Ok(Self { alpha, init, learning_rate: cfg.learning_rate, trees })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.init + self.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }
}

/// Empirical α-quantile of the responses at the k nearest training inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnQuantile {
    alpha: f64,
    k: usize,
    dim: usize,
    scaler: Standardizer,
    points: Vec<f64>,
    values: Vec<f64>,
}

impl KnnQuantile {
    pub fn fit(x: &[f64], dim: usize, y: &[f64], alpha: f64, k: Option<usize>) -> Result<Self> {
        if y.is_empty() || x.len() != y.len() * dim {
            return domain("knn quantile needs a non-empty, consistent training set");
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return domain(format!("alpha must lie in (0, 1), got {alpha}"));
        }
        let k = k.unwrap_or_else(|| (y.len() as f64).sqrt().round() as usize).clamp(1, y.len());
        let scaler = Standardizer::fit(x, dim);
        Ok(Self { alpha, k, dim, points: scaler.transform_all(x), scaler, values: y.to_vec() })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut z = [0.0; 4];
        self.scaler.apply(x, &mut z[..self.dim]);
        let mut vals: Vec<f64> = nearest_k(&self.points, self.dim, &z[..self.dim], self.k)
            .into_iter()
            .map(|(_, i)| self.values[i])
            .collect();
        lower_quantile(&mut vals, self.alpha).expect("k >= 1")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    #[test]
    fn lower_quantile_order_statistic() {
        let mut v = vec![5.0, 1.0, 4.0, 2.0, 3.0];
        assert_eq!(lower_quantile(&mut v, 0.1).unwrap(), 1.0);
        assert_eq!(lower_quantile(&mut v, 0.2).unwrap(), 1.0);
        assert_eq!(lower_quantile(&mut v, 0.21).unwrap(), 2.0);
        assert_eq!(lower_quantile(&mut v, 0.5).unwrap(), 3.0);
        assert!(lower_quantile(&mut v, 0.0).is_err());
        assert!(lower_quantile(&mut v, 1.0).is_err());
        assert!(lower_quantile(&mut [], 0.5).is_err());
    }

    #[test]
    fn constant_response_gives_constant_fit() {
        let x: Vec<f64> = (0..200).map(|i| i as f64 / 10.0).collect();
        let y = vec![-1.75; 200];
        let m = BoostedQuantileTrees::fit(&x, 1, &y, 0.1, &BoostedConfig::default()).unwrap();
        for t in [0.0, 3.3, 19.9] {
            assert_eq!(m.predict(&[t]), -1.75);
        }
    }

    #[test]
    fn leaves_respect_the_minimum_size() {
        let mut rng = seeded(2);
        let x: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let y: Vec<f64> = (0..100).map(|_| rng.random_range(0.0..1.0)).collect();
        let cfg = BoostedConfig { min_samples_leaf: 51, ..BoostedConfig::default() };
        let m = BoostedQuantileTrees::fit(&x, 1, &y, 0.1, &cfg).unwrap();
        assert!(m.trees.iter().all(|t| t.nodes.len() == 1));
        let cfg = BoostedConfig { min_samples_leaf: 30, max_depth: 5, ..BoostedConfig::default() };
        let m = BoostedQuantileTrees::fit(&x, 1, &y, 0.1, &cfg).unwrap();
        // at most three leaves of 30 or more among 100 points
        assert!(m.trees.iter().all(|t| t.nodes.len() <= 5));
    }

    #[test]
    fn tracks_a_step_in_the_quantile() {
        let mut rng = seeded(4);
        let n = 4000;
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let y: Vec<f64> =
            x.iter().map(|&t| rng.random_range(0.0..1.0) + if t > 0.5 { 3.0 } else { 0.0 }).collect();
        let m = BoostedQuantileTrees::fit(&x, 1, &y, 0.5, &BoostedConfig::default()).unwrap();
        assert!((m.predict(&[0.2]) - 0.5).abs() < 0.1);
        assert!((m.predict(&[0.8]) - 3.5).abs() < 0.1);
        let pred: Vec<f64> = x.iter().map(|&t| m.predict(&[t])).collect();
        let best_const = lower_quantile(&mut y.clone(), 0.5).unwrap();
        assert!(pinball_loss(&y, &pred, 0.5) <= pinball_loss(&y, &vec![best_const; n], 0.5));
    }

    #[test]
    fn knn_quantile_of_uniform() {
        let mut rng = seeded(5);
        let n = 5000;
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let m = KnnQuantile::fit(&x, 1, &y, 0.1, None).unwrap();
        for t in [0.0, 5.0, 10.0] {
            assert!((m.predict(&[t]) - 0.1).abs() < 0.08);
        }
    }
}
