use serde::{Deserialize, Serialize};

/// Nearest-neighbour label fraction on standardized features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    dim: usize,
    k: usize,
    points: Vec<f64>,
    labels: Vec<bool>,
}

impl KnnModel {
    pub(crate) fn fit(z: &[f64], dim: usize, y: &[bool], k: usize) -> Self {
        Self { dim, k: k.min(y.len()), points: z.to_vec(), labels: y.to_vec() }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Fraction of label-1 points among the k nearest; distance ties keep
    /// the earlier training point.
    pub fn prob(&self, z: &[f64]) -> f64 {
        let hits = nearest_k(&self.points, self.dim, z, self.k)
            .iter()
            .filter(|&&(_, i)| self.labels[i])
            .count();
        hits as f64 / self.k as f64
    }
}

/// The k nearest rows of `points` to `query` as (squared distance, index),
/// sorted by distance then index.
pub(crate) fn nearest_k(points: &[f64], dim: usize, query: &[f64], k: usize) -> Vec<(f64, usize)> {
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    for (i, row) in points.chunks_exact(dim).enumerate() {
        let d: f64 = row.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.len() == k && d >= best[k - 1].0 {
            continue;
        }
        let pos = best.partition_point(|&(bd, _)| bd <= d);
        best.insert(pos, (d, i));
        best.truncate(k);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neighbour_fraction() {
        let z = [0.0, 1.0, 2.0, 10.0, 11.0];
        let y = [true, true, false, false, false];
        let m = KnnModel::fit(&z, 1, &y, 3);
        assert!((m.prob(&[0.5]) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.prob(&[10.5]), 0.0);
    }

    #[test]
    fn ties_prefer_lower_index() {
        let z = [1.0, -1.0, 1.0];
        let got = nearest_k(&z, 1, &[0.0], 2);
        assert_eq!(got.iter().map(|p| p.1).collect::<Vec<_>>(), vec![0, 1]);
    }
}
