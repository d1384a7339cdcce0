//! Test decisions and Neyman inversion over the parameter grid.
//!
//! A grid point θ0 is accepted when τ(D; {θ0}) ≥ Ĉ_θ0. The boundary case
//! τ = Ĉ counts as acceptance.

use std::io::Write;

use rayon::prelude::*;

use crate::critical_values::CriticalSurface;
use crate::error::{domain, Result};
use crate::model_zoo::{Dataset, ModelSpec, ParamGrid};
use crate::odds::{check_data, LogOdds};
use crate::rng::{fork, stream, SimRng};

/// Reject H0 iff τ < C.
#[inline]
pub fn test_decision(tau: f64, critical: f64) -> bool {
    tau < critical
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfidenceSet {
    /// Accepted grid indices in increasing order.
    pub accepted: Vec<usize>,
    /// τ(D; {θ}) at every grid point.
    pub tau: Vec<f64>,
    pub critical: Vec<f64>,
    pub alpha: f64,
    pub size_fraction: f64,
}

impl ConfidenceSet {
    pub fn contains(&self, index: usize) -> bool {
        self.accepted.binary_search(&index).is_ok()
    }

    pub fn grid_len(&self) -> usize {
        self.tau.len()
    }

    /// Fraction of grid points other than `truth` that are rejected.
    pub fn power_excluding(&self, truth: usize) -> f64 {
        let others = self.grid_len() - 1;
        if others == 0 {
            return 0.0;
        }
        let accepted_others = self.accepted.len() - usize::from(self.contains(truth));
        (others - accepted_others) as f64 / others as f64
    }

    pub fn write_csv<W: Write>(&self, grid: &ParamGrid, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..grid.dim()).map(|i| format!("theta{i}")).collect();
        header.extend(["tau", "critical", "accepted"].map(String::from));
        w.write_record(&header)?;
        for (i, t) in grid.iter().enumerate() {
            let mut rec: Vec<String> = t.iter().map(|v| v.to_string()).collect();
            rec.push(self.tau[i].to_string());
            rec.push(self.critical[i].to_string());
            rec.push(u8::from(self.contains(i)).to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Inverts the pointwise tests on one observed dataset.
pub fn confidence_set(
    est: &dyn LogOdds,
    surface: &CriticalSurface,
    data: &Dataset,
    grid: &ParamGrid,
) -> Result<ConfidenceSet> {
    if surface.len() != grid.len() {
        return domain(format!("critical surface has {} values for a grid of {}", surface.len(), grid.len()));
    }
    check_data(est.model(), data)?;
    let profile = est.profile(grid, &data.canonical());
    let top = profile.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tau: Vec<f64> = profile
        .iter()
        .map(|&s| if top == f64::NEG_INFINITY { f64::NEG_INFINITY } else { s - top })
        .collect();
    let accepted: Vec<usize> =
        (0..grid.len()).filter(|&i| !test_decision(tau[i], surface.values[i])).collect();
    let size_fraction = accepted.len() as f64 / grid.len() as f64;
    Ok(ConfidenceSet { accepted, tau, critical: surface.values.clone(), alpha: surface.alpha, size_fraction })
}

/// Summary of confidence sets built from repeated datasets at a fixed θ*.
#[derive(Clone, Debug, PartialEq)]
pub struct InversionSummary {
    pub reps: usize,
    pub truth_index: usize,
    /// Per repetition: rejected fraction of the other grid points.
    pub power: Vec<f64>,
    pub size_fraction: Vec<f64>,
    pub covered: Vec<bool>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

impl InversionSummary {
    pub fn average_power(&self) -> f64 {
        mean(&self.power)
    }

    pub fn power_se(&self) -> f64 {
        sd(&self.power) / (self.reps as f64).sqrt()
    }

    pub fn mean_size(&self) -> f64 {
        mean(&self.size_fraction)
    }

    pub fn sd_size(&self) -> f64 {
        sd(&self.size_fraction)
    }

    pub fn coverage(&self) -> f64 {
        self.covered.iter().filter(|&&c| c).count() as f64 / self.reps as f64
    }
}

/// Draws `reps` datasets at θ* and inverts each one. θ* is snapped to the
/// nearest grid point for the containment check.
pub fn repeated_inversion(
    model: &ModelSpec,
    est: &dyn LogOdds,
    surface: &CriticalSurface,
    grid: &ParamGrid,
    theta_star: &[f64],
    reps: usize,
    rng: &mut SimRng,
) -> Result<InversionSummary> {
    if reps == 0 {
        return domain("need at least one repetition");
    }
    model.space.check(theta_star)?;
    let truth = grid.nearest(theta_star);
    let base = fork(rng);
    let sets = (0..reps)
        .into_par_iter()
        .map(|r| {
            let data = model.simulate(theta_star, model.n_obs, &mut stream(base, r as u64))?;
            confidence_set(est, surface, &data, grid)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(InversionSummary {
        reps,
        truth_index: truth,
        power: sets.iter().map(|s| s.power_excluding(truth)).collect(),
        size_fraction: sets.iter().map(|s| s.size_fraction).collect(),
        covered: sets.iter().map(|s| s.contains(truth)).collect(),
    })
}

/// Mean rejected fraction of the grid points other than θ*.
pub fn average_power(
    model: &ModelSpec,
    est: &dyn LogOdds,
    surface: &CriticalSurface,
    grid: &ParamGrid,
    theta_star: &[f64],
    reps: usize,
    rng: &mut SimRng,
) -> Result<f64> {
    Ok(repeated_inversion(model, est, surface, grid, theta_star, reps, rng)?.average_power())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::odds::constant_odds;
    use crate::oracle::{exact_lr_statistic, mc_exact_critical, ExactOddsOracle};
    use crate::rng::seeded;

    #[test]
    fn boundary_conventions() {
        assert!(!test_decision(-1.5, -1.5));
        assert!(test_decision(f64::NEG_INFINITY, -1e6));
        assert!(test_decision(-2.0, -1.0));
        assert!(!test_decision(0.0, -1.0));
    }

    #[test]
    fn vacuous_surface_accepts_everything() {
        let m = ModelSpec::poisson_counting();
        let o = ExactOddsOracle::new(&m, 0.5).unwrap();
        let grid = m.grid();
        let data = m.simulate(&[10.0], 10, &mut seeded(1)).unwrap();
        let cs = confidence_set(&o, &CriticalSurface::vacuous(grid.len(), 0.1), &data, &grid).unwrap();
        assert_eq!(cs.size_fraction, 1.0);
        assert_eq!(cs.power_excluding(50), 0.0);
        let p = average_power(&m, &o, &CriticalSurface::vacuous(grid.len(), 0.1), &grid, &[10.0], 5, &mut seeded(2))
            .unwrap();
        assert_eq!(p, 0.0);
    }

    #[test]
    fn duality_with_pointwise_decisions() {
        let m = ModelSpec::gmm();
        let o = ExactOddsOracle::new(&m, 0.5).unwrap();
        let grid = m.grid();
        let surface = CriticalSurface { alpha: 0.1, values: (0..grid.len()).map(|i| -0.02 * i as f64).collect() };
        let data = m.simulate(&[5.0], 10, &mut seeded(3)).unwrap();
        let cs = confidence_set(&o, &surface, &data, &grid).unwrap();
        for i in 0..grid.len() {
            let lr = exact_lr_statistic(&m, &data, &[i], &grid).unwrap();
            assert!((lr - cs.tau[i]).abs() < 1e-10);
            assert_eq!(cs.contains(i), !test_decision(cs.tau[i], surface.values[i]));
        }
        assert!((cs.size_fraction - cs.accepted.len() as f64 / 100.0).abs() < 1e-15);
    }

    #[test]
    fn surface_size_mismatch_is_rejected() {
        let m = ModelSpec::poisson_counting();
        let flat = constant_odds(&m, 0.5);
        let data = m.simulate(&[10.0], 10, &mut seeded(4)).unwrap();
        assert!(confidence_set(&flat, &CriticalSurface::vacuous(3, 0.1), &data, &m.grid()).is_err());
    }

    #[test]
    fn normal_mean_interval_matches_analytic_inversion() {
        let m = ModelSpec::gaussian_mean();
        let o = ExactOddsOracle::new(&m, 0.5).unwrap();
        let grid = m.grid();
        // τ at the truth is location-invariant away from the edges, so one
        // MC critical value serves every interior grid point
        let c = mc_exact_critical(
            &m,
            |d| exact_lr_statistic(&m, d, &[grid.nearest(&[0.0])], &grid).unwrap(),
            &[grid.point(grid.nearest(&[0.0]))[0]],
            0.1,
            100_000,
            &mut seeded(5),
        )
        .unwrap();
        let surface = CriticalSurface::constant(grid.len(), 0.1, c);
        let step = grid.point(1)[0] - grid.point(0)[0];
        let mut rng = seeded(6);
        for _ in 0..10 {
            let data = m.simulate(&[0.3], 10, &mut rng).unwrap();
            let xbar = data.mean()[0];
            let cs = confidence_set(&o, &surface, &data, &grid).unwrap();
            let lo = grid.point(cs.accepted[0])[0];
            let hi = grid.point(*cs.accepted.last().unwrap())[0];
            let half = 1.645 / 10f64.sqrt();
            assert!((lo - (xbar - half)).abs() <= step, "{lo} vs {}", xbar - half);
            assert!((hi - (xbar + half)).abs() <= step, "{hi} vs {}", xbar + half);
        }
    }

    #[test]
    fn repeated_inversion_is_deterministic() {
        let m = ModelSpec::poisson_counting();
        let o = ExactOddsOracle::new(&m, 0.5).unwrap();
        let grid = m.grid();
        let surface = CriticalSurface::constant(grid.len(), 0.1, -1.35);
        let a = repeated_inversion(&m, &o, &surface, &grid, &[10.0], 20, &mut seeded(7)).unwrap();
        let b = repeated_inversion(&m, &o, &surface, &grid, &[10.0], 20, &mut seeded(7)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.truth_index, grid.nearest(&[10.0]));
        assert!(a.average_power() > 0.0 && a.average_power() < 1.0);
        for (p, s) in a.power.iter().zip(&a.size_fraction) {
            assert!(p + s >= 1.0 - 1.0 / 99.0 - 1e-12 && p + s <= 1.0 + 1.0 / 99.0 + 1e-12);
        }
    }
}
