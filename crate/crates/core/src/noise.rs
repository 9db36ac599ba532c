//! Symmetric two-state (telegraph) noise.
//!
//! The process jumps between `+sigma` and `-sigma` with switching rate
//! `lambda / 2` per unit time in each state, which gives the stationary
//! autocorrelation `sigma^2 * exp(-lambda |tau|)`. Paths are sampled
//! event-driven — exponential waiting times between flips, held constant
//! across grid nodes in between — so the discretization never distorts the
//! flip statistics, only samples them.
//!
//! Sampling is seeded explicitly and deterministic: the same
//! `(params, grid, seed)` triple always produces the bit-identical path,
//! which is what makes ensemble runs reproducible regardless of how they
//! are parallelized.

use crate::error::{Error, Result};
use crate::solver::TimeGrid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

/// Amplitude and switching rate of the two-state process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TelegraphParams {
    sigma: f64,
    lambda: f64,
}

impl TelegraphParams {
    /// `sigma` is the noise amplitude (must be positive); `lambda` is the
    /// autocorrelation decay rate (must be non-negative; zero freezes the
    /// process at its initial sign).
    pub fn new(sigma: f64, lambda: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidParameter {
                name: "sigma",
                message: format!("must be finite and > 0, got {sigma}"),
            });
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "lambda",
                message: format!("must be finite and >= 0, got {lambda}"),
            });
        }
        Ok(Self { sigma, lambda })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Stationary variance `sigma^2`.
    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma
    }

    /// Stationary autocorrelation `sigma^2 * exp(-lambda |tau|)`.
    pub fn theoretical_acf(&self, lag: f64) -> f64 {
        self.variance() * (-self.lambda * lag.abs()).exp()
    }
}

/// One realization of the process, sampled at every node of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl NoisePath {
    /// The identically-zero path: the noiseless limit, useful wherever a
    /// `NoisePath` is required but the amplitude is zero.
    pub fn zero(grid: &TimeGrid) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![0.0; grid.n_nodes()],
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, k: usize) -> f64 {
        self.values[k]
    }
}

/// Draw one path on the given grid. Deterministic in `rng_seed`.
pub fn sample_path(params: &TelegraphParams, grid: &TimeGrid, rng_seed: u64) -> NoisePath {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    let amp = params.sigma();

    let values = if params.lambda() == 0.0 {
        vec![sign * amp; grid.n_nodes()]
    } else {
        // Flip rate out of each state is lambda / 2.
        let waits = Exp::new(params.lambda() / 2.0).expect("rate validated positive");
        let mut next_flip = waits.sample(&mut rng);
        (0..grid.n_nodes())
            .map(|k| {
                let t = grid.time(k);
                while next_flip <= t {
                    sign = -sign;
                    next_flip += waits.sample(&mut rng);
                }
                sign * amp
            })
            .collect()
    };

    NoisePath {
        grid: grid.clone(),
        values,
    }
}

/// Translate a time lag into a node offset, rejecting lags that do not sit
/// on the grid or exceed the horizon.
fn lag_to_offset(grid: &TimeGrid, lag: f64) -> Result<usize> {
    if !lag.is_finite() || lag < 0.0 {
        return Err(Error::Domain(format!(
            "autocorrelation lag must be finite and >= 0, got {lag}"
        )));
    }
    let m = (lag / grid.dt()).round();
    if (m * grid.dt() - lag).abs() > 1e-9 * lag.max(1.0) {
        return Err(Error::Domain(format!(
            "lag {lag} is not a multiple of the grid step {}",
            grid.dt()
        )));
    }
    let m = m as usize;
    if m > grid.n_steps() {
        return Err(Error::Domain(format!(
            "lag {lag} exceeds the path horizon {}",
            grid.horizon()
        )));
    }
    Ok(m)
}

/// Empirical autocorrelation of one path at the requested lags.
///
/// Each lag is estimated as the average of `v[k] * v[k + m]` over all pairs
/// the path contains, so lag zero returns the sample mean square exactly
/// (`sigma^2` for a telegraph path).
pub fn empirical_acf(path: &NoisePath, lags: &[f64]) -> Result<Vec<f64>> {
    lags.iter()
        .map(|&lag| {
            let m = lag_to_offset(path.grid(), lag)?;
            let v = path.values();
            let n_pairs = v.len() - m;
            let sum: f64 = v[..n_pairs].iter().zip(&v[m..]).map(|(a, b)| a * b).sum();
            Ok(sum / n_pairs as f64)
        })
        .collect()
}

/// Ensemble-averaged autocorrelation: the mean of the per-path estimates.
///
/// All paths must share one grid. Useful when many short paths are cheaper
/// than one long one (short horizons keep the estimate stationary-free of
/// startup bias because the sampler starts in the stationary sign
/// distribution).
pub fn empirical_acf_ensemble(paths: &[NoisePath], lags: &[f64]) -> Result<Vec<f64>> {
    let first = paths.first().ok_or_else(|| {
        Error::Domain("ensemble autocorrelation requires at least one path".into())
    })?;
    for p in paths {
        if p.grid() != first.grid() {
            return Err(Error::Domain(
                "ensemble autocorrelation requires all paths on one grid".into(),
            ));
        }
    }
    let mut acc = vec![0.0; lags.len()];
    for p in paths {
        for (a, r) in acc.iter_mut().zip(empirical_acf(p, lags)?) {
            *a += r;
        }
    }
    let n = paths.len() as f64;
    Ok(acc.into_iter().map(|a| a / n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(sigma: f64, lambda: f64) -> TelegraphParams {
        TelegraphParams::new(sigma, lambda).unwrap()
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(TelegraphParams::new(0.0, 1.0).is_err());
        assert!(TelegraphParams::new(-1.0, 1.0).is_err());
        assert!(TelegraphParams::new(1.0, -0.5).is_err());
        assert!(TelegraphParams::new(f64::NAN, 1.0).is_err());
        assert!(TelegraphParams::new(1.0, 0.0).is_ok());
    }

    #[test]
    fn zero_rate_freezes_the_initial_sign() {
        let grid = TimeGrid::new(0.1, 100).unwrap();
        let path = sample_path(&params(2.5, 0.0), &grid, 3);
        let first = path.value(0);
        assert_eq!(first.abs(), 2.5);
        assert!(path.values().iter().all(|&v| v == first));
    }

    #[test]
    fn sampling_is_deterministic_in_the_seed() {
        let grid = TimeGrid::new(0.01, 1000).unwrap();
        let p = params(1.0, 1.0);
        let a = sample_path(&p, &grid, 42);
        let b = sample_path(&p, &grid, 42);
        assert_eq!(a, b);
        let c = sample_path(&p, &grid, 43);
        assert_ne!(a, c);
    }

    #[test]
    fn long_path_mean_is_near_zero() {
        let grid = TimeGrid::from_horizon(0.01, 1e4).unwrap();
        let path = sample_path(&params(1.0, 1.0), &grid, 42);
        let mean: f64 = path.values().iter().sum::<f64>() / path.values().len() as f64;
        assert!(mean.abs() < 0.05, "mean = {mean}");
    }

    #[test]
    fn lag_zero_returns_the_variance_exactly() {
        let grid = TimeGrid::new(0.01, 1000).unwrap();
        for sigma in [1.0, 1.5] {
            let path = sample_path(&params(sigma, 2.0), &grid, 7);
            let acf = empirical_acf(&path, &[0.0]).unwrap();
            assert_eq!(acf[0], sigma * sigma);
        }
    }

    #[test]
    fn single_path_acf_matches_exponential_decay() {
        let p = params(1.0, 1.0);
        let grid = TimeGrid::from_horizon(0.01, 1e4).unwrap();
        let path = sample_path(&p, &grid, 42);
        let acf = empirical_acf(&path, &[1.0]).unwrap();
        let want = p.theoretical_acf(1.0); // e^-1
        assert!(
            (acf[0] - want).abs() < 0.02,
            "acf(1) = {}, want {want}",
            acf[0]
        );
    }

    #[test]
    fn fitted_decay_rate_recovers_lambda() {
        let lambda = 1.0;
        let grid = TimeGrid::from_horizon(0.01, 1e4).unwrap();
        let path = sample_path(&params(1.0, lambda), &grid, 42);
        let lags = [0.0, 0.5, 1.0, 1.5];
        let acf = empirical_acf(&path, &lags).unwrap();
        // Least-squares slope of ln(acf) against the lag.
        let n = lags.len() as f64;
        let mx: f64 = lags.iter().sum::<f64>() / n;
        let my: f64 = acf.iter().map(|r| r.ln()).sum::<f64>() / n;
        let sxy: f64 = lags
            .iter()
            .zip(&acf)
            .map(|(&x, &r)| (x - mx) * (r.ln() - my))
            .sum();
        let sxx: f64 = lags.iter().map(|&x| (x - mx) * (x - mx)).sum();
        let rate = -sxy / sxx;
        assert!(
            (rate - lambda).abs() / lambda < 0.05,
            "fitted rate {rate} vs lambda {lambda}"
        );
    }

    #[test]
    fn ensemble_acf_matches_exponential_decay() {
        let p = params(1.0, 2.0);
        let grid = TimeGrid::from_horizon(0.01, 10.0).unwrap();
        let paths: Vec<NoisePath> = (0..1000)
            .map(|i| sample_path(&p, &grid, 9000 + i as u64))
            .collect();
        let acf = empirical_acf_ensemble(&paths, &[0.5]).unwrap();
        let want = p.theoretical_acf(0.5); // e^-1
        assert!(
            (acf[0] - want).abs() < 0.02,
            "ensemble acf(0.5) = {}, want {want}",
            acf[0]
        );
    }

    #[test]
    fn initial_sign_is_balanced_across_seeds() {
        let grid = TimeGrid::new(0.1, 1).unwrap();
        let p = params(1.0, 1.0);
        let positive = (0..1000)
            .filter(|&i| sample_path(&p, &grid, i as u64).value(0) > 0.0)
            .count();
        // Three binomial standard deviations around 500.
        assert!(
            (453..=547).contains(&positive),
            "positive initial signs: {positive}/1000"
        );
    }

    #[test]
    fn acf_rejects_off_grid_and_out_of_range_lags() {
        let grid = TimeGrid::new(0.01, 100).unwrap();
        let path = sample_path(&params(1.0, 1.0), &grid, 1);
        assert!(empirical_acf(&path, &[0.005]).is_err());
        assert!(empirical_acf(&path, &[1.01]).is_err());
        assert!(empirical_acf(&path, &[-0.5]).is_err());
        assert!(empirical_acf(&path, &[f64::NAN]).is_err());
        assert!(empirical_acf(&path, &[1.0]).is_ok());
    }

    #[test]
    fn ensemble_acf_rejects_mixed_grids() {
        let p = params(1.0, 1.0);
        let a = sample_path(&p, &TimeGrid::new(0.01, 100).unwrap(), 1);
        let b = sample_path(&p, &TimeGrid::new(0.02, 100).unwrap(), 2);
        assert!(empirical_acf_ensemble(&[a.clone(), b], &[0.0]).is_err());
        assert!(empirical_acf_ensemble(&[], &[0.0]).is_err());
        assert!(empirical_acf_ensemble(&[a], &[0.0]).is_ok());
    }

    #[test]
    fn zero_path_is_identically_zero() {
        let grid = TimeGrid::new(0.05, 10).unwrap();
        let z = NoisePath::zero(&grid);
        assert_eq!(z.values().len(), 11);
        assert!(z.values().iter().all(|&v| v == 0.0));
    }

    proptest! {
        #[test]
        fn prop_samples_live_on_the_two_point_set(
            sigma in 0.1f64..5.0,
            lambda in 0.0f64..5.0,
            seed in 0u64..1000,
        ) {
            let grid = TimeGrid::new(0.05, 200).unwrap();
            let path = sample_path(&params(sigma, lambda), &grid, seed);
            for &v in path.values() {
                prop_assert!(v == sigma || v == -sigma, "off-set value {v}");
            }
        }

        #[test]
        fn prop_acf_magnitude_never_exceeds_variance(
            lambda in 0.1f64..4.0,
            seed in 0u64..100,
        ) {
            let p = params(1.5, lambda);
            let grid = TimeGrid::new(0.01, 2000).unwrap();
            let path = sample_path(&p, &grid, seed);
            let acf = empirical_acf(&path, &[0.0, 0.1, 1.0]).unwrap();
            for r in acf {
                prop_assert!(r.abs() <= p.variance() + 1e-12);
            }
        }
    }
}
