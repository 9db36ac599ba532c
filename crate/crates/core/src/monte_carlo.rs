//! Deterministic parallel ensembles.
//!
//! Every path is a pure function of `(base seed, path index)`: a
//! counter-mode RNG is seeded with the base seed, its stream is set to the
//! path index, the initial condition and the noise sub-seed are drawn from
//! it, and the path is integrated independently. Paths are processed in
//! fixed 32-path chunks whose partial sums are merged in chunk order, so
//! the result is bit-for-bit identical no matter how many worker threads
//! execute the chunks — reproducibility is a property of the arithmetic,
//! not of the scheduler.
//!
//! Three reductions are built on that machinery: mean-field statistics
//! with a stationary sinusoid fit ([`run_ensemble`]), first-passage times
//! to network synchronization ([`estimate_mfpt`]), and per-particle mean
//! deviation profiles ([`deviation_profile`]).

use crate::error::{Error, Result};
use crate::solver::{AbmWeights, TimeGrid};
use crate::system::{
    max_abs_deviation, simulate_path_with, NoiseMode, ParticleState, Realization, SystemParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Paths per work unit; fixed so the chunk boundaries (and therefore the
/// floating-point summation order) never depend on the thread count.
const CHUNK: usize = 32;

/// How each path draws its initial particle positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitSpec {
    /// Independent standard normal position per particle.
    StandardNormal,
    /// Every particle starts at the given position.
    Identical(f64),
}

/// Ensemble controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub n_paths: usize,
    /// Base seed; combined with the path index it determines every draw.
    pub seed: u64,
    /// Worker threads; `0` uses the global thread pool.
    pub workers: usize,
    pub init: InitSpec,
    /// Final fraction of the horizon used by the stationary sinusoid fit.
    pub fit_window: f64,
    pub noise_mode: NoiseMode,
}

impl McConfig {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        Self {
            n_paths,
            seed,
            workers: 0,
            init: InitSpec::StandardNormal,
            fit_window: 0.3,
            noise_mode: NoiseMode::Shared,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::InvalidParameter {
                name: "paths",
                message: "need at least one path".into(),
            });
        }
        if !(self.fit_window.is_finite() && self.fit_window > 0.0 && self.fit_window <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "fit_window",
                message: format!("must lie in (0, 1], got {}", self.fit_window),
            });
        }
        Ok(())
    }
}

/// Simulate path `path_idx` of the ensemble.
fn simulate_one(
    params: &SystemParams,
    weights: &AbmWeights,
    cfg: &McConfig,
    path_idx: usize,
) -> Result<Realization> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(path_idx as u64);
    let init = match cfg.init {
        InitSpec::Identical(v) => ParticleState::uniform(v, params.n_leaves)?,
        InitSpec::StandardNormal => {
            let positions = (0..params.n_total())
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            ParticleState::new(positions)?
        }
    };
    let noise_seed: u64 = rng.random();
    simulate_path_with(params, weights, &init, noise_seed, cfg.noise_mode)
}

/// Chunked parallel fold over all paths. `add_path` folds one realization
/// into a chunk accumulator; accumulators are merged strictly in chunk
/// order afterward.
fn fold_paths<Acc, I, A, M>(
    params: &SystemParams,
    grid: &TimeGrid,
    cfg: &McConfig,
    init_acc: I,
    add_path: A,
    mut merge: M,
) -> Result<Acc>
where
    Acc: Send,
    I: Fn() -> Acc + Sync,
    A: Fn(&mut Acc, usize, &Realization) + Sync,
    M: FnMut(&mut Acc, Acc),
{
    params.validate()?;
    cfg.validate()?;
    let weights = AbmWeights::new(params.alpha, grid);
    let n = cfg.n_paths;
    let n_chunks = n.div_ceil(CHUNK);

    let run = || -> Vec<Result<Acc>> {
        (0..n_chunks)
            .into_par_iter()
            .map(|ci| {
                let mut acc = init_acc();
                for p in ci * CHUNK..(ci * CHUNK + CHUNK).min(n) {
                    let real =
                        simulate_one(params, &weights, cfg, p).map_err(|e| Error::PathFailure {
                            path: p,
                            source: Box::new(e),
                        })?;
                    add_path(&mut acc, p, &real);
                }
                Ok(acc)
            })
            .collect()
    };

    let chunks = if cfg.workers == 0 {
        run()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::InvalidParameter {
                name: "workers",
                message: e.to_string(),
            })?;
        pool.install(run)
    };

    let mut out = init_acc();
    for chunk in chunks {
        merge(&mut out, chunk?);
    }
    Ok(out)
}

/// Least-squares fit of `y ~ a sin(freq t) + b cos(freq t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinusoidFit {
    pub a: f64,
    pub b: f64,
    /// Amplitude of the equivalent `A sin(freq t + phase)`.
    pub amplitude: f64,
    pub phase: f64,
    /// Root-mean-square residual of the fit.
    pub residual_rms: f64,
}

/// Fit a sinusoid of known frequency by least squares.
///
/// A degenerate design (zero frequency, or too few points to separate the
/// two quadratures) falls back to the constant fit `b = mean(y)`, reported
/// with `a = 0` and a `+-pi/2` phase.
pub fn fit_sinusoid(t: &[f64], y: &[f64], freq: f64) -> SinusoidFit {
    assert_eq!(t.len(), y.len(), "time and sample lengths differ");
    assert!(!t.is_empty(), "cannot fit an empty series");
    let (mut saa, mut sab, mut sbb, mut say, mut sby) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&ti, &yi) in t.iter().zip(y) {
        let s = (freq * ti).sin();
        let c = (freq * ti).cos();
        saa += s * s;
        sab += s * c;
        sbb += c * c;
        say += s * yi;
        sby += c * yi;
    }
    let det = saa * sbb - sab * sab;
    let scale = (saa * sbb).max(1e-300);
    let (a, b) = if det > 1e-9 * scale {
        ((say * sbb - sby * sab) / det, (sby * saa - say * sab) / det)
    } else {
        (0.0, y.iter().sum::<f64>() / y.len() as f64)
    };
    let ss: f64 = t
        .iter()
        .zip(y)
        .map(|(&ti, &yi)| {
            let r = yi - a * (freq * ti).sin() - b * (freq * ti).cos();
            r * r
        })
        .sum();
    SinusoidFit {
        a,
        b,
        amplitude: a.hypot(b),
        phase: b.atan2(a),
        residual_rms: (ss / t.len() as f64).sqrt(),
    }
}

/// Ensemble statistics of the mean field and the synchronization distance.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    grid: TimeGrid,
    mean_s: Vec<f64>,
    se_s: Vec<f64>,
    mean_absdev: Vec<f64>,
    a_est: f64,
    phi_est: f64,
    g_est: Option<f64>,
    fit_residual: f64,
    n_paths: usize,
    seed: u64,
}

impl EnsembleStats {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Ensemble mean of the mean field, per node.
    pub fn mean_s(&self) -> &[f64] {
        &self.mean_s
    }

    /// Standard error of [`EnsembleStats::mean_s`], per node.
    pub fn se_s(&self) -> &[f64] {
        &self.se_s
    }

    /// Ensemble mean of `max_i |x_i - S|`, per node.
    pub fn mean_absdev(&self) -> &[f64] {
        &self.mean_absdev
    }

    /// Fitted stationary amplitude of the mean field.
    pub fn a_est(&self) -> f64 {
        self.a_est
    }

    /// Fitted stationary phase of the mean field.
    pub fn phi_est(&self) -> f64 {
        self.phi_est
    }

    /// `a_est / A0`; absent for an undriven system.
    pub fn g_est(&self) -> Option<f64> {
        self.g_est
    }

    /// RMS residual of the stationary fit.
    pub fn fit_residual(&self) -> f64 {
        self.fit_residual
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

pub fn run_ensemble(
    params: &SystemParams,
    grid: &TimeGrid,
    cfg: &McConfig,
) -> Result<EnsembleStats> {
    struct Acc {
        s: Vec<f64>,
        s2: Vec<f64>,
        dev: Vec<f64>,
    }
    let nodes = grid.n_nodes();
    let acc = fold_paths(
        params,
        grid,
        cfg,
        || Acc {
            s: vec![0.0; nodes],
            s2: vec![0.0; nodes],
            dev: vec![0.0; nodes],
        },
        |acc, _, real| {
            for (k, (state, &s)) in real
                .trajectory()
                .states()
                .zip(real.mean_field())
                .enumerate()
            {
                acc.s[k] += s;
                acc.s2[k] += s * s;
                acc.dev[k] += max_abs_deviation(state);
            }
        },
        |out, part| {
            for (o, p) in out.s.iter_mut().zip(part.s) {
                *o += p;
            }
            for (o, p) in out.s2.iter_mut().zip(part.s2) {
                *o += p;
            }
            for (o, p) in out.dev.iter_mut().zip(part.dev) {
                *o += p;
            }
        },
    )?;

    let n = cfg.n_paths as f64;
    let mean_s: Vec<f64> = acc.s.iter().map(|v| v / n).collect();
    let se_s: Vec<f64> = acc
        .s2
        .iter()
        .zip(&mean_s)
        .map(|(&sq, &m)| {
            if cfg.n_paths < 2 {
                0.0
            } else {
                let var = ((sq - n * m * m) / (n - 1.0)).max(0.0);
                (var / n).sqrt()
            }
        })
        .collect();
    let mean_absdev: Vec<f64> = acc.dev.iter().map(|v| v / n).collect();

    let lo = grid.node_at_fraction(1.0 - cfg.fit_window);
    let t_window: Vec<f64> = grid.times().skip(lo).collect();
    let fit = fit_sinusoid(&t_window, &mean_s[lo..], params.drive_freq);
    let g_est = (params.drive_amp > 0.0).then(|| fit.amplitude / params.drive_amp);

    Ok(EnsembleStats {
        grid: grid.clone(),
        mean_s,
        se_s,
        mean_absdev,
        a_est: fit.amplitude,
        phi_est: fit.phase,
        g_est,
        fit_residual: fit.residual_rms,
        n_paths: cfg.n_paths,
        seed: cfg.seed,
    })
}

/// Mean first-passage statistics to network synchronization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MfptEstimate {
    /// Mean passage time over the paths that synchronized.
    pub mean: f64,
    /// Standard error of that mean.
    pub stderr: f64,
    /// Fraction of paths that never satisfied the detector.
    pub censored_fraction: f64,
    pub n_paths: usize,
}

/// First time the synchronization distance `max_i |x_i - S|` stays within
/// `delta` for a full dwell interval.
///
/// A path passes at `t*` when the distance is `<= delta` at every node of
/// `[t*, t* + dwell]`; paths that never pass before the horizon are
/// censored and excluded from the mean. All paths censored is an error —
/// the estimate would be meaningless.
pub fn estimate_mfpt(
    params: &SystemParams,
    grid: &TimeGrid,
    cfg: &McConfig,
    delta: f64,
    dwell: f64,
) -> Result<MfptEstimate> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidParameter {
            name: "delta",
            message: format!("must be finite and > 0, got {delta}"),
        });
    }
    if !(dwell.is_finite() && dwell >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "dwell",
            message: format!("must be finite and >= 0, got {dwell}"),
        });
    }
    let dwell_nodes = (dwell / grid.dt()).round() as usize;

    let times: Vec<Option<f64>> = fold_paths(
        params,
        grid,
        cfg,
        Vec::new,
        |acc: &mut Vec<Option<f64>>, _, real| {
            let mut run = 0usize;
            let mut passage = None;
            for (k, state) in real.trajectory().states().enumerate() {
                if max_abs_deviation(state) <= delta {
                    run += 1;
                    if run == dwell_nodes + 1 {
                        passage = Some(grid.time(k - dwell_nodes));
                        break;
                    }
                } else {
                    run = 0;
                }
            }
            acc.push(passage);
        },
        |out, part| out.extend(part),
    )?;

    let passed: Vec<f64> = times.iter().filter_map(|&t| t).collect();
    let n_passed = passed.len();
    let censored_fraction = 1.0 - n_passed as f64 / cfg.n_paths as f64;
    if n_passed == 0 {
        return Err(Error::AllCensored {
            n_paths: cfg.n_paths,
        });
    }
    let mean = passed.iter().sum::<f64>() / n_passed as f64;
    let stderr = if n_passed < 2 {
        0.0
    } else {
        let var =
            passed.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (n_passed - 1) as f64;
        (var / n_passed as f64).sqrt()
    };
    Ok(MfptEstimate {
        mean,
        stderr,
        censored_fraction,
        n_paths: cfg.n_paths,
    })
}

/// Ensemble-mean deviation from the mean field, per particle and node.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationProfile {
    grid: TimeGrid,
    mean_dev: Vec<Vec<f64>>,
}

impl DeviationProfile {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// One time series per particle, hub first.
    pub fn mean_dev(&self) -> &[Vec<f64>] {
        &self.mean_dev
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        &self.mean_dev[i]
    }
}

pub fn deviation_profile(
    params: &SystemParams,
    grid: &TimeGrid,
    cfg: &McConfig,
) -> Result<DeviationProfile> {
    let nodes = grid.n_nodes();
    let d = params.n_total();
    let acc = fold_paths(
        params,
        grid,
        cfg,
        || vec![vec![0.0; nodes]; d],
        |acc: &mut Vec<Vec<f64>>, _, real| {
            for (k, (state, &s)) in real
                .trajectory()
                .states()
                .zip(real.mean_field())
                .enumerate()
            {
                for (row, &x) in acc.iter_mut().zip(state) {
                    row[k] += x - s;
                }
            }
        },
        |out, part| {
            for (o_row, p_row) in out.iter_mut().zip(part) {
                for (o, p) in o_row.iter_mut().zip(p_row) {
                    *o += p;
                }
            }
        },
    )?;
    let n = cfg.n_paths as f64;
    let mean_dev = acc
        .into_iter()
        .map(|row| row.into_iter().map(|v| v / n).collect())
        .collect();
    Ok(DeviationProfile {
        grid: grid.clone(),
        mean_dev,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::{gain, moment_oracle};
    use crate::solver::FractionalOrder;
    use std::f64::consts::PI;

    fn small_params() -> SystemParams {
        SystemParams {
            alpha: FractionalOrder::new(0.9).unwrap(),
            omega: 1.0,
            epsilon: 1.0,
            n_leaves: 2,
            drive_amp: 1.0,
            drive_freq: PI,
            lambda: 1.0,
            sigma: 1.5f64.sqrt(),
        }
    }

    #[test]
    fn fit_recovers_an_exact_sinusoid() {
        let t: Vec<f64> = (0..200).map(|k| 0.05 * k as f64).collect();
        let y: Vec<f64> = t.iter().map(|&ti| 0.7 * (2.0 * ti + 0.4).sin()).collect();
        let fit = fit_sinusoid(&t, &y, 2.0);
        assert!((fit.amplitude - 0.7).abs() < 1e-12);
        assert!((fit.phase - 0.4).abs() < 1e-12);
        assert!(fit.residual_rms < 1e-12);
    }

    #[test]
    fn fit_degenerates_to_the_mean_for_zero_frequency() {
        let t = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 3.0];
        let fit = fit_sinusoid(&t, &y, 0.0);
        assert_eq!(fit.a, 0.0);
        assert_eq!(fit.b, 3.0);
        assert_eq!(fit.amplitude, 3.0);
    }

    #[test]
    fn worker_count_does_not_change_a_single_bit() {
        let p = small_params();
        let grid = TimeGrid::new(0.01, 200).unwrap();
        let mut cfg = McConfig::new(100, 42);
        cfg.workers = 1;
        let a = run_ensemble(&p, &grid, &cfg).unwrap();
        cfg.workers = 3;
        let b = run_ensemble(&p, &grid, &cfg).unwrap();
        assert_eq!(a, b);
        let ma = estimate_mfpt(
            &p,
            &grid,
            &{
                let mut c = cfg;
                c.workers = 1;
                c
            },
            0.5,
            0.2,
        )
        .unwrap();
        let mb = estimate_mfpt(&p, &grid, &cfg, 0.5, 0.2).unwrap();
        assert_eq!(ma, mb);
    }

    #[test]
    fn standard_error_scales_as_inverse_root_paths() {
        let p = small_params();
        let grid = TimeGrid::new(0.02, 100).unwrap();
        let se_at = |n: usize| {
            let cfg = McConfig::new(n, 7);
            let stats = run_ensemble(&p, &grid, &cfg).unwrap();
            let lo = stats.se_s().len() / 2;
            stats.se_s()[lo..].iter().sum::<f64>() / (stats.se_s().len() - lo) as f64
        };
        let s250 = se_at(250);
        let s1000 = se_at(1000);
        let s4000 = se_at(4000);
        for ratio in [s250 / s1000, s1000 / s4000] {
            assert!(
                (1.55..2.6).contains(&ratio),
                "se ratios {s250:.5} / {s1000:.5} / {s4000:.5}"
            );
        }
    }

    #[test]
    fn ensemble_mean_tracks_the_moment_oracle() {
        // The ensemble mean of the mean field and the closed moment pair
        // solve the same equations; pointwise agreement within four
        // standard errors checks the whole sampling pipeline.
        let p = SystemParams {
            n_leaves: 3,
            ..small_params()
        };
        let grid = TimeGrid::from_horizon(0.01, 6.0).unwrap();
        let cfg = McConfig::new(400, 42);
        let stats = run_ensemble(&p, &grid, &cfg).unwrap();
        let oracle = moment_oracle(&p, &grid, 0.0, 0.0).unwrap();
        let mut worst = 0.0f64;
        for ((&m, &se), &y) in stats.mean_s().iter().zip(stats.se_s()).zip(oracle.y1()) {
            let z = (m - y).abs() / se.max(1e-12);
            worst = worst.max(z);
        }
        assert!(worst < 4.0, "worst z-score {worst}");
    }

    #[test]
    fn quiet_single_path_reproduces_the_closed_form_amplitude() {
        let p = SystemParams {
            sigma: 0.0,
            ..small_params()
        };
        let grid = TimeGrid::from_horizon(0.01, 15.0).unwrap();
        let mut cfg = McConfig::new(1, 0);
        cfg.init = InitSpec::Identical(0.0);
        let stats = run_ensemble(&p, &grid, &cfg).unwrap();
        let b = gain(&p).unwrap();
        let g_est = stats.g_est().unwrap();
        assert!(
            (g_est - b.g).abs() / b.g < 0.02,
            "G_est {g_est} vs closed form {}",
            b.g
        );
        assert!(stats.fit_residual() < 0.05);
    }

    #[test]
    fn undriven_ensemble_reports_no_gain() {
        let p = SystemParams {
            drive_amp: 0.0,
            ..small_params()
        };
        let grid = TimeGrid::new(0.01, 100).unwrap();
        let mut cfg = McConfig::new(16, 3);
        cfg.init = InitSpec::Identical(0.0);
        let stats = run_ensemble(&p, &grid, &cfg).unwrap();
        assert_eq!(stats.g_est(), None);
        assert!(stats.mean_s().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identical_start_synchronizes_immediately() {
        let p = small_params();
        let grid = TimeGrid::new(0.01, 300).unwrap();
        let mut cfg = McConfig::new(50, 9);
        cfg.init = InitSpec::Identical(0.4);
        let est = estimate_mfpt(&p, &grid, &cfg, 0.05, 1.0).unwrap();
        assert_eq!(est.mean, 0.0);
        assert_eq!(est.censored_fraction, 0.0);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn impossible_threshold_censors_every_path() {
        let p = small_params();
        let grid = TimeGrid::new(0.01, 100).unwrap();
        let cfg = McConfig::new(20, 5);
        match estimate_mfpt(&p, &grid, &cfg, 1e-12, 0.5) {
            Err(Error::AllCensored { n_paths }) => assert_eq!(n_paths, 20),
            other => panic!("expected AllCensored, got {other:?}"),
        }
    }

    #[test]
    fn stronger_coupling_does_not_slow_synchronization() {
        let grid = TimeGrid::from_horizon(0.01, 10.0).unwrap();
        let cfg = McConfig::new(200, 11);
        let at_eps = |eps: f64| {
            let p = SystemParams {
                epsilon: eps,
                ..small_params()
            };
            estimate_mfpt(&p, &grid, &cfg, 0.2, 1.0).unwrap()
        };
        let weak = at_eps(1.0);
        let strong = at_eps(10.0);
        let slack = 3.0 * weak.stderr.hypot(strong.stderr);
        assert!(
            strong.mean <= weak.mean + slack,
            "mfpt(eps=10) = {} vs mfpt(eps=1) = {} (slack {slack})",
            strong.mean,
            weak.mean
        );
    }

    #[test]
    fn deviation_profile_is_flat_for_identical_start() {
        // A uniform network stays uniform, so the deviations never exceed
        // the rounding noise of the three-term mean.
        let p = small_params();
        let grid = TimeGrid::new(0.01, 100).unwrap();
        let mut cfg = McConfig::new(8, 2);
        cfg.init = InitSpec::Identical(1.0);
        let prof = deviation_profile(&p, &grid, &cfg).unwrap();
        assert_eq!(prof.mean_dev().len(), p.n_total());
        for row in prof.mean_dev() {
            assert!(row.iter().all(|&v| v.abs() < 1e-13));
        }
    }

    #[test]
    fn deviation_profile_decays_toward_synchronization() {
        let p = small_params();
        let grid = TimeGrid::from_horizon(0.01, 8.0).unwrap();
        let cfg = McConfig::new(300, 13);
        let prof = deviation_profile(&p, &grid, &cfg).unwrap();
        for row in prof.mean_dev() {
            let early = row[0].abs();
            let tail = row[row.len() - 100..]
                .iter()
                .map(|v| v.abs())
                .fold(0.0, f64::max);
            assert!(tail < early.max(0.05), "tail {tail} vs initial {early}");
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let p = small_params();
        let grid = TimeGrid::new(0.01, 10).unwrap();
        assert!(run_ensemble(&p, &grid, &McConfig::new(0, 1)).is_err());
        let mut cfg = McConfig::new(4, 1);
        cfg.fit_window = 0.0;
        assert!(run_ensemble(&p, &grid, &cfg).is_err());
        let cfg = McConfig::new(4, 1);
        assert!(estimate_mfpt(&p, &grid, &cfg, 0.0, 1.0).is_err());
        assert!(estimate_mfpt(&p, &grid, &cfg, 0.1, -1.0).is_err());
    }
}
