//! The star-coupled oscillator network.
//!
//! One hub particle is elastically coupled (strength `epsilon`) to
//! `n_leaves` leaf particles; every particle carries the same fractional
//! relaxation order, the same sinusoidal drive, and a multiplicative
//! two-state noise on its natural frequency:
//!
//! ```text
//! D^alpha x_0 = -(omega + xi(t)) x_0 + epsilon * sum_i (x_i - x_0) + A sin(W t)
//! D^alpha x_k = -(omega + xi(t)) x_k + epsilon * (x_0 - x_k) + A sin(W t)
//! ```
//!
//! The coupling terms cancel in the sum, so the mean field
//! `S = (x_0 + ... + x_N) / (N + 1)` obeys the scalar equation
//! `D^alpha S = -(omega + xi) S + A sin(W t)` pathwise — independent of
//! `epsilon` and of the network size. That cancellation is the backbone of
//! the closed-form response analysis and is asserted as a test invariant
//! here.
//!
//! By default all particles share one noise realization (which is what
//! makes the cancellation exact pathwise); an independent-noise-per-particle
//! variant is available behind [`NoiseMode::PerParticle`] for exploratory
//! comparisons.

use crate::error::{Error, Result};
use crate::noise::{sample_path, NoisePath, TelegraphParams};
use crate::solver::{abm_integrate_with, AbmWeights, FractionalOrder, TimeGrid, Trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Physical parameters of the network. Fields are public for ergonomic
/// construction; every simulation and analysis entry point runs
/// [`SystemParams::validate`] first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Fractional relaxation order.
    pub alpha: FractionalOrder,
    /// Mean natural frequency (restoring coefficient), `>= 0`.
    pub omega: f64,
    /// Hub-leaf coupling strength (any finite real).
    pub epsilon: f64,
    /// Number of leaf particles, `>= 1`; the network has `n_leaves + 1`
    /// members in total.
    pub n_leaves: usize,
    /// Drive amplitude, `>= 0`.
    pub drive_amp: f64,
    /// Drive angular frequency, `>= 0`.
    pub drive_freq: f64,
    /// Noise switching (autocorrelation decay) rate, `>= 0`.
    pub lambda: f64,
    /// Noise amplitude, `>= 0`; zero turns the noise off.
    pub sigma: f64,
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let checks: [(&'static str, f64, bool); 5] = [
            ("omega", self.omega, self.omega >= 0.0),
            ("epsilon", self.epsilon, true),
            ("A0", self.drive_amp, self.drive_amp >= 0.0),
            ("Omega", self.drive_freq, self.drive_freq >= 0.0),
            ("lambda", self.lambda, self.lambda >= 0.0),
        ];
        for (name, value, in_range) in checks {
            if !(value.is_finite() && in_range) {
                return Err(Error::InvalidParameter {
                    name,
                    message: format!("out of range: {value}"),
                });
            }
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "sigma",
                message: format!("must be finite and >= 0, got {}", self.sigma),
            });
        }
        if self.n_leaves == 0 {
            return Err(Error::InvalidParameter {
                name: "N",
                message: "the star needs at least one leaf".into(),
            });
        }
        Ok(())
    }

    /// Noise variance `sigma^2`.
    pub fn sigma2(&self) -> f64 {
        self.sigma * self.sigma
    }

    /// Total particle count `n_leaves + 1`.
    pub fn n_total(&self) -> usize {
        self.n_leaves + 1
    }
}

/// Initial particle positions, hub first.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleState {
    positions: Vec<f64>,
}

impl ParticleState {
    /// Positions in network order (hub, then leaves). Requires at least two
    /// entries and all of them finite.
    pub fn new(positions: Vec<f64>) -> Result<Self> {
        if positions.len() < 2 {
            return Err(Error::InvalidParameter {
                name: "init",
                message: format!(
                    "need hub plus at least one leaf, got {} entries",
                    positions.len()
                ),
            });
        }
        if let Some(bad) = positions.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "init",
                message: format!("non-finite entry {bad}"),
            });
        }
        Ok(Self { positions })
    }

    /// Every particle at the same position.
    pub fn uniform(value: f64, n_leaves: usize) -> Result<Self> {
        Self::new(vec![value; n_leaves + 1])
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn n_leaves(&self) -> usize {
        self.positions.len() - 1
    }
}

/// Instantaneous network drift with one shared noise value `xi`.
///
/// `state` and `out` are in network order (hub first) and must both have
/// `params.n_total()` entries.
pub fn drift(params: &SystemParams, t: f64, xi: f64, state: &[f64], out: &mut [f64]) {
    let n = params.n_total();
    assert_eq!(state.len(), n, "state dimension mismatch");
    assert_eq!(out.len(), n, "output dimension mismatch");
    let hub = state[0];
    let restoring = params.omega + xi;
    let drive = params.drive_amp * (params.drive_freq * t).sin();
    let leaf_sum: f64 = state[1..].iter().sum();
    out[0] = -restoring * hub + params.epsilon * (leaf_sum - params.n_leaves as f64 * hub) + drive;
    for (o, &x) in out[1..].iter_mut().zip(&state[1..]) {
        *o = -restoring * x + params.epsilon * (hub - x) + drive;
    }
}

/// As [`drift`], with an independent noise value per particle.
pub fn drift_per_particle(
    params: &SystemParams,
    t: f64,
    xi: &[f64],
    state: &[f64],
    out: &mut [f64],
) {
    let n = params.n_total();
    assert_eq!(state.len(), n, "state dimension mismatch");
    assert_eq!(xi.len(), n, "noise dimension mismatch");
    assert_eq!(out.len(), n, "output dimension mismatch");
    let hub = state[0];
    let drive = params.drive_amp * (params.drive_freq * t).sin();
    let leaf_sum: f64 = state[1..].iter().sum();
    out[0] = -(params.omega + xi[0]) * hub
        + params.epsilon * (leaf_sum - params.n_leaves as f64 * hub)
        + drive;
    for ((o, &x), &z) in out[1..].iter_mut().zip(&state[1..]).zip(&xi[1..]) {
        *o = -(params.omega + z) * x + params.epsilon * (hub - x) + drive;
    }
}

/// Network average `S = sum(x) / (N + 1)`.
pub fn mean_field(state: &[f64]) -> f64 {
    state.iter().sum::<f64>() / state.len() as f64
}

/// Per-particle deviations from the mean field, `x_i - S`.
pub fn deviations(state: &[f64]) -> Vec<f64> {
    let s = mean_field(state);
    state.iter().map(|&x| x - s).collect()
}

/// Largest deviation magnitude `max_i |x_i - S|`, the synchronization
/// distance used by the first-passage detector.
pub fn max_abs_deviation(state: &[f64]) -> f64 {
    let s = mean_field(state);
    state.iter().map(|&x| (x - s).abs()).fold(0.0, f64::max)
}

/// How noise is attached to the particles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseMode {
    /// One realization drives every particle (the model's default; keeps
    /// the mean-field cancellation exact pathwise).
    #[default]
    Shared,
    /// Each particle receives an independent realization.
    PerParticle,
}

/// The noise actually used by a realization.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseRealization {
    Shared(NoisePath),
    PerParticle(Vec<NoisePath>),
}

impl NoiseRealization {
    /// The single shared path, if this realization used one.
    pub fn shared(&self) -> Option<&NoisePath> {
        match self {
            Self::Shared(p) => Some(p),
            Self::PerParticle(_) => None,
        }
    }
}

/// One simulated path of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    trajectory: Trajectory,
    mean_field: Vec<f64>,
    noise: NoiseRealization,
}

impl Realization {
    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    /// Mean-field time series, one value per grid node.
    pub fn mean_field(&self) -> &[f64] {
        &self.mean_field
    }

    pub fn noise(&self) -> &NoiseRealization {
        &self.noise
    }
}

/// Simulate one path with shared noise, building the quadrature weights
/// internally. `noise_seed` fully determines the noise realization.
pub fn simulate_path(
    params: &SystemParams,
    grid: &TimeGrid,
    init: &ParticleState,
    noise_seed: u64,
) -> Result<Realization> {
    let weights = AbmWeights::new(params.alpha, grid);
    simulate_path_with(params, &weights, init, noise_seed, NoiseMode::Shared)
}

/// Simulate one path reusing a precomputed weight table — the entry point
/// ensemble drivers use, since the table depends only on `(alpha, grid)`.
pub fn simulate_path_with(
    params: &SystemParams,
    weights: &AbmWeights,
    init: &ParticleState,
    noise_seed: u64,
    mode: NoiseMode,
) -> Result<Realization> {
    params.validate()?;
    if init.positions().len() != params.n_total() {
        return Err(Error::InvalidParameter {
            name: "init",
            message: format!(
                "{} entries for a network of {} particles",
                init.positions().len(),
                params.n_total()
            ),
        });
    }
    let grid = weights.grid().clone();
    let noise = draw_noise(params, &grid, noise_seed, mode);

    let dt = grid.dt();
    let node_of = |t: f64| (t / dt).round() as usize;
    let trajectory = match &noise {
        NoiseRealization::Shared(path) => {
            abm_integrate_with(weights, init.positions(), |t, x, out| {
                drift(params, t, path.value(node_of(t)), x, out);
            })?
        }
        NoiseRealization::PerParticle(paths) => {
            let mut xi = vec![0.0; params.n_total()];
            abm_integrate_with(weights, init.positions(), |t, x, out| {
                let k = node_of(t);
                for (z, p) in xi.iter_mut().zip(paths) {
                    *z = p.value(k);
                }
                drift_per_particle(params, t, &xi, x, out);
            })?
        }
    };

    let mean_field = trajectory.states().map(mean_field).collect();
    Ok(Realization {
        trajectory,
        mean_field,
        noise,
    })
}

fn draw_noise(
    params: &SystemParams,
    grid: &TimeGrid,
    noise_seed: u64,
    mode: NoiseMode,
) -> NoiseRealization {
    if params.sigma == 0.0 {
        return match mode {
            NoiseMode::Shared => NoiseRealization::Shared(NoisePath::zero(grid)),
            NoiseMode::PerParticle => {
                NoiseRealization::PerParticle(vec![NoisePath::zero(grid); params.n_total()])
            }
        };
    }
    let tp = TelegraphParams::new(params.sigma, params.lambda).expect("validated noise parameters");
    match mode {
        NoiseMode::Shared => NoiseRealization::Shared(sample_path(&tp, grid, noise_seed)),
        NoiseMode::PerParticle => {
            // One sub-seed per particle, all derived from the path seed so
            // the realization stays a pure function of it.
            let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
            let paths = (0..params.n_total())
                .map(|_| sample_path(&tp, grid, rng.random::<u64>()))
                .collect();
            NoiseRealization::PerParticle(paths)
        }
    }
}
