//! Star-coupled fractional-order Langevin oscillators under dichotomous
//! noise.
//!
//! The crate simulates a star network of `N + 1` coupled oscillators whose
//! inertia term carries a Caputo fractional derivative, whose frequency is
//! perturbed multiplicatively by symmetric two-state (telegraph) noise, and
//! which is driven by a sinusoidal force. Alongside the simulation it
//! evaluates the closed-form long-time response of the mean field — output
//! amplitude and phase, stability and synchronization thresholds, and the
//! parameter criterion for noise-induced resonance — so the stochastic and
//! analytic routes can cross-validate each other.
//!
//! Module map:
//!
//! - [`solver`] — Caputo predictor-corrector and Grünwald-Letnikov
//!   integrators, Mittag-Leffler oracle.
//! - [`noise`] — telegraph-noise path sampling and autocorrelation
//!   estimation.
//! - [`system`] — the star-network drift, mean field, and single-path
//!   simulation.
//! - [`analytics`] — closed-form gain, stability report, resonance
//!   criterion, and a two-moment integration oracle.
//! - [`monte_carlo`] — deterministic parallel ensembles: mean-field
//!   statistics, sinusoid fits, first-passage synchronization times.
//! - [`scan`] — parameter sweeps (phase diagram, gain surface, resonance
//!   ratio, response curves, passage-time scaling).
//! - [`csv`] — fixed-header CSV serialization for every scan product.

pub mod analytics;
pub mod csv;
pub mod error;
pub mod monte_carlo;
pub mod noise;
pub mod scan;
pub mod solver;
pub mod system;

pub use error::{Error, Result};
