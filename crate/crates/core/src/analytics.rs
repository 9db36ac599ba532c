//! Closed-form long-time response of the mean field.
//!
//! Averaging the network equations over the two-state noise closes after
//! one auxiliary correlator, because the noise is dichotomous
//! (`xi^2 = sigma^2` pathwise) and the coupling cancels in the mean field.
//! The stationary solution of that closed pair gives, for the drive
//! `A sin(W t)`, a mean-field response `A G sin(W t + phi)` with an output
//! gain `G` and phase shift `phi` expressible through four real
//! combinations `f1..f4` of the parameters. This module evaluates those
//! formulas, the stability / synchronization thresholds that delimit their
//! validity, and the criterion for the gain to peak at a positive noise
//! intensity (stochastic resonance in the noise variance).
//!
//! [`moment_oracle`] integrates the same closed moment pair numerically —
//! an independent route to the stationary response that the unit tests
//! compare against the closed forms, and that Monte Carlo ensembles are
//! compared against in turn.

use crate::error::{Error, Result};
use crate::solver::{abm_integrate, TimeGrid};
use crate::system::SystemParams;
use num_complex::Complex64;
use std::f64::consts::FRAC_PI_2;

/// Output gain and phase of the stationary mean-field response, together
/// with the real combinations `f1..f4` they are built from.
///
/// `f1 + i f2 = (i W + lambda)^alpha + omega` carries the noise-shifted
/// drive frequency; `f3 + i f4 = ((i W)^alpha + omega)(f1 + i f2) - sigma^2`
/// is the response denominator. The gain is
/// `G = sqrt((f1^2 + f2^2) / (f3^2 + f4^2))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainBreakdown {
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
    pub f4: f64,
    /// Modulus of `i W + lambda`.
    pub r: f64,
    /// Argument of `i W + lambda`.
    pub theta: f64,
    /// Output gain `G` (ratio of response to drive amplitude).
    pub g: f64,
    /// Response amplitude `A0 * G`.
    pub a1: f64,
    /// Response phase shift in `(-pi, pi]`.
    pub phi: f64,
}

/// The `f1..f4` combinations for a given noise variance.
fn response_parts(params: &SystemParams, sigma2: f64) -> (f64, f64, f64, f64, f64, f64) {
    let a = params.alpha.get();
    let om = params.omega;
    let w = params.drive_freq;
    let r = w.hypot(params.lambda);
    let theta = w.atan2(params.lambda);
    let ra = r.powf(a);
    let wa = w.powf(a);
    let half = a * FRAC_PI_2;
    let f1 = om + ra * (a * theta).cos();
    let f2 = ra * (a * theta).sin();
    let f3 = ra * wa * (a * theta + half).cos() + om * wa * half.cos() + om * f1 - sigma2;
    let f4 = ra * wa * (a * theta + half).sin() + om * wa * half.sin() + om * f2;
    (f1, f2, f3, f4, r, theta)
}

/// Stationary gain, amplitude, and phase of the mean-field response.
///
/// Fails with [`Error::SingularGain`] when the response denominator is
/// exactly zero (the drive sits on a pole of the stationary solution).
pub fn gain(params: &SystemParams) -> Result<GainBreakdown> {
    params.validate()?;
    let (f1, f2, f3, f4, r, theta) = response_parts(params, params.sigma2());
    if f3 == 0.0 && f4 == 0.0 {
        return Err(Error::SingularGain);
    }
    let g = ((f1 * f1 + f2 * f2) / (f3 * f3 + f4 * f4)).sqrt();
    let phi = (f2 * f3 - f1 * f4).atan2(f1 * f3 + f2 * f4);
    Ok(GainBreakdown {
        f1,
        f2,
        f3,
        f4,
        r,
        theta,
        g,
        a1: params.drive_amp * g,
        phi,
    })
}

/// Stability and synchronization thresholds in the noise variance.
///
/// Every threshold has the form `c^2 + lambda^alpha * c` for a relaxation
/// coefficient `c`: the mean field uses `c = omega`, the hub's deviation
/// from the mean field uses `c = omega + epsilon (N + 1)`, and the leaves'
/// deviations use `c = omega + epsilon`. A quantity is stable when
/// `sigma^2` lies strictly below its threshold; the margin is
/// `threshold - sigma^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    /// The stationary mean-field response exists.
    pub stationary: bool,
    pub stationary_margin: f64,
    pub stationary_bound: f64,
    /// The hub converges to the mean field.
    pub hub_sync: bool,
    pub hub_sync_margin: f64,
    pub hub_sync_bound: f64,
    /// Every particle converges to the mean field.
    pub network_sync: bool,
    pub network_sync_margin: f64,
    pub network_sync_bound: f64,
}

pub fn stability(params: &SystemParams) -> Result<StabilityReport> {
    params.validate()?;
    let la = params.lambda.powf(params.alpha.get());
    let s2 = params.sigma2();
    let bound = |c: f64| c * c + la * c;
    let b_mean = bound(params.omega);
    let b_hub = bound(params.omega + params.epsilon * (params.n_leaves as f64 + 1.0));
    let b_net = bound(params.omega + params.epsilon);
    Ok(StabilityReport {
        stationary: s2 < b_mean,
        stationary_margin: b_mean - s2,
        stationary_bound: b_mean,
        hub_sync: s2 < b_hub,
        hub_sync_margin: b_hub - s2,
        hub_sync_bound: b_hub,
        network_sync: s2 < b_net,
        network_sync_margin: b_net - s2,
        network_sync_bound: b_net,
    })
}

/// Whether the gain peaks at a positive noise variance.
///
/// `sigma_star_sq` is the variance that zeroes `f3`; there the response
/// denominator is smallest, so `G(sigma^2)` attains its maximum. The peak
/// is physical — reachable by an actual noise level — exactly when
/// `0 < sigma_star_sq < stationary_bound` (both strict).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrReport {
    /// Gain-maximizing noise variance (may lie outside the physical range).
    pub sigma_star_sq: f64,
    /// Stationarity threshold `omega^2 + omega * lambda^alpha`.
    pub stationary_bound: f64,
    /// The maximum sits strictly inside `(0, stationary_bound)`.
    pub sr_occurs: bool,
}

pub fn sr_criterion(params: &SystemParams) -> Result<SrReport> {
    params.validate()?;
    // The sigma^2-zero of f3 is f3 evaluated at sigma = 0.
    let (_, _, c, _, _, _) = response_parts(params, 0.0);
    let bound = params.omega * params.omega + params.omega * params.lambda.powf(params.alpha.get());
    Ok(SrReport {
        sigma_star_sq: c,
        stationary_bound: bound,
        sr_occurs: 0.0 < c && c < bound,
    })
}

/// Characteristic function of the closed moment pair,
/// `(s^alpha + omega) ((s + lambda)^alpha + omega) - sigma^2`,
/// on the principal branch. Its zeros govern the relaxation of the mean
/// field toward the stationary response; at `s = 0` it equals the
/// stationarity margin.
pub fn char_eval(s: Complex64, params: &SystemParams) -> Complex64 {
    let a = params.alpha.get();
    (s.powf(a) + params.omega) * ((s + params.lambda).powf(a) + params.omega) - params.sigma2()
}

/// Numerical integration of the closed moment pair.
///
/// `y1` is the noise-averaged mean field and `y2` the noise-mean-field
/// correlator. Internally the correlator is propagated through the
/// substitution `z = y2 * exp(lambda t)`, which turns the pair into two
/// coupled fractional equations without a memory integral; the growing
/// factor limits the usable horizon, hence the `lambda * horizon` guard.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentOracle {
    grid: TimeGrid,
    y1: Vec<f64>,
    y2: Vec<f64>,
}

impl MomentOracle {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Noise-averaged mean field over the grid.
    pub fn y1(&self) -> &[f64] {
        &self.y1
    }

    /// Noise-mean-field correlator over the grid.
    pub fn y2(&self) -> &[f64] {
        &self.y2
    }
}

pub fn moment_oracle(
    params: &SystemParams,
    grid: &TimeGrid,
    y1_0: f64,
    y2_0: f64,
) -> Result<MomentOracle> {
    params.validate()?;
    if params.lambda * grid.horizon() >= 700.0 {
        return Err(Error::Domain(format!(
            "moment oracle: lambda * horizon = {} overflows the correlator \
             substitution (limit 700)",
            params.lambda * grid.horizon()
        )));
    }
    let om = params.omega;
    let lam = params.lambda;
    let s2 = params.sigma2();
    let a0 = params.drive_amp;
    let w = params.drive_freq;
    let traj = abm_integrate(params.alpha, grid, &[y1_0, y2_0], |t, y, out| {
        out[0] = -om * y[0] - y[1] * (-lam * t).exp() + a0 * (w * t).sin();
        out[1] = -om * y[1] - s2 * y[0] * (lam * t).exp();
    })?;
    let y1 = traj.component(0);
    let y2 = traj
        .grid()
        .times()
        .zip(traj.states())
        .map(|(t, s)| s[1] * (-lam * t).exp())
        .collect();
    Ok(MomentOracle {
        grid: grid.clone(),
        y1,
        y2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::FractionalOrder;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn params(alpha: f64, omega: f64, lambda: f64, drive_freq: f64, sigma2: f64) -> SystemParams {
        SystemParams {
            alpha: FractionalOrder::new(alpha).unwrap(),
            omega,
            epsilon: 1.0,
            n_leaves: 10,
            drive_amp: 1.0,
            drive_freq,
            lambda,
            sigma: sigma2.sqrt(),
        }
    }

    /// Reference parameter set used throughout: alpha = 0.9, omega = 1,
    /// lambda = 1, drive at pi, noise variance 1.5 (three quarters of the
    /// stationarity threshold).
    fn reference() -> SystemParams {
        params(0.9, 1.0, 1.0, PI, 1.5)
    }

    /// Least-squares fit of `y ~ a sin(w t) + b cos(w t)`, returned as
    /// amplitude and phase of `A sin(w t + phi)`.
    fn fit_sinusoid(t: &[f64], y: &[f64], w: f64) -> (f64, f64) {
        let (mut saa, mut sab, mut sbb, mut say, mut sby) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&ti, &yi) in t.iter().zip(y) {
            let s = (w * ti).sin();
            let c = (w * ti).cos();
            saa += s * s;
            sab += s * c;
            sbb += c * c;
            say += s * yi;
            sby += c * yi;
        }
        let det = saa * sbb - sab * sab;
        let a = (say * sbb - sby * sab) / det;
        let b = (sby * saa - say * sab) / det;
        ((a * a + b * b).sqrt(), b.atan2(a))
    }

    fn wrap_angle(x: f64) -> f64 {
        (x + PI).rem_euclid(2.0 * PI) - PI
    }

    #[test]
    fn quiet_gain_is_the_scalar_transfer_modulus() {
        // With the noise off, G must reduce to 1 / |(iW)^alpha + omega| for
        // every order and frequency.
        for alpha in [0.4, 0.7, 0.9, 1.0] {
            for omega in [1.0, 2.0] {
                for w in [0.5, 1.0, PI] {
                    for lambda in [0.5, 1.0] {
                        let p = params(alpha, omega, lambda, w, 0.0);
                        let got = gain(&p).unwrap();
                        let iw = Complex64::new(0.0, w);
                        let h = iw.powf(alpha) + omega;
                        let want = 1.0 / h.norm();
                        assert!(
                            (got.g - want).abs() < 1e-12 * want.max(1.0),
                            "alpha {alpha} omega {omega} W {w}: {} vs {want}",
                            got.g
                        );
                        let want_phi = -h.arg();
                        assert!(
                            wrap_angle(got.phi - want_phi).abs() < 1e-12,
                            "phase {} vs {want_phi}",
                            got.phi
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn parts_match_their_complex_definitions() {
        for alpha in [0.3, 0.6, 0.9, 1.0] {
            for (lambda, w, s2) in [(1.0, PI, 1.5), (0.3, 0.7, 0.4), (2.0, 1.0, 3.0)] {
                let p = params(alpha, 1.0, lambda, w, s2);
                let b = gain(&p).unwrap();
                let iw = Complex64::new(0.0, w);
                let c12 = (iw + lambda).powf(alpha) + p.omega;
                let c34 = (iw.powf(alpha) + p.omega) * c12 - s2;
                let scale = c34.norm().max(1.0);
                assert!((b.f1 - c12.re).abs() < 1e-12 * scale);
                assert!((b.f2 - c12.im).abs() < 1e-12 * scale);
                assert!((b.f3 - c34.re).abs() < 1e-12 * scale);
                assert!((b.f4 - c34.im).abs() < 1e-12 * scale);
            }
        }
    }

    #[test]
    fn classical_unit_example_gains_one_over_sqrt_two() {
        let p = params(1.0, 1.0, 1.0, 1.0, 0.0);
        let b = gain(&p).unwrap();
        assert!((b.g - 1.0 / 2.0f64.sqrt()).abs() < 1e-12);
        assert!((b.phi - (-PI / 4.0)).abs() < 1e-12);
    }

    #[test]
    fn classical_resonant_example_hits_the_f3_zero() {
        // alpha = 1, omega = lambda = W = 1, sigma^2 = 1 puts the noise
        // variance exactly at the denominator minimum: f3 = 0, f4 = 3.
        let p = params(1.0, 1.0, 1.0, 1.0, 1.0);
        let b = gain(&p).unwrap();
        assert!(b.f3.abs() < 1e-12, "f3 = {}", b.f3);
        assert!((b.f4 - 3.0).abs() < 1e-12);
        assert!((b.g - 5.0f64.sqrt() / 3.0).abs() < 1e-12);
    }

    #[test]
    fn static_drive_gain_is_the_inverse_frequency() {
        let p = params(0.7, 2.0, 0.0, 0.0, 0.0);
        let b = gain(&p).unwrap();
        assert!((b.g - 0.5).abs() < 1e-12);
        assert_eq!(b.phi, 0.0);
    }

    #[test]
    fn reference_point_matches_frozen_values() {
        let b = gain(&reference()).unwrap();
        assert!((b.f1 - 2.231_600_898_597_1).abs() < 1e-9);
        assert!((b.f2 - 2.654_335_540_557_663_6).abs() < 1e-9);
        assert!((b.f3 - (-5.635_616_305_580_031)).abs() < 1e-9);
        assert!((b.f4 - 9.993_208_531_496_457).abs() < 1e-9);
        assert!((b.g - 0.302_262_386_166_223_5).abs() < 1e-9);
        assert!((b.phi - (-1.212_578_580_388_494_3)).abs() < 1e-9);

        let b4 = gain(&params(0.4, 1.0, 1.0, PI, 1.5)).unwrap();
        assert!((b4.g - 0.489_229_789_240_317_07).abs() < 1e-9);
        assert!((b4.phi - (-0.574_864_888_872_235_4)).abs() < 1e-9);
    }

    #[test]
    fn degenerate_parameters_report_a_singular_gain() {
        let p = SystemParams {
            omega: 0.0,
            lambda: 0.0,
            drive_freq: 0.0,
            sigma: 0.0,
            ..reference()
        };
        assert!(matches!(gain(&p), Err(Error::SingularGain)));
    }

    #[test]
    fn stability_margins_at_the_reference_point() {
        let r = stability(&reference()).unwrap();
        assert!(r.stationary);
        assert!((r.stationary_bound - 2.0).abs() < 1e-12);
        assert!((r.stationary_margin - 0.5).abs() < 1e-12);
        // omega = epsilon = lambda = 1 gives a leaf threshold of 6
        // regardless of alpha.
        assert!((r.network_sync_bound - 6.0).abs() < 1e-12);
        assert!(r.network_sync && r.hub_sync);
        assert!(r.hub_sync_bound > r.network_sync_bound);
    }

    #[test]
    fn the_stationarity_inequality_is_strict() {
        // sigma^2 exactly on the threshold is not stationary.
        let p = SystemParams {
            lambda: 0.0,
            sigma: 1.0,
            ..params(0.9, 1.0, 0.0, PI, 1.0)
        };
        let r = stability(&p).unwrap();
        assert_eq!(r.stationary_bound, 1.0);
        assert!(!r.stationary);
        assert_eq!(r.stationary_margin, 0.0);
    }

    #[test]
    fn resonance_criterion_worked_examples() {
        // Unit classical case: the gain peak sits at sigma^2 = 1, inside
        // the stationary range (0, 2).
        let r = sr_criterion(&params(1.0, 1.0, 1.0, 1.0, 0.5)).unwrap();
        assert!((r.sigma_star_sq - 1.0).abs() < 1e-12);
        assert!((r.stationary_bound - 2.0).abs() < 1e-12);
        assert!(r.sr_occurs);

        // Fast drive: the would-be peak moves far below zero.
        let r = sr_criterion(&params(1.0, 1.0, 1.0, 10.0, 0.5)).unwrap();
        assert!((r.sigma_star_sq - (-98.0)).abs() < 1e-9);
        assert!(!r.sr_occurs);

        // Free static system: the peak location and the threshold both
        // degenerate to zero, so no peak strictly inside.
        let p = SystemParams {
            omega: 0.0,
            drive_freq: 0.0,
            ..params(0.9, 0.0, 1.0, 0.0, 0.25)
        };
        let r = sr_criterion(&p).unwrap();
        assert_eq!(r.sigma_star_sq, 0.0);
        assert_eq!(r.stationary_bound, 0.0);
        assert!(!r.sr_occurs);
    }

    #[test]
    fn gain_peaks_exactly_at_the_predicted_variance() {
        // Only f3 depends on sigma^2, so the gain at sigma^2 = sigma*^2
        // dominates any neighboring variance.
        let base = params(1.0, 1.0, 1.0, 1.0, 0.0);
        let star = sr_criterion(&base).unwrap().sigma_star_sq;
        let at = |s2: f64| gain(&params(1.0, 1.0, 1.0, 1.0, s2)).unwrap().g;
        let peak = at(star);
        for ds in [0.05, 0.2, 0.5] {
            assert!(peak > at(star - ds));
            assert!(peak > at(star + ds));
        }
    }

    #[test]
    fn gain_is_continuous_into_the_classical_order() {
        let near = gain(&params(1.0 - 1e-6, 1.0, 1.0, PI, 1.5)).unwrap();
        let at = gain(&params(1.0, 1.0, 1.0, PI, 1.5)).unwrap();
        assert!((near.g - at.g).abs() < 1e-4);
        assert!(wrap_angle(near.phi - at.phi).abs() < 1e-4);
    }

    #[test]
    fn characteristic_function_vanishes_at_classical_roots() {
        // For alpha = 1, omega = lambda = sigma^2 = 1 the characteristic
        // function is the quadratic s^2 + 3s + 1 with roots (-3 +- sqrt5)/2.
        let p = params(1.0, 1.0, 1.0, PI, 1.0);
        for sign in [-1.0, 1.0] {
            let root = Complex64::new((-3.0 + sign * 5.0f64.sqrt()) / 2.0, 0.0);
            let v = char_eval(root, &p);
            assert!(v.norm() < 1e-10, "char({root}) = {v}");
        }
    }

    #[test]
    fn characteristic_function_at_zero_is_the_stationary_margin() {
        for p in [reference(), params(0.4, 2.0, 0.7, 1.0, 3.0)] {
            let v = char_eval(Complex64::new(0.0, 0.0), &p);
            let margin = stability(&p).unwrap().stationary_margin;
            assert!((v.re - margin).abs() < 1e-12, "{} vs {margin}", v.re);
            assert!(v.im.abs() < 1e-12);
        }
    }

    #[test]
    fn undriven_oracle_from_rest_stays_at_rest() {
        let p = SystemParams {
            drive_amp: 0.0,
            ..reference()
        };
        let grid = TimeGrid::from_horizon(0.01, 5.0).unwrap();
        let m = moment_oracle(&p, &grid, 0.0, 0.0).unwrap();
        assert!(m.y1().iter().all(|&v| v == 0.0));
        assert!(m.y2().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn quiet_oracle_settles_on_the_closed_form_response() {
        let p = SystemParams {
            sigma: 0.0,
            ..reference()
        };
        let grid = TimeGrid::from_horizon(0.01, 15.0).unwrap();
        let m = moment_oracle(&p, &grid, 0.0, 0.0).unwrap();
        let b = gain(&p).unwrap();
        let lo = grid.node_at_fraction(13.0 / 15.0);
        let t: Vec<f64> = grid.times().skip(lo).collect();
        let (amp, _) = fit_sinusoid(&t, &m.y1()[lo..], p.drive_freq);
        assert!(
            (amp - b.a1).abs() / b.a1 < 1e-3,
            "amplitude {amp} vs {}",
            b.a1
        );
    }

    #[test]
    fn noisy_oracle_settles_on_the_closed_form_response() {
        // One full drive period near the end of the horizon; the slowly
        // decaying transient keeps the agreement at the percent level.
        let p = reference();
        let grid = TimeGrid::from_horizon(0.01, 15.0).unwrap();
        let m = moment_oracle(&p, &grid, 0.0, 0.0).unwrap();
        let b = gain(&p).unwrap();
        let lo = grid.node_at_fraction(13.0 / 15.0);
        let t: Vec<f64> = grid.times().skip(lo).collect();
        let (amp, phase) = fit_sinusoid(&t, &m.y1()[lo..], p.drive_freq);
        assert!(
            (amp - b.a1).abs() / b.a1 < 0.01,
            "amplitude {amp} vs {}",
            b.a1
        );
        assert!(
            wrap_angle(phase - b.phi).abs() < 0.01,
            "phase {phase} vs {}",
            b.phi
        );
    }

    #[test]
    fn oracle_guards_against_correlator_overflow() {
        let p = SystemParams {
            lambda: 50.0,
            ..reference()
        };
        let grid = TimeGrid::from_horizon(0.01, 15.0).unwrap();
        assert!(matches!(
            moment_oracle(&p, &grid, 0.0, 0.0),
            Err(Error::Domain(_))
        ));
    }

    proptest! {
        #[test]
        fn prop_network_sync_implies_hub_sync(
            alpha in 0.1f64..=1.0,
            omega in 0.0f64..3.0,
            epsilon in 0.0f64..3.0,
            lambda in 0.0f64..3.0,
            sigma in 0.0f64..3.0,
            n_leaves in 1usize..30,
        ) {
            let p = SystemParams {
                alpha: FractionalOrder::new(alpha).unwrap(),
                omega,
                epsilon,
                n_leaves,
                drive_amp: 1.0,
                drive_freq: 1.0,
                lambda,
                sigma,
            };
            let r = stability(&p).unwrap();
            // With non-negative coupling the hub relaxes faster than the
            // leaves, so network-wide locking is the stronger condition.
            prop_assert!(!r.network_sync || r.hub_sync);
            prop_assert!(r.hub_sync_bound >= r.network_sync_bound - 1e-12);
        }

        #[test]
        fn prop_phase_stays_in_the_principal_interval(
            alpha in 0.1f64..=1.0,
            omega in 0.1f64..3.0,
            lambda in 0.0f64..3.0,
            w in 0.1f64..4.0,
            s2 in 0.0f64..4.0,
        ) {
            let p = params(alpha, omega, lambda, w, s2);
            let b = gain(&p).unwrap();
            prop_assert!(b.phi > -PI && b.phi <= PI);
            prop_assert!(b.g.is_finite() && b.g >= 0.0);
        }
    }
}
