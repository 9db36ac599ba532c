//! Parameter sweeps over the closed-form response.
//!
//! Everything here is built from `analytics` evaluations on grids: the
//! stationarity phase diagram in the `(lambda, sigma^2)` plane, the gain
//! surface over `(W, sigma^2)`, the fraction of parameter space showing a
//! noise-induced gain peak as a function of the fractional order, response
//! curves against drive frequency and noise amplitude, and the Monte Carlo
//! passage-time scaling with network size. Grids are materialized eagerly —
//! sweeps are bounded by an explicit cell cap so a typo in an axis spec
//! fails fast instead of allocating gigabytes.

use crate::analytics::{gain, sr_criterion, stability};
use crate::error::{Error, Result};
use crate::monte_carlo::{estimate_mfpt, McConfig, MfptEstimate};
use crate::solver::{FractionalOrder, TimeGrid};
use crate::system::SystemParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Inclusive linearly spaced axis: `value(i) = min + i (max - min) / (points - 1)`,
/// with both endpoints on the grid. A single-point axis sits at `min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisSpec {
    min: f64,
    max: f64,
    points: usize,
}

impl AxisSpec {
    pub fn new(min: f64, max: f64, points: usize) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && min <= max) {
            return Err(Error::InvalidParameter {
                name: "axis",
                message: format!("need finite min <= max, got [{min}, {max}]"),
            });
        }
        if points == 0 {
            return Err(Error::InvalidParameter {
                name: "axis",
                message: "need at least one grid point".into(),
            });
        }
        Ok(Self { min, max, points })
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn value(&self, i: usize) -> f64 {
        debug_assert!(i < self.points);
        if self.points == 1 {
            self.min
        } else {
            self.min + i as f64 * (self.max - self.min) / (self.points - 1) as f64
        }
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.points).map(|i| self.value(i))
    }
}

fn check_cell_cap(cells: usize, cap: usize) -> Result<()> {
    if cells > cap {
        return Err(Error::InvalidParameter {
            name: "cells",
            message: format!("grid has {cells} cells, cap is {cap}"),
        });
    }
    Ok(())
}

/// Classification of one `(lambda, sigma^2)` cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeClass {
    /// The stationary response does not exist.
    Nonstationary,
    /// Stationary, and the gain is monotone in the noise variance.
    StationaryNoSr,
    /// Stationary, and the gain peaks at a positive reachable variance.
    StationarySr,
}

impl RegimeClass {
    pub fn code(self) -> u8 {
        match self {
            Self::Nonstationary => 0,
            Self::StationaryNoSr => 1,
            Self::StationarySr => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Self::Nonstationary),
            1 => Ok(Self::StationaryNoSr),
            2 => Ok(Self::StationarySr),
            other => Err(Error::Domain(format!("unknown regime code {other}"))),
        }
    }
}

/// Regime classification over a `(lambda, sigma^2)` grid, lambda-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDiagram {
    lambda_axis: AxisSpec,
    sigma2_axis: AxisSpec,
    classes: Vec<RegimeClass>,
}

impl PhaseDiagram {
    pub fn lambda_axis(&self) -> &AxisSpec {
        &self.lambda_axis
    }

    pub fn sigma2_axis(&self) -> &AxisSpec {
        &self.sigma2_axis
    }

    pub fn classes(&self) -> &[RegimeClass] {
        &self.classes
    }

    pub fn class_at(&self, i_lambda: usize, j_sigma2: usize) -> RegimeClass {
        self.classes[i_lambda * self.sigma2_axis.points() + j_sigma2]
    }

    pub fn n_stationary(&self) -> usize {
        self.classes
            .iter()
            .filter(|c| **c != RegimeClass::Nonstationary)
            .count()
    }

    pub fn n_sr(&self) -> usize {
        self.classes
            .iter()
            .filter(|c| **c == RegimeClass::StationarySr)
            .count()
    }

    /// Fraction of stationary cells classified as resonant; `None` when no
    /// cell is stationary.
    pub fn sr_ratio(&self) -> Option<f64> {
        let n_stat = self.n_stationary();
        (n_stat > 0).then(|| self.n_sr() as f64 / n_stat as f64)
    }
}

/// Classify every cell of the `(lambda, sigma^2)` grid for the remaining
/// parameters taken from `base`.
pub fn phase_diagram(
    base: &SystemParams,
    lambda_axis: &AxisSpec,
    sigma2_axis: &AxisSpec,
    cell_cap: usize,
) -> Result<PhaseDiagram> {
    base.validate()?;
    check_cell_cap(lambda_axis.points() * sigma2_axis.points(), cell_cap)?;
    let mut classes = Vec::with_capacity(lambda_axis.points() * sigma2_axis.points());
    for lambda in lambda_axis.values() {
        // The resonance criterion does not involve sigma, so it is fixed
        // along each lambda row.
        let row_params = SystemParams { lambda, ..*base };
        let resonant = sr_criterion(&row_params)?.sr_occurs;
        for sigma2 in sigma2_axis.values() {
            let p = SystemParams {
                sigma: sigma2.sqrt(),
                ..row_params
            };
            let class = if !stability(&p)?.stationary {
                RegimeClass::Nonstationary
            } else if resonant {
                RegimeClass::StationarySr
            } else {
                RegimeClass::StationaryNoSr
            };
            classes.push(class);
        }
    }
    Ok(PhaseDiagram {
        lambda_axis: *lambda_axis,
        sigma2_axis: *sigma2_axis,
        classes,
    })
}

/// Gain over a `(W, sigma^2)` grid, W-major. Nonstationary cells carry
/// `NaN` and `stationary = false`; singular cells carry `NaN` and are
/// counted separately.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSurface {
    drive_freq_axis: AxisSpec,
    sigma2_axis: AxisSpec,
    g: Vec<f64>,
    stationary: Vec<bool>,
    n_singular: usize,
}

impl GainSurface {
    pub fn drive_freq_axis(&self) -> &AxisSpec {
        &self.drive_freq_axis
    }

    pub fn sigma2_axis(&self) -> &AxisSpec {
        &self.sigma2_axis
    }

    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn stationary(&self) -> &[bool] {
        &self.stationary
    }

    pub fn g_at(&self, i_freq: usize, j_sigma2: usize) -> f64 {
        self.g[i_freq * self.sigma2_axis.points() + j_sigma2]
    }

    pub fn n_singular(&self) -> usize {
        self.n_singular
    }
}

pub fn gain_surface(
    base: &SystemParams,
    drive_freq_axis: &AxisSpec,
    sigma2_axis: &AxisSpec,
    cell_cap: usize,
) -> Result<GainSurface> {
    base.validate()?;
    let cells = drive_freq_axis.points() * sigma2_axis.points();
    check_cell_cap(cells, cell_cap)?;
    let mut g = Vec::with_capacity(cells);
    let mut stationary = Vec::with_capacity(cells);
    let mut n_singular = 0usize;
    for drive_freq in drive_freq_axis.values() {
        for sigma2 in sigma2_axis.values() {
            let p = SystemParams {
                drive_freq,
                sigma: sigma2.sqrt(),
                ..*base
            };
            if !stability(&p)?.stationary {
                g.push(f64::NAN);
                stationary.push(false);
                continue;
            }
            stationary.push(true);
            match gain(&p) {
                Ok(b) => g.push(b.g),
                Err(Error::SingularGain) => {
                    g.push(f64::NAN);
                    n_singular += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(GainSurface {
        drive_freq_axis: *drive_freq_axis,
        sigma2_axis: *sigma2_axis,
        g,
        stationary,
        n_singular,
    })
}

/// How the parameter-space fraction showing a gain peak is sampled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sigma2Sampling {
    /// Uniform in `(0, stationarity bound)` of each sampled point — every
    /// sample is stationary by construction.
    UpToBound,
    /// Uniform in a fixed range; samples beyond the local bound count as
    /// nonstationary and drop out of the ratio.
    Range { min: f64, max: f64 },
}

/// Monte Carlo sampling spec for [`sr_ratio_vs_alpha`]. Ranges are
/// inclusive-exclusive uniform draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrRatioSpec {
    pub omega: (f64, f64),
    pub lambda: (f64, f64),
    pub drive_freq: (f64, f64),
    pub sigma2: Sigma2Sampling,
    pub samples_per_alpha: usize,
    pub seed: u64,
}

impl Default for SrRatioSpec {
    fn default() -> Self {
        Self {
            omega: (0.5, 2.0),
            lambda: (0.1, 5.0),
            drive_freq: (0.1, std::f64::consts::PI),
            sigma2: Sigma2Sampling::UpToBound,
            samples_per_alpha: 100_000,
            seed: 0,
        }
    }
}

impl SrRatioSpec {
    fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [
            ("omega", self.omega),
            ("lambda", self.lambda),
            ("Omega", self.drive_freq),
        ] {
            if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
                return Err(Error::InvalidParameter {
                    name,
                    message: format!("need 0 <= lo <= hi, got [{lo}, {hi}]"),
                });
            }
        }
        if let Sigma2Sampling::Range { min, max } = self.sigma2 {
            if !(min.is_finite() && max.is_finite() && 0.0 <= min && min <= max) {
                return Err(Error::InvalidParameter {
                    name: "sigma2",
                    message: format!("need 0 <= min <= max, got [{min}, {max}]"),
                });
            }
        }
        if self.samples_per_alpha == 0 {
            return Err(Error::InvalidParameter {
                name: "samples",
                message: "need at least one sample per alpha".into(),
            });
        }
        Ok(())
    }
}

/// Resonant fraction at one fractional order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrRatioRow {
    pub alpha: f64,
    /// Resonant fraction among stationary samples; `None` when no sample
    /// was stationary.
    pub ratio: Option<f64>,
    pub n_stationary: usize,
    pub n_total: usize,
}

/// For each order, draw random parameter points and report the fraction of
/// stationary points whose gain peaks at a positive noise variance.
/// Deterministic: order index `i` samples from stream `i` of the seed.
pub fn sr_ratio_vs_alpha(alphas: &[f64], spec: &SrRatioSpec) -> Result<Vec<SrRatioRow>> {
    spec.validate()?;
    let mut rows = Vec::with_capacity(alphas.len());
    for (i, &alpha) in alphas.iter().enumerate() {
        let order = FractionalOrder::new(alpha)?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(i as u64);
        let mut n_stationary = 0usize;
        let mut n_sr = 0usize;
        let uniform = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| {
            if lo == hi {
                lo
            } else {
                rng.random_range(lo..hi)
            }
        };
        for _ in 0..spec.samples_per_alpha {
            let omega = uniform(&mut rng, spec.omega);
            let lambda = uniform(&mut rng, spec.lambda);
            let drive_freq = uniform(&mut rng, spec.drive_freq);
            let bound = omega * omega + omega * lambda.powf(alpha);
            let sigma2 = match spec.sigma2 {
                Sigma2Sampling::UpToBound => {
                    if bound > 0.0 {
                        rng.random_range(0.0..bound)
                    } else {
                        // Degenerate point that can never be stationary.
                        1.0
                    }
                }
                Sigma2Sampling::Range { min, max } => uniform(&mut rng, (min, max)),
            };
            if sigma2 >= bound {
                continue;
            }
            n_stationary += 1;
            let p = SystemParams {
                alpha: order,
                omega,
                epsilon: 1.0,
                n_leaves: 1,
                drive_amp: 1.0,
                drive_freq,
                lambda,
                sigma: sigma2.sqrt(),
            };
            if sr_criterion(&p)?.sr_occurs {
                n_sr += 1;
            }
        }
        rows.push(SrRatioRow {
            alpha,
            ratio: (n_stationary > 0).then(|| n_sr as f64 / n_stationary as f64),
            n_stationary,
            n_total: spec.samples_per_alpha,
        });
    }
    Ok(rows)
}

/// Which parameter distinguishes the series of a response-curve family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VaryParam {
    Alpha,
    Omega,
    DriveFreq,
    Lambda,
}

impl VaryParam {
    fn apply(self, base: &SystemParams, value: f64) -> Result<SystemParams> {
        let mut p = *base;
        match self {
            Self::Alpha => p.alpha = FractionalOrder::new(value)?,
            Self::Omega => p.omega = value,
            Self::DriveFreq => p.drive_freq = value,
            Self::Lambda => p.lambda = value,
        }
        p.validate()?;
        Ok(p)
    }
}

/// One response curve: gain against `x` at a fixed series parameter value.
/// Points where the response does not exist (nonstationary or singular)
/// are simply absent.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub series_value: f64,
    pub x: Vec<f64>,
    pub g: Vec<f64>,
}

/// Gain against drive frequency, one curve per value of the varied
/// parameter (`Lambda` or `Alpha` — the frequency itself is the x-axis and
/// `omega` rescales the whole family, so only those two vary here).
pub fn bsr_curve(
    base: &SystemParams,
    drive_freq_axis: &AxisSpec,
    vary: VaryParam,
    values: &[f64],
) -> Result<Vec<Curve>> {
    if !matches!(vary, VaryParam::Lambda | VaryParam::Alpha) {
        return Err(Error::InvalidParameter {
            name: "vary",
            message: "frequency curves vary lambda or alpha".into(),
        });
    }
    base.validate()?;
    let mut curves = Vec::with_capacity(values.len());
    for &value in values {
        let pv = vary.apply(base, value)?;
        let mut x = Vec::new();
        let mut g = Vec::new();
        for drive_freq in drive_freq_axis.values() {
            let p = SystemParams { drive_freq, ..pv };
            if !stability(&p)?.stationary {
                continue;
            }
            match gain(&p) {
                Ok(b) => {
                    x.push(drive_freq);
                    g.push(b.g);
                }
                Err(Error::SingularGain) => continue,
                Err(e) => return Err(e),
            }
        }
        curves.push(Curve {
            series_value: value,
            x,
            g,
        });
    }
    Ok(curves)
}

/// Gain against noise amplitude, one curve per value of the varied
/// parameter; each curve is clipped to its own stationary range.
pub fn csr_curve(
    base: &SystemParams,
    sigma_axis: &AxisSpec,
    vary: VaryParam,
    values: &[f64],
) -> Result<Vec<Curve>> {
    base.validate()?;
    let mut curves = Vec::with_capacity(values.len());
    for &value in values {
        let pv = vary.apply(base, value)?;
        let mut x = Vec::new();
        let mut g = Vec::new();
        for sigma in sigma_axis.values() {
            let p = SystemParams { sigma, ..pv };
            if !stability(&p)?.stationary {
                continue;
            }
            match gain(&p) {
                Ok(b) => {
                    x.push(sigma);
                    g.push(b.g);
                }
                Err(Error::SingularGain) => continue,
                Err(e) => return Err(e),
            }
        }
        curves.push(Curve {
            series_value: value,
            x,
            g,
        });
    }
    Ok(curves)
}

/// Passage-time estimate at one network size. A failed estimate (any path
/// diverging, or every path censored) is recorded as text instead of
/// aborting the remaining sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct MfptRow {
    pub n_leaves: usize,
    pub estimate: Option<MfptEstimate>,
    pub failure: Option<String>,
}

/// Mean first-passage time to synchronization as a function of the leaf
/// count, all other parameters fixed.
pub fn mfpt_vs_n(
    base: &SystemParams,
    grid: &TimeGrid,
    n_values: &[usize],
    cfg: &McConfig,
    delta: f64,
    dwell: f64,
) -> Result<Vec<MfptRow>> {
    base.validate()?;
    cfg.validate()?;
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
    Ok(n_values
        .iter()
        .map(|&n_leaves| {
            let p = SystemParams { n_leaves, ..*base };
            match estimate_mfpt(&p, grid, cfg, delta, dwell) {
                Ok(est) => MfptRow {
                    n_leaves,
                    estimate: Some(est),
                    failure: None,
                },
                Err(e) => MfptRow {
                    n_leaves,
                    estimate: None,
                    failure: Some(e.to_string()),
                },
            }
        })
        .collect())
}
