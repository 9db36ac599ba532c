//! Run configuration: `key = value` files, flag overrides, and run
//! manifests.
//!
//! A configuration is assembled in three layers — built-in defaults, an
//! optional config file, then command-line flags — and every run echoes
//! its effective values to `manifest.txt` in the output directory. The
//! manifest uses the same `key = value` syntax, so a finished run can be
//! replayed exactly with `--config <out>/manifest.txt`.
//!
//! Numbers accept `pi` and `<number>pi` literals (`Omega = 0.1pi`).
//! The noise strength may be given as amplitude `sigma` or variance
//! `sigma2`; supplying both is an error unless they agree, in which case
//! the amplitude bits win (that exception is what makes manifests, which
//! record both spellings, reloadable).

use fracstar::monte_carlo::{InitSpec, McConfig};
use fracstar::scan::{AxisSpec, Sigma2Sampling, VaryParam};
use fracstar::solver::{FractionalOrder, TimeGrid};
use fracstar::system::SystemParams;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

/// Every recognized configuration key, in manifest order.
#[rustfmt::skip]
pub const KEYS: &[&str] = &[
    // system parameters
    "alpha", "omega", "epsilon", "N", "A0", "Omega", "lambda", "sigma", "sigma2",
    // integration and ensemble controls
    "dt", "t_end", "paths", "seed", "workers", "init", "fit_window",
    // passage-time controls
    "delta", "dwell",
    // scan controls
    "cell_cap", "lambda_min", "lambda_max", "lambda_cells", "sigma2_min",
    "sigma2_max", "sigma2_cells", "Omega_min", "Omega_max", "Omega_cells",
    "sigma_min", "sigma_max", "sigma_cells", "omega_min", "omega_max",
    "alphas", "samples", "vary", "values", "N_values",
    // output
    "out",
];

/// Fallback grid bounds and series lists, used whenever the corresponding
/// keys are absent. Each command resolves only the keys it consumes and
/// records the resolved values in its manifest.
pub mod defaults {
    use std::f64::consts::PI;

    /// Regime-map lambda axis `(min, max, cells)`.
    pub const PHASE_LAMBDA: (f64, f64, usize) = (0.01, 5.0, 200);
    /// Regime-map noise-variance axis.
    pub const PHASE_SIGMA2: (f64, f64, usize) = (0.01, 8.0, 200);
    /// Gain-surface drive-frequency axis.
    pub const SURFACE_FREQ: (f64, f64, usize) = (0.05, PI, 120);
    /// Gain-surface noise-variance axis.
    pub const SURFACE_SIGMA2: (f64, f64, usize) = (0.01, 8.0, 200);
    /// Frequency-response x-axis.
    pub const BSR_FREQ: (f64, f64, usize) = (0.05, PI, 200);
    /// Noise-response x-axis (amplitude, not variance).
    pub const CSR_SIGMA: (f64, f64, usize) = (0.0, 3.0, 200);
    /// Resonant-fraction sampling ranges.
    pub const RATIO_OMEGA: (f64, f64) = (0.5, 2.0);
    pub const RATIO_LAMBDA: (f64, f64) = (0.1, 5.0);
    pub const RATIO_FREQ: (f64, f64) = (0.1, PI);
    pub const RATIO_SAMPLES: usize = 100_000;
    pub const RATIO_ALPHAS: [f64; 8] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8];
    /// Correlation-rate series for frequency-response families.
    pub const BSR_LAMBDAS: [f64; 4] = [0.1, 0.5, 1.0, 2.0];
    /// Natural-frequency series for noise-response families.
    pub const CSR_OMEGAS: [f64; 3] = [1.0, 2.0, 3.0];
    /// Leaf counts for passage-time tables.
    pub const MFPT_N: [usize; 12] = [2, 3, 4, 5, 6, 8, 10, 12, 14, 16, 18, 20];
    /// Grid-size guard for exhaustive scans.
    pub const CELL_CAP: usize = 1_000_000;
}

/// Parse a floating-point literal, accepting `pi` and `<number>pi`.
pub fn parse_number(text: &str) -> Option<f64> {
    let s = text.trim();
    if s == "pi" {
        return Some(PI);
    }
    if let Some(prefix) = s.strip_suffix("pi") {
        return prefix.trim().parse::<f64>().ok().map(|v| v * PI);
    }
    s.parse().ok()
}

fn bad(key: &str, value: &str, want: &str) -> String {
    format!("invalid {key}: expected {want}, got {value:?}")
}

/// Validated, fully-merged run configuration. Axis bounds and series
/// lists stay optional here; each command resolves them against its own
/// defaults.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub alpha: f64,
    pub omega: f64,
    pub epsilon: f64,
    pub n_leaves: usize,
    pub drive_amp: f64,
    pub drive_freq: f64,
    pub lambda: f64,
    /// Noise amplitude — the authoritative bits; `sigma2` is derived.
    pub sigma: f64,
    pub dt: f64,
    pub t_end: f64,
    pub paths: usize,
    pub seed: u64,
    pub workers: usize,
    pub init: InitSpec,
    pub fit_window: f64,
    pub delta: Option<f64>,
    pub dwell: f64,
    pub cell_cap: usize,
    pub lambda_bounds: (Option<f64>, Option<f64>),
    pub lambda_cells: Option<usize>,
    pub sigma2_bounds: (Option<f64>, Option<f64>),
    pub sigma2_cells: Option<usize>,
    pub freq_bounds: (Option<f64>, Option<f64>),
    pub freq_cells: Option<usize>,
    pub sigma_bounds: (Option<f64>, Option<f64>),
    pub sigma_cells: Option<usize>,
    pub omega_bounds: (Option<f64>, Option<f64>),
    pub alphas: Option<Vec<f64>>,
    pub samples: Option<usize>,
    pub vary: Option<VaryParam>,
    pub values: Option<Vec<f64>>,
    pub n_values: Option<Vec<usize>>,
    pub out: PathBuf,
}

impl RunConfig {
    /// Merge an optional config file with flag overrides and validate.
    pub fn build(
        file: Option<&Path>,
        overrides: &[(&'static str, String)],
    ) -> Result<Self, String> {
        let mut raw: BTreeMap<&'static str, String> = BTreeMap::new();
        if let Some(path) = file {
            let text = fs::read_to_string(path)
                .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
            for (idx, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    format!(
                        "{}:{}: expected \"key = value\", got {line:?}",
                        path.display(),
                        idx + 1
                    )
                })?;
                let key = key.trim();
                let key = *KEYS.iter().find(|k| **k == key).ok_or_else(|| {
                    format!("{}:{}: unknown key {key:?}", path.display(), idx + 1)
                })?;
                raw.insert(key, value.trim().to_string());
            }
        }
        // A flag that sets either noise spelling supersedes both file
        // spellings; otherwise a manifest could never be rerun with a
        // different noise level.
        if overrides
            .iter()
            .any(|(k, _)| *k == "sigma" || *k == "sigma2")
        {
            raw.remove("sigma");
            raw.remove("sigma2");
        }
        for (key, value) in overrides {
            raw.insert(key, value.clone());
        }
        Self::from_raw(&raw)
    }

    fn from_raw(raw: &BTreeMap<&'static str, String>) -> Result<Self, String> {
        let get = |key: &str| raw.get(key).map(|v| v.as_str());
        let num = |key: &'static str| -> Result<Option<f64>, String> {
            get(key)
                .map(|v| parse_number(v).ok_or_else(|| bad(key, v, "a number")))
                .transpose()
        };
        let int = |key: &'static str| -> Result<Option<usize>, String> {
            get(key)
                .map(|v| v.parse().map_err(|_| bad(key, v, "a non-negative integer")))
                .transpose()
        };

        let (sigma, _sigma2) = resolve_noise(get("sigma"), get("sigma2"))?;

        let init = match get("init") {
            None => InitSpec::StandardNormal,
            Some("normal") => InitSpec::StandardNormal,
            Some(v) => InitSpec::Identical(
                parse_number(v).ok_or_else(|| bad("init", v, "\"normal\" or a number"))?,
            ),
        };
        let vary = match get("vary") {
            None => None,
            Some("alpha") => Some(VaryParam::Alpha),
            Some("omega") => Some(VaryParam::Omega),
            Some("Omega") => Some(VaryParam::DriveFreq),
            Some("lambda") => Some(VaryParam::Lambda),
            Some(v) => return Err(bad("vary", v, "one of alpha, omega, Omega, lambda")),
        };
        let num_list = |key: &'static str| -> Result<Option<Vec<f64>>, String> {
            get(key)
                .map(|v| {
                    v.split(',')
                        .map(|item| {
                            parse_number(item).ok_or_else(|| bad(key, v, "comma-separated numbers"))
                        })
                        .collect()
                })
                .transpose()
        };
        let n_values = get("N_values")
            .map(|v| {
                v.split(',')
                    .map(|item| {
                        item.trim()
                            .parse()
                            .map_err(|_| bad("N_values", v, "comma-separated integers"))
                    })
                    .collect::<Result<Vec<usize>, String>>()
            })
            .transpose()?;

        let cfg = Self {
            alpha: num("alpha")?.unwrap_or(0.9),
            omega: num("omega")?.unwrap_or(1.0),
            epsilon: num("epsilon")?.unwrap_or(1.0),
            n_leaves: int("N")?.unwrap_or(10),
            drive_amp: num("A0")?.unwrap_or(1.0),
            drive_freq: num("Omega")?.unwrap_or(PI),
            lambda: num("lambda")?.unwrap_or(1.0),
            sigma,
            dt: num("dt")?.unwrap_or(0.01),
            t_end: num("t_end")?.unwrap_or(15.0),
            paths: int("paths")?.unwrap_or(3000),
            seed: get("seed")
                .map(|v| {
                    v.parse()
                        .map_err(|_| bad("seed", v, "a non-negative integer"))
                })
                .transpose()?
                .unwrap_or(42),
            workers: int("workers")?.unwrap_or(0),
            init,
            fit_window: num("fit_window")?.unwrap_or(0.3),
            delta: num("delta")?,
            dwell: num("dwell")?.unwrap_or(1.0),
            cell_cap: int("cell_cap")?.unwrap_or(defaults::CELL_CAP),
            lambda_bounds: (num("lambda_min")?, num("lambda_max")?),
            lambda_cells: int("lambda_cells")?,
            sigma2_bounds: (num("sigma2_min")?, num("sigma2_max")?),
            sigma2_cells: int("sigma2_cells")?,
            freq_bounds: (num("Omega_min")?, num("Omega_max")?),
            freq_cells: int("Omega_cells")?,
            sigma_bounds: (num("sigma_min")?, num("sigma_max")?),
            sigma_cells: int("sigma_cells")?,
            omega_bounds: (num("omega_min")?, num("omega_max")?),
            alphas: num_list("alphas")?,
            samples: int("samples")?,
            vary,
            values: num_list("values")?,
            n_values,
            out: PathBuf::from(get("out").unwrap_or("out")),
        };
        // Fail before dispatch on the system-parameter invariants so every
        // command reports them identically.
        cfg.system_params()?;
        if !(cfg.dt.is_finite() && cfg.dt > 0.0) {
            return Err(format!("invalid dt: must be positive, got {}", cfg.dt));
        }
        if !(cfg.t_end.is_finite() && cfg.t_end > 0.0) {
            return Err(format!(
                "invalid t_end: must be positive, got {}",
                cfg.t_end
            ));
        }
        Ok(cfg)
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma * self.sigma
    }

    /// System parameters carried by this configuration.
    pub fn system_params(&self) -> Result<SystemParams, String> {
        let params = SystemParams {
            alpha: FractionalOrder::new(self.alpha).map_err(|e| e.to_string())?,
            omega: self.omega,
            epsilon: self.epsilon,
            n_leaves: self.n_leaves,
            drive_amp: self.drive_amp,
            drive_freq: self.drive_freq,
            lambda: self.lambda,
            sigma: self.sigma,
        };
        params.validate().map_err(|e| e.to_string())?;
        Ok(params)
    }

    pub fn grid(&self) -> Result<TimeGrid, String> {
        TimeGrid::from_horizon(self.dt, self.t_end).map_err(|e| e.to_string())
    }

    pub fn mc_config(&self) -> McConfig {
        let mut mc = McConfig::new(self.paths, self.seed);
        mc.workers = self.workers;
        mc.init = self.init;
        mc.fit_window = self.fit_window;
        mc
    }

    /// Synchronization band half-width: the configured value, or 5% of the
    /// stationary response amplitude (at least 5% of unity) when unset.
    pub fn resolved_delta(&self, params: &SystemParams) -> f64 {
        if let Some(d) = self.delta {
            return d;
        }
        let amplitude = fracstar::analytics::gain(params)
            .map(|b| b.a1)
            .unwrap_or(self.drive_amp);
        0.05 * amplitude.max(1.0)
    }

    fn axis(
        &self,
        key: &str,
        bounds: (Option<f64>, Option<f64>),
        cells: Option<usize>,
        fallback: (f64, f64, usize),
    ) -> Result<AxisSpec, String> {
        let min = bounds.0.unwrap_or(fallback.0);
        let max = bounds.1.unwrap_or(fallback.1);
        let n = cells.unwrap_or(fallback.2);
        AxisSpec::new(min, max, n).map_err(|e| format!("{key} axis: {e}"))
    }

    pub fn lambda_axis(&self, fallback: (f64, f64, usize)) -> Result<AxisSpec, String> {
        self.axis("lambda", self.lambda_bounds, self.lambda_cells, fallback)
    }

    pub fn sigma2_axis(&self, fallback: (f64, f64, usize)) -> Result<AxisSpec, String> {
        self.axis("sigma2", self.sigma2_bounds, self.sigma2_cells, fallback)
    }

    pub fn freq_axis(&self, fallback: (f64, f64, usize)) -> Result<AxisSpec, String> {
        self.axis("Omega", self.freq_bounds, self.freq_cells, fallback)
    }

    pub fn sigma_axis(&self, fallback: (f64, f64, usize)) -> Result<AxisSpec, String> {
        self.axis("sigma", self.sigma_bounds, self.sigma_cells, fallback)
    }

    /// Uniform sampling range for the resonant-fraction scan.
    pub fn range(
        &self,
        key: &str,
        bounds: (Option<f64>, Option<f64>),
        fallback: (f64, f64),
    ) -> Result<(f64, f64), String> {
        let lo = bounds.0.unwrap_or(fallback.0);
        let hi = bounds.1.unwrap_or(fallback.1);
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(format!(
                "invalid {key} range: need min < max, got [{lo}, {hi}]"
            ));
        }
        Ok((lo, hi))
    }

    /// Noise-variance sampling mode: a fixed range when both bounds are
    /// given, otherwise up to each point's stationarity bound.
    pub fn sigma2_sampling(&self) -> Result<Sigma2Sampling, String> {
        match self.sigma2_bounds {
            (None, None) => Ok(Sigma2Sampling::UpToBound),
            (Some(min), Some(max)) => Ok(Sigma2Sampling::Range { min, max }),
            _ => Err(
                "invalid sigma2 range: set both sigma2_min and sigma2_max (or neither)".to_string(),
            ),
        }
    }
}

/// Apply the sigma/sigma2 exclusivity rule. Flag-level values already
/// superseded file-level ones; what remains is either one spelling, or
/// both from the same layer (a reloaded manifest) which must agree.
fn resolve_noise(sigma: Option<&str>, sigma2: Option<&str>) -> Result<(f64, f64), String> {
    let parse = |key: &'static str, v: &str| -> Result<f64, String> {
        let x = parse_number(v).ok_or_else(|| bad(key, v, "a number"))?;
        if !(x.is_finite() && x >= 0.0) {
            return Err(format!("invalid {key}: must be finite and >= 0, got {x}"));
        }
        Ok(x)
    };
    match (sigma, sigma2) {
        (None, None) => Ok((1.5f64.sqrt(), 1.5)),
        (Some(v), None) => {
            let s = parse("sigma", v)?;
            Ok((s, s * s))
        }
        (None, Some(v)) => {
            let s2 = parse("sigma2", v)?;
            Ok((s2.sqrt(), s2))
        }
        (Some(vs), Some(vs2)) => {
            let s = parse("sigma", vs)?;
            let s2 = parse("sigma2", vs2)?;
            if (s * s - s2).abs() <= 1e-9 * s2.abs().max(1.0) {
                // Consistent pair (a reloaded manifest): amplitude wins.
                Ok((s, s * s))
            } else {
                Err(format!(
                    "set exactly one of sigma and sigma2: sigma = {vs} implies \
                     sigma2 = {}, but sigma2 = {vs2}",
                    s * s
                ))
            }
        }
    }
}

/// Ordered `key = value` echo of one run's effective configuration.
pub struct Manifest {
    command: String,
    entries: Vec<(&'static str, String)>,
}

impl Manifest {
    /// Start a manifest carrying the keys every command shares.
    pub fn new(command: &str, cfg: &RunConfig) -> Self {
        let mut m = Self {
            command: command.to_string(),
            entries: Vec::new(),
        };
        m.num("alpha", cfg.alpha);
        m.num("omega", cfg.omega);
        m.num("epsilon", cfg.epsilon);
        m.int("N", cfg.n_leaves);
        m.num("A0", cfg.drive_amp);
        m.num("Omega", cfg.drive_freq);
        m.num("lambda", cfg.lambda);
        m.num("sigma", cfg.sigma);
        m.num("sigma2", cfg.sigma2());
        m.num("dt", cfg.dt);
        m.num("t_end", cfg.t_end);
        m.int("paths", cfg.paths);
        m.push("seed", cfg.seed.to_string());
        m.int("workers", cfg.workers);
        m.push(
            "init",
            match cfg.init {
                InitSpec::StandardNormal => "normal".to_string(),
                InitSpec::Identical(x) => format!("{x}"),
            },
        );
        m.num("fit_window", cfg.fit_window);
        m.int("cell_cap", cfg.cell_cap);
        m.push("out", cfg.out.display().to_string());
        m
    }

    pub fn push(&mut self, key: &'static str, value: String) {
        debug_assert!(KEYS.contains(&key), "manifest key {key:?} not recognized");
        self.entries.push((key, value));
    }

    pub fn num(&mut self, key: &'static str, value: f64) {
        self.push(key, format!("{value}"));
    }

    pub fn int(&mut self, key: &'static str, value: usize) {
        self.push(key, value.to_string());
    }

    pub fn axis(&mut self, keys: (&'static str, &'static str, &'static str), ax: &AxisSpec) {
        self.num(keys.0, ax.min());
        self.num(keys.1, ax.max());
        self.int(keys.2, ax.points());
    }

    pub fn num_list(&mut self, key: &'static str, values: &[f64]) {
        let joined: Vec<String> = values.iter().map(|v| format!("{v}")).collect();
        self.push(key, joined.join(","));
    }

    pub fn int_list(&mut self, key: &'static str, values: &[usize]) {
        let joined: Vec<String> = values.iter().map(|v| v.to_string()).collect();
        self.push(key, joined.join(","));
    }

    /// Render the manifest; the result parses as a config file.
    pub fn render(&self) -> String {
        let mut text = String::from("# fracstar run manifest\n");
        text.push_str(&format!("# command: {}\n", self.command));
        for (key, value) in &self.entries {
            text.push_str(&format!("{key} = {value}\n"));
        }
        text
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<PathBuf> {
        let path = dir.join("manifest.txt");
        fs::write(&path, self.render())?;
        Ok(path)
    }
}
