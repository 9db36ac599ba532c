//! Command-line front end for the star-network toolkit.
//!
//! Every subcommand reads the same configuration surface (defaults, then
//! an optional `--config` file, then flags), echoes the effective values
//! to `manifest.txt` in the output directory, and either prints a short
//! report or writes a fixed-format CSV. Exit codes: 0 on success, 1 for
//! invalid input, 2 for a runtime failure.

mod config;

use clap::error::ErrorKind;
use clap::{Arg, Command};
use config::{defaults, Manifest, RunConfig};
use fracstar::monte_carlo::{estimate_mfpt, run_ensemble, InitSpec};
use fracstar::scan::{self, SrRatioSpec, VaryParam};
use fracstar::{analytics, csv};
use std::fs;
use std::fs::File;
use std::io::{BufWriter, Write as _};
use std::path::PathBuf;
use std::process::ExitCode;

/// The failure channel decides the exit code.
enum Failure {
    /// Bad configuration or parameters — exit 1.
    Usage(String),
    /// The computation itself failed — exit 2.
    Runtime(String),
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// Flatten an error with its source chain into one line.
fn describe(e: &fracstar::Error) -> String {
    use std::error::Error as _;
    let mut text = e.to_string();
    let mut source = e.source();
    while let Some(inner) = source {
        text.push_str(": ");
        text.push_str(&inner.to_string());
        source = inner.source();
    }
    text
}

/// Sort library errors into the two exit-code channels: parameter and
/// domain violations are the caller's input, everything else (divergent
/// integrations, censored ensembles, I/O) is a runtime failure.
fn route(e: fracstar::Error) -> Failure {
    match &e {
        fracstar::Error::InvalidParameter { .. }
        | fracstar::Error::Parse { .. }
        | fracstar::Error::Domain(_) => Failure::Usage(describe(&e)),
        _ => Failure::Runtime(describe(&e)),
    }
}

const COMMANDS: &[(&str, &str)] = &[
    (
        "gain",
        "Closed-form output gain and phase lag at the configured parameters",
    ),
    (
        "stability",
        "Stationarity and synchronization verdicts with margins",
    ),
    ("sr", "Does the gain peak at a reachable noise variance?"),
    (
        "simulate",
        "Monte Carlo ensemble with its closed-form reference; writes ensemble.csv",
    ),
    (
        "mfpt",
        "Mean first-passage time to synchronization at the configured size",
    ),
    (
        "scan-phase",
        "Classify the (lambda, sigma2) plane; writes phase.csv",
    ),
    (
        "scan-gain",
        "Gain over an (Omega, sigma2) grid; writes gain.csv",
    ),
    (
        "scan-sr-ratio",
        "Resonant fraction of random stationary systems per order; writes sr_ratio.csv",
    ),
    (
        "scan-bsr",
        "Gain vs drive frequency, one curve per series value; writes bsr.csv",
    ),
    (
        "scan-csr",
        "Gain vs noise amplitude, one curve per series value; writes csr.csv",
    ),
    ("scan-mfpt", "Passage time vs leaf count; writes mfpt.csv"),
];

fn key_help(key: &str) -> &'static str {
    match key {
        "alpha" => "derivative order in (0, 1]",
        "omega" => "natural frequency (squared term coefficient)",
        "epsilon" => "coupling strength",
        "N" => "number of leaf particles",
        "A0" => "drive amplitude",
        "Omega" => "drive frequency (accepts pi literals, e.g. 0.1pi)",
        "lambda" => "noise switching rate",
        "sigma" => "noise amplitude (alternative to sigma2)",
        "sigma2" => "noise variance (alternative to sigma)",
        "dt" => "integration step",
        "t_end" => "integration horizon",
        "paths" => "ensemble size",
        "seed" => "base RNG seed",
        "workers" => "worker threads (0 = library default pool)",
        "init" => "initial condition: \"normal\" or a shared position",
        "fit_window" => "final fraction of the horizon used by sinusoid fits",
        "delta" => "synchronization band half-width (default: 5% of response amplitude)",
        "dwell" => "time the band must hold before passage counts",
        "cell_cap" => "maximum scan grid cells",
        "lambda_min" => "scan: lambda axis lower bound",
        "lambda_max" => "scan: lambda axis upper bound",
        "lambda_cells" => "scan: lambda axis points",
        "sigma2_min" => "scan: sigma2 axis lower bound (with _max: fixed sampling range)",
        "sigma2_max" => "scan: sigma2 axis upper bound",
        "sigma2_cells" => "scan: sigma2 axis points",
        "Omega_min" => "scan: drive-frequency axis lower bound",
        "Omega_max" => "scan: drive-frequency axis upper bound",
        "Omega_cells" => "scan: drive-frequency axis points",
        "sigma_min" => "scan: noise-amplitude axis lower bound",
        "sigma_max" => "scan: noise-amplitude axis upper bound",
        "sigma_cells" => "scan: noise-amplitude axis points",
        "omega_min" => "scan: natural-frequency sampling lower bound",
        "omega_max" => "scan: natural-frequency sampling upper bound",
        "alphas" => "scan: comma-separated derivative orders",
        "samples" => "scan: random parameter draws per order",
        "vary" => "scan: series parameter (alpha, omega, Omega, or lambda)",
        "values" => "scan: comma-separated series values",
        "N_values" => "scan: comma-separated leaf counts",
        "out" => "output directory (created if absent)",
        _ => "",
    }
}

fn build_cli() -> Command {
    let mut cmd = Command::new("fracstar")
        .version(env!("CARGO_PKG_VERSION"))
        .about(
            "Star-coupled fractional oscillators under two-state noise: \
             closed-form reports, ensemble simulation, and CSV scans",
        )
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .global(true)
                .help("key = value configuration file ('#' starts a comment)"),
        );
    for &key in config::KEYS {
        cmd = cmd.arg(
            Arg::new(key)
                .long(key)
                .value_name("VALUE")
                .global(true)
                .help(key_help(key)),
        );
    }
    for &(name, about) in COMMANDS {
        cmd = cmd.subcommand(Command::new(name).about(about));
    }
    cmd
}

fn run() -> CliResult<()> {
    let matches = match build_cli().try_get_matches() {
        Ok(m) => m,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            e.print().ok();
            return Ok(());
        }
        Err(e) => return Err(Failure::Usage(e.to_string())),
    };
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let mut overrides: Vec<(&'static str, String)> = Vec::new();
    for &key in config::KEYS {
        if let Some(value) = sub.get_one::<String>(key) {
            overrides.push((key, value.clone()));
        }
    }
    let file = sub.get_one::<String>("config").map(PathBuf::from);
    let cfg = RunConfig::build(file.as_deref(), &overrides).map_err(Failure::Usage)?;
    fs::create_dir_all(&cfg.out)
        .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", cfg.out.display())))?;
    match name {
        "gain" => cmd_gain(&cfg),
        "stability" => cmd_stability(&cfg),
        "sr" => cmd_sr(&cfg),
        "simulate" => cmd_simulate(&cfg),
        "mfpt" => cmd_mfpt(&cfg),
        "scan-phase" => cmd_scan_phase(&cfg),
        "scan-gain" => cmd_scan_gain(&cfg),
        "scan-sr-ratio" => cmd_scan_sr_ratio(&cfg),
        "scan-bsr" => cmd_scan_bsr(&cfg),
        "scan-csr" => cmd_scan_csr(&cfg),
        "scan-mfpt" => cmd_scan_mfpt(&cfg),
        other => unreachable!("unknown subcommand {other}"),
    }
}

fn save_manifest(man: Manifest, cfg: &RunConfig) -> CliResult<()> {
    man.write(&cfg.out)
        .map_err(|e| Failure::Runtime(format!("cannot write manifest: {e}")))?;
    Ok(())
}

/// Create `<out>/<file>`, fill it through the writer closure, and flush.
fn save_csv(
    cfg: &RunConfig,
    file: &str,
    write: impl FnOnce(&mut BufWriter<File>) -> fracstar::Result<()>,
) -> CliResult<PathBuf> {
    let path = cfg.out.join(file);
    let handle = File::create(&path)
        .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", path.display())))?;
    let mut writer = BufWriter::new(handle);
    write(&mut writer).map_err(route)?;
    writer
        .flush()
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    Ok(path)
}

fn yes_no(flag: bool) -> &'static str {
    if flag {
        "yes"
    } else {
        "no"
    }
}

/// Round to 12 significant digits for summary lines, hiding the last-ulp
/// noise that squaring a stored noise amplitude introduces (for example
/// sigma2 = 1.5 has no representable square root whose square is exactly
/// 1.5, and a margin of 0.5 would otherwise print as 0.5000000000000002).
/// Data files are written at full precision; only the human-readable
/// report rounds.
fn fmt_short(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let magnitude = v.abs().log10().floor() as i32;
    let scale = 10f64.powi(11 - magnitude);
    format!("{}", (v * scale).round() / scale)
}

fn vary_name(vary: VaryParam) -> &'static str {
    match vary {
        VaryParam::Alpha => "alpha",
        VaryParam::Omega => "omega",
        VaryParam::DriveFreq => "Omega",
        VaryParam::Lambda => "lambda",
    }
}

fn cmd_gain(cfg: &RunConfig) -> CliResult<()> {
    let params = cfg.system_params().map_err(Failure::Usage)?;
    save_manifest(Manifest::new("gain", cfg), cfg)?;
    let b = analytics::gain(&params).map_err(route)?;
    println!("G = {:.6}, phi = {:.6}", b.g, b.phi);
    Ok(())
}

fn cmd_stability(cfg: &RunConfig) -> CliResult<()> {
    let params = cfg.system_params().map_err(Failure::Usage)?;
    save_manifest(Manifest::new("stability", cfg), cfg)?;
    let r = analytics::stability(&params).map_err(route)?;
    println!(
        "stationary: {} (margin {}); global sync: {}",
        yes_no(r.stationary),
        fmt_short(r.stationary_margin),
        yes_no(r.network_sync)
    );
    println!(
        "bounds: stationary sigma2 < {}, network sync sigma2 < {}, hub sync sigma2 < {}",
        fmt_short(r.stationary_bound),
        fmt_short(r.network_sync_bound),
        fmt_short(r.hub_sync_bound)
    );
    Ok(())
}

fn cmd_sr(cfg: &RunConfig) -> CliResult<()> {
    let params = cfg.system_params().map_err(Failure::Usage)?;
    save_manifest(Manifest::new("sr", cfg), cfg)?;
    let s = analytics::sr_criterion(&params).map_err(route)?;
    if s.sr_occurs {
        println!(
            "SR: yes — gain peaks at sigma2 = {:.6} (stationary while sigma2 < {:.6})",
            s.sigma_star_sq, s.stationary_bound
        );
    } else {
        println!(
            "SR: no — candidate peak sigma2 = {:.6} falls outside (0, {:.6})",
            s.sigma_star_sq, s.stationary_bound
        );
    }
    Ok(())
}

fn cmd_simulate(cfg: &RunConfig) -> CliResult<()> {
    let params = cfg.system_params().map_err(Failure::Usage)?;
    let grid = cfg.grid().map_err(Failure::Usage)?;
    let mc = cfg.mc_config();
    save_manifest(Manifest::new("simulate", cfg), cfg)?;
    let stats = run_ensemble(&params, &grid, &mc).map_err(route)?;
    let y1_start = match cfg.init {
        InitSpec::StandardNormal => 0.0,
        InitSpec::Identical(x) => x,
    };
    let oracle = analytics::moment_oracle(&params, &grid, y1_start, 0.0).map_err(route)?;
    let path = save_csv(cfg, "ensemble.csv", |w| {
        csv::write_ensemble(w, &stats, oracle.y1())
    })?;
    println!(
        "paths = {}, steps = {}, dt = {}",
        stats.n_paths(),
        grid.n_steps(),
        grid.dt()
    );
    match (stats.g_est(), analytics::gain(&params)) {
        (Some(g_est), Ok(b)) => println!(
            "G_est = {g_est:.6} (analytic G = {:.6}, phi = {:.6})",
            b.g, b.phi
        ),
        (Some(g_est), Err(_)) => println!("G_est = {g_est:.6}"),
        (None, _) => {}
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_mfpt(cfg: &RunConfig) -> CliResult<()> {
    let params = cfg.system_params().map_err(Failure::Usage)?;
    let grid = cfg.grid().map_err(Failure::Usage)?;
    let mc = cfg.mc_config();
    let delta = cfg.resolved_delta(&params);
    let mut man = Manifest::new("mfpt", cfg);
    man.num("delta", delta);
    man.num("dwell", cfg.dwell);
    save_manifest(man, cfg)?;
    let est = estimate_mfpt(&params, &grid, &mc, delta, cfg.dwell).map_err(route)?;
    println!(
        "MFPT = {:.6} +/- {:.6} over {} paths ({:.1}% censored)",
        est.mean,
        est.stderr,
        est.n_paths,
        100.0 * est.censored_fraction
    );
    println!("band half-width delta = {delta}, dwell = {}", cfg.dwell);
    Ok(())
}

fn cmd_scan_phase(cfg: &RunConfig) -> CliResult<()> {
    let params = cfg.system_params().map_err(Failure::Usage)?;
    let lambda_axis = cfg
        .lambda_axis(defaults::PHASE_LAMBDA)
        .map_err(Failure::Usage)?;
    let sigma2_axis = cfg
        .sigma2_axis(defaults::PHASE_SIGMA2)
        .map_err(Failure::Usage)?;
    let mut man = Manifest::new("scan-phase", cfg);
    man.axis(("lambda_min", "lambda_max", "lambda_cells"), &lambda_axis);
    man.axis(("sigma2_min", "sigma2_max", "sigma2_cells"), &sigma2_axis);
    save_manifest(man, cfg)?;
    let diagram =
        scan::phase_diagram(&params, &lambda_axis, &sigma2_axis, cfg.cell_cap).map_err(route)?;
    let path = save_csv(cfg, "phase.csv", |w| csv::write_phase_diagram(w, &diagram))?;
    let total = lambda_axis.points() * sigma2_axis.points();
    match diagram.sr_ratio() {
        Some(ratio) => println!(
            "{total} cells: {} stationary, {} resonant (ratio {ratio:.4})",
            diagram.n_stationary(),
            diagram.n_sr()
        ),
        None => println!("{total} cells: none stationary"),
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_scan_gain(cfg: &RunConfig) -> CliResult<()> {
    let params = cfg.system_params().map_err(Failure::Usage)?;
    let freq_axis = cfg
        .freq_axis(defaults::SURFACE_FREQ)
        .map_err(Failure::Usage)?;
    let sigma2_axis = cfg
        .sigma2_axis(defaults::SURFACE_SIGMA2)
        .map_err(Failure::Usage)?;
    let mut man = Manifest::new("scan-gain", cfg);
    man.axis(("Omega_min", "Omega_max", "Omega_cells"), &freq_axis);
    man.axis(("sigma2_min", "sigma2_max", "sigma2_cells"), &sigma2_axis);
    save_manifest(man, cfg)?;
    let surface =
        scan::gain_surface(&params, &freq_axis, &sigma2_axis, cfg.cell_cap).map_err(route)?;
    let path = save_csv(cfg, "gain.csv", |w| csv::write_gain_surface(w, &surface))?;
    let stationary = surface.stationary().iter().filter(|s| **s).count();
    println!(
        "{} cells: {stationary} stationary, {} singular",
        surface.stationary().len(),
        surface.n_singular()
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_scan_sr_ratio(cfg: &RunConfig) -> CliResult<()> {
    let omega = cfg
        .range("omega", cfg.omega_bounds, defaults::RATIO_OMEGA)
        .map_err(Failure::Usage)?;
    let lambda = cfg
        .range("lambda", cfg.lambda_bounds, defaults::RATIO_LAMBDA)
        .map_err(Failure::Usage)?;
    let drive_freq = cfg
        .range("Omega", cfg.freq_bounds, defaults::RATIO_FREQ)
        .map_err(Failure::Usage)?;
    let sigma2 = cfg.sigma2_sampling().map_err(Failure::Usage)?;
    let samples = cfg.samples.unwrap_or(defaults::RATIO_SAMPLES);
    let alphas = cfg
        .alphas
        .clone()
        .unwrap_or_else(|| defaults::RATIO_ALPHAS.to_vec());
    let spec = SrRatioSpec {
        omega,
        lambda,
        drive_freq,
        sigma2,
        samples_per_alpha: samples,
        seed: cfg.seed,
    };
    let mut man = Manifest::new("scan-sr-ratio", cfg);
    man.num("omega_min", omega.0);
    man.num("omega_max", omega.1);
    man.num("lambda_min", lambda.0);
    man.num("lambda_max", lambda.1);
    man.num("Omega_min", drive_freq.0);
    man.num("Omega_max", drive_freq.1);
    if let scan::Sigma2Sampling::Range { min, max } = sigma2 {
        man.num("sigma2_min", min);
        man.num("sigma2_max", max);
    }
    man.num_list("alphas", &alphas);
    man.int("samples", samples);
    save_manifest(man, cfg)?;
    let rows = scan::sr_ratio_vs_alpha(&alphas, &spec).map_err(route)?;
    let path = save_csv(cfg, "sr_ratio.csv", |w| {
        csv::write_sr_ratio(w, rows.clone())
    })?;
    let mut defined = Vec::new();
    for row in &rows {
        match row.ratio {
            Some(ratio) => {
                defined.push(ratio);
                println!(
                    "alpha {}: ratio {ratio:.4} ({} stationary of {})",
                    row.alpha, row.n_stationary, row.n_total
                );
            }
            None => println!(
                "alpha {}: undefined (0 stationary of {})",
                row.alpha, row.n_total
            ),
        }
    }
    if !defined.is_empty() {
        println!(
            "mean ratio {:.4}",
            defined.iter().sum::<f64>() / defined.len() as f64
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_scan_bsr(cfg: &RunConfig) -> CliResult<()> {
    let params = cfg.system_params().map_err(Failure::Usage)?;
    let freq_axis = cfg.freq_axis(defaults::BSR_FREQ).map_err(Failure::Usage)?;
    let vary = cfg.vary.unwrap_or(VaryParam::Lambda);
    let values = cfg
        .values
        .clone()
        .unwrap_or_else(|| defaults::BSR_LAMBDAS.to_vec());
    let mut man = Manifest::new("scan-bsr", cfg);
    man.axis(("Omega_min", "Omega_max", "Omega_cells"), &freq_axis);
    man.push("vary", vary_name(vary).to_string());
    man.num_list("values", &values);
    save_manifest(man, cfg)?;
    let curves = scan::bsr_curve(&params, &freq_axis, vary, &values).map_err(route)?;
    let path = save_csv(cfg, "bsr.csv", |w| csv::write_curves(w, &curves))?;
    for curve in &curves {
        println!(
            "{} = {}: {} of {} grid points stationary",
            vary_name(vary),
            curve.series_value,
            curve.x.len(),
            freq_axis.points()
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_scan_csr(cfg: &RunConfig) -> CliResult<()> {
    let params = cfg.system_params().map_err(Failure::Usage)?;
    let sigma_axis = cfg
        .sigma_axis(defaults::CSR_SIGMA)
        .map_err(Failure::Usage)?;
    let vary = cfg.vary.unwrap_or(VaryParam::Omega);
    let values = cfg
        .values
        .clone()
        .unwrap_or_else(|| defaults::CSR_OMEGAS.to_vec());
    let mut man = Manifest::new("scan-csr", cfg);
    man.axis(("sigma_min", "sigma_max", "sigma_cells"), &sigma_axis);
    man.push("vary", vary_name(vary).to_string());
    man.num_list("values", &values);
    save_manifest(man, cfg)?;
    let curves = scan::csr_curve(&params, &sigma_axis, vary, &values).map_err(route)?;
    let path = save_csv(cfg, "csr.csv", |w| csv::write_curves(w, &curves))?;
    for curve in &curves {
        println!(
            "{} = {}: {} of {} grid points inside the stationary range",
            vary_name(vary),
            curve.series_value,
            curve.x.len(),
            sigma_axis.points()
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_scan_mfpt(cfg: &RunConfig) -> CliResult<()> {
    let params = cfg.system_params().map_err(Failure::Usage)?;
    let grid = cfg.grid().map_err(Failure::Usage)?;
    let mc = cfg.mc_config();
    let delta = cfg.resolved_delta(&params);
    let n_values = cfg
        .n_values
        .clone()
        .unwrap_or_else(|| defaults::MFPT_N.to_vec());
    let mut man = Manifest::new("scan-mfpt", cfg);
    man.num("delta", delta);
    man.num("dwell", cfg.dwell);
    man.int_list("N_values", &n_values);
    save_manifest(man, cfg)?;
    let rows = scan::mfpt_vs_n(&params, &grid, &n_values, &mc, delta, cfg.dwell).map_err(route)?;
    let path = save_csv(cfg, "mfpt.csv", |w| csv::write_mfpt(w, &rows))?;
    for row in &rows {
        match (&row.estimate, &row.failure) {
            (Some(est), _) => println!(
                "N = {}: MFPT {:.4} +/- {:.4} ({:.1}% censored)",
                row.n_leaves,
                est.mean,
                est.stderr,
                100.0 * est.censored_fraction
            ),
            (None, Some(reason)) => println!("N = {}: failed — {reason}", row.n_leaves),
            (None, None) => println!("N = {}: no estimate", row.n_leaves),
        }
    }
    println!("wrote {}", path.display());
    Ok(())
}
