//! Fixed-format CSV serialization for scan products.
//!
//! Each product has a pinned header and column order, so downstream
//! tooling can rely on the exact layout. Floating-point cells use Rust's
//! shortest round-trip formatting: writing, re-reading, and writing again
//! reproduces the file byte for byte (including `NaN` markers for cells
//! that carry no value — nonstationary gain cells, undefined ratios,
//! failed passage-time rows).

use crate::error::{Error, Result};
use crate::monte_carlo::EnsembleStats;
use crate::scan::{Curve, GainSurface, MfptRow, PhaseDiagram, RegimeClass, SrRatioRow};
use std::io::{BufRead, Write};

pub const PHASE_HEADER: &str = "lambda,sigma2,class";
pub const GAIN_HEADER: &str = "Omega,sigma2,G,stationary";
pub const SR_RATIO_HEADER: &str = "alpha,ratio,n_stationary,n_total";
pub const CURVE_HEADER: &str = "x,G,series_id";
pub const MFPT_HEADER: &str = "N,mfpt_mean,mfpt_stderr,censored_fraction,n_paths";
pub const ENSEMBLE_HEADER: &str = "t,mean_S,theory_S,mean_absdev";

fn io_err(e: std::io::Error) -> Error {
    Error::Io(e)
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_f64(field: &str, line: usize) -> Result<f64> {
    field
        .parse()
        .map_err(|_| parse_error(line, format!("bad number {field:?}")))
}

fn parse_usize(field: &str, line: usize) -> Result<usize> {
    field
        .parse()
        .map_err(|_| parse_error(line, format!("bad count {field:?}")))
}

fn parse_bool(field: &str, line: usize) -> Result<bool> {
    match field {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(parse_error(line, format!("bad boolean {other:?}"))),
    }
}

/// Split a data line into exactly `n` comma-separated fields.
fn fields(line: &str, n: usize, line_no: usize) -> Result<Vec<&str>> {
    let parts: Vec<&str> = line.split(',').collect();
    if parts.len() != n {
        return Err(parse_error(
            line_no,
            format!("expected {n} fields, found {}", parts.len()),
        ));
    }
    Ok(parts)
}

/// Iterate over data lines, checking the header first. Yields
/// `(1-based line number, line)`.
fn data_lines<R: BufRead>(
    reader: R,
    header: &'static str,
) -> impl Iterator<Item = Result<(usize, String)>> {
    let mut lines = reader.lines().enumerate();
    let mut header_checked = false;
    std::iter::from_fn(move || loop {
        let (idx, line) = match lines.next() {
            Some((idx, Ok(line))) => (idx, line),
            Some((_, Err(e))) => return Some(Err(io_err(e))),
            None => {
                if !header_checked {
                    header_checked = true;
                    return Some(Err(parse_error(1, format!("missing header {header:?}"))));
                }
                return None;
            }
        };
        if !header_checked {
            header_checked = true;
            if line != header {
                return Some(Err(parse_error(
                    1,
                    format!("expected header {header:?}, found {line:?}"),
                )));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        return Some(Ok((idx + 1, line)));
    })
}

/// One `(lambda, sigma^2)` cell of a phase diagram.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseRow {
    pub lambda: f64,
    pub sigma2: f64,
    pub class: RegimeClass,
}

/// Cells of a phase diagram in file order (lambda-major).
pub fn phase_rows(diagram: &PhaseDiagram) -> impl Iterator<Item = PhaseRow> + '_ {
    diagram
        .lambda_axis()
        .values()
        .enumerate()
        .flat_map(move |(i, lambda)| {
            diagram
                .sigma2_axis()
                .values()
                .enumerate()
                .map(move |(j, sigma2)| PhaseRow {
                    lambda,
                    sigma2,
                    class: diagram.class_at(i, j),
                })
        })
}

pub fn write_phase_rows<W: Write>(
    mut w: W,
    rows: impl IntoIterator<Item = PhaseRow>,
) -> Result<()> {
    writeln!(w, "{PHASE_HEADER}").map_err(io_err)?;
    for r in rows {
        writeln!(w, "{},{},{}", r.lambda, r.sigma2, r.class.code()).map_err(io_err)?;
    }
    Ok(())
}

pub fn write_phase_diagram<W: Write>(w: W, diagram: &PhaseDiagram) -> Result<()> {
    write_phase_rows(w, phase_rows(diagram))
}

pub fn read_phase_rows<R: BufRead>(reader: R) -> Result<Vec<PhaseRow>> {
    data_lines(reader, PHASE_HEADER)
        .map(|entry| {
            let (line_no, line) = entry?;
            let f = fields(&line, 3, line_no)?;
            let code: u8 = f[2]
                .parse()
                .map_err(|_| parse_error(line_no, format!("bad class {:?}", f[2])))?;
            Ok(PhaseRow {
                lambda: parse_f64(f[0], line_no)?,
                sigma2: parse_f64(f[1], line_no)?,
                class: RegimeClass::from_code(code)
                    .map_err(|e| parse_error(line_no, e.to_string()))?,
            })
        })
        .collect()
}

/// One `(W, sigma^2)` cell of a gain surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainRow {
    pub drive_freq: f64,
    pub sigma2: f64,
    pub g: f64,
    pub stationary: bool,
}

/// Cells of a gain surface in file order (frequency-major).
pub fn gain_rows(surface: &GainSurface) -> impl Iterator<Item = GainRow> + '_ {
    surface
        .drive_freq_axis()
        .values()
        .enumerate()
        .flat_map(move |(i, drive_freq)| {
            surface
                .sigma2_axis()
                .values()
                .enumerate()
                .map(move |(j, sigma2)| GainRow {
                    drive_freq,
                    sigma2,
                    g: surface.g_at(i, j),
                    stationary: surface.stationary()[i * surface.sigma2_axis().points() + j],
                })
        })
}

pub fn write_gain_rows<W: Write>(mut w: W, rows: impl IntoIterator<Item = GainRow>) -> Result<()> {
    writeln!(w, "{GAIN_HEADER}").map_err(io_err)?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.drive_freq, r.sigma2, r.g, r.stationary).map_err(io_err)?;
    }
    Ok(())
}

pub fn write_gain_surface<W: Write>(w: W, surface: &GainSurface) -> Result<()> {
    write_gain_rows(w, gain_rows(surface))
}

pub fn read_gain_rows<R: BufRead>(reader: R) -> Result<Vec<GainRow>> {
    data_lines(reader, GAIN_HEADER)
        .map(|entry| {
            let (line_no, line) = entry?;
            let f = fields(&line, 4, line_no)?;
            Ok(GainRow {
                drive_freq: parse_f64(f[0], line_no)?,
                sigma2: parse_f64(f[1], line_no)?,
                g: parse_f64(f[2], line_no)?,
                stationary: parse_bool(f[3], line_no)?,
            })
        })
        .collect()
}

pub fn write_sr_ratio<W: Write>(
    mut w: W,
    rows: impl IntoIterator<Item = SrRatioRow>,
) -> Result<()> {
    writeln!(w, "{SR_RATIO_HEADER}").map_err(io_err)?;
    for r in rows {
        // An undefined ratio (no stationary samples) is stored as NaN.
        writeln!(
            w,
            "{},{},{},{}",
            r.alpha,
            r.ratio.unwrap_or(f64::NAN),
            r.n_stationary,
            r.n_total
        )
        .map_err(io_err)?;
    }
    Ok(())
}

pub fn read_sr_ratio<R: BufRead>(reader: R) -> Result<Vec<SrRatioRow>> {
    data_lines(reader, SR_RATIO_HEADER)
        .map(|entry| {
            let (line_no, line) = entry?;
            let f = fields(&line, 4, line_no)?;
            let ratio = parse_f64(f[1], line_no)?;
            Ok(SrRatioRow {
                alpha: parse_f64(f[0], line_no)?,
                ratio: (!ratio.is_nan()).then_some(ratio),
                n_stationary: parse_usize(f[2], line_no)?,
                n_total: parse_usize(f[3], line_no)?,
            })
        })
        .collect()
}

/// One point of a response-curve family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub x: f64,
    pub g: f64,
    pub series_id: f64,
}

/// Points of a curve family in file order (series by series).
pub fn curve_rows<'a>(curves: &'a [Curve]) -> impl Iterator<Item = CurveRow> + 'a {
    curves.iter().flat_map(|c| {
        c.x.iter().zip(&c.g).map(|(&x, &g)| CurveRow {
            x,
            g,
            series_id: c.series_value,
        })
    })
}

pub fn write_curve_rows<W: Write>(
    mut w: W,
    rows: impl IntoIterator<Item = CurveRow>,
) -> Result<()> {
    writeln!(w, "{CURVE_HEADER}").map_err(io_err)?;
    for r in rows {
        writeln!(w, "{},{},{}", r.x, r.g, r.series_id).map_err(io_err)?;
    }
    Ok(())
}

pub fn write_curves<W: Write>(w: W, curves: &[Curve]) -> Result<()> {
    write_curve_rows(w, curve_rows(curves))
}

pub fn read_curve_rows<R: BufRead>(reader: R) -> Result<Vec<CurveRow>> {
    data_lines(reader, CURVE_HEADER)
        .map(|entry| {
            let (line_no, line) = entry?;
            let f = fields(&line, 3, line_no)?;
            Ok(CurveRow {
                x: parse_f64(f[0], line_no)?,
                g: parse_f64(f[1], line_no)?,
                series_id: parse_f64(f[2], line_no)?,
            })
        })
        .collect()
}

/// One line of a passage-time table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MfptCsvRow {
    pub n_leaves: usize,
    pub mean: f64,
    pub stderr: f64,
    pub censored_fraction: f64,
    pub n_paths: usize,
}

pub fn write_mfpt_rows<W: Write>(
    mut w: W,
    rows: impl IntoIterator<Item = MfptCsvRow>,
) -> Result<()> {
    writeln!(w, "{MFPT_HEADER}").map_err(io_err)?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.n_leaves, r.mean, r.stderr, r.censored_fraction, r.n_paths
        )
        .map_err(io_err)?;
    }
    Ok(())
}

/// Serialize scan results; failed sizes become all-`NaN` rows with a zero
/// path count.
pub fn write_mfpt<W: Write>(w: W, rows: &[MfptRow]) -> Result<()> {
    write_mfpt_rows(
        w,
        rows.iter().map(|r| match &r.estimate {
            Some(est) => MfptCsvRow {
                n_leaves: r.n_leaves,
                mean: est.mean,
                stderr: est.stderr,
                censored_fraction: est.censored_fraction,
                n_paths: est.n_paths,
            },
            None => MfptCsvRow {
                n_leaves: r.n_leaves,
                mean: f64::NAN,
                stderr: f64::NAN,
                censored_fraction: f64::NAN,
                n_paths: 0,
            },
        }),
    )
}

pub fn read_mfpt_rows<R: BufRead>(reader: R) -> Result<Vec<MfptCsvRow>> {
    data_lines(reader, MFPT_HEADER)
        .map(|entry| {
            let (line_no, line) = entry?;
            let f = fields(&line, 5, line_no)?;
            Ok(MfptCsvRow {
                n_leaves: parse_usize(f[0], line_no)?,
                mean: parse_f64(f[1], line_no)?,
                stderr: parse_f64(f[2], line_no)?,
                censored_fraction: parse_f64(f[3], line_no)?,
                n_paths: parse_usize(f[4], line_no)?,
            })
        })
        .collect()
}

/// One node of an ensemble summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleRow {
    pub t: f64,
    pub mean_s: f64,
    pub theory_s: f64,
    pub mean_absdev: f64,
}

pub fn write_ensemble_rows<W: Write>(
    mut w: W,
    rows: impl IntoIterator<Item = EnsembleRow>,
) -> Result<()> {
    writeln!(w, "{ENSEMBLE_HEADER}").map_err(io_err)?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.t, r.mean_s, r.theory_s, r.mean_absdev).map_err(io_err)?;
    }
    Ok(())
}

/// Serialize an ensemble next to its closed-pair reference series
/// (`theory` must hold one value per grid node).
pub fn write_ensemble<W: Write>(w: W, stats: &EnsembleStats, theory: &[f64]) -> Result<()> {
    if theory.len() != stats.grid().n_nodes() {
        return Err(Error::Domain(format!(
            "reference series has {} values for {} nodes",
            theory.len(),
            stats.grid().n_nodes()
        )));
    }
    write_ensemble_rows(
        w,
        stats
            .grid()
            .times()
            .zip(stats.mean_s())
            .zip(theory)
            .zip(stats.mean_absdev())
            .map(|(((t, &mean_s), &theory_s), &mean_absdev)| EnsembleRow {
                t,
                mean_s,
                theory_s,
                mean_absdev,
            }),
    )
}

pub fn read_ensemble_rows<R: BufRead>(reader: R) -> Result<Vec<EnsembleRow>> {
    data_lines(reader, ENSEMBLE_HEADER)
        .map(|entry| {
            let (line_no, line) = entry?;
            let f = fields(&line, 4, line_no)?;
            Ok(EnsembleRow {
                t: parse_f64(f[0], line_no)?,
                mean_s: parse_f64(f[1], line_no)?,
                theory_s: parse_f64(f[2], line_no)?,
                mean_absdev: parse_f64(f[3], line_no)?,
            })
        })
        .collect()
}
