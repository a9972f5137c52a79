//! CSV and SVG output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use faer::MatRef;

use crate::error::Result;
use crate::runner::{ErrorReport, MethodReport, SweepRow};

/// File stem of a method label: lowercase ASCII alphanumerics, other
/// characters replaced by `_`.
pub fn file_stem(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' }).collect()
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// `iteration, increment_norm, residual_norm, e_e`, one row per iterate.
pub fn write_method_csv(path: &Path, m: &MethodReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iteration", "increment_norm", "residual_norm", "e_e"])?;
    for r in &m.trace.records {
        w.write_record([r.n.to_string(), opt(r.increment), num(r.residual), opt(r.error)])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per method plus the monolithic reference.
pub fn write_summary_csv(path: &Path, report: &ErrorReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["method", "plateau_e_e", "fitted_L", "iterations_to_plateau"])?;
    for m in &report.methods {
        let plateau = m.plateau_index();
        w.write_record([
            m.label.clone(),
            opt(m.plateau_value()),
            opt(m.fitted_l()),
            plateau.map(|n| n.to_string()).unwrap_or_default(),
        ])?;
    }
    w.write_record(["Monolithic".to_string(), num(report.monolithic.e_e), String::new(), String::new()])?;
    w.flush()?;
    Ok(())
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["method", "phi", "s", "converged", "iterations", "L"])?;
    for r in rows {
        w.write_record([
            r.method.name().to_string(),
            num(r.phi),
            num(r.s),
            r.converged.to_string(),
            r.iterations.to_string(),
            opt(r.fitted_l),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Coefficient array with rows indexed by time basis function and columns
/// by free spatial node.
pub fn write_matrix_csv(path: &Path, u: MatRef<'_, f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let header: Vec<String> = (0..u.ncols()).map(|j| format!("x{j}")).collect();
    w.write_record(&header)?;
    for i in 0..u.nrows() {
        w.write_record((0..u.ncols()).map(|j| num(u[(i, j)])))?;
    }
    w.flush()?;
    Ok(())
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Line plot of `e_e` against the iteration index on a logarithmic `y`
/// axis: one polyline per method and a dashed line at the monolithic value.
pub fn render_svg(report: &ErrorReport) -> String {
    let (w, h) = (640.0, 420.0);
    let (left, right, top, bottom) = (70.0, 150.0, 20.0, 50.0);
    let (pw, ph) = (w - left - right, h - top - bottom);
    let series: Vec<(&str, Vec<(usize, f64)>)> = report
        .methods
        .iter()
        .map(|m| {
            let pts = m.trace.records.iter().filter_map(|r| r.error.filter(|&e| e > 0.0).map(|e| (r.n, e))).collect();
            (m.label.as_str(), pts)
        })
        .collect();
    let mono = report.monolithic.e_e;
    let values = series.iter().flat_map(|s| s.1.iter().map(|p| p.1)).chain((mono > 0.0).then_some(mono));
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (lo, hi) = if lo.is_finite() {
        (lo.log10().floor(), hi.log10().ceil().max(lo.log10().floor() + 1.0))
    } else {
        (-1.0, 0.0)
    };
    let nmax = series.iter().flat_map(|s| s.1.last().map(|p| p.0)).max().unwrap_or(1).max(1) as f64;
    let x = |n: f64| left + pw * n / nmax;
    let y = |v: f64| top + ph * (hi - v.log10()) / (hi - lo);

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for k in (lo as i32)..=(hi as i32) {
        let yk = y(10f64.powi(k));
        let _ =
            writeln!(s, r##"<line x1="{left}" y1="{yk:.2}" x2="{:.2}" y2="{yk:.2}" stroke="#dddddd"/>"##, left + pw);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{k}</text>"#, left - 6.0, yk + 4.0);
    }
    let step = ((nmax / 10.0).ceil() as usize).max(1);
    for n in (0..=nmax as usize).step_by(step) {
        let xn = x(n as f64);
        let _ = writeln!(s, r#"<text x="{xn:.2}" y="{:.2}" text-anchor="middle">{n}</text>"#, top + ph + 18.0);
    }
    let _ =
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">iteration</text>"#, left + pw / 2.0, h - 10.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">e_e</text>"#,
        top + ph / 2.0,
        top + ph / 2.0
    );
    if mono > 0.0 {
        let ym = y(mono);
        let _ = writeln!(
            s,
            r#"<line x1="{left}" y1="{ym:.2}" x2="{:.2}" y2="{ym:.2}" stroke="gray" stroke-dasharray="6,4"/>"#,
            left + pw
        );
    }
    for (i, (label, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let coords: Vec<String> = pts.iter().map(|&(n, e)| format!("{:.2},{:.2}", x(n as f64), y(e))).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"><title>{}</title></polyline>"#,
            coords.join(" "),
            escape(label)
        );
        let ly = top + 16.0 + 18.0 * i as f64;
        let lx = left + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="1.5"/>"#,
            ly - 4.0,
            lx + 20.0,
            ly - 4.0
        );
        let _ = writeln!(s, r#"<text x="{:.2}" y="{ly:.2}">{}</text>"#, lx + 26.0, escape(label));
    }
    if mono > 0.0 {
        let ly = top + 16.0 + 18.0 * series.len() as f64;
        let lx = left + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="gray" stroke-dasharray="6,4"/>"#,
            ly - 4.0,
            lx + 20.0,
            ly - 4.0
        );
        let _ = writeln!(s, r#"<text x="{:.2}" y="{ly:.2}">Monolithic</text>"#, lx + 26.0);
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Files written by [`write_run`].
#[derive(Debug, Clone)]
pub struct RunOutputs {
    pub method_csvs: Vec<PathBuf>,
    pub summary: PathBuf,
    pub plot: PathBuf,
}

/// Writes the per-method CSVs, `summary.csv`, `errors.svg` and, with
/// `dump_fields`, the coefficient arrays.
pub fn write_run(dir: &Path, report: &ErrorReport, dump_fields: bool) -> Result<RunOutputs> {
    fs::create_dir_all(dir)?;
    let mut method_csvs = Vec::new();
    for m in &report.methods {
        let stem = file_stem(&m.label);
        let path = dir.join(format!("{stem}.csv"));
        write_method_csv(&path, m)?;
        method_csvs.push(path);
        if dump_fields {
            write_matrix_csv(&dir.join(format!("{stem}_eta.csv")), m.eta.as_ref())?;
            write_matrix_csv(&dir.join(format!("{stem}_u1.csv")), m.fields.0.as_ref())?;
            write_matrix_csv(&dir.join(format!("{stem}_u2.csv")), m.fields.1.as_ref())?;
        }
    }
    if dump_fields {
        let mono = &report.monolithic;
        write_matrix_csv(&dir.join("monolithic_eta.csv"), mono.eta.as_ref())?;
        write_matrix_csv(&dir.join("monolithic_u1.csv"), mono.fields.0.as_ref())?;
        write_matrix_csv(&dir.join("monolithic_u2.csv"), mono.fields.1.as_ref())?;
    }
    let summary = dir.join("summary.csv");
    write_summary_csv(&summary, report)?;
    let plot = dir.join("errors.svg");
    fs::write(&plot, render_svg(report))?;
    Ok(RunOutputs { method_csvs, summary, plot })
}
