//! CSV and SVG writers.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use crate::error::{HarnessError, Result};
use crate::experiment::{AggregateRecord, ExperimentOutcome, SchemeRuns};

pub const CSV_HEADER: &str = "replica,n,gamma_n,Gamma_n,Gamma2_n,beta_s_n,f_id,nu_hat,err,scaled_err,jumps_per_step";

/// Writes one scheme's runs: `# key = value` lines, the header, then one
/// row per replica, checkpoint and function.
pub fn write_csv<W: Write>(mut w: W, outcome: &ExperimentOutcome, runs: &SchemeRuns) -> io::Result<()> {
    let exp = &outcome.experiment;
    writeln!(w, "# scheme = {}", runs.scheme.kind)?;
    for (k, v) in exp.echo() {
        writeln!(w, "# {k} = {v}")?;
    }
    if !runs.failures.is_empty() {
        let ids: Vec<String> = runs.failures.iter().map(|(r, _)| r.to_string()).collect();
        writeln!(w, "# failed_replicas = {}", ids.join(" "))?;
    }
    writeln!(w, "{CSV_HEADER}")?;
    let s = runs.scheme.s;
    for rec in &runs.records {
        for row in &rec.rows {
            for (i, f) in exp.functions.iter().enumerate() {
                let v = row.values[i];
                write!(
                    w,
                    "{},{},{},{},{},{},{},{},",
                    rec.replica,
                    row.n,
                    row.gamma_n,
                    row.gamma_sum,
                    row.gamma2_sum,
                    row.beta(s),
                    f.id,
                    v
                )?;
                match exp.targets[i] {
                    Some(t) => write!(w, "{},{},", v - t, row.gamma_sum.sqrt() * (v - t))?,
                    None => write!(w, ",,")?,
                }
                writeln!(w, "{}", row.jumps_per_step)?;
            }
        }
    }
    Ok(())
}

fn create(path: &Path) -> Result<io::BufWriter<fs::File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        }
    }
    Ok(io::BufWriter::new(fs::File::create(path).map_err(|e| HarnessError::io(path, e))?))
}

/// Writes `<dir>/<scheme>.csv` for every scheme and returns the paths.
pub fn emit_csv(dir: &Path, outcome: &ExperimentOutcome) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for runs in &outcome.runs {
        let path = dir.join(format!("{}.csv", runs.scheme.kind));
        let mut w = create(&path)?;
        write_csv(&mut w, outcome, runs)
            .and_then(|_| w.flush())
            .map_err(|e| HarnessError::io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const COLOURS: [&str; 3] = ["#1f77b4", "#d62728", "#2ca02c"];

/// Mean `ν̄_n(f)` against `n` on a log axis, one polyline per record and a
/// dashed rule at the target.
pub fn svg_plot(aggs: &[AggregateRecord]) -> String {
    let target = aggs.iter().find_map(|a| a.target);
    let pts = aggs.iter().flat_map(|a| a.points.iter());
    let (mut xlo, mut xhi, mut ylo, mut yhi) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in pts {
        let x = (p.n as f64).log10();
        xlo = xlo.min(x);
        xhi = xhi.max(x);
        if p.mean_value.is_finite() {
            ylo = ylo.min(p.mean_value);
            yhi = yhi.max(p.mean_value);
        }
    }
    if let Some(t) = target {
        ylo = ylo.min(t);
        yhi = yhi.max(t);
    }
    if !(xhi > xlo) {
        xhi = xlo + 1.0;
    }
    if !ylo.is_finite() {
        (ylo, yhi) = (0.0, 1.0);
    }
    if !(yhi > ylo) {
        (ylo, yhi) = (ylo - 0.5, yhi + 0.5);
    }
    let sx = |x: f64| MARGIN + (x - xlo) / (xhi - xlo) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - ylo) / (yhi - ylo) * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let f_id = aggs.first().map_or("", |a| a.f_id.as_str());
    let _ = writeln!(s, r#"<title>{}</title>"#, escape(f_id));
    let _ = writeln!(
        s,
        r#"<g class="axes" stroke="black" fill="none"><line x1="{m}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{m}" y1="{b}" x2="{m}" y2="{m}"/></g>"#,
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    for d in (xlo.ceil() as i64)..=(xhi.floor() as i64) {
        let x = sx(d as f64);
        let _ = writeln!(
            s,
            r#"<text class="tick" x="{x:.2}" y="{:.2}" font-size="11" text-anchor="middle">1e{d}</text>"#,
            HEIGHT - MARGIN + 16.0
        );
    }
    for (y, anchor) in [(ylo, "start"), (yhi, "start")] {
        let _ = writeln!(
            s,
            r#"<text class="tick" x="4" y="{:.2}" font-size="11" text-anchor="{anchor}">{:.4}</text>"#,
            sy(y),
            y
        );
    }
    if let Some(t) = target {
        let _ = writeln!(
            s,
            r#"<line class="target" x1="{MARGIN}" y1="{y:.2}" x2="{r}" y2="{y:.2}" stroke="gray" stroke-dasharray="6 4"/>"#,
            y = sy(t),
            r = WIDTH - MARGIN
        );
    }
    for (i, a) in aggs.iter().enumerate() {
        let coords: Vec<String> = a
            .points
            .iter()
            .filter(|p| p.mean_value.is_finite())
            .map(|p| format!("{:.2},{:.2}", sx((p.n as f64).log10()), sy(p.mean_value)))
            .collect();
        let colour = COLOURS[i % COLOURS.len()];
        let _ = writeln!(
            s,
            r#"<polyline class="scheme" data-scheme="{}" fill="none" stroke="{colour}" points="{}"/>"#,
            a.kind,
            coords.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" fill="{colour}">{}</text>"#,
            WIDTH - MARGIN + 6.0,
            MARGIN + 14.0 * i as f64,
            a.kind
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes `<dir>/<f_id>.svg` for every function and returns the paths.
pub fn emit_svg_plot(dir: &Path, outcome: &ExperimentOutcome) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for f in outcome.experiment.functions.iter() {
        let aggs = outcome
            .runs
            .iter()
            .map(|r| outcome.aggregate(r.scheme.kind, &f.id))
            .collect::<Result<Vec<_>>>()?;
        let name: String = f.id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect();
        let path = dir.join(format!("{name}.svg"));
        let mut w = create(&path)?;
        w.write_all(svg_plot(&aggs).as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| HarnessError::io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}
