//! Estimate-versus-count comparison: recurrence densities give Est, the sieve
//! gives Cnt, and each (checkpoint, constellation) pair becomes one row.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::constellation::{Constellation, DEFAULT_CLOSURE_BUDGET};
use crate::error::{Error, Result};
use crate::estimator::{
    compute_hl_constants, estimate_from, hl_interval_estimate, EstimateRow, HlForm,
    DEFAULT_HL_BOUND, HL_FORM_TAG,
};
use crate::gapcycle::CycleBuilder;
use crate::primes::prev_prime;
use crate::recurrence::{run_to, Mode, RecurrenceOptions, DEFAULT_EXACT_CAP};
use crate::sieve::{interval_counts, match_constellations, CheckpointPolicy, SieveConfig};

pub const CSV_HEADER: [&str; 8] = [
    "q",
    "q_squared",
    "constellation",
    "count",
    "est_uniform",
    "est_hl",
    "err_uniform",
    "err_hl",
];

#[derive(Debug, Clone)]
pub struct CompareConfig {
    pub sieve: SieveConfig,
    pub closure_budget: u64,
    pub hl_bound: u64,
    pub builder: CycleBuilder,
}

impl CompareConfig {
    pub fn new(limit: u64, constellations: Vec<Constellation>) -> Self {
        CompareConfig {
            sieve: SieveConfig::new(limit, constellations),
            closure_budget: DEFAULT_CLOSURE_BUDGET,
            hl_bound: DEFAULT_HL_BOUND,
            builder: CycleBuilder::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportMetadata {
    pub generated_by: String,
    pub limit: u64,
    pub constellations: Vec<Constellation>,
    pub checkpoint_policy: String,
    pub hl_form: String,
    pub first_occurrences: Vec<(Constellation, Option<u64>)>,
    /// Why an estimate column is missing for a constellation.
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub metadata: ReportMetadata,
    pub rows: Vec<EstimateRow>,
}

pub fn run_compare(config: &CompareConfig) -> Result<ComparisonReport> {
    let sieve = &config.sieve;
    sieve.validate()?;
    let checkpoints = sieve.checkpoint_primes()?;
    let ledger = match_constellations(sieve)?;
    let table = interval_counts(&ledger, &checkpoints)?;
    let hl = compute_hl_constants(config.hl_bound)?;

    let last_stage = checkpoints.last().and_then(|&q| prev_prime(q));
    let opts = RecurrenceOptions {
        mode: Mode::Density,
        init_stage: None,
        exact_cap: DEFAULT_EXACT_CAP,
        closure_budget: config.closure_budget,
        builder: config.builder,
    };

    let mut notes = Vec::new();
    let mut rows = Vec::with_capacity(checkpoints.len() * sieve.constellations.len());
    for (ci, s) in table.constellations.iter().enumerate() {
        let trajectory = match last_stage.map(|q| run_to(s, q, &opts)) {
            Some(Ok(t)) => Some(t),
            Some(Err(e)) => {
                notes.push(format!("{s}: uniform estimate unavailable: {e}"));
                None
            }
            None => None,
        };
        let hl_form = HlForm::for_constellation(s).is_ok();
        for (qi, &q) in checkpoints.iter().enumerate() {
            let est = trajectory.as_ref().and_then(|t| estimate_from(t, q).ok());
            let est_hl = if hl_form {
                Some(hl_interval_estimate(s, q, &hl)?)
            } else {
                None
            };
            rows.push(EstimateRow::new(
                q,
                s.clone(),
                table.counts[ci][qi],
                est,
                est_hl,
            ));
        }
    }

    let checkpoint_policy = match &sieve.checkpoints {
        CheckpointPolicy::Auto => "auto: odd primes q with q^2 <= limit".to_string(),
        CheckpointPolicy::Explicit(qs) => format!("explicit: {} checkpoints", qs.len()),
    };
    Ok(ComparisonReport {
        metadata: ReportMetadata {
            generated_by: format!("cyclegaps {}", env!("CARGO_PKG_VERSION")),
            limit: sieve.limit,
            constellations: sieve.constellations.clone(),
            checkpoint_policy,
            hl_form: format!(
                "{HL_FORM_TAG}; c2={} c4={} (primes <= {})",
                hl.c2, hl.c4, hl.truncation_bound
            ),
            first_occurrences: ledger
                .entries
                .iter()
                .map(|(s, starts)| (s.clone(), starts.first().copied()))
                .collect(),
            notes,
        },
        rows,
    })
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn metadata_lines(meta: &ReportMetadata) -> String {
    let mut out = String::new();
    let list = |v: &[Constellation]| v.iter().map(|c| c.compact()).collect::<Vec<_>>().join(" ");
    let _ = writeln!(out, "# generated_by: {}", meta.generated_by);
    let _ = writeln!(out, "# limit: {}", meta.limit);
    let _ = writeln!(out, "# constellations: {}", list(&meta.constellations));
    let _ = writeln!(out, "# checkpoints: {}", meta.checkpoint_policy);
    let _ = writeln!(out, "# hl_form: {}", meta.hl_form);
    for (s, first) in &meta.first_occurrences {
        match first {
            Some(p) => {
                let _ = writeln!(out, "# first_occurrence {}: {p}", s.compact());
            }
            None => {
                let _ = writeln!(out, "# first_occurrence {}: not-found", s.compact());
            }
        }
    }
    for note in &meta.notes {
        let _ = writeln!(out, "# note: {note}");
    }
    out
}

/// Writes `#` metadata lines, the header, then one record per row.
pub fn write_table<W: Write>(report: &ComparisonReport, mut w: W, delimiter: u8) -> Result<()> {
    if report.rows.is_empty() {
        return Err(Error::config("report has no rows"));
    }
    w.write_all(metadata_lines(&report.metadata).as_bytes())?;
    let mut out = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .from_writer(w);
    out.write_record(CSV_HEADER)?;
    for r in &report.rows {
        out.write_record([
            r.q.to_string(),
            r.q_squared.to_string(),
            r.constellation.to_string(),
            r.count.to_string(),
            opt(r.est_uniform),
            opt(r.est_hl),
            opt(r.err_uniform),
            opt(r.err_hl),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Plain delimited table with quoting where a field needs it.
pub fn write_records<W, I, R>(w: W, delimiter: u8, header: &[&str], records: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut out = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .from_writer(w);
    out.write_record(header)?;
    for r in records {
        out.write_record(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn emit_csv(report: &ComparisonReport, path: &Path) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    write_table(report, file, b',')
}

/// Reads the rows of a table written by [`write_table`].
pub fn read_table<R: Read>(r: R, delimiter: u8) -> Result<Vec<EstimateRow>> {
    let body: String = BufReader::new(r)
        .lines()
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l + "\n")
        .collect();
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .from_reader(body.as_bytes());
    if rdr.headers()?.iter().ne(CSV_HEADER) {
        return Err(Error::config("unexpected table header"));
    }
    let num = |f: &str, what: &str| -> Result<Option<f64>> {
        if f.is_empty() {
            return Ok(None);
        }
        f.parse()
            .map(Some)
            .map_err(|_| Error::config(format!("bad {what} value `{f}`")))
    };
    let int = |f: &str, what: &str| -> Result<u64> {
        f.parse()
            .map_err(|_| Error::config(format!("bad {what} value `{f}`")))
    };
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != CSV_HEADER.len() {
            return Err(Error::config("short table record"));
        }
        rows.push(EstimateRow {
            q: int(&rec[0], "q")?,
            q_squared: int(&rec[1], "q_squared")?,
            constellation: Constellation::parse(&rec[2])?,
            count: int(&rec[3], "count")?,
            est_uniform: num(&rec[4], "est_uniform")?,
            est_hl: num(&rec[5], "est_hl")?,
            err_uniform: num(&rec[6], "err_uniform")?,
            err_hl: num(&rec[7], "err_hl")?,
        });
    }
    Ok(rows)
}

const SVG_W: f64 = 960.0;
const SVG_H: f64 = 540.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

struct Series {
    label: String,
    color: &'static str,
    dashed: bool,
    points: Vec<(f64, f64)>,
}

/// Relative error against log10(q²): one series per constellation, plus a
/// dashed HL series where one exists.
pub fn render_svg(report: &ComparisonReport) -> Result<String> {
    if report.rows.is_empty() {
        return Err(Error::config("report has no rows"));
    }
    let mut series: Vec<Series> = Vec::new();
    for (i, s) in report.metadata.constellations.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let rows = report.rows.iter().filter(|r| &r.constellation == s);
        let pick = |f: fn(&EstimateRow) -> Option<f64>| -> Vec<(f64, f64)> {
            rows.clone()
                .filter_map(|r| f(r).map(|e| ((r.q_squared as f64).log10(), e)))
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .collect()
        };
        series.push(Series {
            label: format!("{} Est", s.compact()),
            color,
            dashed: false,
            points: pick(|r| r.err_uniform),
        });
        let hl = pick(|r| r.err_hl);
        if !hl.is_empty() {
            series.push(Series {
                label: format!("{} HL", s.compact()),
                color,
                dashed: true,
                points: hl,
            });
        }
    }

    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = all.fold(
        (f64::INFINITY, f64::NEG_INFINITY, 0.0f64, 0.0f64),
        |(a, b, c, d), &(x, y)| (a.min(x), b.max(x), c.min(y), d.max(y)),
    );
    if !x0.is_finite() {
        x0 = 0.0;
        x1 = 1.0;
    }
    if x1 - x0 < 1e-9 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 < 1e-9 {
        y0 -= 0.05;
        y1 += 0.05;
    }
    let pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;

    let (left, right, top, bottom) = (80.0, SVG_W - 170.0, 30.0, SVG_H - 60.0);
    let px = |x: f64| left + (x - x0) / (x1 - x0) * (right - left);
    let py = |y: f64| bottom - (y - y0) / (y1 - y0) * (bottom - top);

    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="960" height="540" viewBox="0 0 960 540" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="960" height="540" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        right - left,
        bottom - top
    );
    for k in 0..=5 {
        let y = y0 + (y1 - y0) * k as f64 / 5.0;
        let _ = writeln!(
            out,
            r##"<line x1="{left}" y1="{py:.2}" x2="{right}" y2="{py:.2}" stroke="#ddd"/><text x="{}" y="{:.2}" text-anchor="end">{:.1}%</text>"##,
            left - 6.0,
            py(y) + 4.0,
            y * 100.0,
            py = py(y),
        );
    }
    let (first_tick, last_tick) = (x0.ceil() as i64, x1.floor() as i64);
    for t in first_tick..=last_tick {
        let x = px(t as f64);
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{bottom}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">{t}</text>"#,
            bottom + 5.0,
            bottom + 20.0
        );
    }
    if y0 < 0.0 && y1 > 0.0 {
        let _ = writeln!(
            out,
            r#"<line x1="{left}" y1="{y:.2}" x2="{right}" y2="{y:.2}" stroke="black" stroke-width="0.5"/>"#,
            y = py(0.0)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">log10(q^2)</text>"#,
        (left + right) / 2.0,
        SVG_H - 20.0
    );
    let _ = writeln!(
        out,
        r#"<text x="20" y="{}" text-anchor="middle" transform="rotate(-90 20 {})">relative error (Est - Cnt)/Cnt</text>"#,
        (top + bottom) / 2.0,
        (top + bottom) / 2.0
    );

    for (i, s) in series.iter().enumerate() {
        let dash = if s.dashed {
            r#" stroke-dasharray="6 4""#
        } else {
            ""
        };
        if s.points.len() > 1 {
            let pts: Vec<String> = s
                .points
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                .collect();
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{}" stroke-width="1.5"{dash} points="{}"/>"#,
                s.color,
                pts.join(" ")
            );
        } else if let Some(&(x, y)) = s.points.first() {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"/>"#,
                px(x),
                py(y),
                s.color
            );
        }
        let ly = top + 10.0 + 18.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="2"{dash}/><text x="{}" y="{}">{}</text>"#,
            right + 12.0,
            right + 40.0,
            s.color,
            right + 46.0,
            ly + 4.0,
            s.label
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn emit_svg(report: &ComparisonReport, path: &Path) -> Result<()> {
    let svg = render_svg(report)?;
    std::fs::write(path, svg)?;
    Ok(())
}
