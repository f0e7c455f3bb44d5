//! Output files: per-seed trace CSVs, the aggregate CSV, SVG charts and a
//! hashed manifest.
//!
//! Numbers are written in fixed notation with nine decimals, LF line endings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::experiment::{AgentKind, AggregateResult, Metric, RunTraces};
use crate::metrics::{novelty_series, shannon_entropy, LogBase, StepRecord};

pub const TRACE_HEADER: &str = "t,agent,action,reward,T,eps,entropy_bits,entropy_nats,novelty,psi_chosen";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const AGGREGATE_FILE: &str = "aggregate.csv";

/// Formats `v` with nine digits after the decimal point, trailing zeros
/// removed. Read back, every value is within 5e-10 of the original.
pub fn format_number(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let s = format!("{v:.9}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    match s {
        "-0" | "" => "0".to_string(),
        s => s.to_string(),
    }
}

fn opt_number(v: Option<f64>) -> String {
    v.map(format_number).unwrap_or_default()
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_all(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(bytes).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn trace_rows(out: &mut String, agent: AgentKind, recs: &[StepRecord], novelty: &[f64], step: usize) {
    let r = &recs[step];
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{}",
        r.t,
        agent.name(),
        r.action,
        r.reward,
        opt_number(r.temperature),
        format_number(r.eps),
        format_number(shannon_entropy(&r.policy, LogBase::Two)),
        format_number(shannon_entropy(&r.policy, LogBase::E)),
        format_number(novelty[step]),
        opt_number(r.psi_chosen),
    );
}

/// Renders one run's trace: a header plus, for each step, a free-will row and
/// a baseline row.
pub fn render_trace_csv(trace: &RunTraces, num_arms: usize) -> Result<String> {
    let nov = |recs: &[StepRecord]| {
        let actions: Vec<_> = recs.iter().map(|r| r.action).collect();
        novelty_series(&actions, num_arms)
    };
    let nov_fw = nov(&trace.freewill)?;
    let nov_base = nov(&trace.baseline)?;
    if trace.freewill.len() != trace.baseline.len() {
        return Err(Error::invalid("agent traces differ in length"));
    }
    let mut out = String::with_capacity(64 * 2 * trace.freewill.len());
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for step in 0..trace.freewill.len() {
        trace_rows(&mut out, AgentKind::FreeWill, &trace.freewill, &nov_fw, step);
        trace_rows(&mut out, AgentKind::Baseline, &trace.baseline, &nov_base, step);
    }
    Ok(out)
}

pub fn write_trace_csv(trace: &RunTraces, num_arms: usize, path: &Path) -> Result<()> {
    write_all(path, render_trace_csv(trace, num_arms)?.as_bytes())
}

/// Column names of the aggregate CSV, after the leading `t`.
pub fn aggregate_columns() -> Vec<String> {
    let mut cols = Vec::new();
    for metric in Metric::ALL {
        for agent in metric.agents() {
            for stat in ["mean", "std"] {
                cols.push(format!("{}_{}_{stat}", metric.name(), agent.name()));
            }
        }
    }
    cols
}

/// One row per step. A series whose first entry belongs to step `offset`
/// leaves earlier cells empty; rolling reward at step `t` is the mean over
/// the window ending at `t`.
pub fn render_aggregate_csv(result: &AggregateResult) -> String {
    let mut out = String::new();
    out.push('t');
    for c in aggregate_columns() {
        out.push(',');
        out.push_str(&c);
    }
    out.push('\n');
    let cell = |values: &[f64], offset: usize, t: usize| -> String {
        t.checked_sub(offset)
            .and_then(|i| values.get(i))
            .map(|v| format_number(*v))
            .unwrap_or_default()
    };
    for t in 0..result.total_steps {
        let _ = write!(out, "{t}");
        for metric in Metric::ALL {
            for agent in metric.agents() {
                let s = result.get(metric, *agent).expect("every series aggregated");
                let _ = write!(out, ",{},{}", cell(&s.mean, s.offset, t), cell(&s.std, s.offset, t));
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_aggregate_csv(result: &AggregateResult, path: &Path) -> Result<()> {
    write_all(path, render_aggregate_csv(result).as_bytes())
}

pub struct ChartSeries<'a> {
    pub label: String,
    pub mean: &'a [f64],
    pub std: &'a [f64],
}

pub struct Marker {
    pub x: f64,
    pub label: String,
}

pub struct Chart<'a> {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<ChartSeries<'a>>,
    pub markers: Vec<Marker>,
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 16.0;
const TOP: f64 = 32.0;
const BOTTOM: f64 = 48.0;
const PALETTE: [&str; 4] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd"];

fn escape(text: &str) -> String {
    let mut s = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => s.push_str("&amp;"),
            '<' => s.push_str("&lt;"),
            '>' => s.push_str("&gt;"),
            '"' => s.push_str("&quot;"),
            '\'' => s.push_str("&apos;"),
            c => s.push(c),
        }
    }
    s
}

/// Roughly five "nice" tick values spanning `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    if span.is_nan() || span <= 0.0 {
        return vec![lo];
    }
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    if v.abs() < 1e-12 {
        return "0".to_string();
    }
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

/// Renders a self-contained SVG line chart: one polyline per mean series, a
/// translucent `mean ± std` band beneath each, dashed vertical markers, axes
/// and a legend. Series index `i` is plotted at `x = i`.
pub fn render_svg(chart: &Chart) -> Result<String> {
    let n = chart.series.first().map_or(0, |s| s.mean.len());
    if chart.series.iter().any(|s| s.mean.len() != n || s.std.len() != n) {
        return Err(Error::invalid("chart series differ in length"));
    }
    let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in &chart.series {
        for (m, d) in s.mean.iter().zip(s.std) {
            y_lo = y_lo.min(m - d);
            y_hi = y_hi.max(m + d);
        }
    }
    if !y_lo.is_finite() || !y_hi.is_finite() {
        y_lo = 0.0;
        y_hi = 1.0;
    }
    if y_hi - y_lo < 1e-12 {
        y_lo -= 0.5;
        y_hi += 0.5;
    }
    let pad = 0.05 * (y_hi - y_lo);
    let (y_lo, y_hi) = (y_lo - pad, y_hi + pad);
    let x_hi = (n.max(2) - 1) as f64;

    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + x / x_hi * plot_w;
    let py = |y: f64| TOP + (y_hi - y) / (y_hi - y_lo) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(&chart.title)
    );

    // grid and ticks
    for y in ticks(y_lo, y_hi) {
        let yy = py(y);
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT:.2}" y1="{yy:.2}" x2="{:.2}" y2="{yy:.2}" stroke="#dddddd" stroke-width="0.5"/>"##,
            LEFT + plot_w
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 4.0,
            yy + 4.0,
            tick_label(y)
        );
    }
    for x in ticks(0.0, x_hi) {
        let xx = px(x);
        let _ = writeln!(
            svg,
            r##"<line x1="{xx:.2}" y1="{:.2}" x2="{xx:.2}" y2="{:.2}" stroke="#333333"/>"##,
            TOP + plot_h,
            TOP + plot_h + 4.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{xx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + plot_h + 16.0,
            tick_label(x)
        );
    }
    let _ = writeln!(
        svg,
        r##"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="#333333"/>"##
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 10.0,
        escape(&chart.x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">{}</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0,
        escape(&chart.y_label)
    );

    for (k, s) in chart.series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut band = String::new();
        for (i, (m, d)) in s.mean.iter().zip(s.std).enumerate() {
            let _ = write!(band, "{:.2},{:.2} ", px(i as f64), py(m + d));
        }
        for (i, (m, d)) in s.mean.iter().zip(s.std).enumerate().rev() {
            let _ = write!(band, "{:.2},{:.2} ", px(i as f64), py(m - d));
        }
        let _ = writeln!(
            svg,
            r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            band.trim_end()
        );
        let mut line = String::new();
        for (i, m) in s.mean.iter().enumerate() {
            let _ = write!(line, "{:.2},{:.2} ", px(i as f64), py(*m));
        }
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.2"/>"#,
            line.trim_end()
        );
    }

    for m in chart.markers.iter().filter(|m| (0.0..=x_hi).contains(&m.x)) {
        let xx = px(m.x);
        let _ = writeln!(
            svg,
            r##"<line x1="{xx:.2}" y1="{TOP:.2}" x2="{xx:.2}" y2="{:.2}" stroke="#d62728" stroke-width="1.2" stroke-dasharray="6,4"><title>{}</title></line>"##,
            TOP + plot_h,
            escape(&m.label)
        );
    }

    let mut entries: Vec<(String, &str, bool)> = chart
        .series
        .iter()
        .enumerate()
        .map(|(k, s)| (s.label.clone(), PALETTE[k % PALETTE.len()], false))
        .collect();
    if let Some(m) = chart.markers.iter().find(|m| (0.0..=x_hi).contains(&m.x)) {
        entries.push((m.label.clone(), "#d62728", true));
    }
    let lx = LEFT + plot_w - 170.0;
    for (i, (label, color, dashed)) in entries.iter().enumerate() {
        let ly = TOP + 14.0 + 16.0 * i as f64;
        let dash = if *dashed { r#" stroke-dasharray="6,4""# } else { "" };
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"{dash}/>"#,
            lx + 24.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 30.0,
            ly + 4.0,
            escape(label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_svg(chart: &Chart, path: &Path) -> Result<()> {
    write_all(path, render_svg(chart)?.as_bytes())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Plot {
    Reward,
    Entropy,
    Kl,
    Novelty,
    Regret,
}

impl Plot {
    pub const ALL: [Plot; 5] = [Plot::Reward, Plot::Entropy, Plot::Kl, Plot::Novelty, Plot::Regret];

    pub fn file_name(self) -> &'static str {
        match self {
            Plot::Reward => "reward.svg",
            Plot::Entropy => "entropy.svg",
            Plot::Kl => "kl.svg",
            Plot::Novelty => "novelty.svg",
            Plot::Regret => "regret.svg",
        }
    }
}

/// Builds the chart for `plot`. `zoom` limits the novelty chart to its first
/// steps (0 disables the limit).
pub fn chart_for<'a>(
    plot: Plot,
    result: &'a AggregateResult,
    change_steps: &[usize],
    runs: usize,
    zoom: usize,
) -> Chart<'a> {
    let both = |metric: Metric, limit: usize| -> Vec<ChartSeries<'a>> {
        metric
            .agents()
            .iter()
            .map(|a| {
                let s = result.get(metric, *a).expect("aggregated");
                let end = s.mean.len().min(limit);
                ChartSeries {
                    label: match metric {
                        Metric::Kl => "KL(Free-Will || Baseline)".to_string(),
                        _ => a.label().to_string(),
                    },
                    mean: &s.mean[..end],
                    std: &s.std[..end],
                }
            })
            .collect()
    };
    let markers = |shift: usize| -> Vec<Marker> {
        change_steps
            .iter()
            .filter(|c| **c >= shift)
            .map(|c| Marker {
                x: (c - shift) as f64,
                label: "Env Change".to_string(),
            })
            .collect()
    };
    let suffix = format!("(Mean ± Std, {runs} Runs)");
    match plot {
        Plot::Reward => Chart {
            title: format!("Reward Curves {suffix}"),
            x_label: format!("Time step (window start, window={})", result.window),
            y_label: format!("Rolling Avg Reward (window={})", result.window),
            series: both(Metric::RollingReward, usize::MAX),
            // The rolling series is indexed by window start, so the change
            // enters the window `window` indices earlier.
            markers: markers(result.window),
        },
        Plot::Entropy => Chart {
            title: format!("Policy Entropy {suffix}"),
            x_label: "Time step".into(),
            y_label: "Policy Entropy (bits)".into(),
            series: both(Metric::EntropyBits, usize::MAX),
            markers: markers(0),
        },
        Plot::Kl => Chart {
            title: format!("KL Divergence {suffix}"),
            x_label: "Time step".into(),
            y_label: "KL Divergence (nats)".into(),
            series: both(Metric::Kl, usize::MAX),
            markers: markers(0),
        },
        Plot::Novelty => {
            let limit = if zoom == 0 { usize::MAX } else { zoom };
            let title = if zoom == 0 {
                format!("Novelty Score {suffix}")
            } else {
                format!("Novelty Score {suffix}, Zoom: 0-{zoom}")
            };
            Chart {
                title,
                x_label: "Time step".into(),
                y_label: "Novelty Score".into(),
                series: both(Metric::Novelty, limit),
                markers: markers(0),
            }
        }
        Plot::Regret => Chart {
            title: format!("Cumulative Regret {suffix}"),
            x_label: "Time step".into(),
            y_label: "Cumulative Regret".into(),
            series: both(Metric::Regret, usize::MAX),
            markers: markers(0),
        },
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: String,
    /// UTC, ISO-8601.
    pub timestamp: String,
    pub seeds: Vec<u64>,
    /// The effective run configuration, in config-file form.
    pub config: Value,
    /// Relative path (forward slashes) to lowercase hex SHA-256.
    pub files: BTreeMap<String, String>,
}

impl RunManifest {
    /// Hashes `files` (relative to `dir`) into a new manifest.
    pub fn build(dir: &Path, files: &[String], config: Value, seeds: Vec<u64>) -> Result<Self> {
        let mut hashes = BTreeMap::new();
        for f in files {
            let path = dir.join(f);
            if !path.is_file() {
                return Err(Error::ManifestInconsistent(format!("{f} does not exist")));
            }
            hashes.insert(f.clone(), sha256_file(&path)?);
        }
        Ok(Self {
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            seeds,
            config,
            files: hashes,
        })
    }
}

/// Writes the manifest as JSON with sorted keys. Every listed file must exist
/// next to `path` with a matching hash.
pub fn write_manifest(manifest: &RunManifest, path: &Path) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let problems = check_files(dir, &manifest.files)?;
    if let Some(p) = problems.first() {
        return Err(Error::ManifestInconsistent(p.to_string()));
    }
    // serde_json's map is ordered, so round-tripping through Value sorts keys.
    let value = serde_json::to_value(manifest).expect("manifest serializes");
    let mut text = serde_json::to_string_pretty(&value).expect("manifest serializes");
    text.push('\n');
    write_all(path, text.as_bytes())
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::ManifestInconsistent(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Problem {
    Missing(PathBuf),
    HashMismatch(PathBuf),
}

impl std::fmt::Display for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Problem::Missing(p) => write!(f, "missing {}", p.display()),
            Problem::HashMismatch(p) => write!(f, "hash mismatch {}", p.display()),
        }
    }
}

fn check_files(dir: &Path, files: &BTreeMap<String, String>) -> Result<Vec<Problem>> {
    let mut problems = Vec::new();
    for (name, want) in files {
        let path = dir.join(name);
        if !path.is_file() {
            problems.push(Problem::Missing(path));
            continue;
        }
        if &sha256_file(&path)? != want {
            problems.push(Problem::HashMismatch(path));
        }
    }
    Ok(problems)
}

/// Re-hashes every file listed in `dir/manifest.json`, descending into listed
/// nested manifests. An empty result means everything matches.
pub fn verify_dir(dir: &Path) -> Result<Vec<Problem>> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest = read_manifest(&manifest_path)?;
    let mut problems = check_files(dir, &manifest.files)?;
    for name in manifest.files.keys() {
        let path = dir.join(name);
        if name.ends_with(MANIFEST_FILE) && path.is_file() && !problems.contains(&Problem::HashMismatch(path.clone())) {
            let sub = path.parent().expect("joined path has a parent");
            problems.extend(verify_dir(sub)?);
        }
    }
    Ok(problems)
}

/// Writes traces (optional), the aggregate CSV and the requested charts into
/// `dir`. Returns the written file names relative to `dir`.
pub fn write_outputs(
    dir: &Path,
    result: &AggregateResult,
    num_arms: usize,
    change_steps: &[usize],
    plots: &[Plot],
    novelty_zoom: usize,
    write_traces: bool,
) -> Result<Vec<String>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    if write_traces {
        for run in &result.runs {
            let name = format!("trace_seed{}.csv", run.seed);
            write_trace_csv(run, num_arms, &dir.join(&name))?;
            files.push(name);
        }
    }
    write_aggregate_csv(result, &dir.join(AGGREGATE_FILE))?;
    files.push(AGGREGATE_FILE.to_string());
    for plot in plots {
        let chart = chart_for(*plot, result, change_steps, result.runs.len(), novelty_zoom);
        emit_svg(&chart, &dir.join(plot.file_name()))?;
        files.push(plot.file_name().to_string());
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(format_number(0.0), "0");
        assert_eq!(format_number(-0.0), "0");
        assert_eq!(format_number(0.5), "0.5");
        assert_eq!(format_number(1.0), "1");
        assert_eq!(format_number(0.722_222_222_222_2), "0.722222222");
        assert_eq!(format_number(1_234.567_890_123), "1234.567890123");
        assert_eq!(format_number(4.8e-35), "0");
        assert_eq!(format_number(-0.000_123_456_789_12), "-0.000123457");
    }

    #[test]
    fn nice_ticks() {
        assert_eq!(ticks(0.0, 1.0), vec![0.0, 0.2, 0.4, 0.6000000000000001, 0.8, 1.0]);
        let t = ticks(0.0, 1950.0);
        assert_eq!(t.first(), Some(&0.0));
        assert!(t.len() >= 3 && t.len() <= 7);
    }

    fn chart<'a>(mean: &'a [f64], std: &'a [f64], markers: Vec<Marker>) -> Chart<'a> {
        Chart {
            title: "A & B <test>".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            series: vec![ChartSeries { label: "s".into(), mean, std }],
            markers,
        }
    }

    #[test]
    fn svg_is_well_formed_and_escaped() {
        let mean = [0.1, 0.5, 0.3];
        let std = [0.0, 0.1, 0.05];
        let svg = render_svg(&chart(&mean, &std, vec![Marker { x: 1.0, label: "c".into() }])).unwrap();
        let doc = roxmltree::Document::parse(&svg).unwrap();
        assert_eq!(doc.root_element().tag_name().name(), "svg");
        assert!(svg.contains("A &amp; B &lt;test&gt;"));
        assert_eq!(svg.matches("stroke-dasharray").count(), 2);
        assert!(!svg.contains("<script"));
    }

    #[test]
    fn svg_without_markers_has_no_dashes() {
        let svg = render_svg(&chart(&[1.0, 1.0], &[0.0, 0.0], vec![])).unwrap();
        assert!(!svg.contains("stroke-dasharray"));
    }

    #[test]
    fn constant_series_is_horizontal() {
        let mean = [0.4; 10];
        let std = [0.0; 10];
        let svg = render_svg(&chart(&mean, &std, vec![])).unwrap();
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let line = doc
            .descendants()
            .find(|n| n.has_tag_name("polyline"))
            .unwrap();
        let ys: Vec<&str> = line
            .attribute("points")
            .unwrap()
            .split(' ')
            .map(|p| p.split(',').nth(1).unwrap())
            .collect();
        assert!(ys.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn svg_rejects_ragged_series() {
        assert!(render_svg(&chart(&[1.0, 2.0], &[0.0], vec![])).is_err());
    }

    #[test]
    fn manifest_detects_tampering() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.csv"), "x\n1\n").unwrap();
        fs::write(dir.path().join("b.svg"), "<svg/>").unwrap();
        let files = vec!["a.csv".to_string(), "b.svg".to_string()];
        let m = RunManifest::build(dir.path(), &files, Value::Null, vec![0]).unwrap();
        assert_eq!(m.files.len(), 2);
        write_manifest(&m, &dir.path().join(MANIFEST_FILE)).unwrap();
        assert!(verify_dir(dir.path()).unwrap().is_empty());

        fs::write(dir.path().join("a.csv"), "x\n2\n").unwrap();
        let problems = verify_dir(dir.path()).unwrap();
        assert!(matches!(problems.as_slice(), [Problem::HashMismatch(_)]));

        fs::remove_file(dir.path().join("b.svg")).unwrap();
        assert_eq!(verify_dir(dir.path()).unwrap().len(), 2);
    }

    #[test]
    fn manifest_keys_are_sorted() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("z.csv"), "1").unwrap();
        fs::write(dir.path().join("a.csv"), "2").unwrap();
        let files = vec!["z.csv".to_string(), "a.csv".to_string()];
        let m = RunManifest::build(dir.path(), &files, serde_json::json!({"b": 1, "a": 2}), vec![0]).unwrap();
        write_manifest(&m, &dir.path().join(MANIFEST_FILE)).unwrap();
        let text = fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
        let pos = |k: &str| text.find(k).unwrap();
        assert!(pos("\"artifact_version\"") < pos("\"config\""));
        assert!(pos("\"config\"") < pos("\"files\""));
        assert!(pos("\"files\"") < pos("\"seeds\""));
        assert!(pos("\"seeds\"") < pos("\"timestamp\""));
        assert!(pos("\"a.csv\"") < pos("\"z.csv\""));
    }

    #[test]
    fn manifest_refuses_missing_files() {
        let dir = tempfile::tempdir().unwrap();
        let files = vec!["nope.csv".to_string()];
        assert!(matches!(
            RunManifest::build(dir.path(), &files, Value::Null, vec![]),
            Err(Error::ManifestInconsistent(_))
        ));
        let mut m = RunManifest::build(dir.path(), &[], Value::Null, vec![]).unwrap();
        m.files.insert("ghost.csv".into(), "00".into());
        assert!(matches!(
            write_manifest(&m, &dir.path().join(MANIFEST_FILE)),
            Err(Error::ManifestInconsistent(_))
        ));
    }
}
