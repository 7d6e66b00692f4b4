//! Minimal deterministic SVG line charts for run directories.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::optim::TraceRow;

use super::output::{self, Row};

pub const SER_PLOT: &str = "ser.svg";
pub const CONVERGENCE_PLOT: &str = "convergence.svg";

const PLOT_WIDTH: f64 = 520.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
/// Legend width per label character (12 px sans-serif).
const CHAR_WIDTH: f64 = 7.0;
const MAX_MARKERS: usize = 12;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const PALETTE: &[&str] = &[
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dash: Dash,
    /// Series sharing a colour index are drawn in the same colour.
    pub color: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dash {
    Solid,
    Dashed,
    Dotted,
}

impl Dash {
    fn attr(self) -> &'static str {
        match self {
            Dash::Solid => "",
            Dash::Dashed => r#" stroke-dasharray="6 4""#,
            Dash::Dotted => r#" stroke-dasharray="2 3""#,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub series: Vec<Series>,
}

/// Writes every chart that `dir` has data for; returns the written paths.
pub fn plot_dir(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let results = dir.join(output::RESULTS_FILE);
    if results.is_file() {
        if let Some(chart) = ser_chart(&output::read_rows(&results)?) {
            let path = dir.join(SER_PLOT);
            std::fs::write(&path, chart.to_svg())?;
            written.push(path);
        }
    }
    let traces = dir.join(output::TRACE_DIR);
    if traces.is_dir() {
        if let Some(chart) = convergence_chart(&read_traces(&traces)?) {
            let path = dir.join(CONVERGENCE_PLOT);
            std::fs::write(&path, chart.to_svg())?;
            written.push(path);
        }
    }
    if written.is_empty() {
        return Err(Error::NothingToPlot(dir.display().to_string()));
    }
    Ok(written)
}

/// Sweep dimension of a result row, used to pick the x axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Axis {
    RhoDb,
    N,
    M,
    K,
    SigmaE2,
    S,
}

const AXES: [Axis; 6] = [Axis::RhoDb, Axis::N, Axis::M, Axis::K, Axis::SigmaE2, Axis::S];

impl Axis {
    fn value(self, r: &Row) -> f64 {
        match self {
            Axis::RhoDb => r.rho_db,
            Axis::N => r.n_elements as f64,
            Axis::M => r.m_antennas as f64,
            Axis::K => r.k_users as f64,
            Axis::SigmaE2 => r.sigma_e2,
            Axis::S => r.specular as f64,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Axis::RhoDb => "rho/sigma^2 (dB)",
            Axis::N => "RIS elements N",
            Axis::M => "BS antennas M",
            Axis::K => "users K",
            Axis::SigmaE2 => "CSI error variance",
            Axis::S => "specular paths S",
        }
    }

    fn short(self) -> &'static str {
        match self {
            Axis::RhoDb => "dB",
            Axis::N => "N",
            Axis::M => "M",
            Axis::K => "K",
            Axis::SigmaE2 => "e2",
            Axis::S => "S",
        }
    }
}

fn distinct(rows: &[&Row], axis: Axis) -> usize {
    let mut v: Vec<u64> = rows.iter().map(|r| axis.value(r).to_bits()).collect();
    v.sort_unstable();
    v.dedup();
    v.len()
}

/// Mean SER over seeds against the first swept dimension; one curve per
/// scheme, metric and combination of the remaining swept dimensions.
pub fn ser_chart(rows: &[Row]) -> Option<Chart> {
    let rows: Vec<&Row> = rows
        .iter()
        .filter(|r| matches!(r.metric.as_str(), "ser_analytic" | "ser_mc") && r.value.is_finite())
        .collect();
    if rows.is_empty() {
        return None;
    }
    let varying: Vec<Axis> = AXES.iter().copied().filter(|&a| distinct(&rows, a) > 1).collect();
    let x_axis = varying.first().copied().unwrap_or(Axis::RhoDb);
    let others: Vec<Axis> = varying.iter().copied().filter(|&a| a != x_axis).collect();

    // (curve, metric) -> x -> (sum, count)
    let mut acc: BTreeMap<(String, bool), BTreeMap<OrdF64, (f64, usize)>> = BTreeMap::new();
    for r in &rows {
        let mut curve = r.scheme.clone();
        for a in &others {
            let _ = write!(curve, " {}={}", a.short(), fmt_num(a.value(r)));
        }
        let cell = acc
            .entry((curve, r.metric == "ser_mc"))
            .or_default()
            .entry(OrdF64(x_axis.value(r)))
            .or_insert((0.0, 0));
        cell.0 += r.value;
        cell.1 += 1;
    }
    let curves: Vec<&String> = {
        let mut c: Vec<&String> = acc.keys().map(|k| &k.0).collect();
        c.dedup();
        c
    };
    let color_of = |curve: &String| curves.iter().position(|c| *c == curve).unwrap_or(0);
    let series = acc
        .iter()
        .map(|((curve, mc), pts)| Series {
            label: format!("{curve} {}", if *mc { "sim" } else { "analytic" }),
            dash: if *mc { Dash::Dashed } else { Dash::Solid },
            color: color_of(curve),
            points: pts.iter().map(|(x, (s, n))| (x.0, s / *n as f64)).collect(),
        })
        .collect();
    Some(Chart {
        title: "average SER".into(),
        x_label: x_axis.label().into(),
        y_label: "SER".into(),
        log_y: true,
        series,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Trace files grouped by scheme label (`<label>__<job>.csv`).
pub fn read_traces(dir: &Path) -> Result<BTreeMap<String, Vec<Vec<TraceRow>>>> {
    let mut names: Vec<PathBuf> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    names.sort();
    let mut out: BTreeMap<String, Vec<Vec<TraceRow>>> = BTreeMap::new();
    for path in names {
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else { continue };
        if path.extension().and_then(|e| e.to_str()) != Some("csv") {
            continue;
        }
        let label = stem.rsplit_once("__").map_or(stem, |(l, _)| l).replace('+', "/");
        let rows = csv::Reader::from_path(&path)?
            .deserialize()
            .collect::<std::result::Result<Vec<TraceRow>, _>>()?;
        if !rows.is_empty() {
            out.entry(label).or_default().push(rows);
        }
    }
    Ok(out)
}

/// Best, mean and worst population fitness against evaluations, averaged
/// over runs. A run that stopped early keeps contributing its final values.
pub fn convergence_chart(traces: &BTreeMap<String, Vec<Vec<TraceRow>>>) -> Option<Chart> {
    type Stat = (&'static str, Dash, fn(&TraceRow) -> f64);
    let stats: [Stat; 3] = [
        ("best", Dash::Solid, |r| r.best),
        ("mean", Dash::Dashed, |r| r.mean),
        ("worst", Dash::Dotted, |r| r.worst),
    ];
    let mut series = Vec::new();
    for (color, (label, runs)) in traces.iter().enumerate() {
        let mut grid: Vec<usize> = runs.iter().flatten().map(|r| r.nfe).collect();
        grid.sort_unstable();
        grid.dedup();
        for (stat, dash, get) in stats {
            let points = grid
                .iter()
                .filter_map(|&nfe| {
                    let vals: Vec<f64> = runs
                        .iter()
                        .filter_map(|run| run.iter().take_while(|r| r.nfe <= nfe).last().map(get))
                        .collect();
                    (vals.len() == runs.len()).then(|| (nfe as f64, vals.iter().sum::<f64>() / vals.len() as f64))
                })
                .collect::<Vec<_>>();
            if !points.is_empty() {
                series.push(Series { label: format!("{label} {stat}"), points, dash, color });
            }
        }
    }
    if series.is_empty() {
        return None;
    }
    let log_y = series.iter().all(|s| s.points.iter().all(|p| p.1 > 0.0));
    Some(Chart {
        title: "convergence (mean over runs)".into(),
        x_label: "function evaluations".into(),
        y_label: "fitness".into(),
        log_y,
        series,
    })
}

/// Compact, locale-free number formatting for labels.
fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Chart {
    pub fn to_svg(&self) -> String {
        let pts: Vec<(f64, f64)> = self.series.iter().flat_map(|s| s.points.iter().copied()).collect();
        // Zeros on a log axis are drawn at the floor of the visible range.
        let positive_min = pts.iter().map(|p| p.1).filter(|&y| y > 0.0).fold(f64::INFINITY, f64::min);
        let floor = if positive_min.is_finite() { positive_min / 10.0 } else { 1e-6 };
        let ty = |y: f64| if self.log_y { y.max(floor).log10() } else { y };

        let (mut x0, mut x1) = min_max(pts.iter().map(|p| p.0));
        let (mut y0, mut y1) = min_max(pts.iter().map(|p| ty(p.1)));
        if x1 - x0 <= 0.0 {
            (x0, x1) = (x0 - 1.0, x1 + 1.0);
        }
        if self.log_y {
            (y0, y1) = (y0.floor(), y1.ceil());
        }
        if y1 - y0 <= 0.0 {
            (y0, y1) = (y0 - 1.0, y1 + 1.0);
        }
        let legend = 40.0 + CHAR_WIDTH * self.series.iter().map(|s| s.label.chars().count()).max().unwrap_or(0) as f64;
        let width = LEFT + PLOT_WIDTH + legend;
        let pw = PLOT_WIDTH;
        let ph = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{HEIGHT}" viewBox="0 0 {width} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{width}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="18" text-anchor="middle" font-size="14">{}</text>"#,
            LEFT + pw / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(s, r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##);

        for (v, label) in x_ticks(x0, x1) {
            let x = sx(v);
            let _ = writeln!(
                s,
                r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#ccc"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{label}</text>"##,
                TOP,
                TOP + ph,
                TOP + ph + 16.0
            );
        }
        for (v, label) in y_ticks(y0, y1, self.log_y) {
            let y = sy(v);
            let _ = writeln!(
                s,
                r##"<line x1="{LEFT}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ccc"/><text x="{:.1}" y="{:.1}" text-anchor="end">{label}</text>"##,
                LEFT + pw,
                LEFT - 6.0,
                y + 4.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 18.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );

        for (i, series) in self.series.iter().enumerate() {
            let color = PALETTE[series.color % PALETTE.len()];
            let dash = series.dash.attr();
            let path: Vec<String> =
                series.points.iter().map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(ty(y)))).collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
                path.join(" ")
            );
            for &(x, y) in series.points.iter().filter(|_| series.points.len() <= MAX_MARKERS) {
                let _ = writeln!(s, r#"<circle cx="{:.1}" cy="{:.1}" r="2.5" fill="{color}"/>"#, sx(x), sy(ty(y)));
            }
            let ly = TOP + 10.0 + 18.0 * i as f64;
            let lx = LEFT + pw + 12.0;
            let _ = writeln!(
                s,
                r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"{dash}/><text x="{:.1}" y="{:.1}">{}</text>"#,
                lx + 20.0,
                lx + 26.0,
                ly + 4.0,
                escape(&series.label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn min_max(it: impl Iterator<Item = f64>) -> (f64, f64) {
    it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn nice_step(span: f64, target: usize) -> f64 {
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|&s| s >= raw).unwrap_or(10.0 * mag)
}

fn x_ticks(lo: f64, hi: f64) -> Vec<(f64, String)> {
    let step = nice_step(hi - lo, 6);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).map(|v| (v, fmt_num(v))).collect()
}

fn y_ticks(lo: f64, hi: f64, log: bool) -> Vec<(f64, String)> {
    if log {
        let stride = (((hi - lo) / 8.0).ceil() as i64).max(1);
        let mantissas: &[f64] = if hi - lo <= 2.0 { &[1.0, 2.0, 5.0] } else { &[1.0] };
        (lo as i64..=hi as i64)
            .step_by(stride as usize)
            .flat_map(|e| mantissas.iter().map(move |&m| (e, m)))
            .map(|(e, m)| (e as f64 + m.log10(), if m == 1.0 { format!("1e{e}") } else { format!("{m}e{e}") }))
            .filter(|&(v, _)| v <= hi + 1e-12)
            .collect()
    } else {
        x_ticks(lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(scheme: &str, metric: &str, rho: f64, seed: u64, value: f64) -> Row {
        Row {
            recipe: "t".into(),
            seed,
            scheme: scheme.into(),
            m_antennas: 16,
            n_elements: 32,
            k_users: 2,
            order: 16,
            rho_db: rho,
            sigma_e2: 0.0,
            specular: 0,
            metric: metric.into(),
            value,
        }
    }

    #[test]
    fn ser_chart_averages_over_seeds() {
        let rows = vec![
            row("rzf", "ser_analytic", 0.0, 1, 0.2),
            row("rzf", "ser_analytic", 0.0, 2, 0.4),
            row("rzf", "ser_analytic", 5.0, 1, 0.1),
            row("rzf", "ser_mc", 0.0, 1, 0.3),
            row("rzf", "nfe", 0.0, 1, 1e4),
            row("zf", "error", 0.0, 1, f64::NAN),
        ];
        let c = ser_chart(&rows).unwrap();
        assert_eq!(c.x_label, Axis::RhoDb.label());
        assert_eq!(c.series.len(), 2);
        let analytic = c.series.iter().find(|s| s.label == "rzf analytic").unwrap();
        assert!((analytic.points[0].1 - 0.3).abs() < 1e-15);
        assert_eq!(analytic.points[1], (5.0, 0.1));
    }

    #[test]
    fn x_axis_is_the_first_swept_dimension() {
        let mut a = row("rzf", "ser_analytic", 5.0, 1, 0.2);
        let mut b = a.clone();
        a.n_elements = 8;
        b.n_elements = 16;
        b.k_users = 4;
        let c = ser_chart(&[a, b]).unwrap();
        assert_eq!(c.x_label, Axis::N.label());
        assert!(c.series.iter().all(|s| s.label.contains("K=")));
    }

    #[test]
    fn convergence_holds_finished_runs_at_their_final_value() {
        let t = |nfe, best| TraceRow { generation: 0, best, worst: best, mean: best, lambda: 0, nfe };
        let mut traces = BTreeMap::new();
        traces.insert("de".to_string(), vec![vec![t(10, 1.0), t(20, 0.5)], vec![t(10, 0.8)]]);
        let c = convergence_chart(&traces).unwrap();
        assert_eq!(c.series.len(), 3);
        assert_eq!(c.series[0].label, "de best");
        assert_eq!(c.series[0].points, vec![(10.0, 0.9), (20.0, 0.65)]);
        assert!(c.log_y);
    }

    #[test]
    fn svg_is_deterministic_and_handles_zeros() {
        let rows = vec![row("mrt", "ser_analytic", 0.0, 1, 0.5), row("mrt", "ser_analytic", 20.0, 1, 0.0)];
        let c = ser_chart(&rows).unwrap();
        let a = c.to_svg();
        assert_eq!(a, c.to_svg());
        assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
        assert!(!a.contains("NaN") && !a.contains("inf"));
    }

    #[test]
    fn empty_directory_has_nothing_to_plot() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(plot_dir(dir.path()), Err(Error::NothingToPlot(_))));
    }
}
