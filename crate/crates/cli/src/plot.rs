//! Minimal self-contained SVG charts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use swarmfield::sim::{RunSummary, RunTrace};
use swarmfield::ScenarioConfig;

use crate::error::CliError;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#17becf"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Style {
    Line,
    Markers,
    /// Hollow circles.
    Rings,
    /// Crosses.
    Crosses,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub points: Vec<(f64, f64)>,
    pub style: Style,
    pub color: String,
}

#[derive(Debug, Clone)]
pub struct RefLine {
    pub y: f64,
    pub label: String,
}

#[derive(Debug, Clone)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub ref_lines: Vec<RefLine>,
    /// Same scale on both axes.
    pub equal_aspect: bool,
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let nice = if f < 1.5 {
        1.0
    } else if f < 3.5 {
        2.0
    } else if f < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        let d = if lo.abs() > 1e-12 { lo.abs() * 0.1 } else { 1.0 };
        return (lo - d, hi + d);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick_label(v: f64, step: f64) -> String {
    let decimals = if step >= 1.0 { 0 } else { (-step.log10().floor()) as usize };
    let v = if v.abs() < step * 1e-9 { 0.0 } else { v };
    format!("{:.*}", decimals, v)
}

impl Chart {
    fn bounds(&self) -> ((f64, f64), (f64, f64)) {
        let finite = |v: f64| v.is_finite();
        let xs = self.series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).filter(|v| finite(*v));
        let ys = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.1))
            .chain(self.ref_lines.iter().map(|r| r.y))
            .filter(|v| finite(*v));
        let (x0, x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        let (y0, y1) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        let (mut x, mut y) = (padded(x0, x1), padded(y0, y1));
        if self.equal_aspect {
            let pw = WIDTH - LEFT - RIGHT;
            let ph = HEIGHT - TOP - BOTTOM;
            let scale = ((x.1 - x.0) / pw).max((y.1 - y.0) / ph);
            let (cx, cy) = ((x.0 + x.1) / 2.0, (y.0 + y.1) / 2.0);
            x = (cx - scale * pw / 2.0, cx + scale * pw / 2.0);
            y = (cy - scale * ph / 2.0, cy + scale * ph / 2.0);
        }
        (x, y)
    }

    pub fn render(&self) -> String {
        let ((x0, x1), (y0, y1)) = self.bounds();
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );

        // Grid and ticks.
        let xs = nice_step(x1 - x0);
        let mut v = (x0 / xs).ceil() * xs;
        while v <= x1 {
            let px = sx(v);
            let _ = writeln!(
                s,
                r##"<line x1="{px:.2}" y1="{TOP}" x2="{px:.2}" y2="{:.2}" stroke="#e5e5e5"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
                TOP + ph,
                TOP + ph + 16.0,
                tick_label(v, xs)
            );
            v += xs;
        }
        let ys = nice_step(y1 - y0);
        let mut v = (y0 / ys).ceil() * ys;
        while v <= y1 {
            let py = sy(v);
            let _ = writeln!(
                s,
                r##"<line x1="{LEFT}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#e5e5e5"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                LEFT + pw,
                LEFT - 6.0,
                py + 4.0,
                tick_label(v, ys)
            );
            v += ys;
        }
        let _ = writeln!(
            s,
            r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 14.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );

        for series in &self.series {
            let pts: Vec<(f64, f64)> =
                series.points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()).map(|p| (sx(p.0), sy(p.1))).collect();
            match series.style {
                Style::Line => {
                    if pts.len() < 2 {
                        continue;
                    }
                    let mut d = String::new();
                    for (k, (x, y)) in pts.iter().enumerate() {
                        let _ = write!(d, "{}{x:.2},{y:.2}", if k == 0 { "M" } else { " L" });
                    }
                    let _ = writeln!(
                        s,
                        r#"<path d="{d}" fill="none" stroke="{}" stroke-width="1.2"/>"#,
                        series.color
                    );
                }
                Style::Markers => {
                    for (x, y) in pts {
                        let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3.5" fill="{}"/>"#, series.color);
                    }
                }
                Style::Rings => {
                    for (x, y) in pts {
                        let _ = writeln!(
                            s,
                            r#"<circle cx="{x:.2}" cy="{y:.2}" r="4.5" fill="none" stroke="{}" stroke-width="1.5"/>"#,
                            series.color
                        );
                    }
                }
                Style::Crosses => {
                    for (x, y) in pts {
                        let _ = writeln!(
                            s,
                            r#"<path d="M{:.2},{:.2} L{:.2},{:.2} M{:.2},{:.2} L{:.2},{:.2}" stroke="{}" stroke-width="1.5"/>"#,
                            x - 4.0,
                            y - 4.0,
                            x + 4.0,
                            y + 4.0,
                            x - 4.0,
                            y + 4.0,
                            x + 4.0,
                            y - 4.0,
                            series.color
                        );
                    }
                }
            }
        }

        for r in &self.ref_lines {
            if !r.y.is_finite() {
                continue;
            }
            let py = sy(r.y);
            let _ = writeln!(
                s,
                r##"<line class="ref" data-y="{}" x1="{LEFT}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#d62728" stroke-dasharray="6 4" stroke-width="1.5"/>"##,
                r.y,
                LEFT + pw
            );
            let _ = writeln!(
                s,
                r##"<text x="{:.2}" y="{:.2}" text-anchor="end" fill="#d62728">{}</text>"##,
                LEFT + pw - 4.0,
                py - 5.0,
                escape(&r.label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

pub fn min_distance_chart(trace: &RunTrace, d_m: f64) -> Chart {
    let points = trace
        .records
        .iter()
        .filter(|r| r.agents.len() >= 2)
        .map(|r| (r.t, r.min_pair_distance))
        .collect();
    Chart {
        title: "Smallest pairwise distance".into(),
        x_label: "time (s)".into(),
        y_label: "min distance (m)".into(),
        series: vec![Series { points, style: Style::Line, color: PALETTE[0].into() }],
        ref_lines: vec![RefLine { y: d_m, label: format!("d_m = {d_m} m") }],
        equal_aspect: false,
    }
}

pub fn final_distance_chart(summary: &RunSummary, eps_f: f64) -> Chart {
    let points = summary.final_goal_distances.iter().enumerate().map(|(i, d)| (i as f64, *d)).collect();
    Chart {
        title: "Final distance from the goal".into(),
        x_label: "agent".into(),
        y_label: "distance (m)".into(),
        series: vec![Series { points, style: Style::Markers, color: PALETTE[0].into() }],
        ref_lines: vec![RefLine { y: eps_f, label: format!("eps_f = {eps_f:.2} m") }],
        equal_aspect: false,
    }
}

pub fn final_heading_chart(summary: &RunSummary) -> Chart {
    let points = summary.final_headings.iter().enumerate().map(|(i, h)| (i as f64, *h)).collect();
    let w = summary.wind_opposite_heading;
    Chart {
        title: "Final orientation".into(),
        x_label: "agent".into(),
        y_label: "heading (rad)".into(),
        series: vec![Series { points, style: Style::Markers, color: PALETTE[0].into() }],
        ref_lines: vec![RefLine { y: w, label: format!("against the wind = {w:.3} rad") }],
        equal_aspect: false,
    }
}

/// Paths every `stride` steps, with start, goal and final markers.
pub fn trajectory_chart(trace: &RunTrace, scenario: &ScenarioConfig, stride: usize) -> Chart {
    let stride = stride.max(1);
    let n = scenario.agents.len();
    let mut series: Vec<Series> = (0..n)
        .map(|i| Series {
            points: trace
                .records
                .iter()
                .step_by(stride)
                .chain(trace.records.last())
                .map(|r| (r.agents[i].state.position.x, r.agents[i].state.position.y))
                .collect(),
            style: Style::Line,
            color: PALETTE[i % PALETTE.len()].into(),
        })
        .collect();
    series.push(Series {
        points: scenario.agents.iter().map(|a| (a.initial.position.x, a.initial.position.y)).collect(),
        style: Style::Rings,
        color: "#333333".into(),
    });
    series.push(Series {
        points: scenario.agents.iter().map(|a| (a.params.goal.x, a.params.goal.y)).collect(),
        style: Style::Crosses,
        color: "#d62728".into(),
    });
    if let Some(last) = trace.records.last() {
        series.push(Series {
            points: last.agents.iter().map(|a| (a.state.position.x, a.state.position.y)).collect(),
            style: Style::Markers,
            color: "#000000".into(),
        });
    }
    Chart {
        title: "Initial positions (o), goals (x) and positions reached".into(),
        x_label: "x (m)".into(),
        y_label: "y (m)".into(),
        series,
        ref_lines: Vec::new(),
        equal_aspect: true,
    }
}

pub fn batch_min_distance_chart(runs: &[RunSummary], d_m: f64) -> Chart {
    Chart {
        title: "Smallest pairwise distance per run".into(),
        x_label: "seed".into(),
        y_label: "min distance (m)".into(),
        series: vec![Series {
            points: runs.iter().map(|r| (r.seed as f64, r.min_distance)).collect(),
            style: Style::Markers,
            color: PALETTE[0].into(),
        }],
        ref_lines: vec![RefLine { y: d_m, label: format!("d_m = {d_m} m") }],
        equal_aspect: false,
    }
}

pub fn batch_goal_distance_chart(runs: &[RunSummary], eps_f: f64) -> Chart {
    Chart {
        title: "Largest final goal distance per run".into(),
        x_label: "seed".into(),
        y_label: "distance (m)".into(),
        series: vec![Series {
            points: runs
                .iter()
                .map(|r| (r.seed as f64, r.final_goal_distances.iter().copied().fold(0.0, f64::max)))
                .collect(),
            style: Style::Markers,
            color: PALETTE[0].into(),
        }],
        ref_lines: vec![RefLine { y: eps_f, label: format!("eps_f = {eps_f:.2} m") }],
        equal_aspect: false,
    }
}

fn write_svg(dir: &Path, name: &str, chart: &Chart) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    std::fs::write(&path, chart.render()).map_err(|source| CliError::Io { path: path.clone(), source })?;
    Ok(path)
}

/// Writes the four single-run figures and returns their paths.
pub fn emit_plots(
    trace: &RunTrace,
    summary: &RunSummary,
    scenario: &ScenarioConfig,
    dir: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    Ok(vec![
        write_svg(dir, "min_distance.svg", &min_distance_chart(trace, scenario.safety.d_m))?,
        write_svg(dir, "final_distance.svg", &final_distance_chart(summary, scenario.noise.final_tolerance))?,
        write_svg(dir, "final_heading.svg", &final_heading_chart(summary))?,
        write_svg(dir, "trajectories.svg", &trajectory_chart(trace, scenario, 10))?,
    ])
}

pub fn emit_batch_plots(runs: &[RunSummary], scenario: &ScenarioConfig, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    Ok(vec![
        write_svg(dir, "batch_min_distance.svg", &batch_min_distance_chart(runs, scenario.safety.d_m))?,
        write_svg(dir, "batch_goal_distance.svg", &batch_goal_distance_chart(runs, scenario.noise.final_tolerance))?,
    ])
}
