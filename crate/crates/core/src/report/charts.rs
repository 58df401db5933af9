use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::metrics::{flow_comparison, voltage_trajectory};
use super::ReportError;
use crate::network::BusId;
use crate::scenario::{worst_swing_month, StudyView};

/// Marker of the comment that embeds a chart's data as JSON.
pub const CHART_DATA_PREFIX: &str = "<!-- chart-data ";

const MONTHS: [&str; 12] = [
    "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec",
];

const PALETTE: [&str; 12] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#393b79", "#ad494a",
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ChartSelection {
    /// One line per month of the EV scenario's |V| at the bus.
    Voltage { bus: BusId, months: Vec<u32> },
    /// Base vs EV |V| at the bus in its worst-swing month.
    Swing { bus: BusId },
    /// Base vs EV from-end P, one chart per month.
    Flow {
        from: BusId,
        to: BusId,
        months: Vec<u32>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    pub values: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartData {
    pub title: String,
    pub kind: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

impl ChartData {
    /// Recovers the embedded data from an SVG written by [`emit_charts`].
    pub fn from_svg(svg: &str) -> Option<ChartData> {
        let start = svg.find(CHART_DATA_PREFIX)? + CHART_DATA_PREFIX.len();
        let end = start + svg[start..].find(" -->")?;
        serde_json::from_str(&svg[start..end]).ok()
    }
}

fn month_name(m: u32) -> String {
    MONTHS
        .get(m as usize - 1)
        .map_or_else(|| m.to_string(), |s| s.to_string())
}

fn file_part(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

const W: f64 = 960.0;
const H: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 130.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

fn render(chart: &ChartData) -> String {
    let steps = chart
        .series
        .iter()
        .map(|s| s.values.len())
        .max()
        .unwrap_or(0)
        .max(1);
    let values = chart
        .series
        .iter()
        .flat_map(|s| s.values.iter().flatten().copied());
    let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| {
        (l.min(v), h.max(v))
    });
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if chart.kind == "bars" {
        lo = lo.min(0.0);
        hi = hi.max(0.0);
    }
    let pad = if hi > lo {
        0.05 * (hi - lo)
    } else {
        0.5 * lo.abs().max(1e-3)
    };
    let (lo, hi) = (lo - pad, hi + pad);
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let x = |k: f64| LEFT + pw * k / steps as f64;
    let y = |v: f64| TOP + ph * (hi - v) / (hi - lo);

    let mut svg = String::new();
    let json = serde_json::to_string(chart)
        .expect("chart data serializes")
        .replace("--", "-\\u002d");
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(svg, "{CHART_DATA_PREFIX}{json} -->");
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        escape(&chart.title)
    );
    let _ = writeln!(
        svg,
        r#"<path d="M{LEFT} {TOP} V{} H{}" fill="none" stroke="black"/>"#,
        TOP + ph,
        LEFT + pw
    );
    for i in 0..=4 {
        let v = lo + (hi - lo) * i as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{v:.4}</text>"#,
            LEFT - 6.0,
            y(v) + 4.0
        );
    }
    for k in (0..=steps).step_by(12) {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{k}</text>"#,
            x(k as f64),
            TOP + ph + 16.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        H - 12.0,
        escape(&chart.x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&chart.y_label)
    );

    let n = chart.series.len().max(1) as f64;
    for (si, s) in chart.series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let _ = writeln!(
            svg,
            r#"<g class="series" data-label="{}">"#,
            escape(&s.label)
        );
        if chart.kind == "bars" {
            let bw = pw / steps as f64 / n;
            for (k, v) in s.values.iter().enumerate() {
                if let Some(v) = v {
                    let (top, bottom) = (y(v.max(0.0)), y(v.min(0.0)));
                    let _ = writeln!(
                        svg,
                        r#"<rect x="{:.2}" y="{top:.2}" width="{bw:.2}" height="{:.2}" fill="{color}"/>"#,
                        x(k as f64) + bw * si as f64,
                        bottom - top
                    );
                }
            }
        } else {
            let mut segment: Vec<String> = Vec::new();
            let flush = |seg: &mut Vec<String>, svg: &mut String| {
                if !seg.is_empty() {
                    let _ = writeln!(
                        svg,
                        r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                        seg.join(" ")
                    );
                    seg.clear();
                }
            };
            for (k, v) in s.values.iter().enumerate() {
                match v {
                    Some(v) => segment.push(format!("{:.2},{:.2}", x(k as f64 + 0.5), y(*v))),
                    None => flush(&mut segment, &mut svg),
                }
            }
            flush(&mut segment, &mut svg);
        }
        let ly = TOP + 16.0 * si as f64;
        let _ = writeln!(
            svg,
            r#"<rect x="{}" y="{ly}" width="12" height="12" fill="{color}"/><text x="{}" y="{}" font-family="sans-serif" font-size="12">{}</text>"#,
            W - RIGHT + 12.0,
            W - RIGHT + 30.0,
            ly + 11.0,
            escape(&s.label)
        );
        svg.push_str("</g>\n");
    }
    svg.push_str("</svg>\n");
    svg
}

fn write_chart(out_dir: &Path, name: String, chart: &ChartData) -> Result<PathBuf, ReportError> {
    let path = out_dir.join(name);
    fs::write(&path, render(chart)).map_err(|e| ReportError::io(&path, e))?;
    Ok(path)
}

/// Writes one SVG per voltage or swing selection and one per month of a flow
/// selection. `base` and `ev` name the compared scenarios.
pub fn emit_charts(
    view: &impl StudyView,
    selections: &[ChartSelection],
    base: &str,
    ev: &str,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, ReportError> {
    for label in [base, ev] {
        if !view.scenario_labels().iter().any(|l| l == label) {
            return Err(ReportError::UnknownKey(format!("scenario {label}")));
        }
    }
    fs::create_dir_all(out_dir).map_err(|e| ReportError::io(out_dir, e))?;
    let mut written = Vec::new();
    for sel in selections {
        match sel {
            ChartSelection::Voltage { bus, months } => {
                let series = months
                    .iter()
                    .map(|&m| {
                        voltage_trajectory(view, bus, m, ev).map(|t| Series {
                            label: month_name(m),
                            values: t.values,
                        })
                    })
                    .collect::<Result<_, _>>()?;
                let chart = ChartData {
                    title: format!("Voltage at bus {bus}, {ev}"),
                    kind: "line".into(),
                    x_label: "15-minute step".into(),
                    y_label: "|V| (pu)".into(),
                    series,
                };
                written.push(write_chart(
                    out_dir,
                    format!("voltage_{}.svg", file_part(bus.as_str())),
                    &chart,
                )?);
            }
            ChartSelection::Swing { bus } => {
                if !view.has_bus(bus) {
                    return Err(ReportError::UnknownKey(format!("bus {bus}")));
                }
                let rec = worst_swing_month(view, bus, base, ev)?;
                let series = [base, ev]
                    .iter()
                    .map(|&l| {
                        voltage_trajectory(view, bus, rec.month, l).map(|t| Series {
                            label: l.to_string(),
                            values: t.values,
                        })
                    })
                    .collect::<Result<_, _>>()?;
                let chart = ChartData {
                    title: format!(
                        "Worst voltage swing at bus {bus}: {} (delta {} pu)",
                        month_name(rec.month),
                        rec.delta_pu
                    ),
                    kind: "bars".into(),
                    x_label: "15-minute step".into(),
                    y_label: "|V| (pu)".into(),
                    series,
                };
                written.push(write_chart(
                    out_dir,
                    format!("swing_{}.svg", file_part(bus.as_str())),
                    &chart,
                )?);
            }
            ChartSelection::Flow { from, to, months } => {
                let pairs = flow_comparison(view, from, to, base, ev, months)?;
                for &m in months {
                    let month_pairs: Vec<_> = pairs.iter().filter(|p| p.month == m).collect();
                    let chart = ChartData {
                        title: format!("Flow {from}->{to}, {}", month_name(m)),
                        kind: "bars".into(),
                        x_label: "15-minute step".into(),
                        y_label: "P (MW)".into(),
                        series: vec![
                            Series {
                                label: base.to_string(),
                                values: month_pairs.iter().map(|p| p.base_mw).collect(),
                            },
                            Series {
                                label: ev.to_string(),
                                values: month_pairs.iter().map(|p| p.ev_mw).collect(),
                            },
                        ],
                    };
                    let name = format!(
                        "flow_{}_{}_m{m:02}.svg",
                        file_part(from.as_str()),
                        file_part(to.as_str())
                    );
                    written.push(write_chart(out_dir, name, &chart)?);
                }
            }
        }
    }
    Ok(written)
}
