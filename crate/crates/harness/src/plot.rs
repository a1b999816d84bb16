//! Diversity/accuracy scatter plots as standalone SVG.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use divdecode_core::metrics::MetricReport;

use crate::report::{config_id, Row};

pub const WIDTH: f64 = 640.0;
pub const HEIGHT: f64 = 480.0;
/// Plot area inside the viewbox; extreme data values land on these edges.
pub const LEFT: f64 = 70.0;
pub const RIGHT: f64 = 620.0;
pub const TOP: f64 = 20.0;
pub const BOTTOM: f64 = 410.0;

/// A plottable metric column. `InvMbleu4` is `1 - mbleu4`, so that larger
/// means more diverse on every x axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    SelfCider,
    Div1,
    Div2,
    InvMbleu4,
    OracleCider,
    AvgCider,
    Allspice,
}

impl Axis {
    pub fn label(self) -> &'static str {
        match self {
            Axis::SelfCider => "self_cider",
            Axis::Div1 => "div1",
            Axis::Div2 => "div2",
            Axis::InvMbleu4 => "1 - mbleu4",
            Axis::OracleCider => "oracle_cider",
            Axis::AvgCider => "avg_cider",
            Axis::Allspice => "allspice",
        }
    }

    pub fn value(self, r: &MetricReport) -> Option<f64> {
        match self {
            Axis::SelfCider => r.self_cider,
            Axis::Div1 => Some(r.div1),
            Axis::Div2 => Some(r.div2),
            Axis::InvMbleu4 => r.mbleu4.map(|v| 1.0 - v),
            Axis::OracleCider => Some(r.oracle_cider),
            Axis::AvgCider => Some(r.avg_cider),
            Axis::Allspice => Some(r.allspice),
        }
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "self_cider" => Axis::SelfCider,
            "div1" => Axis::Div1,
            "div2" => Axis::Div2,
            "mbleu4" | "inv_mbleu4" => Axis::InvMbleu4,
            "oracle_cider" => Axis::OracleCider,
            "avg_cider" => Axis::AvgCider,
            "allspice" => Axis::Allspice,
            other => return Err(format!("unknown axis {other:?}")),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TradeoffPoint {
    pub config_id: String,
    pub method: String,
    pub x: f64,
    pub y: f64,
}

/// One point per aggregate row that has finite values on both axes.
pub fn tradeoff_points(rows: &[Row], x: Axis, y: Axis) -> Vec<TradeoffPoint> {
    rows.iter()
        .filter(|r| r.is_aggregate())
        .filter_map(|r| {
            let report = r.report.as_ref()?;
            let (xv, yv) = (x.value(report)?, y.value(report)?);
            (xv.is_finite() && yv.is_finite()).then(|| TradeoffPoint {
                config_id: config_id(&r.params),
                method: r.params.method.to_string(),
                x: xv,
                y: yv,
            })
        })
        .collect()
}

#[derive(Debug, thiserror::Error)]
pub enum PlotError {
    #[error("nothing to plot: no point has finite values on both axes")]
    NoPoints,
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn color(method: &str) -> &'static str {
    match method {
        "sp" => "#1f77b4",
        "topk" => "#ff7f0e",
        "topp" => "#2ca02c",
        "bs" => "#d62728",
        "dbs" => "#9467bd",
        _ => "#7f7f7f",
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Affine map of `[lo, hi]` onto `[a, b]`; a degenerate range maps to the
/// midpoint.
fn scale(v: f64, lo: f64, hi: f64, a: f64, b: f64) -> f64 {
    if hi > lo {
        a + (v - lo) / (hi - lo) * (b - a)
    } else {
        (a + b) / 2.0
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

pub fn render_tradeoff_svg(
    points: &[TradeoffPoint],
    x_label: &str,
    y_label: &str,
) -> Result<String, PlotError> {
    if points.is_empty() {
        return Err(PlotError::NoPoints);
    }
    let (x_lo, x_hi) = bounds(points.iter().map(|p| p.x));
    let (y_lo, y_hi) = bounds(points.iter().map(|p| p.y));
    let px = |v: f64| scale(v, x_lo, x_hi, LEFT, RIGHT);
    let py = |v: f64| scale(v, y_lo, y_hi, BOTTOM, TOP);

    let mut methods: Vec<&str> = Vec::new();
    for p in points {
        if !methods.contains(&p.method.as_str()) {
            methods.push(&p.method);
        }
    }

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<path d="M {LEFT} {TOP} L {LEFT} {BOTTOM} L {RIGHT} {BOTTOM}" fill="none" stroke="black"/>"#
    );
    let tick_y = BOTTOM + 15.0;
    let _ = writeln!(
        s,
        r#"<text x="{LEFT}" y="{tick_y}" text-anchor="start">{x_lo:.3}</text>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{RIGHT}" y="{tick_y}" text-anchor="end">{x_hi:.3}</text>"#
    );
    let tick_x = LEFT - 5.0;
    let _ = writeln!(
        s,
        r#"<text x="{tick_x}" y="{BOTTOM}" text-anchor="end">{y_lo:.3}</text>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{tick_x}" y="{}" text-anchor="end">{y_hi:.3}</text>"#,
        TOP + 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (LEFT + RIGHT) / 2.0,
        BOTTOM + 35.0,
        escape(x_label)
    );
    let (ylx, yly) = (20.0, (TOP + BOTTOM) / 2.0);
    let _ = writeln!(
        s,
        r#"<text x="{ylx}" y="{yly}" text-anchor="middle" transform="rotate(-90 {ylx} {yly})">{}</text>"#,
        escape(y_label)
    );

    for method in &methods {
        let c = color(method);
        let coords: Vec<String> = points
            .iter()
            .filter(|p| p.method == *method)
            .map(|p| format!("{:.2},{:.2}", px(p.x), py(p.y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="1.5"/>"#,
            coords.join(" ")
        );
        for p in points.iter().filter(|p| p.method == *method) {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{c}"><title>{}</title></circle>"#,
                px(p.x),
                py(p.y),
                escape(&p.config_id)
            );
        }
    }

    let legend_y = HEIGHT - 20.0;
    for (i, method) in methods.iter().enumerate() {
        let x = LEFT + 90.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{x}" y="{}" width="12" height="12" fill="{}"/>"#,
            legend_y - 10.0,
            color(method)
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{legend_y}">{}</text>"#,
            x + 16.0,
            escape(method)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_tradeoff_svg(
    points: &[TradeoffPoint],
    x_label: &str,
    y_label: &str,
    path: impl AsRef<Path>,
) -> Result<(), PlotError> {
    let svg = render_tradeoff_svg(points, x_label, y_label)?;
    let path = path.as_ref();
    fs::write(path, svg).map_err(|e| PlotError::Io {
        path: path.display().to_string(),
        source: e,
    })
}
