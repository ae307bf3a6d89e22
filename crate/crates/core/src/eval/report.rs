//! CSV and minimal SVG output for traces, scans and score tables.

use std::fmt::Write as _;
use std::io::Write;

use super::{BiasScan, EvalError, ImprovementRow, ModelMetrics, Trace};

/// Writes `x,<name>...` rows. All traces must share the same xs.
pub fn write_traces_csv<W: Write>(w: W, series: &[(&str, &Trace)]) -> Result<(), EvalError> {
    let Some((_, first)) = series.first() else {
        return Ok(());
    };
    if series.iter().any(|(_, t)| t.xs() != first.xs()) {
        return Err(EvalError::InvalidTrace("traces sample different xs".into()));
    }
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["x"];
    header.extend(series.iter().map(|(n, _)| *n));
    out.write_record(&header)?;
    for (i, x) in first.xs().iter().enumerate() {
        let mut row = vec![x.to_string()];
        row.extend(series.iter().map(|(_, t)| t.ys()[i].to_string()));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Writes `difference,similarity` rows followed by nothing else; the binned
/// mean goes to [`write_binned_csv`].
pub fn write_scatter_csv<W: Write>(w: W, scan: &BiasScan) -> Result<(), EvalError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["difference", "similarity"])?;
    for (d, s) in &scan.pairs {
        out.write_record([d.to_string(), s.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_binned_csv<W: Write>(w: W, scan: &BiasScan) -> Result<(), EvalError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["bin_center", "mean_similarity", "count"])?;
    let b = &scan.binned_mean;
    for i in 0..b.centers.len() {
        out.write_record([
            b.centers[i].to_string(),
            b.means[i].to_string(),
            b.counts[i].to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Score table with one row per model plus the improvement row. Values are
/// printed with two decimals, relative improvements with one.
pub fn write_score_table<W: Write>(
    w: W,
    metrics: &[ModelMetrics],
    overall: &[(String, f64)],
    improvement: &ImprovementRow,
) -> Result<(), EvalError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "model",
        "coherence",
        "faithfulness",
        "sensitivity",
        "overall",
    ])?;
    for (m, (_, o)) in metrics.iter().zip(overall) {
        out.write_record([
            m.model_id.clone(),
            format!("{:.2}", m.coherence),
            format!("{:.2}", m.faithfulness),
            format!("{:.2}", m.sensitivity),
            format!("{o:.2}"),
        ])?;
    }
    let cell = |i: &super::Improvement| format!("{:.2} ({:.1}%)", i.absolute, i.relative_pct);
    out.write_record([
        "Improvement".to_string(),
        cell(&improvement.coherence),
        cell(&improvement.faithfulness),
        cell(&improvement.sensitivity),
        cell(&improvement.overall),
    ])?;
    out.flush()?;
    Ok(())
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 48.0;
const COLORS: [&str; 4] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728"];

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn fit<'a>(points: impl Iterator<Item = (&'a f64, &'a f64)>) -> Frame {
        let mut f = Frame {
            x0: f64::INFINITY,
            x1: f64::NEG_INFINITY,
            y0: f64::INFINITY,
            y1: f64::NEG_INFINITY,
        };
        for (x, y) in points {
            f.x0 = f.x0.min(*x);
            f.x1 = f.x1.max(*x);
            f.y0 = f.y0.min(*y);
            f.y1 = f.y1.max(*y);
        }
        if f.x1 <= f.x0 {
            f.x1 = f.x0 + 1.0;
        }
        if f.y1 <= f.y0 {
            f.y1 = f.y0 + 1.0;
        }
        f
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn open_svg(title: &str, f: &Frame) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<polyline points="{m},{t} {m},{b} {r},{b}" fill="none" stroke="black"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    for (x, y, anchor, label) in [
        (MARGIN, HEIGHT - MARGIN + 16.0, "start", f.x0),
        (WIDTH - MARGIN, HEIGHT - MARGIN + 16.0, "end", f.x1),
        (MARGIN - 4.0, HEIGHT - MARGIN, "end", f.y0),
        (MARGIN - 4.0, MARGIN + 4.0, "end", f.y1),
    ] {
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{y}" text-anchor="{anchor}" font-family="sans-serif" font-size="10">{label:.3}</text>"#
        );
    }
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Line plot with one polyline (and point markers) per trace.
pub fn traces_svg(title: &str, series: &[(&str, &Trace)]) -> String {
    let f = Frame::fit(series.iter().flat_map(|(_, t)| t.xs().iter().zip(t.ys())));
    let mut s = open_svg(title, &f);
    for (k, (name, t)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = t
            .xs()
            .iter()
            .zip(t.ys())
            .map(|(x, y)| format!("{:.2},{:.2}", f.px(*x), f.py(*y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            pts.join(" ")
        );
        for (x, y) in t.xs().iter().zip(t.ys()) {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#,
                f.px(*x),
                f.py(*y)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" fill="{color}">{}</text>"#,
            WIDTH - MARGIN - 120.0,
            MARGIN + 14.0 * k as f64,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Scatter of all pairs with the binned mean drawn on top.
pub fn scatter_svg(title: &str, scan: &BiasScan) -> String {
    let b = &scan.binned_mean;
    let f = Frame::fit(
        scan.pairs
            .iter()
            .map(|(d, s)| (d, s))
            .chain(b.centers.iter().zip(&b.means)),
    );
    let mut s = open_svg(title, &f);
    for (d, sim) in &scan.pairs {
        let _ = writeln!(
            s,
            r##"<circle cx="{:.2}" cy="{:.2}" r="1.5" fill="#1f77b4" fill-opacity="0.4"/>"##,
            f.px(*d),
            f.py(*sim)
        );
    }
    let pts: Vec<String> = b
        .centers
        .iter()
        .zip(&b.means)
        .map(|(x, y)| format!("{:.2},{:.2}", f.px(*x), f.py(*y)))
        .collect();
    let _ = writeln!(
        s,
        r##"<polyline points="{}" fill="none" stroke="#ff7f0e" stroke-width="2"/>"##,
        pts.join(" ")
    );
    s.push_str("</svg>\n");
    s
}
