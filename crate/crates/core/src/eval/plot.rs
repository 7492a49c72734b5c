//! Minimal hand-written SVG charts.

use std::fmt::Write as _;
use std::path::Path;

use super::metrics::SnrTable;
use crate::error::{Error, Result};

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 50.0;
const PALETTE: [&str; 12] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
    "#393b79", "#637939",
];

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{}</text>\n",
        W / 2.0,
        escape(title)
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axes(s: &mut String) {
    let _ = writeln!(
        s,
        "<path d=\"M{PAD} {PAD} V{} H{}\" fill=\"none\" stroke=\"black\"/>",
        H - PAD,
        W - PAD
    );
}

fn scale(v: f64, lo: f64, hi: f64, out_lo: f64, out_hi: f64) -> f64 {
    if hi == lo {
        (out_lo + out_hi) / 2.0
    } else {
        out_lo + (v - lo) / (hi - lo) * (out_hi - out_lo)
    }
}

/// Accuracy against SNR: one polyline vertex per table row.
pub fn accuracy_curve_svg(table: &SnrTable, title: &str) -> Result<String> {
    if table.rows.is_empty() {
        return Err(Error::invalid("per-SNR table is empty"));
    }
    let lo = table.rows.first().unwrap().snr_db;
    let hi = table.rows.last().unwrap().snr_db;
    let mut s = header(title);
    axes(&mut s);
    let pts: Vec<String> = table
        .rows
        .iter()
        .map(|r| {
            format!(
                "{:.2},{:.2}",
                scale(r.snr_db, lo, hi, PAD, W - PAD),
                scale(r.accuracy(), 0.0, 1.0, H - PAD, PAD)
            )
        })
        .collect();
    let _ = writeln!(
        s,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>",
        pts.join(" "),
        PALETTE[0]
    );
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">SNR (dB) {lo} to {hi}</text>",
        W / 2.0,
        H - 15.0
    );
    s.push_str("</svg>\n");
    Ok(s)
}

/// Grouped bars: one group per scenario, one bar per model.
/// `values[g][m]` is the accuracy of model `m` in scenario `g`.
pub fn comparison_bars_svg(scenarios: &[String], models: &[String], values: &[Vec<f64>], title: &str) -> Result<String> {
    if scenarios.is_empty() || models.is_empty() {
        return Err(Error::invalid("bar chart needs at least one scenario and one model"));
    }
    if values.len() != scenarios.len() || values.iter().any(|v| v.len() != models.len()) {
        return Err(Error::invalid("bar values do not match scenarios × models"));
    }
    let mut s = header(title);
    axes(&mut s);
    let group_w = (W - 2.0 * PAD) / scenarios.len() as f64;
    let bar_w = group_w * 0.8 / models.len() as f64;
    for (g, (name, row)) in scenarios.iter().zip(values).enumerate() {
        let x0 = PAD + g as f64 * group_w + group_w * 0.1;
        for (m, &v) in row.iter().enumerate() {
            let y = scale(v.clamp(0.0, 1.0), 0.0, 1.0, H - PAD, PAD);
            let _ = writeln!(
                s,
                "<rect class=\"bar\" x=\"{:.2}\" y=\"{y:.2}\" width=\"{bar_w:.2}\" height=\"{:.2}\" fill=\"{}\"/>",
                x0 + m as f64 * bar_w,
                H - PAD - y,
                PALETTE[m % PALETTE.len()]
            );
        }
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
            x0 + group_w * 0.4,
            H - PAD + 16.0,
            escape(name)
        );
    }
    for (m, name) in models.iter().enumerate() {
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{}\">{}</text>",
            W - PAD - 80.0,
            PAD + 14.0 * m as f64,
            PALETTE[m % PALETTE.len()],
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// 2-D feature scatter colored by class index.
pub fn feature_scatter_svg(points: &[(f64, f64, usize)], names: &[String], title: &str) -> Result<String> {
    if points.is_empty() {
        return Err(Error::invalid("no points to plot"));
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y, _) in points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let mut s = header(title);
    axes(&mut s);
    for &(x, y, c) in points {
        let _ = writeln!(
            s,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2\" fill=\"{}\"/>",
            scale(x, x0, x1, PAD, W - PAD),
            scale(y, y0, y1, H - PAD, PAD),
            PALETTE[c % PALETTE.len()]
        );
    }
    for (i, name) in names.iter().enumerate() {
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{}\">{}</text>",
            W - PAD - 60.0,
            PAD + 14.0 * i as f64,
            PALETTE[i % PALETTE.len()],
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn write_svg(path: &Path, svg: &str) -> Result<()> {
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}
