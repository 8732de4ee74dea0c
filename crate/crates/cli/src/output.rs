//! File emission: tidy CSV traces, JSON records and the SVG difference plot.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use dmac_core::simulate::{Comparison, SimulationTrace};

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// One row per value: `t,id,kind,value`.
pub fn write_trace(path: &Path, trace: &SimulationTrace) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["t", "id", "kind", "value"])?;
    let mut rows = |kind: &str, table: &[Vec<f64>]| -> Result<()> {
        for (t, row) in table.iter().enumerate() {
            for (id, v) in row.iter().enumerate() {
                w.write_record([t.to_string(), id.to_string(), kind.to_string(), v.to_string()])?;
            }
        }
        Ok(())
    };
    rows("state", &trace.states)?;
    rows("control", &trace.node_controls)?;
    rows("edge_input", &trace.edge_inputs)?;
    rows("disturbance", &trace.disturbances)?;
    for (t, row) in trace.selections.iter().enumerate() {
        for (id, k) in row.iter().enumerate() {
            w.write_record([t.to_string(), id.to_string(), "selection".into(), k.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Named difference series of a comparison, in output order.
pub fn difference_series(c: &Comparison) -> Vec<(&'static str, &[f64])> {
    vec![
        ("state_diff_l1", &c.state_diff_l1),
        ("control_diff_l1", &c.control_diff_l1),
        ("hindsight_control_diff_l1", &c.hindsight_control_diff_l1),
        ("first_node_state_diff", &c.first_node_state_diff),
        ("first_edge_control_diff", &c.first_edge_control_diff),
    ]
}

/// Tidy `t,series,value` table of the comparison differences.
pub fn write_differences(path: &Path, c: &Comparison) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["t", "series", "value"])?;
    for (name, series) in difference_series(c) {
        for (t, v) in series.iter().enumerate() {
            w.write_record([t.to_string(), name.to_string(), v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;

/// Line plot of the state and control difference series.
pub fn difference_plot(c: &Comparison) -> String {
    let series = [
        ("||x_minimax - x_hinf||_1", &c.state_diff_l1[..], "#1f77b4"),
        ("||u_minimax - u_hinf||_1", &c.control_diff_l1[..], "#d62728"),
    ];
    let t_max = series.iter().map(|s| s.1.len()).max().unwrap_or(1).saturating_sub(1).max(1) as f64;
    let y_max = series
        .iter()
        .flat_map(|s| s.1.iter().copied())
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max);
    let y_max = if y_max > 0.0 { y_max * 1.05 } else { 1.0 };
    let (pw, ph) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
    let px = |t: f64| MARGIN + pw * t / t_max;
    let py = |v: f64| HEIGHT - MARGIN - ph * v / y_max;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{l} {t} V{b} H{r}" fill="none" stroke="black"/>"#,
        l = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    for k in 0..=4 {
        let v = y_max * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{:.3}</text>"#,
            MARGIN - 6.0,
            py(v) + 4.0,
            v
        );
        let t = t_max * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{:.0}</text>"#,
            px(t),
            HEIGHT - MARGIN + 18.0,
            t
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{}" text-anchor="middle">t</text>"#,
        MARGIN + pw / 2.0,
        HEIGHT - 15.0
    );
    for (i, (label, data, color)) in series.iter().enumerate() {
        let points: Vec<String> = data
            .iter()
            .enumerate()
            .map(|(t, &v)| format!("{:.2},{:.2}", px(t as f64), py(v)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            points.join(" ")
        );
        let y = MARGIN - 30.0 + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{x}" y1="{y}" x2="{x2}" y2="{y}" stroke="{color}" stroke-width="2"/><text x="{tx}" y="{ty}">{label}</text>"#,
            x = WIDTH - MARGIN - 200.0,
            x2 = WIDTH - MARGIN - 180.0,
            tx = WIDTH - MARGIN - 174.0,
            ty = y + 4.0,
        );
    }
    s.push_str("</svg>\n");
    s
}
