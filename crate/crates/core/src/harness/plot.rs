use std::fmt::Write as _;
use std::path::Path;

use super::metrics::{AggregateRow, Band, Phase};
use crate::error::{Error, Result};

const PANEL_W: f64 = 520.0;
const PANEL_H: f64 = 320.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

const TRAIN_COLOR: &str = "#1f77b4";
const TEST_COLOR: &str = "#d62728";

struct Axis {
    lo: f64,
    hi: f64,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>) -> Axis {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            return Axis { lo: 0.0, hi: 1.0 };
        }
        let pad = if hi > lo {
            0.05 * (hi - lo)
        } else {
            lo.abs().max(1.0) * 0.1
        };
        Axis {
            lo: lo - pad,
            hi: hi + pad,
        }
    }

    fn frac(&self, v: f64) -> f64 {
        (v - self.lo) / (self.hi - self.lo)
    }
}

/// Tick spacing of 1, 2 or 5 times a power of ten giving about `n` ticks.
fn ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let raw = (hi - lo) / n as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step + 1e-9).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn panel(
    svg: &mut String,
    x0: f64,
    title: &str,
    ylabel: &str,
    rows: &[AggregateRow],
    pick: fn(&AggregateRow) -> Band,
) {
    let pw = PANEL_W - MARGIN_L - MARGIN_R;
    let ph = PANEL_H - MARGIN_T - MARGIN_B;
    let max_epoch = rows.iter().map(|r| r.epoch).max().unwrap_or(1).max(1) as f64;
    let xa = Axis {
        lo: 0.0,
        hi: max_epoch + 0.5,
    };
    let ya = Axis::fit(rows.iter().flat_map(|r| {
        let b = pick(r);
        [b.mean - b.half_width, b.mean + b.half_width]
    }));
    let px = |e: f64| x0 + MARGIN_L + xa.frac(e) * pw;
    let py = |v: f64| MARGIN_T + (1.0 - ya.frac(v)) * ph;

    let _ = writeln!(
        svg,
        r##"<rect x="{:.2}" y="{MARGIN_T}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="#444"/>"##,
        x0 + MARGIN_L
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{title}</text>"#,
        x0 + MARGIN_L + pw / 2.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="13">Epoch</text>"#,
        x0 + MARGIN_L + pw / 2.0,
        PANEL_H - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="13" transform="rotate(-90 {:.2} {:.2})">{ylabel}</text>"#,
        x0 + 18.0,
        MARGIN_T + ph / 2.0,
        x0 + 18.0,
        MARGIN_T + ph / 2.0
    );
    for t in ticks(1.0, max_epoch, 6) {
        let x = px(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#444"/><text x="{x:.2}" y="{:.2}" text-anchor="middle" font-size="11">{}</text>"##,
            MARGIN_T + ph,
            MARGIN_T + ph + 5.0,
            MARGIN_T + ph + 18.0,
            label(t)
        );
    }
    for t in ticks(ya.lo, ya.hi, 6) {
        let y = py(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end" font-size="11">{}</text>"##,
            x0 + MARGIN_L,
            x0 + MARGIN_L + pw,
            x0 + MARGIN_L - 6.0,
            y + 4.0,
            label(t)
        );
    }

    for (phase, color) in [(Phase::Train, TRAIN_COLOR), (Phase::Test, TEST_COLOR)] {
        let pts: Vec<(f64, Band)> = rows
            .iter()
            .filter(|r| r.phase == phase)
            .map(|r| (r.epoch as f64, pick(r)))
            .collect();
        if pts.is_empty() {
            continue;
        }
        let mut band = String::new();
        for (e, b) in &pts {
            let _ = write!(band, "{:.2},{:.2} ", px(*e), py(b.mean + b.half_width));
        }
        for (e, b) in pts.iter().rev() {
            let _ = write!(band, "{:.2},{:.2} ", px(*e), py(b.mean - b.half_width));
        }
        let _ = writeln!(
            svg,
            r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            band.trim_end()
        );
        let line: Vec<String> = pts
            .iter()
            .map(|(e, b)| format!("{:.2},{:.2}", px(*e), py(b.mean)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            line.join(" ")
        );
        for (e, b) in &pts {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                px(*e),
                py(b.mean)
            );
        }
    }

    let lx = x0 + MARGIN_L + pw - 110.0;
    for (k, (name, color)) in [("Training", TRAIN_COLOR), ("Testing", TEST_COLOR)]
        .iter()
        .enumerate()
    {
        let y = MARGIN_T + 16.0 + 18.0 * k as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}" font-size="12">{name}</text>"#,
            lx + 24.0,
            lx + 30.0,
            y + 4.0
        );
    }
}

/// Renders reward and episode-time curves as a standalone SVG document.
pub fn render_svg(rows: &[AggregateRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::contract("nothing to plot"));
    }
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{PANEL_H}" viewBox="0 0 {} {PANEL_H}" font-family="sans-serif">"#,
        2.0 * PANEL_W,
        2.0 * PANEL_W
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    panel(
        &mut svg,
        0.0,
        "Mean reward per epoch",
        "Reward",
        rows,
        |r| r.reward,
    );
    panel(
        &mut svg,
        PANEL_W,
        "Mean time per epoch",
        "Time (s)",
        rows,
        |r| r.time_per_epoch,
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_plot(rows: &[AggregateRow], path: &Path) -> Result<()> {
    let svg = render_svg(rows)?;
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}
