//! Self-contained SVG of energy against epoch.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;

fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= target as f64)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn label(t: f64) -> String {
    let s = format!("{t:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

/// Energy per epoch as a polyline with an optional dashed reference line.
pub fn convergence_svg(energies: &[f64], reference: Option<f64>, title: &str) -> String {
    let finite: Vec<f64> = energies.iter().cloned().filter(|e| e.is_finite()).collect();
    let mut lo = finite.iter().cloned().chain(reference).fold(f64::INFINITY, f64::min);
    let mut hi = finite.iter().cloned().chain(reference).fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() {
        (lo, hi) = (-1.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-3);
    (lo, hi) = (lo - pad, hi + pad);
    let n = energies.len().max(2) - 1;
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x = |epoch: f64| LEFT + plot_w * epoch / n as f64;
    let y = |e: f64| TOP + plot_h * (hi - e) / (hi - lo);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{title}</text>"#,
        WIDTH / 2.0
    );
    for t in nice_ticks(lo, hi, 6) {
        let ty = y(t);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{ty:.2}" x2="{:.2}" y2="{ty:.2}" stroke="#e5e5e5"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            WIDTH - RIGHT,
            LEFT - 6.0,
            ty + 4.0,
            label(t)
        );
    }
    for t in nice_ticks(0.0, n as f64, 8) {
        let tx = x(t);
        let _ = writeln!(
            s,
            r##"<line x1="{tx:.2}" y1="{:.2}" x2="{tx:.2}" y2="{:.2}" stroke="#444"/><text x="{tx:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            HEIGHT - BOTTOM,
            HEIGHT - BOTTOM + 5.0,
            HEIGHT - BOTTOM + 19.0,
            label(t)
        );
    }
    let _ = writeln!(
        s,
        r##"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#444"/>"##
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">epoch</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 14.0
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(20 {}) rotate(-90)" text-anchor="middle">energy</text>"#,
        TOP + plot_h / 2.0
    );
    if let Some(r) = reference {
        let ry = y(r);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{ry:.2}" x2="{:.2}" y2="{ry:.2}" stroke="#c62828" stroke-width="1.5" stroke-dasharray="6 4"/>"##,
            WIDTH - RIGHT
        );
        let _ = writeln!(
            s,
            r##"<text x="{:.2}" y="{:.2}" text-anchor="end" fill="#c62828">exact {r:.5}</text>"##,
            WIDTH - RIGHT - 6.0,
            ry - 6.0
        );
    }
    let points: Vec<String> = energies
        .iter()
        .enumerate()
        .filter(|(_, e)| e.is_finite())
        .map(|(i, &e)| format!("{:.2},{:.2}", x(i as f64), y(e)))
        .collect();
    if !points.is_empty() {
        let _ = writeln!(
            s,
            r##"<polyline points="{}" fill="none" stroke="#1565c0" stroke-width="1.5"/>"##,
            points.join(" ")
        );
    }
    s.push_str("</svg>\n");
    s
}
