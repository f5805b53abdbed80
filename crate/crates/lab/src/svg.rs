use std::fmt::Write;

use typicality_core::report::{Plot, SeriesStyle};

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const COLOURS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#555555"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// About five round tick positions covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> (Vec<f64>, usize) {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    ((first..=last).map(|k| k as f64 * step).collect(), decimals)
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-300 {
        let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        return (lo - pad, hi + pad);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// Static vector rendering of a plot: linear y axis, linear or log x axis.
pub fn render(plot: &Plot) -> String {
    let fx = |x: f64| if plot.log_x { x.log10() } else { x };
    let usable = |&(x, y): &(f64, f64)| y.is_finite() && x.is_finite() && (!plot.log_x || x > 0.0);
    let (x_lo, x_hi) = padded_range(plot.series.iter().flat_map(|s| s.points.iter().filter(|p| usable(p)).map(|p| fx(p.0))));
    let (y_lo, y_hi) = padded_range(plot.series.iter().flat_map(|s| s.points.iter().filter(|p| usable(p)).map(|p| p.1)));
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let sx = |x: f64| LEFT + (fx(x) - x_lo) / (x_hi - x_lo) * pw;
    let sy = |y: f64| TOP + (y_hi - y) / (y_hi - y_lo) * ph;

    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(&plot.title));
    let _ = writeln!(out, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);

    let (xt, xd) = ticks(x_lo, x_hi);
    for t in xt {
        let px = LEFT + (t - x_lo) / (x_hi - x_lo) * pw;
        let label = if plot.log_x { format!("1e{t:.0}") } else { format!("{t:.xd$}") };
        let _ = writeln!(out, r##"<line x1="{px:.2}" y1="{}" x2="{px:.2}" y2="{}" stroke="#999"/>"##, TOP + ph, TOP + ph + 5.0);
        let _ = writeln!(out, r#"<text x="{px:.2}" y="{}" text-anchor="middle">{label}</text>"#, TOP + ph + 18.0);
    }
    let (yt, yd) = ticks(y_lo, y_hi);
    for t in yt {
        let py = sy(t);
        let _ = writeln!(out, r##"<line x1="{}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="#999"/>"##, LEFT - 5.0);
        let _ = writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end">{t:.yd$}</text>"#, LEFT - 8.0, py + 4.0);
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, H - 12.0, escape(&plot.x_label));
    let _ = writeln!(
        out,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        TOP + ph / 2.0,
        escape(&plot.y_label)
    );

    for (i, s) in plot.series.iter().enumerate() {
        let colour = COLOURS[i % COLOURS.len()];
        let pts: Vec<(f64, f64)> = s.points.iter().copied().filter(usable).map(|(x, y)| (sx(x), sy(y))).collect();
        match s.style {
            SeriesStyle::Points => {
                for (x, y) in &pts {
                    let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="{colour}"/>"#);
                }
            }
            SeriesStyle::Line | SeriesStyle::Steps => {
                let mut d = String::new();
                for (k, (x, y)) in pts.iter().enumerate() {
                    if k == 0 {
                        let _ = write!(d, "M{x:.2},{y:.2}");
                    } else if s.style == SeriesStyle::Steps {
                        // step centred on each point
                        let mid = 0.5 * (pts[k - 1].0 + x);
                        let _ = write!(d, " H{mid:.2} V{y:.2} H{x:.2}");
                    } else {
                        let _ = write!(d, " L{x:.2},{y:.2}");
                    }
                }
                let _ = writeln!(out, r#"<path d="{d}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#);
            }
        }
        let ly = TOP + 16.0 + 16.0 * i as f64;
        let lx = LEFT + pw - 160.0;
        let _ = writeln!(out, r#"<rect x="{lx}" y="{}" width="12" height="4" fill="{colour}"/>"#, ly - 6.0);
        let _ = writeln!(out, r#"<text x="{}" y="{ly}">{}</text>"#, lx + 18.0, escape(&s.label));
    }
    out.push_str("</svg>\n");
    out
}
