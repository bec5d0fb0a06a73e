//! Small, dependency-free SVG renderings of analysis outputs: line charts
//! for per-generation curves and heatmaps for feature grids. These are
//! companions to the CSV files, not a replacement for them.

use std::fmt::Write;

use walker::QdGrid;

/// One labelled curve of a line chart.
pub struct Series {
    pub label: String,
    pub color: String,
    pub points: Vec<(f64, f64)>,
}

/// A consistent color per experimental condition.
pub fn condition_color(condition: &str) -> &'static str {
    match condition {
        "static" => "#1f77b4",
        "rri" => "#2ca02c",
        "poet" => "#d62728",
        _ => "#7f7f7f",
    }
}

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 520.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 170.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

/// Renders labelled series into one chart. Returns the SVG document text.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let points = series.iter().flat_map(|s| s.points.iter());
    let (mut x_lo, mut x_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in points {
        x_lo = x_lo.min(x);
        x_hi = x_hi.max(x);
        y_lo = y_lo.min(y);
        y_hi = y_hi.max(y);
    }
    if !x_lo.is_finite() {
        (x_lo, x_hi, y_lo, y_hi) = (0.0, 1.0, 0.0, 1.0);
    }
    if x_lo == x_hi {
        x_hi = x_lo + 1.0;
    }
    if y_lo == y_hi {
        y_hi = y_lo + 1.0;
    }

    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let px = |x: f64| MARGIN_L + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let py = |y: f64| MARGIN_T + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h;

    let mut out = String::new();
    header(&mut out);
    text(&mut out, WIDTH / 2.0, 22.0, "middle", 16, title);

    // Axes with min/mid/max ticks.
    line(&mut out, MARGIN_L, MARGIN_T, MARGIN_L, MARGIN_T + plot_h);
    line(
        &mut out,
        MARGIN_L,
        MARGIN_T + plot_h,
        MARGIN_L + plot_w,
        MARGIN_T + plot_h,
    );
    for i in 0..=2 {
        let f = i as f64 / 2.0;
        let xv = x_lo + f * (x_hi - x_lo);
        let yv = y_lo + f * (y_hi - y_lo);
        text(
            &mut out,
            px(xv),
            MARGIN_T + plot_h + 18.0,
            "middle",
            11,
            &trim(xv),
        );
        text(&mut out, MARGIN_L - 8.0, py(yv) + 4.0, "end", 11, &trim(yv));
    }
    text(
        &mut out,
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 12.0,
        "middle",
        12,
        x_label,
    );
    let _ = writeln!(
        out,
        "<text x=\"18\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"12\" \
         transform=\"rotate(-90 18 {:.1})\">{}</text>",
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0,
        escape(y_label)
    );

    for s in series {
        if s.points.is_empty() {
            continue;
        }
        let path: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            out,
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>",
            s.color,
            path.join(" ")
        );
    }

    // Legend.
    for (i, s) in series.iter().enumerate() {
        let y = MARGIN_T + 14.0 * i as f64;
        let _ = writeln!(
            out,
            "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"{}\" stroke-width=\"2\"/>",
            WIDTH - MARGIN_R + 10.0,
            y,
            WIDTH - MARGIN_R + 30.0,
            y,
            s.color
        );
        text(&mut out, WIDTH - MARGIN_R + 36.0, y + 4.0, "start", 11, &s.label);
    }

    out.push_str("</svg>\n");
    out
}

/// Renders a feature grid as a heatmap. Empty cells stay light grey and
/// occupied cells interpolate blue (worst) to red (best).
pub fn heatmap(title: &str, grid: &QdGrid) -> String {
    let cells: Vec<((usize, usize), f64)> = grid.cells().collect();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(_, f) in &cells {
        lo = lo.min(f);
        hi = hi.max(f);
    }
    let span = if hi > lo { hi - lo } else { 1.0 };

    let (res_x, res_y) = grid.resolution();
    let cell: f64 = 16.0;
    let width = MARGIN_L + res_x as f64 * cell + 40.0;
    let height = MARGIN_T + res_y as f64 * cell + 40.0;

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"sans-serif\">"
    );
    text(&mut out, width / 2.0, 22.0, "middle", 14, title);
    let _ = writeln!(
        out,
        "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"#eeeeee\"/>",
        res_x as f64 * cell,
        res_y as f64 * cell
    );
    for ((cx, cy), fit) in cells {
        let t = (fit - lo) / span;
        let r = (40.0 + 200.0 * t) as u8;
        let b = (220.0 - 190.0 * t) as u8;
        let x = MARGIN_L + cx as f64 * cell;
        // Grid y grows upwards; SVG y grows downwards.
        let y = MARGIN_T + (res_y - 1 - cy) as f64 * cell;
        let _ = writeln!(
            out,
            "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{cell:.1}\" height=\"{cell:.1}\" \
             fill=\"rgb({r},80,{b})\"/>"
        );
    }
    text(
        &mut out,
        MARGIN_L + res_x as f64 * cell / 2.0,
        height - 8.0,
        "middle",
        12,
        "total leg length →",
    );
    let mid = MARGIN_T + res_y as f64 * cell / 2.0;
    let _ = writeln!(
        out,
        "<text x=\"18\" y=\"{mid:.1}\" text-anchor=\"middle\" font-size=\"12\" \
         transform=\"rotate(-90 18 {mid:.1})\">total leg width →</text>"
    );
    out.push_str("</svg>\n");
    out
}

fn header(out: &mut String) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH:.0}\" height=\"{HEIGHT:.0}\" \
         viewBox=\"0 0 {WIDTH:.0} {HEIGHT:.0}\" font-family=\"sans-serif\">"
    );
}

fn line(out: &mut String, x1: f64, y1: f64, x2: f64, y2: f64) {
    let _ = writeln!(
        out,
        "<line x1=\"{x1:.1}\" y1=\"{y1:.1}\" x2=\"{x2:.1}\" y2=\"{y2:.1}\" stroke=\"#333333\"/>"
    );
}

fn text(out: &mut String, x: f64, y: f64, anchor: &str, size: u32, body: &str) {
    let _ = writeln!(
        out,
        "<text x=\"{x:.1}\" y=\"{y:.1}\" text-anchor=\"{anchor}\" font-size=\"{size}\">{}</text>",
        escape(body)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Short tick label: plain for small magnitudes, thousands otherwise.
fn trim(v: f64) -> String {
    if v.abs() >= 10_000.0 {
        format!("{:.0}k", v / 1000.0)
    } else if v.abs() >= 100.0 || v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}
