//! Minimal SVG scatter plots. The CSVs are the authoritative outputs; these
//! exist for eyeballing prediction clouds and the queue-balance diagonal.

use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 160.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;

/// Color-blind-safe cycle (Tol bright).
pub const PALETTE: [&str; 7] =
    ["#4477aa", "#ee6677", "#228833", "#ccbb44", "#66ccee", "#aa3377", "#bbbbbb"];

pub struct Series {
    pub label: String,
    pub color: &'static str,
    pub points: Vec<[f64; 2]>,
}

/// Renders labelled point clouds with linear axes, five ticks per axis, and
/// an optional y=x reference line. Callers plotting log-scale quantities
/// pass pre-logged coordinates and say so in the axis label.
pub fn scatter_svg(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    diagonal: bool,
) -> String {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for s in series {
        for p in &s.points {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
    }
    if series.iter().all(|s| s.points.is_empty()) {
        (lo, hi) = ([0.0; 2], [1.0; 2]);
    }
    for d in 0..2 {
        let pad = 0.05 * (hi[d] - lo[d]).max(1e-12);
        lo[d] -= pad;
        hi[d] += pad;
    }

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + (x - lo[0]) / (hi[0] - lo[0]) * plot_w;
    let sy = |y: f64| MARGIN_TOP + plot_h - (y - lo[1]) / (hi[1] - lo[1]) * plot_h;

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>",
        MARGIN_LEFT + plot_w / 2.0,
        escape(title)
    );

    // Frame and ticks.
    let _ = writeln!(
        out,
        "<rect x=\"{MARGIN_LEFT}\" y=\"{MARGIN_TOP}\" width=\"{plot_w:.1}\" height=\"{plot_h:.1}\" \
         fill=\"none\" stroke=\"#333333\"/>"
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = lo[0] + f * (hi[0] - lo[0]);
        let yv = lo[1] + f * (hi[1] - lo[1]);
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(
            out,
            "<line x1=\"{px:.1}\" y1=\"{:.1}\" x2=\"{px:.1}\" y2=\"{:.1}\" stroke=\"#333333\"/>",
            MARGIN_TOP + plot_h,
            MARGIN_TOP + plot_h + 5.0
        );
        let _ = writeln!(
            out,
            "<text x=\"{px:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            MARGIN_TOP + plot_h + 18.0,
            tick_label(xv)
        );
        let _ = writeln!(
            out,
            "<line x1=\"{:.1}\" y1=\"{py:.1}\" x2=\"{MARGIN_LEFT}\" y2=\"{py:.1}\" \
             stroke=\"#333333\"/>",
            MARGIN_LEFT - 5.0
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
            MARGIN_LEFT - 8.0,
            py + 4.0,
            tick_label(yv)
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        "<text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" \
         transform=\"rotate(-90 16 {:.1})\">{}</text>",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        escape(y_label)
    );

    if diagonal {
        let a = lo[0].max(lo[1]);
        let b = hi[0].min(hi[1]);
        if b > a {
            let _ = writeln!(
                out,
                "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#999999\" \
                 stroke-dasharray=\"4 3\"/>",
                sx(a),
                sy(a),
                sx(b),
                sy(b)
            );
        }
    }

    for s in series {
        for p in &s.points {
            let _ = writeln!(
                out,
                "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"2.5\" fill=\"{}\" fill-opacity=\"0.55\"/>",
                sx(p[0]),
                sy(p[1]),
                s.color
            );
        }
    }

    let legend_x = WIDTH - MARGIN_RIGHT + 12.0;
    for (i, s) in series.iter().enumerate() {
        let y = MARGIN_TOP + 10.0 + i as f64 * 18.0;
        let _ = writeln!(
            out,
            "<circle cx=\"{legend_x:.1}\" cy=\"{y:.1}\" r=\"4\" fill=\"{}\"/>",
            s.color
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\">{}</text>",
            legend_x + 10.0,
            y + 4.0,
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn tick_label(v: f64) -> String {
    if v == 0.0 || (v.abs() >= 0.01 && v.abs() < 10_000.0) {
        format!("{v:.2}")
    } else {
        format!("{v:.1e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo() -> Vec<Series> {
        vec![
            Series {
                label: "observed".into(),
                color: PALETTE[0],
                points: vec![[1.0, 2.0], [2.0, 3.0], [3.0, 5.0]],
            },
            Series { label: "predicted".into(), color: PALETTE[1], points: vec![[1.5, 2.5]] },
        ]
    }

    #[test]
    fn svg_contains_every_point_and_legend_entry() {
        let svg = scatter_svg("demo", "x", "y", &demo(), true);
        // 4 data circles + 2 legend swatches.
        assert_eq!(svg.matches("<circle").count(), 6);
        assert!(svg.contains(">observed<"));
        assert!(svg.contains(">predicted<"));
        assert!(svg.contains("stroke-dasharray"));
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn output_is_deterministic_and_escapes_labels() {
        let a = scatter_svg("a < b", "x", "y", &demo(), false);
        let b = scatter_svg("a < b", "x", "y", &demo(), false);
        assert_eq!(a, b);
        assert!(a.contains("a &lt; b"));
        assert!(!a.contains("a < b"));
    }

    #[test]
    fn empty_series_still_render_a_frame() {
        let svg = scatter_svg("empty", "x", "y", &[], false);
        assert!(svg.contains("<rect"));
    }
}
