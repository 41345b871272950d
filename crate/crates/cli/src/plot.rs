//! Minimal SVG rendering for the diagnostic plots.

use std::collections::BTreeMap;
use std::fmt::Write;

use trajkit::diagnostics::{DendrogramTree, SilhouetteTable};

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

pub fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN: (f64, f64, f64, f64) = (60.0, 20.0, 30.0, 50.0); // left, right, top, bottom

fn header(w: f64, h: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Tick step from {1, 2, 5} × 10^k giving roughly `target` intervals.
fn nice_step(span: f64, target: f64) -> f64 {
    if !(span > 0.0) {
        return 1.0;
    }
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    let r = raw / mag;
    let m = if r < 1.5 {
        1.0
    } else if r < 3.5 {
        2.0
    } else if r < 7.5 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn ticks(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut t = (lo / step).ceil() * step;
    while t <= hi + step * 1e-9 {
        out.push(if t.abs() < step * 1e-9 { 0.0 } else { t });
        t += step;
    }
    out
}

/// Linear map from a data range onto the plotting area.
struct Frame {
    x: (f64, f64),
    y: (f64, f64),
    w: f64,
    h: f64,
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        let pad = |(a, b): (f64, f64)| if b > a { (a, b) } else { (a - 1.0, b + 1.0) };
        Self {
            x: pad(x),
            y: pad(y),
            w: WIDTH,
            h: HEIGHT,
        }
    }

    fn px(&self, x: f64) -> f64 {
        let (l, r) = (MARGIN.0, self.w - MARGIN.1);
        l + (x - self.x.0) / (self.x.1 - self.x.0) * (r - l)
    }

    fn py(&self, y: f64) -> f64 {
        let (t, b) = (MARGIN.2, self.h - MARGIN.3);
        b - (y - self.y.0) / (self.y.1 - self.y.0) * (b - t)
    }

    fn axes(&self, out: &mut String, x_step: f64, x_label: &str, y_label: &str) {
        let (l, r, t, b) = (MARGIN.0, self.w - MARGIN.1, MARGIN.2, self.h - MARGIN.3);
        let _ = writeln!(
            out,
            "<rect x=\"{l}\" y=\"{t}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>",
            r - l,
            b - t
        );
        for xt in ticks(self.x.0, self.x.1, x_step) {
            let px = self.px(xt);
            let _ = writeln!(
                out,
                "<line x1=\"{px:.2}\" y1=\"{b}\" x2=\"{px:.2}\" y2=\"{}\" stroke=\"#444\"/><text x=\"{px:.2}\" y=\"{}\" text-anchor=\"middle\">{xt}</text>",
                b + 4.0,
                b + 16.0
            );
        }
        for yt in ticks(self.y.0, self.y.1, nice_step(self.y.1 - self.y.0, 6.0)) {
            let py = self.py(yt);
            let _ = writeln!(
                out,
                "<line x1=\"{}\" y1=\"{py:.2}\" x2=\"{l}\" y2=\"{py:.2}\" stroke=\"#444\"/><text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\">{yt}</text>",
                l - 4.0,
                l - 6.0,
                py + 4.0
            );
        }
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
            (l + r) / 2.0,
            self.h - 12.0,
            escape(x_label)
        );
        let _ = writeln!(
            out,
            "<text transform=\"translate(14 {}) rotate(-90)\" text-anchor=\"middle\">{}</text>",
            (t + b) / 2.0,
            escape(y_label)
        );
    }
}

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub color: usize,
    pub dashed: bool,
}

/// Curves over time with a legend. `y_range` overrides the data range.
pub fn line_plot(series: &[Series], y_range: (Option<f64>, Option<f64>), title: &str) -> String {
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let frame = Frame::new(
        (x0, x1),
        (y_range.0.unwrap_or(y0), y_range.1.unwrap_or(y1)),
    );
    let mut out = header(WIDTH, HEIGHT);
    let x_step = if x1 - x0 <= 1200.0 && x1 - x0 > 100.0 {
        100.0
    } else {
        nice_step(x1 - x0, 10.0)
    };
    frame.axes(&mut out, x_step, "time", "response");
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">{}</text>",
        WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        "<clipPath id=\"area\"><rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\"/></clipPath>",
        MARGIN.0,
        MARGIN.2,
        WIDTH - MARGIN.0 - MARGIN.1,
        HEIGHT - MARGIN.2 - MARGIN.3
    );
    for s in series {
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y)))
            .collect();
        let dash = if s.dashed { " stroke-dasharray=\"6 4\"" } else { "" };
        let _ = writeln!(
            out,
            "<polyline clip-path=\"url(#area)\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"{dash} points=\"{}\"/>",
            color(s.color),
            pts.join(" ")
        );
    }
    for (i, s) in series.iter().enumerate() {
        let y = MARGIN.2 + 12.0 + 14.0 * i as f64;
        let x = WIDTH - MARGIN.1 - 110.0;
        let dash = if s.dashed { " stroke-dasharray=\"4 3\"" } else { "" };
        let _ = writeln!(
            out,
            "<line x1=\"{x}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"{}\" stroke-width=\"2\"{dash}/><text x=\"{}\" y=\"{}\">{}</text>",
            x + 20.0,
            color(s.color),
            x + 24.0,
            y + 4.0,
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Horizontal silhouette profile, one filled band per cluster with its mean.
pub fn silhouette_plot(table: &SilhouetteTable, title: &str) -> String {
    let n = table.rows.len().max(1) as f64;
    let means = table.cluster_means();
    let frame = Frame::new((-1.0, 1.0), (0.0, n));
    let mut out = header(WIDTH, HEIGHT);
    frame.axes(&mut out, 0.25, "silhouette", "subjects");
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">{} (mean {:.3})</text>",
        WIDTH / 2.0,
        escape(title),
        table.mean()
    );
    let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in &table.rows {
        groups.entry(r.cluster).or_default().push(r.silhouette);
    }
    let mut offset = 0.0;
    for (gi, (cluster, values)) in groups.iter().enumerate() {
        // Rows are top to bottom; each subject is one unit tall.
        let top = n - offset;
        let mut d = format!("M{:.2},{:.2}", frame.px(0.0), frame.py(top));
        for (j, &s) in values.iter().enumerate() {
            let y_hi = frame.py(top - j as f64);
            let y_lo = frame.py(top - j as f64 - 1.0);
            let x = frame.px(s);
            let _ = write!(d, " L{x:.2},{y_hi:.2} L{x:.2},{y_lo:.2}");
        }
        let bottom = top - values.len() as f64;
        let _ = write!(d, " L{:.2},{:.2} Z", frame.px(0.0), frame.py(bottom));
        let _ = writeln!(out, "<path d=\"{d}\" fill=\"{}\" stroke=\"none\"/>", color(gi));
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\">{cluster}: n={} mean={:.3}</text>",
            frame.px(-0.95),
            frame.py((top + bottom) / 2.0) + 4.0,
            values.len(),
            means.get(cluster).copied().unwrap_or(f64::NAN)
        );
        offset += values.len() as f64;
    }
    out.push_str("</svg>\n");
    out
}

/// Square heat map of pairwise ARI values with `(k, replicate)` labels.
pub fn matrix_plot(m: &[Vec<f64>], labels: &[(usize, usize)], title: &str) -> String {
    let n = m.len().max(1);
    let cell = (640.0 / n as f64).clamp(2.0, 40.0);
    let side = cell * n as f64;
    let (left, top) = (50.0, 40.0);
    let (w, h) = (left + side + 120.0, top + side + 20.0);
    let mut out = header(w, h);
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">{}</text>",
        left + side / 2.0,
        escape(title)
    );
    let shade = |v: f64| {
        let v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
        let c = (255.0 * (1.0 - v)).round() as u8;
        format!("rgb({c},{c},255)")
    };
    for (i, row) in m.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let _ = writeln!(
                out,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{cell:.2}\" height=\"{cell:.2}\" fill=\"{}\"/>",
                left + j as f64 * cell,
                top + i as f64 * cell,
                shade(v)
            );
        }
    }
    // Block labels at the first replicate of each k.
    for (i, &(k, rep)) in labels.iter().enumerate() {
        if rep == 1 {
            let y = top + i as f64 * cell;
            let _ = writeln!(
                out,
                "<line x1=\"{left}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#888\" stroke-width=\"0.5\"/><text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\">k={k}</text>",
                left + side,
                left - 4.0,
                y + 10.0
            );
            let x = left + i as f64 * cell;
            let _ = writeln!(
                out,
                "<line x1=\"{x:.2}\" y1=\"{top}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#888\" stroke-width=\"0.5\"/>",
                top + side
            );
        }
    }
    let lx = left + side + 20.0;
    for s in 0..=10 {
        let v = s as f64 / 10.0;
        let y = top + (10 - s) as f64 * 16.0;
        let _ = writeln!(
            out,
            "<rect x=\"{lx}\" y=\"{y}\" width=\"16\" height=\"16\" fill=\"{}\"/><text x=\"{}\" y=\"{}\">{v:.1}</text>",
            shade(v),
            lx + 20.0,
            y + 12.0
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Dendrogram with leaves labelled by cluster and merge heights on the y axis.
pub fn dendrogram_plot(tree: &DendrogramTree, title: &str) -> String {
    let n = tree.leaves.len();
    let order = tree.leaf_order();
    let top_height = tree.merges.last().map_or(1.0, |m| m.height);
    let frame = Frame::new((-0.5, n as f64 - 0.5), (0.0, top_height));
    let mut out = header(WIDTH, HEIGHT);
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">{}</text>",
        WIDTH / 2.0,
        escape(title)
    );
    let mut x_of = vec![0.0; n + tree.merges.len()];
    let mut y_of = vec![0.0; n + tree.merges.len()];
    for (pos, &leaf) in order.iter().enumerate() {
        x_of[leaf] = pos as f64;
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{}\" text-anchor=\"middle\" font-size=\"9\">{}</text>",
            frame.px(pos as f64),
            HEIGHT - MARGIN.3 + 14.0,
            tree.leaves[leaf]
        );
    }
    for (s, m) in tree.merges.iter().enumerate() {
        let node = n + s;
        let (xa, xb) = (x_of[m.node_a], x_of[m.node_b]);
        let (ya, yb) = (y_of[m.node_a], y_of[m.node_b]);
        x_of[node] = (xa + xb) / 2.0;
        y_of[node] = m.height;
        let _ = writeln!(
            out,
            "<polyline fill=\"none\" stroke=\"#333\" points=\"{:.2},{:.2} {:.2},{:.2} {:.2},{:.2} {:.2},{:.2}\"/>",
            frame.px(xa),
            frame.py(ya),
            frame.px(xa),
            frame.py(m.height),
            frame.px(xb),
            frame.py(m.height),
            frame.px(xb),
            frame.py(yb)
        );
    }
    let (l, b) = (MARGIN.0, HEIGHT - MARGIN.3);
    let _ = writeln!(
        out,
        "<line x1=\"{l}\" y1=\"{b}\" x2=\"{l}\" y2=\"{}\" stroke=\"#444\"/>",
        MARGIN.2
    );
    for yt in ticks(0.0, top_height, nice_step(top_height, 6.0)) {
        let py = frame.py(yt);
        let _ = writeln!(
            out,
            "<line x1=\"{}\" y1=\"{py:.2}\" x2=\"{l}\" y2=\"{py:.2}\" stroke=\"#444\"/><text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\">{yt}</text>",
            l - 4.0,
            l - 6.0,
            py + 4.0
        );
    }
    let _ = writeln!(
        out,
        "<text transform=\"translate(14 {}) rotate(-90)\" text-anchor=\"middle\">height</text>",
        (MARGIN.2 + b) / 2.0
    );
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tick_steps() {
        assert_eq!(nice_step(1095.0, 10.0), 100.0);
        assert_eq!(nice_step(1.0, 4.0), 0.2);
        assert_eq!(ticks(-365.0, 730.0, 100.0).first(), Some(&-300.0));
        assert_eq!(ticks(-365.0, 730.0, 100.0).last(), Some(&700.0));
    }

    #[test]
    fn line_plot_is_well_formed() {
        let s = line_plot(
            &[Series {
                label: "1 <a>".into(),
                points: vec![(0.0, 1.0), (10.0, 2.0)],
                color: 0,
                dashed: true,
            }],
            (Some(0.0), None),
            "t",
        );
        assert!(s.starts_with("<svg"));
        assert!(s.trim_end().ends_with("</svg>"));
        assert!(s.contains("1 &lt;a&gt;"));
        assert!(s.contains("stroke-dasharray"));
    }
}
