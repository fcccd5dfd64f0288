//! Self-contained SVG output: a heatmap for maps and a line plot for traces.

use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 100.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const TICKS: usize = 5;

/// Stops of a perceptually ordered dark-blue to yellow colormap.
const COLORMAP: [(f64, [u8; 3]); 6] = [
    (0.0, [68, 1, 84]),
    (0.2, [65, 68, 135]),
    (0.4, [42, 120, 142]),
    (0.6, [34, 168, 132]),
    (0.8, [122, 209, 81]),
    (1.0, [253, 231, 37]),
];

pub fn color(t: f64) -> [u8; 3] {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let k = COLORMAP
        .iter()
        .position(|&(s, _)| s >= t)
        .unwrap_or(COLORMAP.len() - 1)
        .max(1);
    let (s0, c0) = COLORMAP[k - 1];
    let (s1, c1) = COLORMAP[k];
    let f = (t - s0) / (s1 - s0);
    let mix = |i: usize| (c0[i] as f64 + f * (c1[i] as f64 - c0[i] as f64)).round() as u8;
    [mix(0), mix(1), mix(2)]
}

fn hex(c: [u8; 3]) -> String {
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn finite_range(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .into_iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn tick_label(v: f64) -> String {
    if v == 0.0 || (1e-2..1e4).contains(&v.abs()) {
        format!("{}", (v * 1e3).round() / 1e3)
    } else {
        format!("{v:.2e}")
    }
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }

    fn axes(&self, out: &mut String, title: &str, x_label: &str, y_label: &str) {
        let (x0, x1) = (LEFT, WIDTH - RIGHT);
        let (y0, y1) = (HEIGHT - BOTTOM, TOP);
        writeln!(
            out,
            r#"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            x1 - x0,
            y0 - y1
        )
        .unwrap();
        for i in 0..TICKS {
            let f = i as f64 / (TICKS - 1) as f64;
            let xv = self.x.0 + f * (self.x.1 - self.x.0);
            let yv = self.y.0 + f * (self.y.1 - self.y.0);
            let (xp, yp) = (self.px(xv), self.py(yv));
            writeln!(
                out,
                r#"<line x1="{xp:.2}" y1="{y0}" x2="{xp:.2}" y2="{}" stroke="black"/><text x="{xp:.2}" y="{}" text-anchor="middle">{}</text>"#,
                y0 + 5.0,
                y0 + 20.0,
                tick_label(xv)
            )
            .unwrap();
            writeln!(
                out,
                r#"<line x1="{}" y1="{yp:.2}" x2="{x0}" y2="{yp:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
                x0 - 5.0,
                x0 - 8.0,
                yp + 4.0,
                tick_label(yv)
            )
            .unwrap();
        }
        writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#,
            (x0 + x1) / 2.0,
            HEIGHT - 15.0
        )
        .unwrap();
        writeln!(
            out,
            r#"<text x="20" y="{0}" text-anchor="middle" transform="rotate(-90 20 {0})">{y_label}</text>"#,
            (y0 + y1) / 2.0
        )
        .unwrap();
        writeln!(
            out,
            r#"<text x="{}" y="25" text-anchor="middle">{title}</text>"#,
            (x0 + x1) / 2.0
        )
        .unwrap();
    }
}

fn open() -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

/// Heatmap of `z` (row-major, one row per `y`). Neighbouring cells of equal
/// colour are merged.
pub fn heatmap(x: &[f64], y: &[f64], z: &[f64], title: &str, x_label: &str, y_label: &str) -> String {
    let (zlo, zhi) = finite_range(z.iter().copied());
    let frame = Frame {
        x: finite_range(x.iter().copied()),
        y: finite_range(y.iter().copied()),
    };
    // Cell edges halfway between samples.
    let edges = |axis: &[f64], i: usize| -> (f64, f64) {
        let n = axis.len();
        let lo = if i == 0 { axis[0] } else { 0.5 * (axis[i - 1] + axis[i]) };
        let hi = if i + 1 == n {
            axis[n - 1]
        } else {
            0.5 * (axis[i] + axis[i + 1])
        };
        (lo, hi)
    };
    let mut out = open();
    let cols = x.len();
    for (r, _) in y.iter().enumerate() {
        let (ylo, yhi) = edges(y, r);
        let (top, bottom) = (frame.py(yhi), frame.py(ylo));
        let mut c = 0;
        while c < cols {
            let fill = color((z[r * cols + c] - zlo) / (zhi - zlo));
            let mut end = c + 1;
            while end < cols && color((z[r * cols + end] - zlo) / (zhi - zlo)) == fill {
                end += 1;
            }
            let (left, right) = (frame.px(edges(x, c).0), frame.px(edges(x, end - 1).1));
            writeln!(
                out,
                r#"<rect x="{left:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                right - left,
                bottom - top,
                hex(fill)
            )
            .unwrap();
            c = end;
        }
    }
    frame.axes(&mut out, title, x_label, y_label);
    // Colour bar.
    let bar_x = WIDTH - RIGHT + 20.0;
    let steps = 64;
    let h = (HEIGHT - TOP - BOTTOM) / steps as f64;
    for i in 0..steps {
        let t = (i as f64 + 0.5) / steps as f64;
        writeln!(
            out,
            r#"<rect x="{bar_x}" y="{:.2}" width="15" height="{:.2}" fill="{}"/>"#,
            HEIGHT - BOTTOM - (i + 1) as f64 * h,
            h + 0.5,
            hex(color(t))
        )
        .unwrap();
    }
    for (v, yp) in [(zlo, HEIGHT - BOTTOM), (zhi, TOP)] {
        writeln!(
            out,
            r#"<text x="{}" y="{:.2}">{}</text>"#,
            bar_x + 18.0,
            yp + 4.0,
            tick_label(v)
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

/// Line plot of one or more `(x, y)` series on shared axes.
pub fn line_plot(series: &[(Vec<f64>, Vec<f64>)], title: &str, x_label: &str, y_label: &str) -> String {
    let frame = Frame {
        x: finite_range(series.iter().flat_map(|s| s.0.iter().copied())),
        y: finite_range(series.iter().flat_map(|s| s.1.iter().copied())),
    };
    let mut out = open();
    let n = series.len().max(2) - 1;
    for (k, (xs, ys)) in series.iter().enumerate() {
        let points: Vec<String> = xs
            .iter()
            .zip(ys)
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(&x, &y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y)))
            .collect();
        writeln!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.2" points="{}"/>"#,
            hex(color(k as f64 / n as f64 * 0.85)),
            points.join(" ")
        )
        .unwrap();
    }
    frame.axes(&mut out, title, x_label, y_label);
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colormap_endpoints_and_clamping() {
        assert_eq!(color(0.0), [68, 1, 84]);
        assert_eq!(color(1.0), [253, 231, 37]);
        assert_eq!(color(-3.0), color(0.0));
        assert_eq!(color(f64::NAN), color(0.0));
    }

    #[test]
    fn uniform_rows_collapse_to_one_rect() {
        let svg = heatmap(
            &[0.0, 1.0, 2.0],
            &[0.0, 1.0],
            &[1.0, 1.0, 1.0, 2.0, 2.0, 2.0],
            "t",
            "x",
            "y",
        );
        let cells = svg.lines().filter(|l| l.starts_with("<rect x=\"80.00\"")).count();
        assert_eq!(cells, 2);
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn line_plot_has_one_polyline_per_series() {
        let s = vec![(vec![0.0, 1.0], vec![0.5, 0.6]); 3];
        assert_eq!(line_plot(&s, "t", "x", "y").matches("<polyline").count(), 3);
    }
}
