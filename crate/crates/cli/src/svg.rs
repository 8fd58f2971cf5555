//! Minimal SVG emitters for predictors and spectra.

use std::fmt::Write as _;

const CELL: f64 = 12.0;
const PAD: f64 = 30.0;

/// Blue for negative, white at zero, red for positive; `t` in `[-1, 1]`.
fn diverging(t: f64) -> String {
    let t = t.clamp(-1.0, 1.0);
    let (r, g, b) = if t >= 0.0 {
        (255.0, 255.0 * (1.0 - t), 255.0 * (1.0 - t))
    } else {
        (255.0 * (1.0 + t), 255.0 * (1.0 + t), 255.0)
    };
    format!("#{:02x}{:02x}{:02x}", r.round() as u8, g.round() as u8, b.round() as u8)
}

/// Heatmap of a row-major `h × w` grid, colour scale symmetric about zero.
pub fn heatmap(values: &[f64], h: usize, w: usize, title: &str) -> String {
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let cell = if w > 60 { (720.0 / w as f64).max(2.0) } else { CELL };
    let (width, height) = (w as f64 * cell + 2.0 * PAD, h as f64 * cell + 2.0 * PAD);
    let mut s = header(width, height, title);
    for i in 0..h {
        for j in 0..w {
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{cell:.2}" height="{cell:.2}" fill="{}"/>"#,
                PAD + j as f64 * cell,
                PAD + i as f64 * cell,
                diverging(values[i * w + j] / scale)
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{PAD}" y="{:.2}" font-size="10">max |value| = {scale:.4e}</text>"#,
        height - 8.0
    );
    s.push_str("</svg>\n");
    s
}

/// Line plot of `log10(values)`; zeros are clamped to 1e-16 of the maximum.
pub fn log_line_plot(values: &[f64], title: &str) -> String {
    let (width, height) = (640.0, 320.0);
    let max = values.iter().cloned().fold(0.0f64, f64::max);
    let floor = if max > 0.0 { max * 1e-16 } else { 1e-16 };
    let logs: Vec<f64> = values.iter().map(|v| v.max(floor).log10()).collect();
    let hi = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = logs.iter().cloned().fold(f64::INFINITY, f64::min);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let n = values.len().max(2) - 1;
    let px = |i: usize| PAD + i as f64 * (width - 2.0 * PAD) / n as f64;
    let py = |v: f64| height - PAD - (v - lo) / span * (height - 2.0 * PAD);
    let mut s = header(width, height, title);
    let pts: Vec<String> =
        logs.iter().enumerate().map(|(i, &v)| format!("{:.2},{:.2}", px(i), py(v))).collect();
    let _ = writeln!(
        s,
        r#"<polyline fill="none" stroke="black" stroke-width="1.5" points="{}"/>"#,
        pts.join(" ")
    );
    for (i, &v) in logs.iter().enumerate() {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5"/>"#, px(i), py(v));
    }
    let _ = writeln!(
        s,
        r#"<text x="{PAD}" y="{:.2}" font-size="10">log10 range [{lo:.2}, {hi:.2}]</text>"#,
        height - 8.0
    );
    s.push_str("</svg>\n");
    s
}

fn header(width: f64, height: f64, title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{PAD}" y="18" font-size="12">{}</text>"#, escape(title));
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_endpoints() {
        assert_eq!(diverging(1.0), "#ff0000");
        assert_eq!(diverging(0.0), "#ffffff");
        assert_eq!(diverging(-1.0), "#0000ff");
    }

    #[test]
    fn heatmap_has_one_rect_per_cell() {
        let s = heatmap(&[1.0, -1.0, 0.0, 0.5, 0.2, 0.1], 2, 3, "w <test>");
        assert_eq!(s.matches("<rect x=").count(), 6);
        assert!(s.contains("w &lt;test&gt;"));
        assert!(s.ends_with("</svg>\n"));
    }

    #[test]
    fn line_plot_handles_zeros() {
        let s = log_line_plot(&[1.0, 0.0, 0.1], "spectrum");
        assert_eq!(s.matches("<circle").count(), 3);
        assert!(!s.contains("NaN") && !s.contains("inf"));
    }
}
