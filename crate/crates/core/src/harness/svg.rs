//! Static line chart: faint per-seed traces under a bold mean.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;
const TICKS: usize = 5;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn polyline(points: &[(f64, f64)]) -> String {
    let mut s = String::new();
    for (i, (x, y)) in points.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{x:.2},{y:.2}");
    }
    s
}

/// Renders `traces` (x = 1, 2, …) with their pointwise `mean` on top.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, traces: &[Vec<f64>], mean: &[f64]) -> String {
    let n = traces.iter().map(Vec::len).chain([mean.len()]).max().unwrap_or(0).max(1);
    let finite = traces.iter().flatten().chain(mean).copied().filter(|v| v.is_finite());
    let (mut lo, mut hi) = finite.fold((0.0f64, 0.0f64), |(a, b), v| (a.min(v), b.max(v)));
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    let pad = 0.05 * (hi - lo);
    lo -= if lo < 0.0 { pad } else { 0.0 };
    hi += pad;
    let pw = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let ph = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let px = |i: usize| MARGIN_LEFT + if n == 1 { 0.0 } else { pw * i as f64 / (n - 1) as f64 };
    let py = |v: f64| MARGIN_TOP + ph * (1.0 - (v.clamp(lo, hi) - lo) / (hi - lo));
    let pts = |t: &[f64]| -> Vec<(f64, f64)> { t.iter().enumerate().map(|(i, &v)| (px(i), py(v))).collect() };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#, WIDTH / 2.0, escape(title));
    let (x0, y0, x1, y1) = (MARGIN_LEFT, MARGIN_TOP + ph, MARGIN_LEFT + pw, MARGIN_TOP);
    let _ = writeln!(s, r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y0:.2}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{y1:.2}" stroke="black"/>"#);
    for t in 0..=TICKS {
        let f = t as f64 / TICKS as f64;
        let v = lo + f * (hi - lo);
        let y = py(v);
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="black"/>"#, x0 - 5.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 8.0, y + 4.0, tick_label(v));
        let k = 1 + ((n - 1) as f64 * f).round() as usize;
        let x = px(k - 1);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, y0 + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{k}</text>"#, y0 + 20.0);
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, x0 + pw / 2.0, HEIGHT - 10.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        y1 + ph / 2.0,
        y1 + ph / 2.0,
        escape(y_label)
    );
    for t in traces {
        let _ = writeln!(s, r##"<polyline fill="none" stroke="#4a78b5" stroke-opacity="0.25" stroke-width="1" points="{}"/>"##, polyline(&pts(t)));
    }
    if !mean.is_empty() {
        let _ = writeln!(s, r##"<polyline fill="none" stroke="#c0392b" stroke-width="2.5" points="{}"/>"##, polyline(&pts(mean)));
    }
    s.push_str("</svg>\n");
    s
}

fn tick_label(v: f64) -> String {
    if v.abs() >= 1000.0 {
        format!("{v:.0}")
    } else if v.abs() >= 10.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.3}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_has_one_polyline_per_trace_plus_mean() {
        let traces = vec![vec![0.0, 1.0, 2.0], vec![0.0, 2.0, 3.0]];
        let svg = line_chart("regret <test>", "episode", "cumulative regret", &traces, &[0.0, 1.5, 2.5]);
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert!(svg.contains("regret &lt;test&gt;"));
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert_eq!(svg, line_chart("regret <test>", "episode", "cumulative regret", &traces, &[0.0, 1.5, 2.5]));
    }

    #[test]
    fn flat_and_empty_inputs_render() {
        assert!(line_chart("t", "x", "y", &[vec![0.0; 4]], &[]).contains("<polyline"));
        assert!(line_chart("t", "x", "y", &[], &[]).contains("</svg>"));
    }
}
