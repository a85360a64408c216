//! Minimal static SVG charts for evaluation reports.

use std::fmt::Write;

use crate::eval::Spread;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 50.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn open(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axes(s: &mut String) {
    let _ = writeln!(
        s,
        r#"<path d="M{m} {t} V{b} H{r}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
}

/// Maps `v` from `[lo, hi]` onto `[a, b]`; a flat range maps to the middle.
fn scale(v: f64, lo: f64, hi: f64, a: f64, b: f64) -> f64 {
    if hi > lo {
        a + (v - lo) / (hi - lo) * (b - a)
    } else {
        (a + b) / 2.0
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Scatter plot with one colour per named series.
pub fn scatter(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let mut s = open(title);
    axes(&mut s);
    let (x_lo, x_hi) = bounds(series.iter().flat_map(|(_, p)| p.iter().map(|q| q.0)));
    let (y_lo, y_hi) = bounds(series.iter().flat_map(|(_, p)| p.iter().map(|q| q.1)));
    for (i, (name, points)) in series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        for &(x, y) in points {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{colour}" fill-opacity="0.6"/>"#,
                scale(x, x_lo, x_hi, MARGIN + 5.0, WIDTH - MARGIN - 5.0),
                scale(y, y_lo, y_hi, HEIGHT - MARGIN - 5.0, MARGIN + 5.0)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{colour}">{}</text>"#,
            WIDTH - MARGIN - 150.0,
            MARGIN + 15.0 * (i as f64 + 1.0),
            escape(name)
        );
    }
    labels(&mut s, x_label, y_label);
    s.push_str("</svg>\n");
    s
}

fn labels(s: &mut String, x_label: &str, y_label: &str) {
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 15.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
}

/// Box-and-whisker chart, one box per group.
pub fn boxplot(title: &str, y_label: &str, groups: &[(String, Spread)]) -> String {
    let mut s = open(title);
    axes(&mut s);
    let (lo, hi) = bounds(groups.iter().flat_map(|(_, g)| [g.min, g.max]));
    let y = |v: f64| scale(v, lo, hi, HEIGHT - MARGIN - 5.0, MARGIN + 5.0);
    let slot = (WIDTH - 2.0 * MARGIN) / groups.len().max(1) as f64;
    for (i, (name, g)) in groups.iter().enumerate() {
        let cx = MARGIN + slot * (i as f64 + 0.5);
        let half = (slot * 0.25).min(40.0);
        let colour = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            s,
            r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black"/>"#,
            y(g.min),
            y(g.max)
        );
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{colour}" fill-opacity="0.5" stroke="black"/>"#,
            cx - half,
            y(g.q3),
            2.0 * half,
            (y(g.q1) - y(g.q3)).max(0.5)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-width="2"/>"#,
            cx - half,
            y(g.median),
            cx + half,
            y(g.median)
        );
        let _ = writeln!(
            s,
            r#"<text x="{cx:.2}" y="{}" text-anchor="middle">{}</text>"#,
            HEIGHT - MARGIN + 15.0,
            escape(name)
        );
    }
    labels(&mut s, "", y_label);
    s.push_str("</svg>\n");
    s
}

/// Bar chart of values in `[0, 1]`.
pub fn bars(title: &str, y_label: &str, values: &[(String, f64)]) -> String {
    let mut s = open(title);
    axes(&mut s);
    let slot = (WIDTH - 2.0 * MARGIN) / values.len().max(1) as f64;
    for (i, (name, v)) in values.iter().enumerate() {
        let top = scale(*v, 0.0, 1.0, HEIGHT - MARGIN, MARGIN);
        let x = MARGIN + slot * i as f64 + slot * 0.2;
        let _ = writeln!(
            s,
            r#"<rect x="{x:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
            slot * 0.6,
            HEIGHT - MARGIN - top,
            PALETTE[i % PALETTE.len()]
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{:.1}%</text>"#,
            x + slot * 0.3,
            top - 4.0,
            v * 100.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
            x + slot * 0.3,
            HEIGHT - MARGIN + 15.0,
            escape(name)
        );
    }
    labels(&mut s, "", y_label);
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charts_are_closed_documents() {
        let spread = Spread { min: 0.0, q1: 1.0, median: 2.0, q3: 3.0, max: 4.0 };
        for doc in [
            scatter("t", "x", "y", &[("a".into(), vec![(0.0, 1.0), (2.0, -1.0)])]),
            boxplot("t", "y", &[("a<b".into(), spread)]),
            bars("t", "y", &[("a".into(), 0.5)]),
        ] {
            assert!(doc.starts_with("<svg"));
            assert!(doc.trim_end().ends_with("</svg>"));
            assert!(!doc.contains("NaN"));
        }
        assert!(boxplot("t", "y", &[("a<b".into(), spread)]).contains("a&lt;b"));
    }

    #[test]
    fn flat_range_maps_to_middle() {
        assert_eq!(scale(3.0, 3.0, 3.0, 0.0, 10.0), 5.0);
        assert_eq!(scale(1.0, 0.0, 2.0, 0.0, 10.0), 5.0);
    }
}
