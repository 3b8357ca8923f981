//! SVG scatter of a direction map in the azimuth-elevation plane, with
//! points colored by window time.

use std::fmt::Write;

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 90.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;

/// Viridis anchor colors, evenly spaced.
const PALETTE: [(f64, f64, f64); 5] = [
    (68.0, 1.0, 84.0),
    (59.0, 82.0, 139.0),
    (33.0, 145.0, 140.0),
    (94.0, 201.0, 98.0),
    (253.0, 231.0, 37.0),
];

fn color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0) * (PALETTE.len() - 1) as f64;
    let i = (t.floor() as usize).min(PALETTE.len() - 2);
    let u = t - i as f64;
    let (a, b) = (PALETTE[i], PALETTE[i + 1]);
    let mix = |x: f64, y: f64| (x + u * (y - x)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

/// One plotted source: (azimuth deg, elevation deg, time s).
#[derive(Debug, Clone, Copy)]
pub struct Point {
    pub az_deg: f64,
    pub el_deg: f64,
    pub time_s: f64,
}

pub fn render_svg(points: &[Point], comments: &[(String, String)]) -> String {
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x = |az: f64| LEFT + az / 360.0 * plot_w;
    let y = |el: f64| TOP + (1.0 - el / 90.0) * plot_h;
    let (t0, t1) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.time_s), hi.max(p.time_s)));
    let span = if t1 > t0 { t1 - t0 } else { 1.0 };

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    for (k, v) in comments {
        let _ = writeln!(s, "<!-- {}={} -->", k, v.replace("--", "- -"));
    }
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r##"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#333"/>"##);
    for az in (0..=360).step_by(60) {
        let px = x(az as f64);
        let _ = writeln!(
            s,
            r##"<line x1="{px}" y1="{TOP}" x2="{px}" y2="{}" stroke="#ddd"/><text x="{px}" y="{}" text-anchor="middle">{az}</text>"##,
            TOP + plot_h,
            TOP + plot_h + 16.0
        );
    }
    for el in (0..=90).step_by(15) {
        let py = y(el as f64);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{py}" x2="{}" y2="{py}" stroke="#ddd"/><text x="{}" y="{}" text-anchor="end">{el}</text>"##,
            LEFT + plot_w,
            LEFT - 6.0,
            py + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">Azimuth (deg)</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">Elevation (deg)</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );
    let _ = writeln!(s, "<g>");
    for p in points {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2.2" fill="{}"/>"#,
            x(p.az_deg),
            y(p.el_deg),
            color((p.time_s - t0) / span)
        );
    }
    let _ = writeln!(s, "</g>");

    let bar_x = WIDTH - RIGHT + 20.0;
    let steps = 32;
    for i in 0..steps {
        let frac = i as f64 / (steps - 1) as f64;
        let h = plot_h / steps as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{bar_x}" y="{:.2}" width="14" height="{:.2}" fill="{}"/>"#,
            TOP + plot_h - (i + 1) as f64 * h,
            h + 0.5,
            color(frac)
        );
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}">{:.3e} s</text>"#, bar_x - 4.0, TOP - 8.0, t1);
    let _ = writeln!(s, r#"<text x="{}" y="{}">{:.3e} s</text>"#, bar_x - 4.0, TOP + plot_h + 16.0, t0);
    let _ = writeln!(s, "</svg>");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn palette_endpoints() {
        assert_eq!(color(0.0), "#440154");
        assert_eq!(color(1.0), "#fde725");
        assert_eq!(color(7.0), "#fde725");
    }

    #[test]
    fn one_circle_per_point() {
        let pts: Vec<Point> =
            (0..5).map(|i| Point { az_deg: 72.0 * i as f64, el_deg: 10.0 * i as f64, time_s: i as f64 }).collect();
        let svg = render_svg(&pts, &[("filter".into(), "bpf".into())]);
        assert_eq!(svg.matches("<circle").count(), 5);
        assert!(svg.contains("<!-- filter=bpf -->"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
