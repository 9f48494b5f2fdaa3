//! A minimal line plot of the model output against reference targets.

use std::fmt::Write as _;

const WIDTH: f64 = 1200.0;
const HEIGHT: f64 = 320.0;
const MARGIN: f64 = 20.0;

fn y_of(v: f64) -> f64 {
    // maps [-1.2, 1.2] onto the drawable height
    let h = HEIGHT - 2.0 * MARGIN;
    MARGIN + h * (1.2 - v.clamp(-1.2, 1.2)) / 2.4
}

fn polyline(values: &[f64], colour: &str, width: f64) -> String {
    let n = values.len().max(2) - 1;
    let mut pts = String::new();
    for (i, v) in values.iter().enumerate() {
        let x = MARGIN + (WIDTH - 2.0 * MARGIN) * i as f64 / n as f64;
        write!(pts, "{x:.1},{:.1} ", y_of(*v)).unwrap();
    }
    format!(
        "<polyline fill=\"none\" stroke=\"{colour}\" stroke-width=\"{width}\" points=\"{}\"/>\n",
        pts.trim_end()
    )
}

/// SVG document with η (blue), the reference targets (grey) and the
/// decision thresholds (dashed).
pub fn overlay(eta: &[f64], reference: Option<&[f64]>, thresholds: (f64, f64)) -> String {
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    for t in [0.0, thresholds.0, thresholds.1] {
        let y = y_of(t);
        let dash = if t == 0.0 { "" } else { " stroke-dasharray=\"6,4\"" };
        writeln!(
            s,
            "<line x1=\"{MARGIN}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#bbb\"{dash}/>",
            WIDTH - MARGIN
        )
        .unwrap();
    }
    if let Some(r) = reference {
        s.push_str(&polyline(r, "#888", 2.0));
    }
    s.push_str(&polyline(eta, "#1f5fbf", 1.2));
    s.push_str("</svg>\n");
    s
}
