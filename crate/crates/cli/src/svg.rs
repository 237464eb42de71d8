//! Minimal SVG overlay of two ECDFs.

use std::fmt::Write;

use runtime_oracle::predict::Ecdf;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const STEPS: usize = 600;

fn polyline(out: &mut String, ecdf: &Ecdf, lo: f64, hi: f64, colour: &str) {
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    out.push_str("<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"");
    out.push_str(colour);
    out.push_str("\" points=\"");
    for i in 0..=STEPS {
        let t = i as f64 / STEPS as f64;
        let x = lo + (hi - lo) * t;
        let px = MARGIN + plot_w * t;
        let py = HEIGHT - MARGIN - plot_h * ecdf.eval(x);
        let _ = write!(out, "{px:.1},{py:.1} ");
    }
    out.push_str("\"/>\n");
}

/// Predicted (blue) and actual (black) ECDFs on shared axes.
pub fn overlay(predicted: &Ecdf, actual: &Ecdf) -> String {
    let ends = |e: &Ecdf| (e.values.first().copied(), e.values.last().copied());
    let (p0, p1) = ends(predicted);
    let (a0, a1) = ends(actual);
    let mut lo = p0.into_iter().chain(a0).fold(f64::INFINITY, f64::min);
    let mut hi = p1.into_iter().chain(a1).fold(f64::NEG_INFINITY, f64::max);
    if hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
        lo -= 1.0;
        hi += 1.0;
    }
    let pad = (hi - lo) * 0.02;
    lo -= pad;
    hi += pad;

    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let (x0, y0, x1, y1) = (MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN, MARGIN);
    let _ = writeln!(
        s,
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>"
    );
    let _ = writeln!(
        s,
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>"
    );
    let _ = writeln!(
        s,
        "<text x=\"{x0}\" y=\"{}\" text-anchor=\"middle\">{lo:.1}</text>",
        y0 + 16.0
    );
    let _ = writeln!(
        s,
        "<text x=\"{x1}\" y=\"{}\" text-anchor=\"middle\">{hi:.1}</text>",
        y0 + 16.0
    );
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">run time (s)</text>",
        WIDTH / 2.0,
        y0 + 32.0
    );
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">0</text>",
        x0 - 6.0,
        y0 + 4.0
    );
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">1</text>",
        x0 - 6.0,
        y1 + 4.0
    );
    polyline(&mut s, actual, lo, hi, "black");
    polyline(&mut s, predicted, lo, hi, "steelblue");
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" fill=\"black\">actual</text>",
        x0 + 10.0,
        y1 + 10.0
    );
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" fill=\"steelblue\">predicted</text>",
        x0 + 10.0,
        y1 + 26.0
    );
    s.push_str("</svg>\n");
    s
}
