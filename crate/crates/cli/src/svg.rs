//! Minimal static SVG renderer for the criterion-ensemble figure: the
//! ensemble of `(‖Tx̂‖, b·x̂)` points against the nonsteerability bound
//! curve, no plotting dependencies.

use steerkit::criteria::EnsembleData;

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 60.0;

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        MARGIN + (v - self.x_min) / (self.x_max - self.x_min) * (W - 2.0 * MARGIN)
    }

    fn y(&self, v: f64) -> f64 {
        H - MARGIN - (v - self.y_min) / (self.y_max - self.y_min) * (H - 2.0 * MARGIN)
    }
}

/// Render the ensemble and the bound curve
/// `(1−3ε)|p| + (3ε/2)(1+p²) + q = 1` in the `(q = ‖Tx̂‖, p = b·x̂)` plane.
pub fn ensemble_svg(data: &EnsembleData) -> String {
    let eps = data.epsilon;
    let p_extent = data
        .points
        .iter()
        .map(|pt| pt.b_dot_x.abs())
        .fold(0.05_f64, f64::max)
        * 1.3;
    let frame = Frame { x_min: 0.0, x_max: 1.1, y_min: -p_extent, y_max: p_extent };

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
    ));
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    // Axes.
    out.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        frame.x(0.0),
        frame.y(-p_extent),
        frame.x(0.0),
        frame.y(p_extent)
    ));
    out.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        frame.x(0.0),
        frame.y(0.0),
        frame.x(1.1),
        frame.y(0.0)
    ));
    for tick in [0.25, 0.5, 0.75, 1.0] {
        out.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n",
            frame.x(tick),
            frame.y(0.0) - 4.0,
            frame.y(0.0) + 4.0
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{tick}</text>\n",
            frame.x(tick),
            frame.y(0.0) + 18.0
        ));
    }
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">||Tx||</text>\n",
        frame.x(0.55),
        H - 14.0
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 {} {})\">b.x</text>\n",
        18.0,
        frame.y(0.0),
        18.0,
        frame.y(0.0)
    ));

    // Bound curve: q(p) = 1 − (1−3ε)|p| − (3ε/2)(1 + p²).
    let mut path = String::from("<polyline fill=\"none\" stroke=\"purple\" stroke-width=\"1.5\" points=\"");
    let steps = 400;
    for i in 0..=steps {
        let p = -p_extent + 2.0 * p_extent * i as f64 / steps as f64;
        let q = 1.0 - (1.0 - 3.0 * eps) * p.abs() - 1.5 * eps * (1.0 + p * p);
        path.push_str(&format!("{:.2},{:.2} ", frame.x(q), frame.y(p)));
    }
    path.push_str("\"/>\n");
    out.push_str(&path);

    // Ensemble points; the sample argmax is flagged, the true maximizer is
    // drawn larger.
    for pt in &data.points {
        let r = if pt.is_argmax { 3.5 } else { 1.6 };
        out.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{r}\" fill=\"seagreen\" fill-opacity=\"0.6\"/>\n",
            frame.x(pt.t_norm),
            frame.y(pt.b_dot_x)
        ));
    }
    out.push_str(&format!(
        "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"5.5\" fill=\"none\" stroke=\"darkgreen\" stroke-width=\"1.5\"/>\n",
        frame.x(data.argmax.1),
        frame.y(data.argmax.0)
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-size=\"12\">N = {:.6}, eps = {:.4e}</text>\n",
        MARGIN, data.n_value, eps
    ));
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use steerkit::criteria::EnsemblePoint;

    #[test]
    fn svg_contains_curve_and_points() {
        let data = EnsembleData {
            points: vec![
                EnsemblePoint { b_dot_x: 0.01, t_norm: 0.9, is_argmax: false },
                EnsemblePoint { b_dot_x: -0.02, t_norm: 0.95, is_argmax: true },
            ],
            argmax: (-0.02, 0.95),
            n_value: 0.96,
            epsilon: 2.52e-3,
        };
        let svg = ensemble_svg(&data);
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("<polyline"));
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
