//! Standalone SVG charts, no plotting framework.
//!
//! Three chart kinds, all pure functions of the scenario result: a
//! loss-curve line plot per trained model (exactly one polyline), an
//! actual-vs-predicted scatter with the identity line, and a correlation
//! bar chart. Coordinates are formatted with fixed precision so the files
//! are byte-stable.

use crate::scenario::ScenarioResult;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 25.0;
const MARGIN_TOP: f64 = 35.0;
const MARGIN_BOTTOM: f64 = 55.0;

/// Emitted plot files plus notes about skipped charts.
#[derive(Debug, Clone, Default)]
pub struct PlotSet {
    /// `(file name, svg document)` pairs.
    pub files: Vec<(String, String)>,
    pub notes: Vec<String>,
}

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        let widen = |lo: f64, hi: f64| {
            if (hi - lo).abs() < 1e-12 {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        };
        let (x_min, x_max) = widen(x_min, x_max);
        let (y_min, y_max) = widen(y_min, y_max);
        Frame {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    fn x(&self, value: f64) -> f64 {
        MARGIN_LEFT + (value - self.x_min) / (self.x_max - self.x_min)
            * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn y(&self, value: f64) -> f64 {
        HEIGHT - MARGIN_BOTTOM
            - (value - self.y_min) / (self.y_max - self.y_min)
                * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn svg_open(title: &str) -> String {
    format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" ",
            "viewBox=\"0 0 {w} {h}\">\n",
            "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
            "<text x=\"{tx:.2}\" y=\"20\" text-anchor=\"middle\" ",
            "font-family=\"sans-serif\" font-size=\"14\">{title}</text>\n"
        ),
        w = WIDTH,
        h = HEIGHT,
        tx = WIDTH / 2.0,
        title = title,
    )
}

fn axes(frame: &Frame, x_label: &str, y_label: &str) -> String {
    let x0 = frame.x(frame.x_min);
    let x1 = frame.x(frame.x_max);
    let y0 = frame.y(frame.y_min);
    let y1 = frame.y(frame.y_max);
    format!(
        concat!(
            "<line x1=\"{x0:.2}\" y1=\"{y0:.2}\" x2=\"{x1:.2}\" y2=\"{y0:.2}\" ",
            "stroke=\"black\" stroke-width=\"1\"/>\n",
            "<line x1=\"{x0:.2}\" y1=\"{y0:.2}\" x2=\"{x0:.2}\" y2=\"{y1:.2}\" ",
            "stroke=\"black\" stroke-width=\"1\"/>\n",
            "<text x=\"{xm:.2}\" y=\"{xy:.2}\" text-anchor=\"middle\" ",
            "font-family=\"sans-serif\" font-size=\"12\">{x_label}</text>\n",
            "<text x=\"18\" y=\"{ym:.2}\" text-anchor=\"middle\" ",
            "font-family=\"sans-serif\" font-size=\"12\" ",
            "transform=\"rotate(-90 18 {ym:.2})\">{y_label}</text>\n",
            "<text x=\"{x0:.2}\" y=\"{lb:.2}\" text-anchor=\"middle\" ",
            "font-family=\"sans-serif\" font-size=\"10\">{x_min}</text>\n",
            "<text x=\"{x1:.2}\" y=\"{lb:.2}\" text-anchor=\"middle\" ",
            "font-family=\"sans-serif\" font-size=\"10\">{x_max}</text>\n",
            "<text x=\"{yl:.2}\" y=\"{y0:.2}\" text-anchor=\"end\" ",
            "font-family=\"sans-serif\" font-size=\"10\">{y_min}</text>\n",
            "<text x=\"{yl:.2}\" y=\"{y1t:.2}\" text-anchor=\"end\" ",
            "font-family=\"sans-serif\" font-size=\"10\">{y_max}</text>\n",
        ),
        x0 = x0,
        x1 = x1,
        y0 = y0,
        y1 = y1,
        xm = (x0 + x1) / 2.0,
        xy = HEIGHT - 15.0,
        ym = (y0 + y1) / 2.0,
        lb = y0 + 16.0,
        yl = x0 - 6.0,
        y1t = y1 + 4.0,
        x_label = x_label,
        y_label = y_label,
        x_min = trim_number(frame.x_min),
        x_max = trim_number(frame.x_max),
        y_min = trim_number(frame.y_min),
        y_max = trim_number(frame.y_max),
    )
}

fn trim_number(v: f64) -> String {
    if (v - v.round()).abs() < 1e-9 && v.abs() < 1e9 {
        format!("{:.0}", v)
    } else {
        format!("{v:.4}")
    }
}

/// Line plot of per-epoch training MSE. `None` when the curve is empty.
pub fn loss_curve_svg(series_name: &str, loss_curve: &[f64]) -> Option<String> {
    if loss_curve.is_empty() {
        return None;
    }
    let y_min = loss_curve.iter().cloned().fold(f64::INFINITY, f64::min);
    let y_max = loss_curve.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let frame = Frame::new(0.0, (loss_curve.len() - 1).max(1) as f64, y_min.min(0.0), y_max);
    let mut svg = svg_open(&format!("Training loss: {series_name}"));
    svg.push_str(&axes(&frame, "epoch", "mse"));
    let points: Vec<String> = loss_curve
        .iter()
        .enumerate()
        .map(|(epoch, value)| format!("{:.2},{:.2}", frame.x(epoch as f64), frame.y(*value)))
        .collect();
    svg.push_str(&format!(
        "<polyline fill=\"none\" stroke=\"#2563eb\" stroke-width=\"1.5\" points=\"{}\"/>\n",
        points.join(" ")
    ));
    svg.push_str("</svg>\n");
    Some(svg)
}

/// Actual-vs-predicted scatter with the identity line.
pub fn fit_scatter_svg(series_name: &str, actual: &[f64], predicted: &[f64]) -> Option<String> {
    if actual.is_empty() || actual.len() != predicted.len() {
        return None;
    }
    let lo = actual
        .iter()
        .chain(predicted)
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let hi = actual
        .iter()
        .chain(predicted)
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let frame = Frame::new(lo, hi, lo, hi);
    let mut svg = svg_open(&format!("Test fit: {series_name}"));
    svg.push_str(&axes(&frame, "actual", "predicted"));
    svg.push_str(&format!(
        "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" \
         stroke=\"#9ca3af\" stroke-width=\"1\" stroke-dasharray=\"4 3\"/>\n",
        frame.x(frame.x_min),
        frame.y(frame.x_min),
        frame.x(frame.x_max),
        frame.y(frame.x_max),
    ));
    for (a, p) in actual.iter().zip(predicted) {
        svg.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"#dc2626\" fill-opacity=\"0.6\"/>\n",
            frame.x(*a),
            frame.y(*p)
        ));
    }
    svg.push_str("</svg>\n");
    Some(svg)
}

/// Bar chart of the SOC correlation pairs. `None` when the report is empty.
pub fn correlation_bars_svg(result: &ScenarioResult) -> Option<String> {
    let pairs = &result.correlations.pairs;
    if pairs.is_empty() {
        return None;
    }
    let frame = Frame::new(0.0, pairs.len() as f64, -1.0, 1.0);
    let mut svg = svg_open("SOC correlations");
    svg.push_str(&axes(&frame, "", "pearson r"));
    let zero_y = frame.y(0.0);
    svg.push_str(&format!(
        "<line x1=\"{:.2}\" y1=\"{zero_y:.2}\" x2=\"{:.2}\" y2=\"{zero_y:.2}\" \
         stroke=\"#9ca3af\" stroke-width=\"0.8\"/>\n",
        frame.x(frame.x_min),
        frame.x(frame.x_max),
    ));
    let slot = (WIDTH - MARGIN_LEFT - MARGIN_RIGHT) / pairs.len() as f64;
    for (idx, pair) in pairs.iter().enumerate() {
        let x = MARGIN_LEFT + idx as f64 * slot + slot * 0.2;
        let bar_width = slot * 0.6;
        let y_value = frame.y(pair.r);
        let (top, height) = if pair.r >= 0.0 {
            (y_value, zero_y - y_value)
        } else {
            (zero_y, y_value - zero_y)
        };
        let color = if pair.r >= 0.0 { "#16a34a" } else { "#dc2626" };
        svg.push_str(&format!(
            "<rect x=\"{x:.2}\" y=\"{top:.2}\" width=\"{bar_width:.2}\" height=\"{height:.2}\" \
             fill=\"{color}\"/>\n",
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" \
             font-family=\"sans-serif\" font-size=\"9\">{}</text>\n",
            x + bar_width / 2.0,
            HEIGHT - MARGIN_BOTTOM + 14.0,
            pair.b,
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" \
             font-family=\"sans-serif\" font-size=\"9\">{:.2}</text>\n",
            x + bar_width / 2.0,
            if pair.r >= 0.0 { y_value - 4.0 } else { y_value + 11.0 },
            pair.r,
        ));
    }
    svg.push_str("</svg>\n");
    Some(svg)
}

/// Renders every chart the result supports; absent diagnostics become notes
/// instead of files.
pub fn emit_plots(result: &ScenarioResult) -> PlotSet {
    let mut set = PlotSet::default();
    for (name, forecast) in &result.forecast {
        match loss_curve_svg(name, &forecast.diagnostics.loss_curve) {
            Some(svg) => set.files.push((format!("loss_{name}.svg"), svg)),
            None => set.notes.push(format!("loss curve for `{name}` empty, plot skipped")),
        }
    }
    for (name, data) in &result.series {
        match fit_scatter_svg(name, &data.test_actual, &data.test_predicted) {
            Some(svg) => set.files.push((format!("fit_{name}.svg"), svg)),
            None => set
                .notes
                .push(format!("test predictions for `{name}` empty, plot skipped")),
        }
    }
    match correlation_bars_svg(result) {
        Some(svg) => set.files.push(("correlations.svg".to_string(), svg)),
        None => set
            .notes
            .push("correlation report empty, plot skipped".to_string()),
    }
    set
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_loss_curve_skipped() {
        assert!(loss_curve_svg("s", &[]).is_none());
    }

    #[test]
    fn two_point_curve_has_one_polyline_with_two_points() {
        let svg = loss_curve_svg("s", &[0.5, 0.25]).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        let points = svg
            .split("points=\"")
            .nth(1)
            .and_then(|rest| rest.split('"').next())
            .expect("points attribute");
        assert_eq!(points.split(' ').count(), 2);
    }

    #[test]
    fn perfect_predictions_lie_on_identity_line() {
        let actual = vec![1.0, 2.0, 3.0, 4.0];
        let svg = fit_scatter_svg("s", &actual, &actual).unwrap();
        // Every circle center must satisfy the identity mapping: cy for a
        // value equals the y-projection of its x-coordinate value.
        let frame = Frame::new(1.0, 4.0, 1.0, 4.0);
        for value in &actual {
            let expected = format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\"",
                frame.x(*value),
                frame.y(*value)
            );
            assert!(svg.contains(&expected), "missing {expected}");
        }
        assert!(svg.contains("stroke-dasharray"));
    }

    #[test]
    fn svg_documents_are_well_formed_enough() {
        let svg = loss_curve_svg("s", &[1.0, 0.5, 0.1]).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<svg").count(), 1);
    }
}
