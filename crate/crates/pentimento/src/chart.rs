//! Static SVG line charts of measured delta series.
//!
//! Series are colored by burn bit (cyan for 0, magenta for 1, gray when
//! ground truth is absent), matching the presentation convention of the
//! delay-drift plots.

use crate::error::{Error, Result};
use crate::experiment::RouteSeries;

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 520.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 50.0;

const COLOR_BURN0: &str = "#17a2b8";
const COLOR_BURN1: &str = "#c71585";
const COLOR_UNKNOWN: &str = "#888888";

/// Render series as an SVG line chart (delta ps vs simulated hour).
/// `has_truth` selects burn-bit coloring; without truth everything is gray.
pub fn render_svg(series: &[RouteSeries], has_truth: bool, title: &str) -> Result<String> {
    if series.is_empty() || series.iter().all(|s| s.points.is_empty()) {
        return Err(Error::Data("nothing to plot: no series points".into()));
    }
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in series {
        for &(x, y) in &s.points {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
    }
    if x_max == x_min {
        x_max = x_min + 1.0;
    }
    // Pad the value axis so flat series render mid-plot.
    let pad = ((y_max - y_min) * 0.08).max(0.5);
    y_min -= pad;
    y_max += pad;

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = move |x: f64| MARGIN_LEFT + (x - x_min) / (x_max - x_min) * plot_w;
    let sy = move |y: f64| MARGIN_TOP + (y_max - y) / (y_max - y_min) * plot_h;

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    out.push_str(&format!(
        "<text x=\"{}\" y=\"20\" font-family=\"sans-serif\" font-size=\"15\" \
         text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2.0,
        xml_escape(title)
    ));

    // Axes.
    out.push_str(&format!(
        "<line x1=\"{l}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{l}\" y1=\"{t}\" x2=\"{l}\" y2=\"{b}\" stroke=\"black\"/>\n",
        l = MARGIN_LEFT,
        r = WIDTH - MARGIN_RIGHT,
        t = MARGIN_TOP,
        b = HEIGHT - MARGIN_BOTTOM,
    ));
    for i in 0..=5 {
        let x = x_min + (x_max - x_min) * i as f64 / 5.0;
        let y = y_min + (y_max - y_min) * i as f64 / 5.0;
        out.push_str(&format!(
            "<line x1=\"{0:.1}\" y1=\"{1:.1}\" x2=\"{0:.1}\" y2=\"{2:.1}\" stroke=\"#cccccc\"/>\n",
            sx(x),
            MARGIN_TOP,
            HEIGHT - MARGIN_BOTTOM,
        ));
        out.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"middle\">{:.0}</text>\n",
            sx(x),
            HEIGHT - MARGIN_BOTTOM + 18.0,
            x
        ));
        out.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"end\">{:.1}</text>\n",
            MARGIN_LEFT - 6.0,
            sy(y) + 4.0,
            y
        ));
    }
    out.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"13\" \
         text-anchor=\"middle\">hours</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 10.0
    ));
    out.push_str(&format!(
        "<text x=\"16\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"13\" \
         text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">delta ps</text>\n",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    ));

    for s in series {
        if s.points.is_empty() {
            continue;
        }
        let color = if !has_truth {
            COLOR_UNKNOWN
        } else if s.burn_bit {
            COLOR_BURN1
        } else {
            COLOR_BURN0
        };
        let path: Vec<String> = s
            .points
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| {
                format!("{}{:.2},{:.2}", if i == 0 { "M" } else { "L" }, sx(x), sy(y))
            })
            .collect();
        out.push_str(&format!(
            "<path d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1\" opacity=\"0.65\"/>\n",
            path.join(" "),
            color
        ));
    }

    if has_truth {
        out.push_str(&format!(
            "<rect x=\"{0}\" y=\"{1}\" width=\"12\" height=\"12\" fill=\"{2}\"/>\
             <text x=\"{3}\" y=\"{4}\" font-family=\"sans-serif\" font-size=\"12\">burn 0</text>\n",
            WIDTH - 150.0,
            MARGIN_TOP + 6.0,
            COLOR_BURN0,
            WIDTH - 133.0,
            MARGIN_TOP + 16.0
        ));
        out.push_str(&format!(
            "<rect x=\"{0}\" y=\"{1}\" width=\"12\" height=\"12\" fill=\"{2}\"/>\
             <text x=\"{3}\" y=\"{4}\" font-family=\"sans-serif\" font-size=\"12\">burn 1</text>\n",
            WIDTH - 150.0,
            MARGIN_TOP + 24.0,
            COLOR_BURN1,
            WIDTH - 133.0,
            MARGIN_TOP + 34.0
        ));
    }
    out.push_str("</svg>\n");
    Ok(out)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
