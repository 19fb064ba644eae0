//! Standalone SVG line charts: one polyline per series, optional error
//! whiskers, legend, linear axes. Output is a pure function of the
//! input, so identical calls produce identical bytes.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Symmetric error per point; empty for no whiskers.
    pub err: Vec<f64>,
}

impl Series {
    pub fn new(name: &str, x: Vec<f64>, y: Vec<f64>) -> Series {
        Series { name: name.to_string(), x, y, err: Vec::new() }
    }

    pub fn with_err(name: &str, x: Vec<f64>, y: Vec<f64>, err: Vec<f64>) -> Series {
        Series { name: name.to_string(), x, y, err }
    }
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 170.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 60.0;
const TICKS: usize = 5;
const PALETTE: [&str; 8] =
    ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"];

fn validate(series: &[Series]) -> Result<()> {
    if series.is_empty() {
        return Err(Error::Usage("no series to plot".into()));
    }
    for s in series {
        if s.x.is_empty() {
            return Err(Error::Usage(format!("series {:?} has no points", s.name)));
        }
        if s.x.len() != s.y.len() {
            return Err(Error::Usage(format!(
                "series {:?}: {} x values vs {} y values",
                s.name,
                s.x.len(),
                s.y.len()
            )));
        }
        if !s.err.is_empty() && s.err.len() != s.x.len() {
            return Err(Error::Usage(format!(
                "series {:?}: {} error values vs {} points",
                s.name,
                s.err.len(),
                s.x.len()
            )));
        }
        let finite = s.x.iter().chain(&s.y).chain(&s.err).all(|v| v.is_finite());
        if !finite {
            return Err(Error::Usage(format!("series {:?} has non-finite values", s.name)));
        }
    }
    Ok(())
}

fn range_of(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo == hi {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        return (lo - pad, hi + pad);
    }
    let pad = (hi - lo) * 0.05;
    (lo - pad, hi + pad)
}

fn coord(v: f64) -> String {
    format!("{v:.2}")
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.4}");
    let trimmed = s.trim_end_matches('0').trim_end_matches('.');
    if trimmed.is_empty() || trimmed == "-" {
        "0".to_string()
    } else {
        trimmed.to_string()
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// The chart as an SVG document string.
pub fn render_plot(series: &[Series], x_label: &str, y_label: &str) -> Result<String> {
    validate(series)?;
    let (x_lo, x_hi) = range_of(series.iter().flat_map(|s| s.x.iter().copied()));
    let (y_lo, y_hi) = range_of(series.iter().flat_map(|s| {
        let errs = if s.err.is_empty() { vec![0.0; s.y.len()] } else { s.err.clone() };
        s.y.iter()
            .zip(errs)
            .flat_map(|(&y, e)| [y - e, y + e])
            .collect::<Vec<f64>>()
    }));
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = move |v: f64| MARGIN_LEFT + (v - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = move |v: f64| MARGIN_TOP + plot_h - (v - y_lo) / (y_hi - y_lo) * plot_h;

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    out.push_str(&format!("<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"));

    // axes
    let x_axis_y = MARGIN_TOP + plot_h;
    out.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        coord(MARGIN_LEFT),
        coord(x_axis_y),
        coord(MARGIN_LEFT + plot_w),
        coord(x_axis_y)
    ));
    out.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        coord(MARGIN_LEFT),
        coord(MARGIN_TOP),
        coord(MARGIN_LEFT),
        coord(x_axis_y)
    ));

    // ticks and grid labels
    for i in 0..=TICKS {
        let f = i as f64 / TICKS as f64;
        let xv = x_lo + f * (x_hi - x_lo);
        let xp = sx(xv);
        out.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n",
            coord(xp),
            coord(x_axis_y),
            coord(x_axis_y + 5.0)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
            coord(xp),
            coord(x_axis_y + 20.0),
            tick_label(xv)
        ));
        let yv = y_lo + f * (y_hi - y_lo);
        let yp = sy(yv);
        out.push_str(&format!(
            "<line x1=\"{1}\" y1=\"{0}\" x2=\"{2}\" y2=\"{0}\" stroke=\"black\"/>\n",
            coord(yp),
            coord(MARGIN_LEFT - 5.0),
            coord(MARGIN_LEFT)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"end\">{}</text>\n",
            coord(MARGIN_LEFT - 8.0),
            coord(yp + 4.0),
            tick_label(yv)
        ));
    }

    // axis labels
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
        coord(MARGIN_LEFT + plot_w / 2.0),
        coord(HEIGHT - 15.0),
        escape(x_label)
    ));
    out.push_str(&format!(
        "<text x=\"{0}\" y=\"{1}\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 {0} {1})\">{2}</text>\n",
        coord(18.0),
        coord(MARGIN_TOP + plot_h / 2.0),
        escape(y_label)
    ));

    // whiskers then lines, series by series
    for (si, s) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        if !s.err.is_empty() {
            for ((&x, &y), &e) in s.x.iter().zip(&s.y).zip(&s.err) {
                if e == 0.0 {
                    continue;
                }
                let (xp, y_top, y_bot) = (sx(x), sy(y + e), sy(y - e));
                out.push_str(&format!(
                    "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"{3}\" stroke-width=\"1\"/>\n",
                    coord(xp),
                    coord(y_top),
                    coord(y_bot),
                    color
                ));
                for yc in [y_top, y_bot] {
                    out.push_str(&format!(
                        "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"{3}\" stroke-width=\"1\"/>\n",
                        coord(xp - 4.0),
                        coord(yc),
                        coord(xp + 4.0),
                        color
                    ));
                }
            }
        }
        let points: Vec<String> =
            s.x.iter().zip(&s.y).map(|(&x, &y)| format!("{},{}", coord(sx(x)), coord(sy(y)))).collect();
        out.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>\n",
            color,
            points.join(" ")
        ));
    }

    // legend
    let legend_x = MARGIN_LEFT + plot_w + 20.0;
    for (si, s) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let y = MARGIN_TOP + 10.0 + si as f64 * 22.0;
        out.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"{3}\" stroke-width=\"2\"/>\n",
            coord(legend_x),
            coord(y),
            coord(legend_x + 24.0),
            color
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"13\">{}</text>\n",
            coord(legend_x + 30.0),
            coord(y + 4.0),
            escape(&s.name)
        ));
    }

    out.push_str("</svg>\n");
    Ok(out)
}

/// Renders and writes the chart; bytes depend only on the arguments.
pub fn emit_plot(path: &Path, series: &[Series], x_label: &str, y_label: &str) -> Result<()> {
    let svg = render_plot(series, x_label, y_label)?;
    std::fs::write(path, svg.as_bytes())?;
    Ok(())
}
