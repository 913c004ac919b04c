//! Six-panel SVG figure of an objective: value, first and second derivative
//! over the whole iterate range (top row) and over the first iterations
//! (bottom row).

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::hermite::PiecewiseObjective;

#[derive(Clone, Debug, PartialEq)]
pub struct PlotOptions {
    /// Abscissa range of the top row; `None` means `[x_0, x_K]`.
    pub range: Option<(f64, f64)>,
    /// Number of iterations shown in the bottom row.
    pub zoom_iterations: usize,
    /// Draws `±eps` guide lines on the first-derivative panels.
    pub eps: Option<f64>,
    pub samples: usize,
    pub title: Option<String>,
}

impl Default for PlotOptions {
    fn default() -> Self {
        Self { range: None, zoom_iterations: 10, eps: None, samples: 600, title: None }
    }
}

const PANEL_W: f64 = 300.0;
const PANEL_H: f64 = 220.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_T: f64 = 50.0;
const GAP_X: f64 = 80.0;
const GAP_Y: f64 = 70.0;
const WIDTH: f64 = MARGIN_L + 3.0 * PANEL_W + 2.0 * GAP_X + 30.0;
const HEIGHT: f64 = MARGIN_T + 2.0 * PANEL_H + GAP_Y + 40.0;

/// Iterate knots `x_0..x_K`, without the two prolongation knots.
fn iterate_knots(obj: &PiecewiseObjective) -> Vec<f64> {
    let knots = obj.knots();
    if knots.len() >= 3 {
        knots[1..knots.len() - 1].iter().map(|k| k.x).collect()
    } else {
        knots.iter().map(|k| k.x).collect()
    }
}

struct Panel<'a> {
    left: f64,
    top: f64,
    label: &'a str,
    order: usize,
    range: (f64, f64),
}

fn draw_panel(out: &mut String, obj: &PiecewiseObjective, panel: &Panel, opts: &PlotOptions) -> Result<()> {
    let (lo, hi) = panel.range;
    let n = opts.samples.max(2);
    let points: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            (x, obj.eval1(x, panel.order))
        })
        .collect();
    let guide = if panel.order == 1 { opts.eps } else { None };
    let mut ymin = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let mut ymax = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    if let Some(e) = guide {
        ymin = ymin.min(-e);
        ymax = ymax.max(e);
    }
    if !(ymin.is_finite() && ymax.is_finite()) {
        return Err(Error::InvalidInput("objective is not finite on the plot range".into()));
    }
    if ymax - ymin < 1e-12 * ymax.abs().max(1.0) {
        ymin -= 0.5;
        ymax += 0.5;
    }
    let pad = 0.05 * (ymax - ymin);
    let (ymin, ymax) = (ymin - pad, ymax + pad);
    let sx = |x: f64| panel.left + (x - lo) / (hi - lo) * PANEL_W;
    let sy = |y: f64| panel.top + (ymax - y) / (ymax - ymin) * PANEL_H;

    let fmt_err = |_| Error::InvalidInput("svg formatting failed".into());
    writeln!(
        out,
        r##"<rect x="{:.2}" y="{:.2}" width="{PANEL_W:.2}" height="{PANEL_H:.2}" fill="none" stroke="#444"/>"##,
        panel.left, panel.top
    )
    .map_err(fmt_err)?;
    writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        panel.left + PANEL_W / 2.0,
        panel.top - 10.0,
        panel.label
    )
    .map_err(fmt_err)?;
    for (value, y) in [(ymax, panel.top + 12.0), (ymin, panel.top + PANEL_H)] {
        writeln!(out, r#"<text x="{:.2}" y="{y:.2}" text-anchor="end" font-size="10">{value:.4}</text>"#, panel.left - 4.0)
            .map_err(fmt_err)?;
    }
    for (value, anchor, x) in [(lo, "start", panel.left), (hi, "end", panel.left + PANEL_W)] {
        writeln!(
            out,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="{anchor}" font-size="10">{value:.4}</text>"#,
            panel.top + PANEL_H + 14.0
        )
        .map_err(fmt_err)?;
    }
    if let Some(e) = guide {
        for level in [-e, e] {
            writeln!(
                out,
                r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#888" stroke-dasharray="2,3"/>"##,
                panel.left,
                panel.left + PANEL_W,
                y = sy(level)
            )
            .map_err(fmt_err)?;
        }
    }
    let mut path = String::new();
    for (i, (x, y)) in points.iter().enumerate() {
        if i > 0 {
            path.push(' ');
        }
        write!(path, "{:.2},{:.2}", sx(*x), sy(*y)).map_err(fmt_err)?;
    }
    writeln!(out, r##"<polyline fill="none" stroke="#1f4e9c" stroke-width="1.2" points="{path}"/>"##)
        .map_err(fmt_err)?;
    Ok(())
}

/// Renders the figure. The same objective and options always produce the
/// same bytes. A 2-D objective is drawn through its first coordinate.
pub fn render_svg(obj: &PiecewiseObjective, opts: &PlotOptions) -> Result<String> {
    let xs = iterate_knots(obj);
    let full = match opts.range {
        Some(r) => r,
        None => (xs[0], xs[xs.len() - 1]),
    };
    if !(full.1 > full.0) || !full.0.is_finite() || !full.1.is_finite() {
        return Err(Error::InvalidInput(format!("empty plot range [{}, {}]", full.0, full.1)));
    }
    let zoom_end = xs[opts.zoom_iterations.min(xs.len() - 1)];
    let zoom = if zoom_end > xs[0] { (xs[0], zoom_end) } else { full };

    let mut out = String::new();
    out.push_str(&format!(
        concat!(
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}" "#,
            r#"font-family="sans-serif" font-size="12">"#,
            "\n"
        ),
        w = WIDTH,
        h = HEIGHT
    ));
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    if let Some(title) = &opts.title {
        let escaped = title.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");
        out.push_str(&format!(
            "<text x=\"{:.2}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{escaped}</text>\n",
            WIDTH / 2.0
        ));
    }
    let labels = [["f", "f'", "f''"], ["f (first iterations)", "f' (first iterations)", "f'' (first iterations)"]];
    for (row, range) in [full, zoom].into_iter().enumerate() {
        for order in 0..3 {
            let panel = Panel {
                left: MARGIN_L + order as f64 * (PANEL_W + GAP_X),
                top: MARGIN_T + row as f64 * (PANEL_H + GAP_Y),
                label: labels[row][order],
                order,
                range,
            };
            draw_panel(&mut out, obj, &panel, opts)?;
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{gen_sd, generate, Family};

    #[test]
    fn six_panels_and_guides() {
        let (obj, _) = gen_sd(0.1).unwrap();
        let opts = PlotOptions { eps: Some(0.1), ..PlotOptions::default() };
        let svg = render_svg(&obj, &opts).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 6);
        assert_eq!(svg.matches("stroke-dasharray").count(), 4);
        assert_eq!(svg, render_svg(&obj, &opts).unwrap());
    }

    #[test]
    fn rejects_empty_range() {
        let (obj, _) = generate(Family::MAlpha, 0.25, 1.0).unwrap();
        let opts = PlotOptions { range: Some((1.0, 1.0)), ..PlotOptions::default() };
        assert!(render_svg(&obj, &opts).is_err());
    }
}
