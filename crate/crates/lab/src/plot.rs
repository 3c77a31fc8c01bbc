//! Static SVG plots. Plots are drawn from the same rows that go into the CSV
//! files and never feed back into them.

use anyhow::{anyhow, Result};
use plotters::prelude::*;

const WIDTH: u32 = 800;
const HEIGHT: u32 = 560;

/// One curve. `markers` draws points instead of a line.
pub struct Curve {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub markers: bool,
}

fn color(i: usize) -> RGBColor {
    let (r, g, b) = Palette99::pick(i).to_rgba().rgb();
    RGBColor(r, g, b)
}

fn bounds(curves: &[Curve]) -> ((f64, f64), (f64, f64)) {
    let mut x = (f64::INFINITY, f64::NEG_INFINITY);
    let mut y = (f64::INFINITY, f64::NEG_INFINITY);
    for &(a, b) in curves.iter().flat_map(|c| &c.points) {
        if a.is_finite() && b.is_finite() {
            x = (x.0.min(a), x.1.max(a));
            y = (y.0.min(b), y.1.max(b));
        }
    }
    let pad = |(lo, hi): (f64, f64)| {
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo < 1e-12 {
            (lo - 0.5, hi + 0.5)
        } else {
            let m = 0.05 * (hi - lo);
            (lo - m, hi + m)
        }
    };
    (pad(x), pad(y))
}

fn err<E: std::fmt::Debug>(e: E) -> anyhow::Error {
    anyhow!("plot: {e:?}")
}

/// Line/marker chart rendered to an SVG string.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, curves: &[Curve]) -> Result<String> {
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (WIDTH, HEIGHT)).into_drawing_area();
        root.fill(&WHITE).map_err(err)?;
        let ((x0, x1), (y0, y1)) = bounds(curves);
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 20))
            .margin(12)
            .x_label_area_size(40)
            .y_label_area_size(60)
            .build_cartesian_2d(x0..x1, y0..y1)
            .map_err(err)?;
        chart.configure_mesh().x_desc(x_label).y_desc(y_label).draw().map_err(err)?;
        for (i, c) in curves.iter().enumerate() {
            let style = color(i);
            let pts = c.points.iter().copied().filter(|(a, b)| a.is_finite() && b.is_finite());
            let series = if c.markers {
                chart.draw_series(pts.map(|p| Circle::new(p, 3, style.filled()))).map_err(err)?
            } else {
                chart.draw_series(LineSeries::new(pts, style.stroke_width(2))).map_err(err)?
            };
            series.label(c.label.clone()).legend(move |(x, y)| PathElement::new([(x, y), (x + 16, y)], style));
        }
        if !curves.is_empty() {
            chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw().map_err(err)?;
        }
        root.present().map_err(err)?;
    }
    Ok(svg)
}

/// Heat map of `(x, y, z)` samples on a regular grid, `z` in `[0, 1]`.
pub fn heatmap(title: &str, x_label: &str, y_label: &str, cells: &[(f64, f64, f64)], points: usize) -> Result<String> {
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (WIDTH, WIDTH)).into_drawing_area();
        root.fill(&WHITE).map_err(err)?;
        if cells.is_empty() {
            return Err(anyhow!("plot: heat map without cells"));
        }
        let lo = cells.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
        let hi = cells.iter().map(|c| c.0).fold(f64::NEG_INFINITY, f64::max);
        let step = if points > 1 { (hi - lo) / (points - 1) as f64 } else { 1.0 };
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 20))
            .margin(12)
            .x_label_area_size(40)
            .y_label_area_size(60)
            .build_cartesian_2d(lo..hi + step, lo..hi + step)
            .map_err(err)?;
        chart.configure_mesh().disable_mesh().x_desc(x_label).y_desc(y_label).draw().map_err(err)?;
        chart
            .draw_series(cells.iter().map(|&(x, y, z)| {
                // Blue (low) through green to red (high).
                let c = HSLColor(0.66 * (1.0 - z.clamp(0.0, 1.0)), 0.85, 0.5);
                Rectangle::new([(x, y), (x + step, y + step)], c.filled())
            }))
            .map_err(err)?;
        root.present().map_err(err)?;
    }
    Ok(svg)
}
