use std::path::Path;

use colsod_metrics::PrCurve;
use image::{Rgb, RgbImage};
use imageproc::drawing::{draw_hollow_rect_mut, draw_line_segment_mut};
use imageproc::rect::Rect;

use crate::evaluate::read_report;
use crate::error::{config, file, Result};

const SIZE: u32 = 420;
const MARGIN: u32 = 30;

/// Writes the PR curve of a report file as CSV and as a plot image.
pub fn export_pr(report: &Path, csv: &Path, plot: &Path) -> Result<PrCurve> {
    let curve = read_report(report)?
        .pr_curve
        .ok_or_else(|| config(format!("{} has no PR curve", report.display())))?;
    curve.write_csv(std::fs::File::create(csv).map_err(file(csv))?)?;
    render_pr_plot(&curve).save(plot)?;
    Ok(curve)
}

/// Precision against recall on the unit square, with a 0.1 grid.
pub fn render_pr_plot(curve: &PrCurve) -> RgbImage {
    let mut img = RgbImage::from_pixel(SIZE, SIZE, Rgb([255, 255, 255]));
    let span = (SIZE - 2 * MARGIN) as f32;
    let at = |recall: f64, precision: f64| {
        (
            MARGIN as f32 + recall as f32 * span,
            (SIZE - MARGIN) as f32 - precision as f32 * span,
        )
    };
    for k in 1..10 {
        let v = k as f64 / 10.0;
        let grid = Rgb([225, 225, 225]);
        draw_line_segment_mut(&mut img, at(v, 0.0), at(v, 1.0), grid);
        draw_line_segment_mut(&mut img, at(0.0, v), at(1.0, v), grid);
    }
    draw_hollow_rect_mut(&mut img, Rect::at(MARGIN as i32, MARGIN as i32).of_size(SIZE - 2 * MARGIN + 1, SIZE - 2 * MARGIN + 1), Rgb([0, 0, 0]));
    for w in curve.points.windows(2) {
        let (a, b) = (w[0], w[1]);
        draw_line_segment_mut(&mut img, at(a.1, a.0), at(b.1, b.0), Rgb([200, 30, 30]));
    }
    img
}
