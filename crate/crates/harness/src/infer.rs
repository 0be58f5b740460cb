use std::path::Path;
use std::time::{Duration, Instant};

use colsod_data::{read_rgb, resize_rgb};
use image::imageops::{self, FilterType};
use image::{GrayImage, ImageBuffer, Luma};

use crate::batch::predict;
use crate::checkpoint::Checkpoint;
use crate::error::Result;

#[derive(Debug, Clone, Copy)]
pub struct InferOutcome {
    pub width: u32,
    pub height: u32,
    pub latency: Duration,
}

/// Writes the saliency map of `image` as an 8-bit grayscale PNG at the
/// image's own resolution. Only the RGB image is read.
pub fn infer(ckpt: &Checkpoint, image: &Path, out: &Path) -> Result<InferOutcome> {
    let model = ckpt.model()?;
    let rgb = read_rgb(image)?;
    let (width, height) = rgb.dimensions();
    let start = Instant::now();
    let side = ckpt.config.input_side as u32;
    let pred = predict(&ckpt.config, &model, &ckpt.params, &resize_rgb(&rgb, side))?;
    let latency = start.elapsed();
    let (h, w) = pred.dim();
    let map: ImageBuffer<Luma<f32>, Vec<f32>> =
        ImageBuffer::from_fn(w as u32, h as u32, |x, y| Luma([pred[[y as usize, x as usize]] as f32]));
    let map = if (w as u32, h as u32) == (width, height) {
        map
    } else {
        imageops::resize(&map, width, height, FilterType::Triangle)
    };
    let gray = GrayImage::from_fn(width, height, |x, y| {
        Luma([(map.get_pixel(x, y)[0].clamp(0.0, 1.0) * 255.0).round() as u8])
    });
    gray.save(out)?;
    log::info!("{}: {width}×{height} in {:.4} s", image.display(), latency.as_secs_f64());
    Ok(InferOutcome { width, height, latency })
}
