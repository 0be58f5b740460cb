use image::imageops::{self, FilterType};
use image::{GrayImage, ImageBuffer, Pixel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::sample::SaliencySample;

/// Range of the kept area fraction of a random crop.
pub const CROP_AREA: (f64, f64) = (0.875, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Crop {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

/// One geometric augmentation: horizontal flip, then crop resized back to the
/// original size, then clockwise quarter turns. Recorded so it can be
/// replayed on any map of the same size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transform {
    pub flip: bool,
    pub crop: Crop,
    pub quarter_turns: u8,
}

type Buffer<P> = ImageBuffer<P, Vec<<P as Pixel>::Subpixel>>;

impl Transform {
    pub fn identity(width: u32, height: u32) -> Self {
        Self {
            flip: false,
            crop: Crop {
                x: 0,
                y: 0,
                width,
                height,
            },
            quarter_turns: 0,
        }
    }

    /// Flip with probability ½, crop keeping 87.5–100 % of the area at the
    /// original aspect ratio, rotate by 0, 90, 180 or 270 degrees.
    pub fn sample(rng: &mut impl Rng, width: u32, height: u32) -> Self {
        let flip = rng.gen_bool(0.5);
        let scale = rng.gen_range(CROP_AREA.0..=CROP_AREA.1).sqrt();
        let cw = ((width as f64 * scale).round() as u32).clamp(1, width);
        let ch = ((height as f64 * scale).round() as u32).clamp(1, height);
        let crop = Crop {
            x: rng.gen_range(0..=width - cw),
            y: rng.gen_range(0..=height - ch),
            width: cw,
            height: ch,
        };
        Self {
            flip,
            crop,
            quarter_turns: rng.gen_range(0..4),
        }
    }

    pub fn from_seed(seed: u64, width: u32, height: u32) -> Self {
        Self::sample(&mut ChaCha8Rng::seed_from_u64(seed), width, height)
    }

    /// Applies the transform, resampling the crop with `filter`.
    pub fn apply<P: Pixel + 'static>(&self, img: &Buffer<P>, filter: FilterType) -> Buffer<P> {
        let (w, h) = img.dimensions();
        let mut out = if self.flip { imageops::flip_horizontal(img) } else { img.clone() };
        let c = self.crop;
        if (c.x, c.y, c.width, c.height) != (0, 0, w, h) {
            let cropped = imageops::crop_imm(&out, c.x, c.y, c.width, c.height).to_image();
            out = imageops::resize(&cropped, w, h, filter);
        }
        match self.quarter_turns % 4 {
            1 => imageops::rotate90(&out),
            2 => imageops::rotate180(&out),
            3 => imageops::rotate270(&out),
            _ => out,
        }
    }

    /// Nearest-neighbour replay, which keeps masks binary.
    pub fn apply_mask(&self, mask: &GrayImage) -> GrayImage {
        self.apply(mask, FilterType::Nearest)
    }

    /// Transforms RGB and depth bilinearly and the mask by nearest neighbour,
    /// then derives the edges of the transformed mask afresh.
    pub fn apply_sample(&self, s: &SaliencySample) -> Result<SaliencySample> {
        SaliencySample::new(
            s.id.clone(),
            self.apply(&s.rgb, FilterType::Triangle),
            s.depth.as_ref().map(|d| self.apply(d, FilterType::Triangle)),
            self.apply_mask(&s.sal),
        )
    }
}

/// Seeded random augmentation of a training sample, with the transform used.
pub fn augment(sample: &SaliencySample, seed: u64) -> Result<(SaliencySample, Transform)> {
    let (w, h) = sample.dimensions();
    let t = Transform::from_seed(seed, w, h);
    Ok((t.apply_sample(sample)?, t))
}
