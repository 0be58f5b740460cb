//! Procedural scenes: one bright ellipse or rectangle on a darker graded
//! background, with a radial depth map that puts the object in front.

use std::fs;
use std::path::Path;

use image::{GrayImage, ImageBuffer, Luma, Rgb, Rgb32FImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::manifest::{DatasetManifest, Split};
use crate::sample::{normalize_depth, DepthImage, SaliencySample};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Ellipse,
    Rectangle,
}

/// Geometry of one scene's salient object, in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Object {
    pub shape: Shape,
    pub centre: (f64, f64),
    pub half_extent: (f64, f64),
    /// Rotation in radians.
    pub angle: f64,
}

impl Object {
    fn random(rng: &mut impl Rng, side: f64) -> Self {
        Self {
            shape: if rng.gen_bool(0.5) { Shape::Ellipse } else { Shape::Rectangle },
            centre: (rng.gen_range(0.35..0.65) * side, rng.gen_range(0.35..0.65) * side),
            half_extent: (rng.gen_range(0.15..0.3) * side, rng.gen_range(0.15..0.3) * side),
            angle: rng.gen_range(0.0..std::f64::consts::PI),
        }
    }

    /// Normalized radius of a pixel centre: below 1 inside the object.
    pub fn radius(&self, x: u32, y: u32) -> f64 {
        let (dx, dy) = (x as f64 + 0.5 - self.centre.0, y as f64 + 0.5 - self.centre.1);
        let (s, c) = self.angle.sin_cos();
        let u = (c * dx + s * dy) / self.half_extent.0;
        let v = (-s * dx + c * dy) / self.half_extent.1;
        match self.shape {
            Shape::Ellipse => u.hypot(v),
            Shape::Rectangle => u.abs().max(v.abs()),
        }
    }
}

/// A scene and its object. Identical seeds give identical scenes.
pub fn scene(side: u32, seed: u64) -> Result<(SaliencySample, Object)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let object = Object::random(&mut rng, side as f64);
    let bg: [f32; 3] = std::array::from_fn(|_| rng.gen_range(0.05..0.45));
    let fg: [f32; 3] = std::array::from_fn(|_| rng.gen_range(0.6..0.95));
    let far = (side as f64) * std::f64::consts::SQRT_2;

    let mut rgb = Rgb32FImage::new(side, side);
    let mut depth = DepthImage::new(side, side);
    let mut sal = GrayImage::new(side, side);
    for y in 0..side {
        for x in 0..side {
            let r = object.radius(x, y);
            let inside = r < 1.0;
            let ramp = 0.15 * x as f32 / side as f32;
            let base = if inside { fg } else { bg.map(|c| c + ramp) };
            let noise: [f32; 3] = std::array::from_fn(|_| rng.gen_range(-0.04..0.04));
            rgb.put_pixel(x, y, Rgb(std::array::from_fn(|c| (base[c] + noise[c]).clamp(0.0, 1.0))));
            let (dx, dy) = (x as f64 + 0.5 - object.centre.0, y as f64 + 0.5 - object.centre.1);
            let d = if inside { 0.6 + 0.4 * (1.0 - r) } else { 0.35 * (1.0 - dx.hypot(dy) / far) };
            depth.put_pixel(x, y, Luma([d as f32]));
            sal.put_pixel(x, y, Luma([inside as u8]));
        }
    }
    normalize_depth(&mut depth, "synthetic");
    let sample = SaliencySample::new(format!("scene_{seed:06}"), rgb, Some(depth), sal)?;
    Ok((sample, object))
}

/// `count` scenes with seeds `seed, seed + 1, …`.
pub fn scenes(side: u32, count: usize, seed: u64) -> Result<Vec<SaliencySample>> {
    (0..count as u64).map(|i| scene(side, seed + i).map(|(s, _)| s)).collect()
}

/// Writes scenes as `<root>/<split>/{RGB,depth,GT}` files (8-bit RGB, 16-bit
/// depth, 0/255 masks) and returns the scanned manifest.
pub fn write_dataset(root: &Path, split: Split, side: u32, count: usize, seed: u64) -> Result<DatasetManifest> {
    let dir = DatasetManifest::split_dir(root, split);
    for sub in ["RGB", "depth", "GT"] {
        fs::create_dir_all(dir.join(sub))?;
    }
    for s in scenes(side, count, seed)? {
        let rgb = ImageBuffer::from_fn(side, side, |x, y| {
            Rgb(s.rgb.get_pixel(x, y).0.map(|v| (v * 255.0).round() as u8))
        });
        rgb.save(dir.join("RGB").join(format!("{}.png", s.id)))?;
        let depth: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_fn(side, side, |x, y| {
            Luma([(s.depth.as_ref().unwrap().get_pixel(x, y)[0] * 65535.0).round() as u16])
        });
        depth.save(dir.join("depth").join(format!("{}.png", s.id)))?;
        let gt = GrayImage::from_fn(side, side, |x, y| Luma([s.sal.get_pixel(x, y)[0] * 255]));
        gt.save(dir.join("GT").join(format!("{}.png", s.id)))?;
    }
    DatasetManifest::scan(root, split)
}
