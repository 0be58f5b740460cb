use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use image::imageops::{self, FilterType};
use image::{GrayImage, ImageBuffer, Luma, Rgb32FImage};

use crate::edges::derive_edge_gt;
use crate::error::{ingestion, DataError, Result};
use crate::manifest::{Record, Split};

/// Single-channel depth in `[0, 1]`.
pub type DepthImage = ImageBuffer<Luma<f32>, Vec<f32>>;

/// 8-bit ground-truth values at or above this are foreground.
pub const MASK_THRESHOLD: u8 = 128;

/// One aligned sample. All maps share the same size.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencySample {
    pub id: String,
    /// RGB in `[0, 1]`.
    pub rgb: Rgb32FImage,
    pub depth: Option<DepthImage>,
    /// Saliency mask, 0 or 1.
    pub sal: GrayImage,
    /// Edge mask derived from `sal`, 0 or 1.
    pub edge: GrayImage,
}

impl SaliencySample {
    /// Assembles a sample and derives its edge mask.
    pub fn new(id: impl Into<String>, rgb: Rgb32FImage, depth: Option<DepthImage>, sal: GrayImage) -> Result<Self> {
        let id = id.into();
        let dims = rgb.dimensions();
        if sal.dimensions() != dims || depth.as_ref().is_some_and(|d| d.dimensions() != dims) {
            return Err(DataError::Validation(format!("`{id}`: maps differ in size")));
        }
        let edge = derive_edge_gt(&sal)?;
        Ok(Self {
            id,
            rgb,
            depth,
            sal,
            edge,
        })
    }

    pub fn dimensions(&self) -> (u32, u32) {
        self.rgb.dimensions()
    }

    /// RGB as channel-major `f64` planes.
    pub fn rgb_planes(&self) -> Vec<f64> {
        let (w, h) = self.rgb.dimensions();
        let plane = (w * h) as usize;
        let mut out = vec![0.0; 3 * plane];
        for (i, p) in self.rgb.pixels().enumerate() {
            for c in 0..3 {
                out[c * plane + i] = p[c] as f64;
            }
        }
        out
    }

    pub fn sal_values(&self) -> Vec<f64> {
        mask_values(&self.sal)
    }

    pub fn edge_values(&self) -> Vec<f64> {
        mask_values(&self.edge)
    }

    pub fn depth_values(&self) -> Option<Vec<f64>> {
        self.depth.as_ref().map(|d| d.pixels().map(|p| p[0] as f64).collect())
    }
}

fn mask_values(m: &GrayImage) -> Vec<f64> {
    m.pixels().map(|p| p[0] as f64).collect()
}

/// How a loader treats depth files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepthMode {
    /// Missing depth is an ingestion error (training).
    Require,
    /// Depth is loaded when the record has it.
    IfPresent,
    /// Depth files are never opened (evaluation and inference).
    Skip,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadOptions {
    /// Output side; every map is resized to `side × side`.
    pub side: u32,
    pub depth: DepthMode,
    /// For corpora that store far as bright.
    pub invert_depth: bool,
}

impl LoadOptions {
    /// Training requires depth; the test split takes it when present.
    pub fn for_split(split: Split, side: u32) -> Self {
        Self {
            side,
            depth: match split {
                Split::Train => DepthMode::Require,
                Split::Test => DepthMode::IfPresent,
            },
            invert_depth: false,
        }
    }
}

/// Loads records at a fixed side and counts the depth bytes it reads.
#[derive(Debug, Clone)]
pub struct Loader {
    opts: LoadOptions,
    depth_bytes: Arc<AtomicU64>,
}

impl Loader {
    pub fn new(opts: LoadOptions) -> Self {
        Self {
            opts,
            depth_bytes: Arc::new(AtomicU64::new(0)),
        }
    }

    pub fn options(&self) -> &LoadOptions {
        &self.opts
    }

    /// Depth bytes read so far by this loader and its clones.
    pub fn depth_bytes_read(&self) -> u64 {
        self.depth_bytes.load(Ordering::SeqCst)
    }

    pub fn load(&self, record: &Record) -> Result<SaliencySample> {
        let side = self.opts.side;
        let rgb = resize_rgb(&read_rgb(&record.rgb)?, side);
        let sal = read_mask(&record.gt, side)?;
        let depth = match (self.opts.depth, &record.depth) {
            (DepthMode::Skip, _) | (DepthMode::IfPresent, None) => None,
            (DepthMode::Require, None) => {
                return Err(ingestion(&record.rgb, format!("no depth map for `{}`", record.id)));
            }
            (_, Some(_)) => Some(self.load_depth(record)?),
        };
        SaliencySample::new(record.id.clone(), rgb, depth, sal)
    }

    pub fn load_all(&self, records: &[Record]) -> Result<Vec<SaliencySample>> {
        records.iter().map(|r| self.load(r)).collect()
    }

    /// Reads, resizes and min–max normalizes one depth map. Refused outright
    /// by a [`DepthMode::Skip`] loader.
    pub fn load_depth(&self, record: &Record) -> Result<DepthImage> {
        if self.opts.depth == DepthMode::Skip {
            return Err(DataError::DepthSkipped(record.id.clone()));
        }
        let path = record
            .depth
            .as_ref()
            .ok_or_else(|| ingestion(&record.rgb, format!("no depth map for `{}`", record.id)))?;
        let bytes = std::fs::read(path).map_err(|e| ingestion(path, e))?;
        self.depth_bytes.fetch_add(bytes.len() as u64, Ordering::SeqCst);
        let raw = image::load_from_memory(&bytes).map_err(|e| ingestion(path, e))?;
        let mut depth = imageops::resize(&raw.to_luma32f(), self.opts.side, self.opts.side, FilterType::Triangle);
        normalize_depth(&mut depth, &record.id);
        if self.opts.invert_depth {
            depth.pixels_mut().for_each(|p| p[0] = 1.0 - p[0]);
        }
        Ok(depth)
    }
}

/// Decodes an image file as RGB in `[0, 1]` at its own resolution.
pub fn read_rgb(path: &Path) -> Result<Rgb32FImage> {
    Ok(image::open(path).map_err(|e| ingestion(path, e))?.to_rgb32f())
}

/// Bilinear resize to `side × side`.
pub fn resize_rgb(rgb: &Rgb32FImage, side: u32) -> Rgb32FImage {
    if rgb.dimensions() == (side, side) {
        return rgb.clone();
    }
    imageops::resize(rgb, side, side, FilterType::Triangle)
}

/// Decodes a ground-truth mask, resizes it by nearest neighbour and
/// thresholds it at [`MASK_THRESHOLD`].
pub fn read_mask(path: &Path, side: u32) -> Result<GrayImage> {
    let gray = image::open(path).map_err(|e| ingestion(path, e))?.to_luma8();
    let mut mask = imageops::resize(&gray, side, side, FilterType::Nearest);
    mask.pixels_mut().for_each(|p| p[0] = (p[0] >= MASK_THRESHOLD) as u8);
    Ok(mask)
}

/// Per-image min–max normalization. A constant map carries no depth cue and
/// becomes all zero.
pub fn normalize_depth(depth: &mut DepthImage, id: &str) {
    let (lo, hi) = depth
        .pixels()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), p| (lo.min(p[0]), hi.max(p[0])));
    if hi > lo {
        depth.pixels_mut().for_each(|p| p[0] = (p[0] - lo) / (hi - lo));
    } else {
        log::warn!("depth map of `{id}` is constant; using zeros");
        depth.pixels_mut().for_each(|p| p[0] = 0.0);
    }
}
