//! Data side of RGB-D salient object detection.
//!
//! A [`DatasetManifest`] lists the `(RGB, depth, GT)` file triples of one
//! split. A [`Loader`] turns a record into a [`SaliencySample`] at a fixed
//! square side, with depth min–max normalized and the edge ground truth
//! derived from the saliency mask by [`derive_edge_gt`]. Training samples
//! can be passed through [`augment`]; [`synthetic`] generates procedural
//! scenes so nothing has to be downloaded.
//!
//! Masks are [`GrayImage`]s holding 0 or 1. Depth is only ever a training
//! target: a loader built with [`DepthMode::Skip`] never opens a depth file,
//! and every loader counts the depth bytes it has read.

mod augment;
mod edges;
mod error;
mod manifest;
mod sample;
pub mod synthetic;

pub use augment::{augment, Crop, Transform, CROP_AREA};
pub use edges::{derive_edge_gt, to_8bit, CANNY_HIGH, CANNY_LOW};
pub use error::{DataError, Result};
pub use image::{GrayImage, Rgb32FImage};
pub use manifest::{DatasetManifest, Record, Split, CACHE_FILE};
pub use sample::{
    normalize_depth, read_mask, read_rgb, resize_rgb, DepthImage, DepthMode, LoadOptions, Loader, SaliencySample,
    MASK_THRESHOLD,
};
