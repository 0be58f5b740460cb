use image::GrayImage;
use imageproc::edges::canny;

use crate::error::{DataError, Result};

/// Canny hysteresis thresholds on 8-bit input. A 0/255 step saturates the
/// gradient, so for binary masks these only need to be fixed, not tuned.
pub const CANNY_LOW: f32 = 100.0;
pub const CANNY_HIGH: f32 = 200.0;

/// Scales a binary mask to 0/255. Masks holding {0, 1} and masks already
/// holding {0, 255} are both accepted; anything else is rejected.
pub fn to_8bit(mask: &GrayImage) -> Result<GrayImage> {
    let unit = mask.pixels().all(|p| p[0] <= 1);
    let full = mask.pixels().all(|p| p[0] == 0 || p[0] == 255);
    if !(unit || full) {
        let bad = mask.pixels().find(|p| p[0] > 1 && p[0] < 255).map_or(0, |p| p[0]);
        return Err(DataError::Validation(format!("mask is not binary (holds {bad})")));
    }
    let mut out = mask.clone();
    if unit {
        out.pixels_mut().for_each(|p| p[0] *= 255);
    }
    Ok(out)
}

/// Edge ground truth of a binary saliency mask, as a 0/1 mask.
pub fn derive_edge_gt(mask: &GrayImage) -> Result<GrayImage> {
    let mut edges = canny(&to_8bit(mask)?, CANNY_LOW, CANNY_HIGH);
    edges.pixels_mut().for_each(|p| p[0] = (p[0] > 0) as u8);
    Ok(edges)
}
