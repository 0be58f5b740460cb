use ndarray::Array2;

use crate::{check_pair, foreground_count, Result};

/// β² of the mean F-measure.
pub const F_BETA_SQ: f64 = 0.3;

pub fn mae(pred: &Array2<f64>, gt: &Array2<bool>) -> Result<f64> {
    check_pair(pred, gt)?;
    let total: f64 = pred
        .iter()
        .zip(gt)
        .map(|(&p, &g)| (p - if g { 1.0 } else { 0.0 }).abs())
        .sum();
    Ok(total / pred.len() as f64)
}

/// `min(2 · mean(pred), 1)`.
pub fn adaptive_threshold(pred: &Array2<f64>) -> f64 {
    let mean = pred.sum() / pred.len() as f64;
    (2.0 * mean).min(1.0)
}

/// Foreground where `pred >= threshold`. Zero-valued pixels never count as
/// foreground, so an all-zero map binarizes to an empty mask.
pub fn binarize_adaptive(pred: &Array2<f64>) -> Array2<bool> {
    let t = adaptive_threshold(pred);
    pred.mapv(|p| p > 0.0 && p >= t)
}

/// F-measure at the adaptive threshold; `None` when the ground truth is empty.
pub fn mean_f_measure(pred: &Array2<f64>, gt: &Array2<bool>) -> Result<Option<f64>> {
    check_pair(pred, gt)?;
    if foreground_count(gt) == 0 {
        return Ok(None);
    }
    let bin = binarize_adaptive(pred);
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fneg = 0usize;
    for (&b, &g) in bin.iter().zip(gt) {
        match (b, g) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            _ => {}
        }
    }
    if tp == 0 {
        return Ok(Some(0.0));
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fneg) as f64;
    Ok(Some(
        (1.0 + F_BETA_SQ) * precision * recall / (F_BETA_SQ * precision + recall),
    ))
}
