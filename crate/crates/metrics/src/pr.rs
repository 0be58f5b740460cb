use ndarray::Array2;

use crate::{check_pair, foreground_count, MetricError, Result};

/// Number of binarization thresholds, `t / 255` for `t` in `0..=255`.
pub const PR_THRESHOLDS: usize = 256;

/// How per-image confusion counts combine into the dataset curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PrAccumulation {
    /// Average the per-image precision and recall.
    #[default]
    PerImage,
    /// Sum confusion counts over the dataset first.
    Pooled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    /// `(precision, recall)` at threshold `i / 255`.
    pub points: Vec<(f64, f64)>,
}

impl PrCurve {
    pub fn threshold(i: usize) -> f64 {
        i as f64 / 255.0
    }
}

/// Per-threshold `(tp, predicted positive)` counts; foreground where `pred > t`.
pub(crate) fn counts(pred: &Array2<f64>, gt: &Array2<bool>) -> Vec<(usize, usize)> {
    // Bucket predictions by the number of thresholds they exceed.
    let mut hist_pos = [0usize; PR_THRESHOLDS + 1];
    let mut hist_all = [0usize; PR_THRESHOLDS + 1];
    for (&p, &g) in pred.iter().zip(gt) {
        // Count of i in 0..256 with p > i / 255.
        let above = (0..PR_THRESHOLDS)
            .position(|i| p <= PrCurve::threshold(i))
            .unwrap_or(PR_THRESHOLDS);
        hist_all[above] += 1;
        if g {
            hist_pos[above] += 1;
        }
    }
    // Pixels with `above = k` are foreground for thresholds 0..k.
    let mut out = vec![(0, 0); PR_THRESHOLDS];
    let (mut tp, mut pp) = (0usize, 0usize);
    for i in (0..PR_THRESHOLDS).rev() {
        tp += hist_pos[i + 1];
        pp += hist_all[i + 1];
        out[i] = (tp, pp);
    }
    out
}

pub(crate) fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision/recall curve over the 256 thresholds. Images with empty ground
/// truth are skipped; precision is zero where nothing is predicted.
pub fn pr_curve(
    preds: &[Array2<f64>],
    gts: &[Array2<bool>],
    accumulation: PrAccumulation,
) -> Result<PrCurve> {
    if preds.is_empty() {
        return Err(MetricError::Empty("no images for the PR curve"));
    }
    if preds.len() != gts.len() {
        return Err(MetricError::Parse(format!(
            "{} predictions for {} ground truths",
            preds.len(),
            gts.len()
        )));
    }
    let mut sums = vec![(0.0, 0.0); PR_THRESHOLDS];
    let mut pooled = vec![(0usize, 0usize); PR_THRESHOLDS];
    let mut pooled_fg = 0usize;
    let mut used = 0usize;
    for (pred, gt) in preds.iter().zip(gts) {
        check_pair(pred, gt)?;
        let fg = foreground_count(gt);
        if fg == 0 {
            continue;
        }
        used += 1;
        pooled_fg += fg;
        for (i, (tp, pp)) in counts(pred, gt).into_iter().enumerate() {
            sums[i].0 += ratio(tp, pp);
            sums[i].1 += ratio(tp, fg);
            pooled[i].0 += tp;
            pooled[i].1 += pp;
        }
    }
    if used == 0 {
        return Err(MetricError::Empty("every ground truth is empty"));
    }
    let points = match accumulation {
        PrAccumulation::PerImage => sums
            .into_iter()
            .map(|(p, r)| (p / used as f64, r / used as f64))
            .collect(),
        PrAccumulation::Pooled => pooled
            .into_iter()
            .map(|(tp, pp)| (ratio(tp, pp), ratio(tp, pooled_fg)))
            .collect(),
    };
    Ok(PrCurve { points })
}
