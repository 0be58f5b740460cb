//! Enhanced-alignment measure (Fan et al.).

use ndarray::Array2;

use crate::{basic::binarize_adaptive, check_pair, foreground_count, Result, EPS};

/// Which foreground map enters the alignment term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EMeasureInput {
    /// The prediction binarized at the adaptive threshold.
    #[default]
    AdaptiveBinary,
    /// The raw prediction values.
    Continuous,
}

/// Mean over pixels of `φ = (ξ + 1)² / 4` with
/// `ξ = 2 · a_gt · a_fm / (a_gt² + a_fm² + eps)` on mean-centred maps.
///
/// All-background ground truth scores `mean(1 − fm)`; all-foreground scores `mean(fm)`.
pub fn e_measure(pred: &Array2<f64>, gt: &Array2<bool>, input: EMeasureInput) -> Result<f64> {
    check_pair(pred, gt)?;
    let fm: Array2<f64> = match input {
        EMeasureInput::AdaptiveBinary => binarize_adaptive(pred).mapv(|b| if b { 1.0 } else { 0.0 }),
        EMeasureInput::Continuous => pred.clone(),
    };
    let n = gt.len() as f64;
    let fg = foreground_count(gt);
    if fg == 0 {
        return Ok(fm.iter().map(|v| 1.0 - v).sum::<f64>() / n);
    }
    if fg == gt.len() {
        return Ok(fm.sum() / n);
    }
    let mu_fm = fm.sum() / n;
    let mu_gt = fg as f64 / n;
    let total: f64 = fm
        .iter()
        .zip(gt)
        .map(|(&f, &g)| {
            let a_fm = f - mu_fm;
            let a_gt = if g { 1.0 } else { 0.0 } - mu_gt;
            let align = 2.0 * a_gt * a_fm / (a_gt * a_gt + a_fm * a_fm + EPS);
            (align + 1.0).powi(2) / 4.0
        })
        .sum();
    Ok(total / n)
}
