//! Weighted F-measure (Margolin, Zelnik-Manor and Tal).
//!
//! Errors on background pixels are first replaced by the error at their
//! nearest foreground pixel, smoothed with a 7×7 Gaussian (σ = 5) to model
//! pixel dependency, and background pixels are then weighted by
//! `2 - exp(ln(0.5) / 5 · d)` where `d` is their distance to the foreground.

use ndarray::Array2;

use crate::{check_pair, foreground_count, Result, EPS};

/// β² of the weighted F-measure.
pub const WEIGHTED_F_BETA_SQ: f64 = 1.0;
const KERNEL_SIDE: usize = 7;
const KERNEL_SIGMA: f64 = 5.0;

/// Euclidean distance to, and location of, the nearest foreground pixel.
#[derive(Debug, Clone)]
pub struct NearestForeground {
    pub distance: Array2<f64>,
    /// `(row, col)` of the nearest foreground pixel; ties go to the smallest
    /// `(row, col)` in lexicographic order.
    pub index: Array2<(usize, usize)>,
}

/// Exact Euclidean distance transform of a non-empty mask.
///
/// A column pass finds, for every pixel, the nearest foreground row in its own
/// column (preferring the upper one on ties); a row pass then minimizes
/// `dx² + dy²` over columns. Every nearest foreground pixel of `(r, c)` is the
/// column-nearest pixel of its own column, so the lexicographic tie-break is
/// exact.
pub fn distance_transform(mask: &Array2<bool>) -> Option<NearestForeground> {
    let (h, w) = mask.dim();
    if foreground_count(mask) == 0 {
        return None;
    }
    // Nearest foreground row per (row, col) in the same column.
    let mut col_near: Array2<Option<usize>> = Array2::from_elem((h, w), None);
    for c in 0..w {
        let mut last_above: Option<usize> = None;
        for r in 0..h {
            if mask[(r, c)] {
                last_above = Some(r);
            }
            col_near[(r, c)] = last_above;
        }
        let mut next_below: Option<usize> = None;
        for r in (0..h).rev() {
            if mask[(r, c)] {
                next_below = Some(r);
            }
            let above = col_near[(r, c)];
            col_near[(r, c)] = match (above, next_below) {
                (Some(a), Some(b)) => Some(if r - a <= b - r { a } else { b }),
                (a, b) => a.or(b),
            };
        }
    }
    let mut distance = Array2::zeros((h, w));
    let mut index = Array2::from_elem((h, w), (0, 0));
    for r in 0..h {
        for c in 0..w {
            let mut best: Option<(usize, usize, usize)> = None;
            for cc in 0..w {
                let Some(rr) = col_near[(r, cc)] else {
                    continue;
                };
                let d2 = rr.abs_diff(r).pow(2) + cc.abs_diff(c).pow(2);
                let better = match best {
                    None => true,
                    Some((bd, br, bc)) => (d2, rr, cc) < (bd, br, bc),
                };
                if better {
                    best = Some((d2, rr, cc));
                }
            }
            let (d2, rr, cc) = best.expect("non-empty mask has a nearest pixel");
            distance[(r, c)] = (d2 as f64).sqrt();
            index[(r, c)] = (rr, cc);
        }
    }
    Some(NearestForeground { distance, index })
}

/// Normalized `side × side` Gaussian with standard deviation `sigma`.
pub fn gaussian_kernel(side: usize, sigma: f64) -> Array2<f64> {
    let centre = (side as f64 - 1.0) / 2.0;
    let mut k = Array2::from_shape_fn((side, side), |(y, x)| {
        let dy = y as f64 - centre;
        let dx = x as f64 - centre;
        (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
    });
    let total = k.sum();
    k.mapv_inplace(|v| v / total);
    k
}

/// Same-size correlation with zero padding.
fn filter_same(src: &Array2<f64>, kernel: &Array2<f64>) -> Array2<f64> {
    let (h, w) = src.dim();
    let (kh, kw) = kernel.dim();
    let (oy, ox) = (kh / 2, kw / 2);
    Array2::from_shape_fn((h, w), |(r, c)| {
        let mut acc = 0.0;
        for ky in 0..kh {
            let Some(y) = (r + ky).checked_sub(oy).filter(|&y| y < h) else {
                continue;
            };
            for kx in 0..kw {
                if let Some(x) = (c + kx).checked_sub(ox).filter(|&x| x < w) {
                    acc += kernel[(ky, kx)] * src[(y, x)];
                }
            }
        }
        acc
    })
}

/// Weighted F-measure; `None` when the ground truth is empty.
pub fn weighted_f_measure(pred: &Array2<f64>, gt: &Array2<bool>) -> Result<Option<f64>> {
    check_pair(pred, gt)?;
    let Some(nearest) = distance_transform(gt) else {
        return Ok(None);
    };
    let err = Array2::from_shape_fn(pred.dim(), |(r, c)| {
        (pred[(r, c)] - if gt[(r, c)] { 1.0 } else { 0.0 }).abs()
    });
    let propagated = Array2::from_shape_fn(pred.dim(), |(r, c)| {
        if gt[(r, c)] {
            err[(r, c)]
        } else {
            err[nearest.index[(r, c)]]
        }
    });
    let smoothed = filter_same(&propagated, &gaussian_kernel(KERNEL_SIDE, KERNEL_SIGMA));

    let decay = 0.5f64.ln() / 5.0;
    let mut fg_weighted_err = 0.0;
    let mut bg_weighted_err = 0.0;
    for ((r, c), &e) in err.indexed_iter() {
        if gt[(r, c)] {
            fg_weighted_err += e.min(smoothed[(r, c)]);
        } else {
            let importance = 2.0 - (decay * nearest.distance[(r, c)]).exp();
            bg_weighted_err += e * importance;
        }
    }
    let n_fg = foreground_count(gt) as f64;
    let tp = n_fg - fg_weighted_err;
    let recall = 1.0 - fg_weighted_err / n_fg;
    let precision = tp / (EPS + tp + bg_weighted_err);
    let b2 = WEIGHTED_F_BETA_SQ;
    Ok(Some(
        (1.0 + b2) * recall * precision / (EPS + recall + b2 * precision),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn distance_transform_breaks_ties_lexicographically() {
        let mask = array![
            [false, true, false],
            [false, false, false],
            [true, false, true],
        ];
        let nf = distance_transform(&mask).unwrap();
        // (1, 1) is at distance 1 from (0, 1) and sqrt(2) from the bottom corners.
        assert_eq!(nf.index[(1, 1)], (0, 1));
        assert_eq!(nf.distance[(1, 1)], 1.0);
        // (1, 0) is at distance 1 from (2, 0) and sqrt(2) from (0, 1).
        assert_eq!(nf.index[(1, 0)], (2, 0));
        assert_eq!(nf.index[(0, 0)], (0, 1));
        assert!(distance_transform(&Array2::from_elem((2, 2), false)).is_none());
    }

    #[test]
    fn kernel_is_normalized_and_symmetric() {
        let k = gaussian_kernel(7, 5.0);
        assert!((k.sum() - 1.0).abs() < 1e-14);
        assert_eq!(k[(0, 0)], k[(6, 6)]);
        assert!(k[(3, 3)] > k[(0, 3)]);
    }

    #[test]
    fn perfect_and_empty_predictions() {
        let mut gt = Array2::from_elem((10, 10), false);
        for r in 4..7 {
            for c in 3..7 {
                gt[(r, c)] = true;
            }
        }
        let perfect = gt.mapv(|g| if g { 1.0 } else { 0.0 });
        let q = weighted_f_measure(&perfect, &gt).unwrap().unwrap();
        assert!((q - 1.0).abs() < 1e-12);
        // Foreground at least 3 px from the border: the smoothed error is 1 on it.
        let zero = weighted_f_measure(&Array2::zeros((10, 10)), &gt).unwrap().unwrap();
        assert!(zero < 1e-12);
    }
}
