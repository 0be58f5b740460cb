//! Structure measure (Fan et al.): `α · S_object + (1 − α) · S_region`, α = 0.5.

use ndarray::{s, Array2, ArrayView2};

use crate::{check_pair, foreground_count, Result, EPS};

const ALPHA: f64 = 0.5;

fn mean(values: impl Iterator<Item = f64>) -> (f64, usize) {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (if n == 0 { 0.0 } else { sum / n as f64 }, n)
}

/// Sample standard deviation (n − 1 normalization); zero for fewer than two values.
fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = values.iter().sum::<f64>() / values.len() as f64;
    let ss: f64 = values.iter().map(|v| (v - m).powi(2)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

fn object_score(values: &[f64]) -> f64 {
    let x = values.iter().sum::<f64>() / values.len() as f64;
    2.0 * x / (x * x + 1.0 + std_dev(values) + EPS)
}

fn object_term(pred: &Array2<f64>, gt: &Array2<bool>) -> f64 {
    let fg: Vec<f64> = pred.iter().zip(gt).filter(|(_, &g)| g).map(|(&p, _)| p).collect();
    let bg: Vec<f64> = pred
        .iter()
        .zip(gt)
        .filter(|(_, &g)| !g)
        .map(|(&p, _)| 1.0 - p)
        .collect();
    let u = fg.len() as f64 / pred.len() as f64;
    u * object_score(&fg) + (1.0 - u) * object_score(&bg)
}

/// 1-based centroid `(x, y)` of the foreground, rounded half away from zero.
fn centroid(gt: &Array2<bool>) -> (usize, usize) {
    let (h, w) = gt.dim();
    let total = foreground_count(gt);
    if total == 0 {
        return (
            (w as f64 / 2.0).round() as usize,
            (h as f64 / 2.0).round() as usize,
        );
    }
    let mut sx = 0.0;
    let mut sy = 0.0;
    for ((r, c), &g) in gt.indexed_iter() {
        if g {
            sx += (c + 1) as f64;
            sy += (r + 1) as f64;
        }
    }
    (
        (sx / total as f64).round() as usize,
        (sy / total as f64).round() as usize,
    )
}

/// SSIM-style similarity of one block. An empty block scores zero.
fn block_ssim(pred: ArrayView2<f64>, gt: ArrayView2<bool>) -> f64 {
    let n = pred.len();
    if n == 0 {
        return 0.0;
    }
    let (x, _) = mean(pred.iter().copied());
    let (y, _) = mean(gt.iter().map(|&g| if g { 1.0 } else { 0.0 }));
    let denom = n as f64 - 1.0 + EPS;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&p, &g) in pred.iter().zip(gt) {
        let dx = p - x;
        let dy = if g { 1.0 } else { 0.0 } - y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let (sxx, syy, sxy) = (sxx / denom, syy / denom, sxy / denom);
    let alpha = 4.0 * x * y * sxy;
    let beta = (x * x + y * y) * (sxx + syy);
    if alpha != 0.0 {
        alpha / (beta + EPS)
    } else if beta == 0.0 {
        1.0
    } else {
        0.0
    }
}

fn region_term(pred: &Array2<f64>, gt: &Array2<bool>) -> f64 {
    let (h, w) = gt.dim();
    let (x, y) = centroid(gt);
    let area = (h * w) as f64;
    let w1 = (x * y) as f64 / area;
    let w2 = ((w - x) * y) as f64 / area;
    let w3 = (x * (h - y)) as f64 / area;
    let w4 = 1.0 - w1 - w2 - w3;
    let blocks = [
        (s![..y, ..x], w1),
        (s![..y, x..], w2),
        (s![y.., ..x], w3),
        (s![y.., x..], w4),
    ];
    blocks
        .into_iter()
        .map(|(sl, wt)| wt * block_ssim(pred.slice(sl), gt.slice(sl)))
        .sum()
}

/// S-measure. All-background and all-foreground masks fall back to
/// `1 − mean(pred)` and `mean(pred)` respectively.
pub fn s_measure(pred: &Array2<f64>, gt: &Array2<bool>) -> Result<f64> {
    check_pair(pred, gt)?;
    let fg = foreground_count(gt);
    let mean_pred = pred.sum() / pred.len() as f64;
    if fg == 0 {
        return Ok(1.0 - mean_pred);
    }
    if fg == gt.len() {
        return Ok(mean_pred);
    }
    let q = ALPHA * object_term(pred, gt) + (1.0 - ALPHA) * region_term(pred, gt);
    Ok(q.max(0.0))
}
