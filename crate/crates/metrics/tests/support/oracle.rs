//! Loop-level transcriptions of the saliency measures, written independently of
//! the library code. Used as reference oracles by the metric tests.

#![allow(dead_code)]

use ndarray::Array2;

pub const EPS: f64 = f64::EPSILON;

fn g(gt: &Array2<bool>, r: usize, c: usize) -> f64 {
    if gt[[r, c]] {
        1.0
    } else {
        0.0
    }
}

pub fn mae(pred: &Array2<f64>, gt: &Array2<bool>) -> f64 {
    let (h, w) = pred.dim();
    let mut s = 0.0;
    for r in 0..h {
        for c in 0..w {
            s += (pred[[r, c]] - g(gt, r, c)).abs();
        }
    }
    s / (h * w) as f64
}

fn threshold(pred: &Array2<f64>) -> f64 {
    let (h, w) = pred.dim();
    let mut s = 0.0;
    for r in 0..h {
        for c in 0..w {
            s += pred[[r, c]];
        }
    }
    let t = 2.0 * s / (h * w) as f64;
    if t > 1.0 {
        1.0
    } else {
        t
    }
}

fn binary(pred: &Array2<f64>) -> Array2<f64> {
    let t = threshold(pred);
    let (h, w) = pred.dim();
    let mut out = Array2::zeros((h, w));
    for r in 0..h {
        for c in 0..w {
            if pred[[r, c]] >= t && pred[[r, c]] > 0.0 {
                out[[r, c]] = 1.0;
            }
        }
    }
    out
}

pub fn mean_f(pred: &Array2<f64>, gt: &Array2<bool>) -> f64 {
    let b = binary(pred);
    let (h, w) = pred.dim();
    let (mut tp, mut fp, mut fneg) = (0.0, 0.0, 0.0);
    for r in 0..h {
        for c in 0..w {
            let y = g(gt, r, c);
            tp += b[[r, c]] * y;
            fp += b[[r, c]] * (1.0 - y);
            fneg += (1.0 - b[[r, c]]) * y;
        }
    }
    if tp == 0.0 {
        return 0.0;
    }
    let p = tp / (tp + fp);
    let rc = tp / (tp + fneg);
    1.3 * p * rc / (0.3 * p + rc)
}

/// Brute-force nearest foreground pixel, scanning in raster order and keeping
/// the first strict minimum.
fn nearest(gt: &Array2<bool>, r: usize, c: usize) -> (f64, usize, usize) {
    let (h, w) = gt.dim();
    let mut best = (f64::INFINITY, 0, 0);
    for rr in 0..h {
        for cc in 0..w {
            if gt[[rr, cc]] {
                let dy = rr as f64 - r as f64;
                let dx = cc as f64 - c as f64;
                let d = (dy * dy + dx * dx).sqrt();
                if d < best.0 {
                    best = (d, rr, cc);
                }
            }
        }
    }
    best
}

pub fn weighted_f(pred: &Array2<f64>, gt: &Array2<bool>) -> f64 {
    let (h, w) = pred.dim();
    let mut e = Array2::zeros((h, w));
    for r in 0..h {
        for c in 0..w {
            e[[r, c]] = (g(gt, r, c) - pred[[r, c]]).abs();
        }
    }
    let mut et = e.clone();
    let mut dist = Array2::zeros((h, w));
    for r in 0..h {
        for c in 0..w {
            if !gt[[r, c]] {
                let (d, rr, cc) = nearest(gt, r, c);
                et[[r, c]] = e[[rr, cc]];
                dist[[r, c]] = d;
            }
        }
    }
    // 7x7 Gaussian, sigma 5, normalized to unit sum.
    let mut k = [[0.0f64; 7]; 7];
    let mut ks = 0.0;
    for (i, row) in k.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let y = i as f64 - 3.0;
            let x = j as f64 - 3.0;
            *v = (-(x * x + y * y) / 50.0).exp();
            ks += *v;
        }
    }
    let mut ea = Array2::zeros((h, w));
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for (i, row) in k.iter().enumerate() {
                for (j, kv) in row.iter().enumerate() {
                    let y = r as i64 + i as i64 - 3;
                    let x = c as i64 + j as i64 - 3;
                    if y >= 0 && x >= 0 && (y as usize) < h && (x as usize) < w {
                        acc += kv / ks * et[[y as usize, x as usize]];
                    }
                }
            }
            ea[[r, c]] = acc;
        }
    }
    let mut min_e_ea = e.clone();
    for r in 0..h {
        for c in 0..w {
            if gt[[r, c]] && ea[[r, c]] < e[[r, c]] {
                min_e_ea[[r, c]] = ea[[r, c]];
            }
        }
    }
    let (mut fpw, mut n_fg, mut fg_err) = (0.0, 0.0, 0.0);
    for r in 0..h {
        for c in 0..w {
            let b = if gt[[r, c]] {
                1.0
            } else {
                2.0 - ((0.5f64).ln() / 5.0 * dist[[r, c]]).exp()
            };
            let ew = min_e_ea[[r, c]] * b;
            if gt[[r, c]] {
                n_fg += 1.0;
                fg_err += ew;
            } else {
                fpw += ew;
            }
        }
    }
    let tpw = n_fg - fg_err;
    let recall = 1.0 - fg_err / n_fg;
    let precision = tpw / (EPS + tpw + fpw);
    2.0 * recall * precision / (EPS + recall + precision)
}

fn object(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mut m = 0.0;
    for v in values {
        m += v;
    }
    m /= n;
    let mut ss = 0.0;
    for v in values {
        ss += (v - m) * (v - m);
    }
    let sd = if values.len() > 1 { (ss / (n - 1.0)).sqrt() } else { 0.0 };
    2.0 * m / (m * m + 1.0 + sd + EPS)
}

fn ssim(pred: &Array2<f64>, gt: &Array2<bool>, r0: usize, r1: usize, c0: usize, c1: usize) -> f64 {
    let n = ((r1 - r0) * (c1 - c0)) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let (mut x, mut y) = (0.0, 0.0);
    for r in r0..r1 {
        for c in c0..c1 {
            x += pred[[r, c]];
            y += g(gt, r, c);
        }
    }
    x /= n;
    y /= n;
    let (mut sx, mut sy, mut sxy) = (0.0, 0.0, 0.0);
    for r in r0..r1 {
        for c in c0..c1 {
            let a = pred[[r, c]] - x;
            let b = g(gt, r, c) - y;
            sx += a * a;
            sy += b * b;
            sxy += a * b;
        }
    }
    sx /= n - 1.0 + EPS;
    sy /= n - 1.0 + EPS;
    sxy /= n - 1.0 + EPS;
    let alpha = 4.0 * x * y * sxy;
    let beta = (x * x + y * y) * (sx + sy);
    if alpha != 0.0 {
        alpha / (beta + EPS)
    } else if alpha == 0.0 && beta == 0.0 {
        1.0
    } else {
        0.0
    }
}

pub fn s_measure(pred: &Array2<f64>, gt: &Array2<bool>) -> f64 {
    let (h, w) = pred.dim();
    let mut fg_vals = Vec::new();
    let mut bg_vals = Vec::new();
    let (mut cnt, mut sum_p) = (0usize, 0.0);
    let (mut sx, mut sy) = (0.0, 0.0);
    for r in 0..h {
        for c in 0..w {
            sum_p += pred[[r, c]];
            if gt[[r, c]] {
                fg_vals.push(pred[[r, c]]);
                cnt += 1;
                sx += (c + 1) as f64;
                sy += (r + 1) as f64;
            } else {
                bg_vals.push(1.0 - pred[[r, c]]);
            }
        }
    }
    let area = (h * w) as f64;
    if cnt == 0 {
        return 1.0 - sum_p / area;
    }
    if cnt == h * w {
        return sum_p / area;
    }
    let u = cnt as f64 / area;
    let so = u * object(&fg_vals) + (1.0 - u) * object(&bg_vals);
    let x = (sx / cnt as f64).round() as usize;
    let y = (sy / cnt as f64).round() as usize;
    let w1 = (x * y) as f64 / area;
    let w2 = ((w - x) * y) as f64 / area;
    let w3 = (x * (h - y)) as f64 / area;
    let w4 = 1.0 - w1 - w2 - w3;
    let sr = w1 * ssim(pred, gt, 0, y, 0, x)
        + w2 * ssim(pred, gt, 0, y, x, w)
        + w3 * ssim(pred, gt, y, h, 0, x)
        + w4 * ssim(pred, gt, y, h, x, w);
    let q = 0.5 * so + 0.5 * sr;
    if q < 0.0 {
        0.0
    } else {
        q
    }
}

pub fn e_measure_of(fm: &Array2<f64>, gt: &Array2<bool>) -> f64 {
    let (h, w) = fm.dim();
    let n = (h * w) as f64;
    let (mut mf, mut mg) = (0.0, 0.0);
    for r in 0..h {
        for c in 0..w {
            mf += fm[[r, c]];
            mg += g(gt, r, c);
        }
    }
    if mg == 0.0 {
        return (n - mf) / n;
    }
    if mg == n {
        return mf / n;
    }
    mf /= n;
    mg /= n;
    let mut s = 0.0;
    for r in 0..h {
        for c in 0..w {
            let a = fm[[r, c]] - mf;
            let b = g(gt, r, c) - mg;
            let xi = 2.0 * a * b / (a * a + b * b + EPS);
            s += (xi + 1.0) * (xi + 1.0) / 4.0;
        }
    }
    s / n
}

pub fn e_measure(pred: &Array2<f64>, gt: &Array2<bool>) -> f64 {
    e_measure_of(&binary(pred), gt)
}

/// Per-image `(precision, recall)` at threshold `t / 255`, foreground where `pred > t`.
pub fn pr_point(pred: &Array2<f64>, gt: &Array2<bool>, t: usize) -> (f64, f64) {
    let th = t as f64 / 255.0;
    let (h, w) = pred.dim();
    let (mut tp, mut pp, mut pos) = (0.0, 0.0, 0.0);
    for r in 0..h {
        for c in 0..w {
            let b = pred[[r, c]] > th;
            if b {
                pp += 1.0;
            }
            if gt[[r, c]] {
                pos += 1.0;
                if b {
                    tp += 1.0;
                }
            }
        }
    }
    let p = if pp == 0.0 { 0.0 } else { tp / pp };
    (p, tp / pos)
}
