//! Supervision losses and their weighted total.
//!
//! The scalar functions work on plain slices and serve as references; the
//! `*_var` versions build the same quantities on a tape.

use colsod_autograd::{Reduction, Tensor, Var};

use crate::error::{config, shape, CoreError, Result};

/// Probability clamp keeping the logarithms finite.
pub const BCE_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub edge: f64,
    pub sal: f64,
    pub depth: f64,
    pub fin: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            edge: 1.0,
            sal: 1.0,
            depth: 3.0,
            fin: 1.0,
        }
    }
}

impl LossWeights {
    pub fn zero() -> Self {
        Self {
            edge: 0.0,
            sal: 0.0,
            depth: 0.0,
            fin: 0.0,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.edge, self.sal, self.depth, self.fin]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, w) in ["edge", "sal", "depth", "final"].iter().zip(self.as_array()) {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(config(format!("loss weight {name} = {w} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

/// The four loss terms (zero when a term is disabled) and the weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub edge: f64,
    pub sal: f64,
    pub depth: f64,
    pub fin: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn from_terms(terms: [f64; 4], w: &LossWeights) -> Result<Self> {
        Ok(Self {
            edge: terms[0],
            sal: terms[1],
            depth: terms[2],
            fin: terms[3],
            total: total_loss(terms, w)?,
        })
    }

    pub fn terms(&self) -> [(&'static str, f64); 5] {
        [
            ("loss_e", self.edge),
            ("loss_s", self.sal),
            ("loss_d", self.depth),
            ("loss_f", self.fin),
            ("total", self.total),
        ]
    }

    /// The first non-finite term, named.
    pub fn check_finite(&self) -> Result<()> {
        match self.terms().into_iter().find(|(_, v)| !v.is_finite()) {
            Some((term, value)) => Err(CoreError::NonFinite { term, value }),
            None => Ok(()),
        }
    }
}

/// `λ_e·l_e + λ_s·l_s + λ_d·l_d + λ_f·l_f`.
pub fn total_loss(terms: [f64; 4], w: &LossWeights) -> Result<f64> {
    w.validate()?;
    Ok(terms.iter().zip(w.as_array()).map(|(t, w)| t * w).sum())
}

fn divisor(reduction: Reduction, n: usize) -> f64 {
    match reduction {
        Reduction::Mean => n as f64,
        Reduction::Sum => 1.0,
    }
}

fn same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() || a.is_empty() {
        return Err(shape(format!("lengths {} and {} differ or are zero", a.len(), b.len())));
    }
    Ok(())
}

pub fn validate_binary(gt: &[f64]) -> Result<()> {
    match gt.iter().find(|&&g| g != 0.0 && g != 1.0) {
        Some(v) => Err(config(format!("ground-truth value {v} is not 0 or 1"))),
        None => Ok(()),
    }
}

/// Binary cross entropy with probabilities clamped to `[eps, 1 - eps]`.
pub fn bce_loss(pred: &[f64], gt: &[f64], reduction: Reduction) -> Result<f64> {
    same_len(pred, gt)?;
    validate_binary(gt)?;
    let sum: f64 = pred
        .iter()
        .zip(gt)
        .map(|(&p, &g)| {
            let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
            -(g * p.ln() + (1.0 - g) * (1.0 - p).ln())
        })
        .sum();
    Ok(sum / divisor(reduction, pred.len()))
}

/// Per-pixel smooth-L1: `0.5·Δ²` for `|Δ| ≤ 1`, `|Δ| − 0.5` beyond.
pub fn smooth_l1_value(delta: f64) -> f64 {
    let a = delta.abs();
    if a <= 1.0 {
        0.5 * a * a
    } else {
        a - 0.5
    }
}

pub fn smooth_l1_depth_loss(pred: &[f64], gt: &[f64], reduction: Reduction) -> Result<f64> {
    same_len(pred, gt)?;
    let sum: f64 = pred.iter().zip(gt).map(|(p, g)| smooth_l1_value(p - g)).sum();
    Ok(sum / divisor(reduction, pred.len()))
}

pub fn bce_loss_var<'t>(prob: &Var<'t>, gt: &Tensor, reduction: Reduction) -> Result<Var<'t>> {
    validate_binary(gt.data())?;
    Ok(prob.binary_cross_entropy(gt, BCE_EPS, reduction)?)
}

pub fn depth_loss_var<'t>(att_depth: &Var<'t>, gt: &Tensor, reduction: Reduction) -> Result<Var<'t>> {
    Ok(att_depth.smooth_l1(gt, reduction)?)
}
