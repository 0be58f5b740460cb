//! Evaluation measures for salient object detection.
//!
//! Every measure is a pure function of a prediction map with values in
//! `[0, 1]` and a binary ground-truth mask of the same size:
//!
//! - [`mae`]: mean absolute error.
//! - [`mean_f_measure`]: F-measure (β² = 0.3) after binarizing at the adaptive
//!   threshold `min(2 · mean(pred), 1)`.
//! - [`weighted_f_measure`]: dependency- and importance-weighted F-measure
//!   (β² = 1) of Margolin et al.
//! - [`s_measure`]: structure measure of Fan et al. (object + region terms, α = 0.5).
//! - [`e_measure`]: enhanced-alignment measure of Fan et al.
//! - [`pr_curve`]: precision/recall over the 256 thresholds `t / 255`.
//!
//! [`MetricAccumulator`] folds per-image scores into a [`MetricReport`].

use ndarray::Array2;
use thiserror::Error;

mod basic;
mod enhanced;
mod pr;
mod report;
mod structure;
mod weighted_f;

pub use basic::{adaptive_threshold, binarize_adaptive, mae, mean_f_measure, F_BETA_SQ};
pub use enhanced::{e_measure, EMeasureInput};
pub use pr::{pr_curve, PrAccumulation, PrCurve, PR_THRESHOLDS};
pub use report::{MetricAccumulator, MetricReport};
pub use structure::s_measure;
pub use weighted_f::{
    distance_transform, gaussian_kernel, weighted_f_measure, NearestForeground, WEIGHTED_F_BETA_SQ,
};

/// MATLAB's `eps`, used wherever the reference constructions guard divisions.
pub const EPS: f64 = f64::EPSILON;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("prediction is {pred:?} but ground truth is {gt:?}")]
    ShapeMismatch {
        pred: (usize, usize),
        gt: (usize, usize),
    },
    #[error("prediction value {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("malformed report: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, MetricError>;

pub(crate) fn check_pair(pred: &Array2<f64>, gt: &Array2<bool>) -> Result<()> {
    if pred.dim() != gt.dim() {
        return Err(MetricError::ShapeMismatch {
            pred: pred.dim(),
            gt: gt.dim(),
        });
    }
    if pred.is_empty() {
        return Err(MetricError::Empty("zero-sized map"));
    }
    if let Some(v) = pred.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(MetricError::OutOfRange(*v));
    }
    Ok(())
}

pub(crate) fn foreground_count(gt: &Array2<bool>) -> usize {
    gt.iter().filter(|&&g| g).count()
}
