//! Central finite-difference verification of tape gradients.

use crate::error::Result;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Relative error `|a - n| / max(|a|, |n|, floor)`.
///
/// The floor keeps entries whose true gradient is (numerically) zero from
/// reporting huge ratios of round-off noise.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(floor);
    (analytic - numeric).abs() / denom
}

/// Central difference `(f(x + h) - f(x - h)) / 2h` of a scalar function of one coordinate.
pub fn central_difference(mut f: impl FnMut(f64) -> f64, x: f64, step: f64) -> f64 {
    (f(x + step) - f(x - step)) / (2.0 * step)
}

/// Relative tolerance when comparing slope gaps of neighbouring intervals.
const SIDE_AGREEMENT: f64 = 0.1;

/// Settings of [`kink_aware_difference`].
#[derive(Debug, Clone, Copy)]
pub struct StencilOptions {
    pub step: f64,
    /// Magnitude below which slopes are compared absolutely.
    pub floor: f64,
    /// One-sided slopes differing by more than this fraction of their size
    /// (plus roundoff) mark a kink inside `[x - h, x + h]`. A kink shifts the
    /// central difference by at most half that gap.
    pub kink_ratio: f64,
    /// Times the step is divided by ten when both sides hold a kink.
    pub retries: usize,
}

impl Default for StencilOptions {
    fn default() -> Self {
        Self {
            step: 1e-6,
            floor: 1e-4,
            kink_ratio: 2e-5,
            retries: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Difference {
    pub value: f64,
    /// Step of the stencil that produced `value`.
    pub step: f64,
    /// A kink was detected and a one-sided or smaller stencil used.
    pub kinked: bool,
}

/// Derivative of a piecewise-smooth `f` at `x`.
///
/// Central differences are only valid where `f` is smooth on `[x - h, x + h]`;
/// rectifiers break that whenever an activation crosses zero within the step.
/// When the one-sided slopes disagree, the curvature pattern decides: smooth
/// curvature opens the same gap on both sides and keeps the central stencil; a
/// kink on one side switches to the second-order one-sided stencil on the
/// other; kinks on both sides shrink the step.
pub fn kink_aware_difference<E>(
    mut f: impl FnMut(f64) -> std::result::Result<f64, E>,
    x: f64,
    opts: &StencilOptions,
) -> std::result::Result<Difference, E> {
    let centre = f(x)?;
    let mut step = opts.step;
    let mut kinked = false;
    loop {
        let plus = f(x + step)?;
        let minus = f(x - step)?;
        let central = (plus - minus) / (2.0 * step);
        let (right, left) = ((plus - centre) / step, (centre - minus) / step);
        let scale = right.abs().max(left.abs()).max(opts.floor);
        let tol = opts.kink_ratio * scale + 8.0 * f64::EPSILON * centre.abs().max(1.0) / step;
        let gap = (right - left).abs();
        let done = |value| Difference { value, step, kinked };
        if gap <= tol {
            return Ok(done(central));
        }
        let plus2 = f(x + 2.0 * step)?;
        let minus2 = f(x - 2.0 * step)?;
        let gap_right = ((plus2 - plus) / step - right).abs();
        let gap_left = ((minus - minus2) / step - left).abs();
        // Smooth curvature opens about the same gap `h·f''` everywhere; a kink
        // leaves the slopes on its far side in agreement.
        let agree = tol + SIDE_AGREEMENT * gap;
        if (gap_right - gap).abs() <= agree && (gap_left - gap).abs() <= agree {
            return Ok(done(central));
        }
        kinked = true;
        let done = |value| Difference { value, step, kinked };
        if gap_right.min(gap_left) <= agree {
            return Ok(done(if gap_right <= gap_left {
                (-3.0 * centre + 4.0 * plus - plus2) / (2.0 * step)
            } else {
                (3.0 * centre - 4.0 * minus + minus2) / (2.0 * step)
            }));
        }
        if opts.step / step > 0.5 * 10f64.powi(opts.retries as i32) {
            return Ok(done(central));
        }
        step /= 10.0;
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    pub step: f64,
    pub floor: f64,
    /// Largest number of coordinates probed per input; they are spread evenly.
    pub max_per_input: usize,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-6,
            floor: 1e-8,
            max_per_input: usize::MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckEntry {
    pub input: usize,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Default)]
pub struct GradCheckReport {
    pub entries: Vec<GradCheckEntry>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.entries.iter().map(|e| e.rel_error).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&GradCheckEntry> {
        self.entries
            .iter()
            .max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
    }
}

/// Evenly spaced coordinates, at most `limit` of them.
pub fn spread_indices(len: usize, limit: usize) -> Vec<usize> {
    if limit >= len {
        return (0..len).collect();
    }
    (0..limit).map(|i| i * len / limit).collect()
}

fn evaluate<F>(f: &F, inputs: &[Tensor]) -> Result<f64>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
{
    let tape = Tape::new();
    let vars: Vec<Var<'_>> = inputs.iter().map(|t| tape.constant(t.clone())).collect();
    f(&tape, &vars)?.value().item()
}

/// Compares tape gradients of the scalar `f` with central differences for every
/// input tensor.
pub fn check_gradients<F>(
    inputs: &[Tensor],
    f: F,
    opts: GradCheckOptions,
) -> Result<GradCheckReport>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
{
    let tape = Tape::new();
    let vars: Vec<Var<'_>> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = f(&tape, &vars)?;
    out.value().item()?;
    let grads = tape.backward(&out);
    let analytic: Vec<Tensor> = vars.iter().map(|v| grads.get_or_zeros(v)).collect();

    let mut report = GradCheckReport::default();
    let mut probe = inputs.to_vec();
    for (input, grad) in analytic.iter().enumerate() {
        for index in spread_indices(grad.numel(), opts.max_per_input) {
            let original = probe[input].data()[index];
            let mut eval_at = |x: f64| -> Result<f64> {
                probe[input].data_mut()[index] = x;
                evaluate(&f, &probe)
            };
            let plus = eval_at(original + opts.step)?;
            let minus = eval_at(original - opts.step)?;
            probe[input].data_mut()[index] = original;
            let numeric = (plus - minus) / (2.0 * opts.step);
            let a = grad.data()[index];
            report.entries.push(GradCheckEntry {
                input,
                index,
                analytic: a,
                numeric,
                rel_error: relative_error(a, numeric, opts.floor),
            });
        }
    }
    Ok(report)
}
