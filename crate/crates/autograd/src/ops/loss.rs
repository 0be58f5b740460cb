use crate::error::Result;
use crate::tape::Var;
use crate::tensor::{ensure_same_shape, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reduction {
    #[default]
    Mean,
    Sum,
}

impl Reduction {
    fn divisor(self, numel: usize) -> f64 {
        match self {
            Reduction::Mean => numel as f64,
            Reduction::Sum => 1.0,
        }
    }
}

impl<'t> Var<'t> {
    /// Binary cross entropy of probabilities against targets. Probabilities are
    /// clamped to `[eps, 1 - eps]`; the clamp passes no gradient.
    pub fn binary_cross_entropy(
        &self,
        target: &Tensor,
        eps: f64,
        reduction: Reduction,
    ) -> Result<Var<'t>> {
        ensure_same_shape("binary_cross_entropy", self.value(), target)?;
        let div = reduction.divisor(target.numel());
        let p = self.rc();
        let t = target.clone();
        let total: f64 = p
            .data()
            .iter()
            .zip(t.data())
            .map(|(&p, &t)| {
                let pc = p.clamp(eps, 1.0 - eps);
                -(t * pc.ln() + (1.0 - t) * (1.0 - pc).ln())
            })
            .sum();
        Ok(self
            .tape()
            .record(Tensor::scalar(total / div), &[self], move |g, _| {
                let scale = g.data()[0] / div;
                let data = p
                    .data()
                    .iter()
                    .zip(t.data())
                    .map(|(&p, &t)| {
                        if p < eps || p > 1.0 - eps {
                            0.0
                        } else {
                            scale * ((1.0 - t) / (1.0 - p) - t / p)
                        }
                    })
                    .collect();
                vec![Some(Tensor::new(p.shape(), data).expect("bce grad"))]
            }))
    }

    /// Smooth-L1 regression loss: `0.5 d^2` for `|d| <= 1`, `|d| - 0.5` otherwise.
    pub fn smooth_l1(&self, target: &Tensor, reduction: Reduction) -> Result<Var<'t>> {
        ensure_same_shape("smooth_l1", self.value(), target)?;
        let div = reduction.divisor(target.numel());
        let diff: Vec<f64> = self
            .value()
            .data()
            .iter()
            .zip(target.data())
            .map(|(a, b)| a - b)
            .collect();
        let total: f64 = diff
            .iter()
            .map(|d| {
                if d.abs() <= 1.0 {
                    0.5 * d * d
                } else {
                    d.abs() - 0.5
                }
            })
            .sum();
        let shape = self.shape().to_vec();
        Ok(self
            .tape()
            .record(Tensor::scalar(total / div), &[self], move |g, _| {
                let scale = g.data()[0] / div;
                let data = diff.iter().map(|d| scale * d.clamp(-1.0, 1.0)).collect();
                vec![Some(Tensor::new(&shape, data).expect("smooth_l1 grad"))]
            }))
    }
}
