use crate::error::{Result, TensorError};
use crate::tape::Var;
use crate::tensor::Tensor;

/// Per-channel statistics observed during a training-mode batch normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    /// Unbiased variance, as used for running-average updates.
    pub var_unbiased: Vec<f64>,
}

pub enum BatchNormMode<'a> {
    /// Normalize with the statistics of the current batch.
    Train,
    /// Normalize with stored running statistics.
    Eval {
        running_mean: &'a [f64],
        running_var: &'a [f64],
    },
}

fn check_param(op: &'static str, x: &Tensor, p: &Tensor, c: usize) -> Result<()> {
    if p.numel() == c {
        Ok(())
    } else {
        Err(TensorError::ShapeMismatch {
            op,
            lhs: x.shape().to_vec(),
            rhs: p.shape().to_vec(),
        })
    }
}

impl<'t> Var<'t> {
    /// Batch normalization over (N,H,W) with a per-channel affine transform.
    ///
    /// In training mode the batch statistics are returned so the caller can
    /// update running averages.
    pub fn batch_norm(
        &self,
        gamma: &Var<'t>,
        beta: &Var<'t>,
        mode: BatchNormMode<'_>,
        eps: f64,
    ) -> Result<(Var<'t>, Option<BatchStats>)> {
        let x = self.rc();
        let (n, c, h, w) = x.dims4()?;
        check_param("batch_norm gamma", &x, gamma.value(), c)?;
        check_param("batch_norm beta", &x, beta.value(), c)?;
        let hw = h * w;
        let count = (n * hw) as f64;
        let plane = move |ni: usize, ci: usize| (ni * c + ci) * hw..(ni * c + ci + 1) * hw;

        let (mean, var, stats) = match mode {
            BatchNormMode::Train => {
                let mut mean = vec![0.0; c];
                let mut var = vec![0.0; c];
                for ci in 0..c {
                    let s: f64 = (0..n).map(|ni| x.data()[plane(ni, ci)].iter().sum::<f64>()).sum();
                    mean[ci] = s / count;
                    let ss: f64 = (0..n)
                        .map(|ni| {
                            x.data()[plane(ni, ci)]
                                .iter()
                                .map(|v| (v - mean[ci]).powi(2))
                                .sum::<f64>()
                        })
                        .sum();
                    var[ci] = ss / count;
                }
                let unbiased = var
                    .iter()
                    .map(|v| if count > 1.0 { v * count / (count - 1.0) } else { *v })
                    .collect();
                let stats = BatchStats {
                    mean: mean.clone(),
                    var_unbiased: unbiased,
                };
                (mean, var, Some(stats))
            }
            BatchNormMode::Eval {
                running_mean,
                running_var,
            } => {
                if running_mean.len() != c || running_var.len() != c {
                    return Err(TensorError::Invalid {
                        op: "batch_norm",
                        msg: format!("running statistics do not have {c} channels"),
                    });
                }
                (running_mean.to_vec(), running_var.to_vec(), None)
            }
        };
        let training = stats.is_some();
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let mut xhat = vec![0.0; x.numel()];
        let mut out = vec![0.0; x.numel()];
        let (g, b) = (gamma.value().data(), beta.value().data());
        for ni in 0..n {
            for ci in 0..c {
                for k in plane(ni, ci) {
                    let xh = (x.data()[k] - mean[ci]) * inv_std[ci];
                    xhat[k] = xh;
                    out[k] = g[ci] * xh + b[ci];
                }
            }
        }
        let out = Tensor::new(x.shape(), out)?;
        let gamma_saved = gamma.rc();
        let shape = x.shape().to_vec();
        let y = self.tape().record(out, &[self, gamma, beta], move |grad, mask| {
            let gd = grad.data();
            let mut sum_dy = vec![0.0; c];
            let mut sum_dy_xhat = vec![0.0; c];
            for ni in 0..n {
                for ci in 0..c {
                    for k in plane(ni, ci) {
                        sum_dy[ci] += gd[k];
                        sum_dy_xhat[ci] += gd[k] * xhat[k];
                    }
                }
            }
            let gx = mask[0].then(|| {
                let gam = gamma_saved.data();
                let mut dx = vec![0.0; gd.len()];
                for ni in 0..n {
                    for ci in 0..c {
                        let scale = gam[ci] * inv_std[ci];
                        for k in plane(ni, ci) {
                            dx[k] = if training {
                                scale
                                    * (gd[k]
                                        - sum_dy[ci] / count
                                        - xhat[k] * sum_dy_xhat[ci] / count)
                            } else {
                                scale * gd[k]
                            };
                        }
                    }
                }
                Tensor::new(&shape, dx).expect("batch_norm dx")
            });
            vec![
                gx,
                mask[1].then(|| Tensor::new(&[c], sum_dy_xhat.clone()).expect("dgamma")),
                mask[2].then(|| Tensor::new(&[c], sum_dy.clone()).expect("dbeta")),
            ]
        });
        Ok((y, stats))
    }
}
