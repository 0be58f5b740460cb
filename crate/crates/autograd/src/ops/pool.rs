use crate::error::{invalid, Result};
use crate::tape::Var;
use crate::tensor::Tensor;

impl<'t> Var<'t> {
    /// Max pooling with a square window; padded positions never win.
    pub fn max_pool2d(&self, kernel: usize, stride: usize, padding: usize) -> Result<Var<'t>> {
        let (n, c, h, w) = self.value().dims4()?;
        if kernel == 0 || stride == 0 || padding >= kernel || h + 2 * padding < kernel {
            return Err(invalid(
                "max_pool2d",
                format!("kernel {kernel}, stride {stride}, padding {padding} on {h}x{w}"),
            ));
        }
        let oh = (h + 2 * padding - kernel) / stride + 1;
        let ow = (w + 2 * padding - kernel) / stride + 1;
        let x = self.value().data();
        let mut out = Vec::with_capacity(n * c * oh * ow);
        let mut argmax = Vec::with_capacity(n * c * oh * ow);
        for plane in 0..n * c {
            let base = plane * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_idx = base;
                    for ky in 0..kernel {
                        let iy = (oy * stride + ky) as isize - padding as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..kernel {
                            let ix = (ox * stride + kx) as isize - padding as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            let idx = base + iy as usize * w + ix as usize;
                            if x[idx] > best {
                                best = x[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    out.push(best);
                    argmax.push(best_idx);
                }
            }
        }
        let out = Tensor::new(&[n, c, oh, ow], out)?;
        let in_shape = self.shape().to_vec();
        Ok(self.tape().record(out, &[self], move |g, _| {
            let mut gx = Tensor::zeros(&in_shape);
            for (gv, &idx) in g.data().iter().zip(&argmax) {
                gx.data_mut()[idx] += gv;
            }
            vec![Some(gx)]
        }))
    }
}
