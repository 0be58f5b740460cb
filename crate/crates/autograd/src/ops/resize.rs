use crate::error::{invalid, Result};
use crate::tape::Var;
use crate::tensor::Tensor;

/// Source taps for one output coordinate of a half-pixel-centred bilinear resize.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearTap {
    pub lo: usize,
    pub hi: usize,
    pub w_lo: f64,
    pub w_hi: f64,
}

/// Taps along one axis, with corners not aligned: `src = (dst + 0.5) * in / out - 0.5`,
/// clamped at zero.
pub fn linear_taps(input: usize, output: usize) -> Vec<LinearTap> {
    let scale = input as f64 / output as f64;
    (0..output)
        .map(|d| {
            let src = ((d as f64 + 0.5) * scale - 0.5).max(0.0);
            let lo = (src.floor() as usize).min(input - 1);
            let hi = (lo + 1).min(input - 1);
            let frac = src - lo as f64;
            LinearTap {
                lo,
                hi,
                w_lo: 1.0 - frac,
                w_hi: frac,
            }
        })
        .collect()
}

impl<'t> Var<'t> {
    /// Bilinear resize of the spatial axes. Identity when the size already matches.
    pub fn resize_bilinear(&self, out_h: usize, out_w: usize) -> Result<Var<'t>> {
        let (n, c, h, w) = self.value().dims4()?;
        if out_h == 0 || out_w == 0 {
            return Err(invalid("resize_bilinear", "empty output size"));
        }
        if (h, w) == (out_h, out_w) {
            return Ok(self.clone());
        }
        let ty = linear_taps(h, out_h);
        let tx = linear_taps(w, out_w);
        let x = self.value().data();
        let mut out = Vec::with_capacity(n * c * out_h * out_w);
        for plane in x.chunks(h * w) {
            for yt in &ty {
                let r0 = &plane[yt.lo * w..(yt.lo + 1) * w];
                let r1 = &plane[yt.hi * w..(yt.hi + 1) * w];
                for xt in &tx {
                    let top = r0[xt.lo] * xt.w_lo + r0[xt.hi] * xt.w_hi;
                    let bottom = r1[xt.lo] * xt.w_lo + r1[xt.hi] * xt.w_hi;
                    out.push(top * yt.w_lo + bottom * yt.w_hi);
                }
            }
        }
        let out = Tensor::new(&[n, c, out_h, out_w], out)?;
        Ok(self.tape().record(out, &[self], move |g, _| {
            let mut gx = Tensor::zeros(&[n, c, h, w]);
            for (plane, gp) in gx
                .data_mut()
                .chunks_mut(h * w)
                .zip(g.data().chunks(out_h * out_w))
            {
                for (oy, yt) in ty.iter().enumerate() {
                    for (ox, xt) in tx.iter().enumerate() {
                        let gv = gp[oy * out_w + ox];
                        plane[yt.lo * w + xt.lo] += gv * yt.w_lo * xt.w_lo;
                        plane[yt.lo * w + xt.hi] += gv * yt.w_lo * xt.w_hi;
                        plane[yt.hi * w + xt.lo] += gv * yt.w_hi * xt.w_lo;
                        plane[yt.hi * w + xt.hi] += gv * yt.w_hi * xt.w_hi;
                    }
                }
            }
            vec![Some(gx)]
        }))
    }

    /// Bilinear upsampling by an integer factor.
    pub fn upsample(&self, factor: usize) -> Result<Var<'t>> {
        let (_, _, h, w) = self.value().dims4()?;
        self.resize_bilinear(h * factor, w * factor)
    }
}
