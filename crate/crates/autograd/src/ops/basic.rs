//! Element-wise, broadcasting and channel-layout operations.

use crate::error::{invalid, Result, TensorError};
use crate::tape::Var;
use crate::tensor::{ensure_same_shape, Tensor};

impl<'t> Var<'t> {
    pub fn add(&self, other: &Var<'t>) -> Result<Var<'t>> {
        ensure_same_shape("add", self.value(), other.value())?;
        let mut out = self.value().clone();
        out.add_assign(other.value());
        Ok(self.tape().record(out, &[self, other], |g, mask| {
            vec![mask[0].then(|| g.clone()), mask[1].then(|| g.clone())]
        }))
    }

    pub fn sub(&self, other: &Var<'t>) -> Result<Var<'t>> {
        ensure_same_shape("sub", self.value(), other.value())?;
        let data = self
            .value()
            .data()
            .iter()
            .zip(other.value().data())
            .map(|(a, b)| a - b)
            .collect();
        let out = Tensor::new(self.shape(), data)?;
        Ok(self.tape().record(out, &[self, other], |g, mask| {
            vec![mask[0].then(|| g.clone()), mask[1].then(|| g.map(|v| -v))]
        }))
    }

    /// Sum of any number of same-shaped values.
    pub fn add_all(vars: &[&Var<'t>]) -> Result<Var<'t>> {
        let first = vars.first().ok_or_else(|| invalid("add_all", "no inputs"))?;
        let mut out = first.value().clone();
        for v in &vars[1..] {
            ensure_same_shape("add_all", first.value(), v.value())?;
            out.add_assign(v.value());
        }
        let n = vars.len();
        Ok(first.tape().record(out, vars, move |g, mask| {
            (0..n).map(|i| mask[i].then(|| g.clone())).collect()
        }))
    }

    pub fn scale(&self, factor: f64) -> Var<'t> {
        let out = self.value().map(|v| v * factor);
        self.tape()
            .record(out, &[self], move |g, _| vec![Some(g.map(|v| v * factor))])
    }

    pub fn relu(&self) -> Var<'t> {
        let x = self.rc();
        let out = x.map(|v| v.max(0.0));
        self.tape().record(out, &[self], move |g, _| {
            let data = g
                .data()
                .iter()
                .zip(x.data())
                .map(|(g, &x)| if x > 0.0 { *g } else { 0.0 })
                .collect();
            vec![Some(Tensor::new(g.shape(), data).expect("relu grad"))]
        })
    }

    /// Parametric rectification with one slope per channel.
    pub fn prelu(&self, slope: &Var<'t>) -> Result<Var<'t>> {
        let (n, c, h, w) = self.value().dims4()?;
        if slope.value().numel() != c {
            return Err(TensorError::ShapeMismatch {
                op: "prelu",
                lhs: self.shape().to_vec(),
                rhs: slope.shape().to_vec(),
            });
        }
        let x = self.rc();
        let a = slope.rc();
        let hw = h * w;
        let mut out = x.as_ref().clone();
        for (i, v) in out.data_mut().iter_mut().enumerate() {
            if *v <= 0.0 {
                *v *= a.data()[(i / hw) % c];
            }
        }
        Ok(self.tape().record(out, &[self, slope], move |g, mask| {
            let gx = mask[0].then(|| {
                let data = g
                    .data()
                    .iter()
                    .zip(x.data())
                    .enumerate()
                    .map(|(i, (g, &xv))| {
                        if xv > 0.0 {
                            *g
                        } else {
                            g * a.data()[(i / hw) % c]
                        }
                    })
                    .collect();
                Tensor::new(x.shape(), data).expect("prelu grad")
            });
            let ga = mask[1].then(|| {
                let mut ga = Tensor::zeros(a.shape());
                for ni in 0..n {
                    for ci in 0..c {
                        let base = (ni * c + ci) * hw;
                        let mut acc = 0.0;
                        for k in base..base + hw {
                            let xv = x.data()[k];
                            if xv <= 0.0 {
                                acc += g.data()[k] * xv;
                            }
                        }
                        ga.data_mut()[ci] += acc;
                    }
                }
                ga
            });
            vec![gx, ga]
        }))
    }

    /// Multiplies every channel of `self` (N,C,H,W) by a single-channel map (N,1,H,W).
    pub fn mul_map(&self, map: &Var<'t>) -> Result<Var<'t>> {
        let (n, c, h, w) = self.value().dims4()?;
        if map.shape() != [n, 1, h, w] {
            return Err(TensorError::ShapeMismatch {
                op: "mul_map",
                lhs: self.shape().to_vec(),
                rhs: map.shape().to_vec(),
            });
        }
        let x = self.rc();
        let m = map.rc();
        let hw = h * w;
        let mut out = x.as_ref().clone();
        for ni in 0..n {
            let mrow = &m.data()[ni * hw..(ni + 1) * hw];
            for ci in 0..c {
                let base = (ni * c + ci) * hw;
                for (v, mv) in out.data_mut()[base..base + hw].iter_mut().zip(mrow) {
                    *v *= mv;
                }
            }
        }
        Ok(self.tape().record(out, &[self, map], move |g, mask| {
            let gx = mask[0].then(|| {
                let mut gx = g.clone();
                for ni in 0..n {
                    let mrow = &m.data()[ni * hw..(ni + 1) * hw];
                    for ci in 0..c {
                        let base = (ni * c + ci) * hw;
                        for (v, mv) in gx.data_mut()[base..base + hw].iter_mut().zip(mrow) {
                            *v *= mv;
                        }
                    }
                }
                gx
            });
            let gm = mask[1].then(|| {
                let mut gm = Tensor::zeros(m.shape());
                for ni in 0..n {
                    for ci in 0..c {
                        let base = (ni * c + ci) * hw;
                        for k in 0..hw {
                            gm.data_mut()[ni * hw + k] += g.data()[base + k] * x.data()[base + k];
                        }
                    }
                }
                gm
            });
            vec![gx, gm]
        }))
    }

    /// Multiplies each channel of `self` (N,C,H,W) by a per-sample weight (N,C,1,1).
    pub fn mul_channels(&self, weights: &Var<'t>) -> Result<Var<'t>> {
        let (n, c, h, w) = self.value().dims4()?;
        if weights.shape() != [n, c, 1, 1] {
            return Err(TensorError::ShapeMismatch {
                op: "mul_channels",
                lhs: self.shape().to_vec(),
                rhs: weights.shape().to_vec(),
            });
        }
        let x = self.rc();
        let s = weights.rc();
        let hw = h * w;
        let mut out = x.as_ref().clone();
        for (plane, sv) in out.data_mut().chunks_mut(hw).zip(s.data()) {
            plane.iter_mut().for_each(|v| *v *= sv);
        }
        Ok(self.tape().record(out, &[self, weights], move |g, mask| {
            let gx = mask[0].then(|| {
                let mut gx = g.clone();
                for (plane, sv) in gx.data_mut().chunks_mut(hw).zip(s.data()) {
                    plane.iter_mut().for_each(|v| *v *= sv);
                }
                gx
            });
            let gs = mask[1].then(|| {
                let data = g
                    .data()
                    .chunks(hw)
                    .zip(x.data().chunks(hw))
                    .map(|(gp, xp)| gp.iter().zip(xp).map(|(a, b)| a * b).sum())
                    .collect();
                Tensor::new(s.shape(), data).expect("mul_channels grad")
            });
            vec![gx, gs]
        }))
    }

    /// Concatenates four-dimensional values along the channel axis.
    pub fn concat_channels(vars: &[&Var<'t>]) -> Result<Var<'t>> {
        let first = vars
            .first()
            .ok_or_else(|| invalid("concat_channels", "no inputs"))?;
        let (n, _, h, w) = first.value().dims4()?;
        let mut channels = Vec::with_capacity(vars.len());
        for v in vars {
            let (vn, vc, vh, vw) = v.value().dims4()?;
            if (vn, vh, vw) != (n, h, w) {
                return Err(TensorError::ShapeMismatch {
                    op: "concat_channels",
                    lhs: first.shape().to_vec(),
                    rhs: v.shape().to_vec(),
                });
            }
            channels.push(vc);
        }
        let total: usize = channels.iter().sum();
        let hw = h * w;
        let mut out = Vec::with_capacity(n * total * hw);
        for ni in 0..n {
            for (v, &c) in vars.iter().zip(&channels) {
                out.extend_from_slice(&v.value().data()[ni * c * hw..(ni + 1) * c * hw]);
            }
        }
        let out = Tensor::new(&[n, total, h, w], out)?;
        Ok(first.tape().record(out, vars, move |g, mask| {
            let mut offset = 0;
            channels
                .iter()
                .zip(mask)
                .map(|(&c, &needed)| {
                    let start = offset;
                    offset += c;
                    needed.then(|| {
                        let mut data = Vec::with_capacity(n * c * hw);
                        for ni in 0..n {
                            let base = (ni * total + start) * hw;
                            data.extend_from_slice(&g.data()[base..base + c * hw]);
                        }
                        Tensor::new(&[n, c, h, w], data).expect("concat grad")
                    })
                })
                .collect()
        }))
    }

    /// Channels `start..start + len` of a four-dimensional value.
    pub fn narrow_channels(&self, start: usize, len: usize) -> Result<Var<'t>> {
        let (n, c, h, w) = self.value().dims4()?;
        if start + len > c || len == 0 {
            return Err(invalid(
                "narrow_channels",
                format!("range {start}..{} outside {c} channels", start + len),
            ));
        }
        let hw = h * w;
        let mut data = Vec::with_capacity(n * len * hw);
        for ni in 0..n {
            let base = (ni * c + start) * hw;
            data.extend_from_slice(&self.value().data()[base..base + len * hw]);
        }
        let out = Tensor::new(&[n, len, h, w], data)?;
        Ok(self.tape().record(out, &[self], move |g, _| {
            let mut gx = Tensor::zeros(&[n, c, h, w]);
            for ni in 0..n {
                let base = (ni * c + start) * hw;
                gx.data_mut()[base..base + len * hw]
                    .copy_from_slice(&g.data()[ni * len * hw..(ni + 1) * len * hw]);
            }
            vec![Some(gx)]
        }))
    }

    /// Softmax across the channel axis, independently at every pixel.
    pub fn softmax_channels(&self) -> Result<Var<'t>> {
        let (n, c, h, w) = self.value().dims4()?;
        let hw = h * w;
        let x = self.value().data();
        let mut y = vec![0.0; x.len()];
        for ni in 0..n {
            for p in 0..hw {
                let idx = |ci: usize| (ni * c + ci) * hw + p;
                let max = (0..c).map(|ci| x[idx(ci)]).fold(f64::NEG_INFINITY, f64::max);
                let mut denom = 0.0;
                for ci in 0..c {
                    let e = (x[idx(ci)] - max).exp();
                    y[idx(ci)] = e;
                    denom += e;
                }
                for ci in 0..c {
                    y[idx(ci)] /= denom;
                }
            }
        }
        let out = std::rc::Rc::new(Tensor::new(self.shape(), y)?);
        let saved = std::rc::Rc::clone(&out);
        Ok(self
            .tape()
            .record(out.as_ref().clone(), &[self], move |g, _| {
                let y = saved.data();
                let mut gx = vec![0.0; y.len()];
                for ni in 0..n {
                    for p in 0..hw {
                        let idx = |ci: usize| (ni * c + ci) * hw + p;
                        let dot: f64 = (0..c).map(|ci| g.data()[idx(ci)] * y[idx(ci)]).sum();
                        for ci in 0..c {
                            gx[idx(ci)] = y[idx(ci)] * (g.data()[idx(ci)] - dot);
                        }
                    }
                }
                vec![Some(Tensor::new(saved.shape(), gx).expect("softmax grad"))]
            }))
    }

    /// Spatial mean of every channel: (N,C,H,W) -> (N,C,1,1).
    pub fn mean_spatial(&self) -> Result<Var<'t>> {
        let (n, c, h, w) = self.value().dims4()?;
        let hw = h * w;
        let data = self
            .value()
            .data()
            .chunks(hw)
            .map(|plane| plane.iter().sum::<f64>() / hw as f64)
            .collect();
        let out = Tensor::new(&[n, c, 1, 1], data)?;
        Ok(self.tape().record(out, &[self], move |g, _| {
            let mut data = Vec::with_capacity(n * c * hw);
            for gv in g.data() {
                data.extend(std::iter::repeat_n(gv / hw as f64, hw));
            }
            vec![Some(Tensor::new(&[n, c, h, w], data).expect("mean grad"))]
        }))
    }

    /// Sum of all elements as a one-element value.
    pub fn sum_all(&self) -> Var<'t> {
        let shape = self.shape().to_vec();
        let out = Tensor::scalar(self.value().sum());
        self.tape().record(out, &[self], move |g, _| {
            vec![Some(Tensor::full(&shape, g.data()[0]))]
        })
    }

    pub fn mean_all(&self) -> Var<'t> {
        let n = self.value().numel() as f64;
        self.sum_all().scale(1.0 / n)
    }

    /// Weighted sum of one-element values.
    pub fn weighted_sum(terms: &[&Var<'t>], weights: &[f64]) -> Result<Var<'t>> {
        if terms.is_empty() || terms.len() != weights.len() {
            return Err(invalid(
                "weighted_sum",
                format!("{} terms for {} weights", terms.len(), weights.len()),
            ));
        }
        for t in terms {
            t.value().item()?;
        }
        let total: f64 = terms
            .iter()
            .zip(weights)
            .map(|(t, w)| t.value().data()[0] * w)
            .sum();
        let weights = weights.to_vec();
        Ok(terms[0]
            .tape()
            .record(Tensor::scalar(total), terms, move |g, mask| {
                weights
                    .iter()
                    .zip(mask)
                    .map(|(w, &needed)| needed.then(|| Tensor::scalar(g.data()[0] * w)))
                    .collect()
            }))
    }
}
