//! Loop-level reference arithmetic for the layer equations. Everything here is
//! written against plain NCHW tensors without the autograd tape.
#![allow(dead_code)]

use colsod_autograd::gradcheck::{kink_aware_difference, relative_error, spread_indices, StencilOptions};
use colsod_autograd::{Tape, Tensor, Var};
use colsod_core::nn::BN_EPS;
use colsod_core::{Mode, ParamStore, Session};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
}

fn idx(shape: &[usize], n: usize, c: usize, y: usize, x: usize) -> usize {
    ((n * shape[1] + c) * shape[2] + y) * shape[3] + x
}

/// Stride-1 convolution with symmetric zero padding, by direct summation.
pub fn conv(x: &Tensor, w: &Tensor, b: Option<&Tensor>, padding: usize, dilation: usize) -> Tensor {
    let (n, cin, h, wd) = x.dims4().unwrap();
    let (cout, cin_w, kh, kw) = w.dims4().unwrap();
    assert_eq!(cin, cin_w);
    let oh = h + 2 * padding - dilation * (kh - 1);
    let ow = wd + 2 * padding - dilation * (kw - 1);
    let mut out = Tensor::zeros(&[n, cout, oh, ow]);
    let shape = out.shape().to_vec();
    for ni in 0..n {
        for co in 0..cout {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = b.map_or(0.0, |b| b.data()[co]);
                    for ci in 0..cin {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = (oy + ky * dilation) as i64 - padding as i64;
                                let ix = (ox + kx * dilation) as i64 - padding as i64;
                                if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < wd {
                                    acc += x.at4(ni, ci, iy as usize, ix as usize) * w.at4(co, ci, ky, kx);
                                }
                            }
                        }
                    }
                    out.data_mut()[idx(&shape, ni, co, oy, ox)] = acc;
                }
            }
        }
    }
    out
}

/// Normalization with fixed statistics: `γ (x − μ) / √(σ² + ε) + β`.
pub fn bn_eval(x: &Tensor, gamma: &[f64], beta: &[f64], mean: &[f64], var: &[f64]) -> Tensor {
    let shape = x.shape().to_vec();
    let plane = shape[2] * shape[3];
    let mut out = x.clone();
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        let c = (i / plane) % shape[1];
        *v = gamma[c] * (*v - mean[c]) / (var[c] + BN_EPS).sqrt() + beta[c];
    }
    out
}

pub fn prelu(x: &Tensor, slope: &[f64]) -> Tensor {
    let shape = x.shape().to_vec();
    let plane = shape[2] * shape[3];
    let mut out = x.clone();
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        if *v < 0.0 {
            *v *= slope[(i / plane) % shape[1]];
        }
    }
    out
}

/// Evaluation-mode conv → normalization → PReLU block read from `store`.
pub fn conv_bn_prelu(store: &ParamStore, name: &str, x: &Tensor, padding: usize, dilation: usize) -> Tensor {
    let p = |s: &str| store.param(&format!("{name}.{s}")).unwrap().data().to_vec();
    let buf = |s: &str| store.buffer(&format!("{name}.{s}")).unwrap().data().to_vec();
    let y = conv(x, store.param(&format!("{name}.conv.weight")).unwrap(), None, padding, dilation);
    let y = bn_eval(&y, &p("bn.gamma"), &p("bn.beta"), &buf("bn.running_mean"), &buf("bn.running_var"));
    prelu(&y, &p("prelu"))
}

/// 1×1 convolution with bias read from `store`.
pub fn pointwise(store: &ParamStore, name: &str, x: &Tensor) -> Tensor {
    let w = store.param(&format!("{name}.weight")).unwrap();
    let b = store.param(&format!("{name}.bias")).ok();
    conv(x, w, b, 0, 1)
}

/// One channel of a tensor as an (N,1,H,W) map.
pub fn channel(x: &Tensor, c: usize) -> Tensor {
    let (n, _, h, w) = x.dims4().unwrap();
    let mut out = Tensor::zeros(&[n, 1, h, w]);
    for ni in 0..n {
        for y in 0..h {
            for xx in 0..w {
                out.data_mut()[(ni * h + y) * w + xx] = x.at4(ni, c, y, xx);
            }
        }
    }
    out
}

/// Per-pixel foreground probability `e^{l1} / (e^{l0} + e^{l1})` of a 2-channel map.
pub fn softmax_fg(logits: &Tensor) -> Tensor {
    let (n, c, h, w) = logits.dims4().unwrap();
    assert_eq!(c, 2);
    Tensor::from_fn(&[n, 1, h, w], |i| {
        let (ni, y, x) = (i / (h * w), (i / w) % h, i % w);
        let (l0, l1) = (logits.at4(ni, 0, y, x), logits.at4(ni, 1, y, x));
        l1.exp() / (l0.exp() + l1.exp())
    })
}

/// `att ⊙ x + x` with `att` (N,1,H,W) broadcast over channels, pixel by pixel.
pub fn residual_spatial(x: &Tensor, att: &Tensor) -> Tensor {
    let (n, c, h, w) = x.dims4().unwrap();
    Tensor::from_fn(&[n, c, h, w], |i| {
        let (ni, y, xx) = (i / (c * h * w), (i / w) % h, i % w);
        let a = att.at4(ni, 0, y, xx);
        a * x.data()[i] + x.data()[i]
    })
}

pub fn concat(a: &Tensor, b: &Tensor) -> Tensor {
    let (n, ca, h, w) = a.dims4().unwrap();
    let cb = b.shape()[1];
    Tensor::from_fn(&[n, ca + cb, h, w], |i| {
        let (ni, c, y, x) = (i / ((ca + cb) * h * w), (i / (h * w)) % (ca + cb), (i / w) % h, i % w);
        if c < ca {
            a.at4(ni, c, y, x)
        } else {
            b.at4(ni, c - ca, y, x)
        }
    })
}

/// Gives every normalization layer in `store` random affine parameters and
/// running statistics, so evaluation-mode oracles exercise all of them.
pub fn randomize_norms(store: &mut ParamStore, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params: Vec<String> = store.params().map(|(n, _)| n.to_string()).collect();
    for name in params {
        if name.ends_with(".gamma") || name.ends_with(".prelu") {
            for v in store.param_mut(&name).unwrap().data_mut() {
                *v = rng.gen_range(0.1..1.5);
            }
        } else if name.ends_with(".beta") {
            for v in store.param_mut(&name).unwrap().data_mut() {
                *v = rng.gen_range(-0.5..0.5);
            }
        }
    }
    let buffers: Vec<String> = store.buffers().map(|(n, _)| n.to_string()).collect();
    for name in buffers {
        let range = if name.ends_with("running_var") { 0.5..2.0 } else { -0.3..0.3 };
        for v in store.buffer_mut(&name).unwrap().data_mut() {
            *v = rng.gen_range(range.clone());
        }
    }
}

/// Fixes a closure's signature to one that works for every tape lifetime.
pub fn objective<F>(f: F) -> F
where
    F: for<'s, 't> Fn(&Session<'s, 't>) -> colsod_core::Result<Var<'t>>,
{
    f
}

/// Random projection `Σ r_{n,y,x} q_{n,c} v_{n,c,y,x}` of a feature map to a scalar.
pub fn project<'t>(v: &Var<'t>, seed: u64) -> Var<'t> {
    let (n, c, h, w) = v.value().dims4().unwrap();
    let tape = v.tape();
    let r = tape.constant(random(&[n, 1, h, w], seed));
    let q = tape.constant(random(&[n, c, 1, 1], seed + 1));
    v.mul_map(&r).unwrap().mul_channels(&q).unwrap().sum_all()
}

/// Largest relative error between tape gradients of `f` with respect to the
/// named parameters and kink-aware central differences, over at most
/// `per_tensor` evenly spread coordinates of each tensor.
pub fn param_gradcheck<F>(
    store: &ParamStore,
    names: &[String],
    mode: Mode,
    per_tensor: usize,
    f: F,
) -> (f64, String)
where
    F: for<'s, 't> Fn(&Session<'s, 't>) -> colsod_core::Result<Var<'t>>,
{
    let tape = Tape::new();
    let s = Session::new(&tape, store, mode).with_tracked_params();
    let out = f(&s).unwrap();
    let grads = s.gradients(&tape.backward(&out));
    // These objectives sum thousands of projected terms, so roundoff at the
    // default step is comparable to the smallest gradients; modules in
    // isolation also hold far fewer rectifier kinks than the whole network.
    let opts = StencilOptions {
        step: 1e-5,
        ..StencilOptions::default()
    };
    let mut probe = store.clone();
    let mut worst = (0.0, String::new());
    for name in names {
        let n = store.param(name).unwrap().numel();
        let analytic = grads.get(name).cloned().unwrap_or_else(|| Tensor::zeros(&[n]));
        for i in spread_indices(n, per_tensor) {
            let x0 = store.param(name).unwrap().data()[i];
            let eval = |x: f64| {
                probe.param_mut(name).unwrap().data_mut()[i] = x;
                let tape = Tape::new();
                let s = Session::new(&tape, &probe, mode).with_frozen_params();
                f(&s).and_then(|v| Ok(v.value().item()?))
            };
            let numeric = kink_aware_difference(eval, x0, &opts).unwrap();
            probe.param_mut(name).unwrap().data_mut()[i] = x0;
            let a = analytic.data()[i];
            let err = relative_error(a, numeric.value, opts.floor);
            if err > worst.0 {
                worst = (err, format!("{name}[{i}]: analytic {a}, numeric {numeric:?}"));
            }
        }
    }
    worst
}

/// Half-pixel bilinear resize (corners not aligned, edges clamped), one
/// output pixel at a time.
pub fn bilinear(x: &Tensor, out_h: usize, out_w: usize) -> Tensor {
    let (n, c, h, w) = x.dims4().unwrap();
    let coord = |d: usize, input: usize, output: usize| {
        let src = ((d as f64 + 0.5) * input as f64 / output as f64 - 0.5).max(0.0);
        let lo = (src.floor() as usize).min(input - 1);
        (lo, (lo + 1).min(input - 1), src - lo as f64)
    };
    Tensor::from_fn(&[n, c, out_h, out_w], |i| {
        let (plane, oy, ox) = (i / (out_h * out_w), (i / out_w) % out_h, i % out_w);
        let (ni, ci) = (plane / c, plane % c);
        let (y0, y1, fy) = coord(oy, h, out_h);
        let (x0, x1, fx) = coord(ox, w, out_w);
        let v = |y, xx| x.at4(ni, ci, y, xx);
        (1.0 - fy) * ((1.0 - fx) * v(y0, x0) + fx * v(y0, x1)) + fy * ((1.0 - fx) * v(y1, x0) + fx * v(y1, x1))
    })
}
