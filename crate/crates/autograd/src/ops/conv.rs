//! 2-D convolution (cross-correlation) with stride, zero padding and dilation,
//! lowered to matrix products over column tiles.

use crate::error::{invalid, Result, TensorError};
use crate::tape::Var;
use crate::tensor::Tensor;

/// Upper bound on the number of `f64`s in one column buffer (32 MiB).
const COL_BUDGET: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv2dOptions {
    pub stride: usize,
    pub padding: usize,
    pub dilation: usize,
}

impl Default for Conv2dOptions {
    fn default() -> Self {
        Self {
            stride: 1,
            padding: 0,
            dilation: 1,
        }
    }
}

impl Conv2dOptions {
    pub fn new(stride: usize, padding: usize, dilation: usize) -> Self {
        Self {
            stride,
            padding,
            dilation,
        }
    }
}

#[derive(Clone, Copy)]
struct Geometry {
    n: usize,
    cin: usize,
    h: usize,
    w: usize,
    cout: usize,
    kh: usize,
    kw: usize,
    oh: usize,
    ow: usize,
    opts: Conv2dOptions,
}

impl Geometry {
    fn k(&self) -> usize {
        self.cin * self.kh * self.kw
    }

    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.opts.stride == 1 && self.opts.padding == 0
    }

    /// Output rows per column tile.
    fn tile_rows(&self) -> usize {
        (COL_BUDGET / (self.k() * self.ow).max(1)).clamp(1, self.oh)
    }
}

/// `c = alpha * a * b + beta * c` for strided row/column layouts.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
    (rsc, csc): (usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    let last = |rs: usize, cs: usize, rows: usize, cols: usize| {
        (rows.saturating_sub(1)) * rs + (cols.saturating_sub(1)) * cs
    };
    assert!(k == 0 || last(rsa, csa, m, k) < a.len());
    assert!(k == 0 || last(rsb, csb, k, n) < b.len());
    assert!(last(rsc, csc, m, n) < c.len());
    // SAFETY: the asserts above bound every index touched by the kernel.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

/// Fills `col` (K x rows*ow) with the receptive fields of output rows `r0..r0+rows`.
fn im2col(x: &[f64], g: &Geometry, r0: usize, rows: usize, col: &mut [f64]) {
    let Conv2dOptions {
        stride,
        padding,
        dilation,
    } = g.opts;
    let p = rows * g.ow;
    for ci in 0..g.cin {
        let plane = &x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let krow = (ci * g.kh + ky) * g.kw + kx;
                let dst = &mut col[krow * p..(krow + 1) * p];
                for r in 0..rows {
                    let iy = ((r0 + r) * stride + ky * dilation) as isize - padding as isize;
                    let dst_row = &mut dst[r * g.ow..(r + 1) * g.ow];
                    if iy < 0 || iy >= g.h as isize {
                        dst_row.fill(0.0);
                        continue;
                    }
                    let src_row = &plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for (ox, d) in dst_row.iter_mut().enumerate() {
                        let ix = (ox * stride + kx * dilation) as isize - padding as isize;
                        *d = if ix < 0 || ix >= g.w as isize {
                            0.0
                        } else {
                            src_row[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Scatter-adds a column buffer back onto the input gradient plane set.
fn col2im(col: &[f64], g: &Geometry, r0: usize, rows: usize, dx: &mut [f64]) {
    let Conv2dOptions {
        stride,
        padding,
        dilation,
    } = g.opts;
    let p = rows * g.ow;
    for ci in 0..g.cin {
        let plane = &mut dx[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let krow = (ci * g.kh + ky) * g.kw + kx;
                let src = &col[krow * p..(krow + 1) * p];
                for r in 0..rows {
                    let iy = ((r0 + r) * stride + ky * dilation) as isize - padding as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let dst_row = &mut plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for (ox, s) in src[r * g.ow..(r + 1) * g.ow].iter().enumerate() {
                        let ix = (ox * stride + kx * dilation) as isize - padding as isize;
                        if ix >= 0 && ix < g.w as isize {
                            dst_row[ix as usize] += s;
                        }
                    }
                }
            }
        }
    }
}

fn geometry(x: &Tensor, weight: &Tensor, opts: Conv2dOptions) -> Result<Geometry> {
    let (n, cin, h, w) = x.dims4()?;
    let (cout, wcin, kh, kw) = weight.dims4()?;
    if wcin != cin {
        return Err(TensorError::ShapeMismatch {
            op: "conv2d",
            lhs: x.shape().to_vec(),
            rhs: weight.shape().to_vec(),
        });
    }
    if opts.stride == 0 || opts.dilation == 0 {
        return Err(invalid("conv2d", "stride and dilation must be positive"));
    }
    let span_h = opts.dilation * (kh - 1) + 1;
    let span_w = opts.dilation * (kw - 1) + 1;
    if h + 2 * opts.padding < span_h || w + 2 * opts.padding < span_w {
        return Err(invalid(
            "conv2d",
            format!("kernel span {span_h}x{span_w} exceeds padded input {h}x{w}"),
        ));
    }
    Ok(Geometry {
        n,
        cin,
        h,
        w,
        cout,
        kh,
        kw,
        oh: (h + 2 * opts.padding - span_h) / opts.stride + 1,
        ow: (w + 2 * opts.padding - span_w) / opts.stride + 1,
        opts,
    })
}

fn forward(x: &Tensor, weight: &Tensor, bias: Option<&Tensor>, g: &Geometry) -> Tensor {
    let (k, ohw) = (g.k(), g.oh * g.ow);
    let mut out = vec![0.0; g.n * g.cout * ohw];
    let wd = weight.data();
    let mut col = Vec::new();
    for ni in 0..g.n {
        let xn = &x.data()[ni * g.cin * g.h * g.w..(ni + 1) * g.cin * g.h * g.w];
        let on = &mut out[ni * g.cout * ohw..(ni + 1) * g.cout * ohw];
        if g.is_pointwise() {
            gemm(g.cout, k, ohw, wd, (k, 1), xn, (ohw, 1), 0.0, on, (ohw, 1));
        } else {
            let rows_per_tile = g.tile_rows();
            let mut r0 = 0;
            while r0 < g.oh {
                let rows = rows_per_tile.min(g.oh - r0);
                let p = rows * g.ow;
                col.resize(k * p, 0.0);
                im2col(xn, g, r0, rows, &mut col);
                gemm(
                    g.cout,
                    k,
                    p,
                    wd,
                    (k, 1),
                    &col,
                    (p, 1),
                    0.0,
                    &mut on[r0 * g.ow..],
                    (ohw, 1),
                );
                r0 += rows;
            }
        }
        if let Some(b) = bias {
            for (plane, bv) in on.chunks_mut(ohw).zip(b.data()) {
                plane.iter_mut().for_each(|v| *v += bv);
            }
        }
    }
    Tensor::new(&[g.n, g.cout, g.oh, g.ow], out).expect("conv2d output")
}

/// Returns `(dx, dweight)`; each is computed only when requested.
fn backward(
    x: &Tensor,
    weight: &Tensor,
    grad: &Tensor,
    g: &Geometry,
    want_x: bool,
    want_w: bool,
) -> (Option<Tensor>, Option<Tensor>) {
    let (k, ohw) = (g.k(), g.oh * g.ow);
    let chw = g.cin * g.h * g.w;
    let mut dx = want_x.then(|| vec![0.0; g.n * chw]);
    let mut dw = want_w.then(|| vec![0.0; g.cout * k]);
    let wd = weight.data();
    let mut col = Vec::new();
    let mut dcol = Vec::new();
    for ni in 0..g.n {
        let xn = &x.data()[ni * chw..(ni + 1) * chw];
        let gn = &grad.data()[ni * g.cout * ohw..(ni + 1) * g.cout * ohw];
        if g.is_pointwise() {
            if let Some(dw) = dw.as_mut() {
                gemm(g.cout, ohw, k, gn, (ohw, 1), xn, (1, ohw), 1.0, dw, (k, 1));
            }
            if let Some(dx) = dx.as_mut() {
                let dxn = &mut dx[ni * chw..(ni + 1) * chw];
                gemm(k, g.cout, ohw, wd, (1, k), gn, (ohw, 1), 0.0, dxn, (ohw, 1));
            }
            continue;
        }
        let rows_per_tile = g.tile_rows();
        let mut r0 = 0;
        while r0 < g.oh {
            let rows = rows_per_tile.min(g.oh - r0);
            let p = rows * g.ow;
            let g_tile = &gn[r0 * g.ow..];
            if let Some(dw) = dw.as_mut() {
                col.resize(k * p, 0.0);
                im2col(xn, g, r0, rows, &mut col);
                gemm(g.cout, p, k, g_tile, (ohw, 1), &col, (1, p), 1.0, dw, (k, 1));
            }
            if let Some(dx) = dx.as_mut() {
                dcol.resize(k * p, 0.0);
                gemm(k, g.cout, p, wd, (1, k), g_tile, (ohw, 1), 0.0, &mut dcol, (p, 1));
                col2im(&dcol, g, r0, rows, &mut dx[ni * chw..(ni + 1) * chw]);
            }
            r0 += rows;
        }
    }
    (
        dx.map(|d| Tensor::new(x.shape(), d).expect("conv2d dx")),
        dw.map(|d| Tensor::new(weight.shape(), d).expect("conv2d dw")),
    )
}

impl<'t> Var<'t> {
    /// Convolves an (N,Cin,H,W) input with a (Cout,Cin,kh,kw) kernel and optional (Cout) bias.
    pub fn conv2d(
        &self,
        weight: &Var<'t>,
        bias: Option<&Var<'t>>,
        opts: Conv2dOptions,
    ) -> Result<Var<'t>> {
        let g = geometry(self.value(), weight.value(), opts)?;
        if let Some(b) = bias {
            if b.value().numel() != g.cout {
                return Err(TensorError::ShapeMismatch {
                    op: "conv2d bias",
                    lhs: weight.shape().to_vec(),
                    rhs: b.shape().to_vec(),
                });
            }
        }
        let out = forward(self.value(), weight.value(), bias.map(|b| b.value()), &g);
        let x = self.rc();
        let wt = weight.rc();
        let backward_fn = move |grad: &Tensor, mask: &[bool]| {
            let (dx, dw) = backward(&x, &wt, grad, &g, mask[0], mask[1]);
            let mut grads = vec![dx, dw];
            if mask.len() == 3 {
                grads.push(mask[2].then(|| {
                    let ohw = g.oh * g.ow;
                    let mut db = vec![0.0; g.cout];
                    for (i, plane) in grad.data().chunks(ohw).enumerate() {
                        db[i % g.cout] += plane.iter().sum::<f64>();
                    }
                    Tensor::new(&[g.cout], db).expect("conv2d db")
                }));
            }
            grads
        };
        Ok(match bias {
            Some(b) => self.tape().record(out, &[self, weight, b], backward_fn),
            None => self.tape().record(out, &[self, weight], backward_fn),
        })
    }
}
