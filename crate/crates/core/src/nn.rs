//! Parameterized layers. Each layer stores only the names of its parameters;
//! values live in a [`ParamStore`](crate::ParamStore) and are bound per pass.

use colsod_autograd::{BatchNormMode, Conv2dOptions, Var};

use crate::error::Result;
use crate::params::Builder;
use crate::session::{Mode, Session};

pub const BN_EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct Conv2d {
    weight: String,
    bias: Option<String>,
    opts: Conv2dOptions,
    pub cin: usize,
    pub cout: usize,
}

impl Conv2d {
    pub fn new(
        b: &mut Builder,
        name: &str,
        (cin, cout, k): (usize, usize, usize),
        opts: Conv2dOptions,
        bias: bool,
    ) -> Result<Self> {
        let fan_in = cin * k * k;
        let weight = format!("{name}.weight");
        b.uniform(weight.clone(), &[cout, cin, k, k], fan_in)?;
        let bias = if bias {
            let n = format!("{name}.bias");
            b.uniform(n.clone(), &[cout], fan_in)?;
            Some(n)
        } else {
            None
        };
        Ok(Self {
            weight,
            bias,
            opts,
            cin,
            cout,
        })
    }

    /// Same-size 3×3 convolution with the given dilation.
    pub fn same3(b: &mut Builder, name: &str, cin: usize, cout: usize, dilation: usize, bias: bool) -> Result<Self> {
        Self::new(b, name, (cin, cout, 3), Conv2dOptions::new(1, dilation, dilation), bias)
    }

    pub fn pointwise(b: &mut Builder, name: &str, cin: usize, cout: usize, bias: bool) -> Result<Self> {
        Self::new(b, name, (cin, cout, 1), Conv2dOptions::default(), bias)
    }

    pub fn forward<'t>(&self, s: &Session<'_, 't>, x: &Var<'t>) -> Result<Var<'t>> {
        let w = s.param(&self.weight)?;
        let bias = self.bias.as_deref().map(|n| s.param(n)).transpose()?;
        Ok(x.conv2d(&w, bias.as_ref(), self.opts)?)
    }
}

#[derive(Debug, Clone)]
pub struct BatchNorm2d {
    prefix: String,
}

impl BatchNorm2d {
    pub fn new(b: &mut Builder, name: &str, channels: usize) -> Result<Self> {
        b.constant(format!("{name}.gamma"), &[channels], 1.0)?;
        b.constant(format!("{name}.beta"), &[channels], 0.0)?;
        b.buffer(format!("{name}.running_mean"), &[channels], 0.0)?;
        b.buffer(format!("{name}.running_var"), &[channels], 1.0)?;
        Ok(Self {
            prefix: name.to_string(),
        })
    }

    pub fn forward<'t>(&self, s: &Session<'_, 't>, x: &Var<'t>) -> Result<Var<'t>> {
        let p = &self.prefix;
        let gamma = s.param(&format!("{p}.gamma"))?;
        let beta = s.param(&format!("{p}.beta"))?;
        let (y, stats) = match s.mode() {
            Mode::Train => x.batch_norm(&gamma, &beta, BatchNormMode::Train, BN_EPS)?,
            Mode::Eval => {
                let mode = BatchNormMode::Eval {
                    running_mean: s.buffer(&format!("{p}.running_mean"))?.data(),
                    running_var: s.buffer(&format!("{p}.running_var"))?.data(),
                };
                x.batch_norm(&gamma, &beta, mode, BN_EPS)?
            }
        };
        if let Some(stats) = stats {
            s.record_stats(p, stats);
        }
        Ok(y)
    }
}

/// Convolution (no bias), batch normalization and a per-channel PReLU.
#[derive(Debug, Clone)]
pub struct ConvBnPrelu {
    conv: Conv2d,
    bn: BatchNorm2d,
    slope: String,
}

impl ConvBnPrelu {
    pub fn new(
        b: &mut Builder,
        name: &str,
        shape: (usize, usize, usize),
        opts: Conv2dOptions,
    ) -> Result<Self> {
        let conv = Conv2d::new(b, &format!("{name}.conv"), shape, opts, false)?;
        let bn = BatchNorm2d::new(b, &format!("{name}.bn"), shape.1)?;
        let slope = format!("{name}.prelu");
        b.constant(slope.clone(), &[shape.1], 0.25)?;
        Ok(Self { conv, bn, slope })
    }

    pub fn same3(b: &mut Builder, name: &str, cin: usize, cout: usize, dilation: usize) -> Result<Self> {
        Self::new(b, name, (cin, cout, 3), Conv2dOptions::new(1, dilation, dilation))
    }

    pub fn pointwise(b: &mut Builder, name: &str, cin: usize, cout: usize) -> Result<Self> {
        Self::new(b, name, (cin, cout, 1), Conv2dOptions::default())
    }

    pub fn out_channels(&self) -> usize {
        self.conv.cout
    }

    pub fn forward<'t>(&self, s: &Session<'_, 't>, x: &Var<'t>) -> Result<Var<'t>> {
        let y = self.bn.forward(s, &self.conv.forward(s, x)?)?;
        Ok(y.prelu(&s.param(&self.slope)?)?)
    }
}

/// Element-wise `att ⊙ x + x` with a single-channel map broadcast over channels.
pub fn residual_spatial<'t>(x: &Var<'t>, att: &Var<'t>) -> Result<Var<'t>> {
    Ok(x.mul_map(att)?.add(x)?)
}

/// `w ⊗ x + x` with one weight per sample and channel.
pub fn residual_channel<'t>(x: &Var<'t>, w: &Var<'t>) -> Result<Var<'t>> {
    Ok(x.mul_channels(w)?.add(x)?)
}

/// A 1×1 convolution to two channels followed by a channel softmax.
/// The foreground channel gives both the probability map and, before the
/// softmax, the attention logit.
#[derive(Debug, Clone)]
pub struct TwoWayHead {
    conv: Conv2d,
}

#[derive(Clone)]
pub struct HeadOutput<'t> {
    /// Foreground logit, (N,1,H,W).
    pub att: Var<'t>,
    /// Foreground probability, (N,1,H,W).
    pub prob: Var<'t>,
}

impl TwoWayHead {
    pub fn new(b: &mut Builder, name: &str, cin: usize) -> Result<Self> {
        Ok(Self {
            conv: Conv2d::pointwise(b, name, cin, 2, true)?,
        })
    }

    pub fn forward<'t>(&self, s: &Session<'_, 't>, x: &Var<'t>) -> Result<HeadOutput<'t>> {
        let logits = self.conv.forward(s, x)?;
        Ok(HeadOutput {
            att: logits.narrow_channels(1, 1)?,
            prob: logits.softmax_channels()?.narrow_channels(1, 1)?,
        })
    }
}
