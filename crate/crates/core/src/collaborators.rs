//! Edge, saliency and depth collaborators.

use colsod_autograd::Var;

use crate::backbone::FEATURE_CHANNELS;
use crate::error::Result;
use crate::nn::{residual_channel, residual_spatial, Conv2d, ConvBnPrelu, HeadOutput, TwoWayHead};
use crate::params::Builder;
use crate::session::Session;

/// Depth head depth (number of 3×3 layers in Ψ).
pub const DEPTH_HEAD_LAYERS: usize = 3;

/// Coarse saliency on `f_h`, optionally used as spatial attention.
#[derive(Debug, Clone)]
pub struct SaliencyCollaborator {
    head: TwoWayHead,
    spatial_attention: bool,
}

#[derive(Clone)]
pub struct SaliencyOutputs<'t> {
    pub head: HeadOutput<'t>,
    /// `Att_sal ⊙ f_h + f_h` with attention on, `f_h` otherwise.
    pub f_h_tilde: Var<'t>,
}

impl SaliencyCollaborator {
    pub fn new(b: &mut Builder, spatial_attention: bool) -> Result<Self> {
        Ok(Self {
            head: TwoWayHead::new(b, "saliency.head", FEATURE_CHANNELS)?,
            spatial_attention,
        })
    }

    pub fn forward<'t>(&self, s: &Session<'_, 't>, f_h: &Var<'t>) -> Result<SaliencyOutputs<'t>> {
        let head = self.head.forward(s, f_h)?;
        let f_h_tilde = if self.spatial_attention {
            residual_spatial(f_h, &head.att)?
        } else {
            f_h.clone()
        };
        Ok(SaliencyOutputs { head, f_h_tilde })
    }
}

/// Depth regression Ψ with an optional channel attention derived from it.
#[derive(Debug, Clone)]
pub struct DepthCollaborator {
    psi: Vec<ConvBnPrelu>,
    out: Conv2d,
    channel: Option<Conv2d>,
}

#[derive(Clone)]
pub struct DepthOutputs<'t> {
    /// Single-channel depth estimate.
    pub att_depth: Var<'t>,
    /// Channel weights (N,64,1,1) when channel attention is on.
    pub m_c: Option<Var<'t>>,
    /// `M_c ⊗ f̃_h + f̃_h`, or the input unchanged without channel attention.
    pub f_hc: Var<'t>,
}

impl DepthCollaborator {
    pub fn new(b: &mut Builder, channel_attention: bool) -> Result<Self> {
        let c = FEATURE_CHANNELS;
        let psi = (0..DEPTH_HEAD_LAYERS)
            .map(|i| ConvBnPrelu::same3(b, &format!("depth.psi{}", i + 1), c, c, 1))
            .collect::<Result<Vec<_>>>()?;
        let out = Conv2d::pointwise(b, "depth.out", c, 1, true)?;
        let channel = if channel_attention {
            Some(Conv2d::pointwise(b, "depth.channel", 1, c, true)?)
        } else {
            None
        };
        Ok(Self { psi, out, channel })
    }

    /// Ψ: the three 3×3 layers before the depth projection.
    pub fn psi<'t>(&self, s: &Session<'_, 't>, x: &Var<'t>) -> Result<Var<'t>> {
        let mut y = x.clone();
        for layer in &self.psi {
            y = layer.forward(s, &y)?;
        }
        Ok(y)
    }

    /// `Att_depth = W_d * Ψ(x) + b_d`.
    pub fn estimate<'t>(&self, s: &Session<'_, 't>, x: &Var<'t>) -> Result<Var<'t>> {
        self.out.forward(s, &self.psi(s, x)?)
    }

    /// `softmax_c(GP(W_c * Att_depth + b_c))`.
    pub fn channel_weights<'t>(
        &self,
        s: &Session<'_, 't>,
        att_depth: &Var<'t>,
    ) -> Result<Option<Var<'t>>> {
        self.channel
            .as_ref()
            .map(|conv| {
                Ok(conv
                    .forward(s, att_depth)?
                    .mean_spatial()?
                    .softmax_channels()?)
            })
            .transpose()
    }

    pub fn forward<'t>(&self, s: &Session<'_, 't>, f_h_tilde: &Var<'t>) -> Result<DepthOutputs<'t>> {
        let att_depth = self.estimate(s, f_h_tilde)?;
        let m_c = self.channel_weights(s, &att_depth)?;
        let f_hc = match &m_c {
            Some(m) => residual_channel(f_h_tilde, m)?,
            None => f_h_tilde.clone(),
        };
        Ok(DepthOutputs {
            att_depth,
            m_c,
            f_hc,
        })
    }
}
