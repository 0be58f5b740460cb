//! Knowledge collector: triple attention over the concatenated features.

use colsod_autograd::Var;

use crate::error::{config, Result};
use crate::nn::{residual_spatial, Conv2d};
use crate::params::Builder;
use crate::session::Session;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CollectorInputs {
    pub att_edge: bool,
    pub att_sal: bool,
    pub att_depth: bool,
}

#[derive(Debug, Clone)]
pub struct KnowledgeCollector {
    inputs: CollectorInputs,
    /// 1×1 conv from the enabled attention logits to two channels.
    fuse: Option<Conv2d>,
}

#[derive(Clone)]
pub struct CollectorOutputs<'t> {
    /// Foreground softmax of the fused attention, absent when neither the
    /// edge nor the saliency attention is used.
    pub att_f: Option<Var<'t>>,
    pub f_g_tilde: Var<'t>,
    pub f: Var<'t>,
}

impl KnowledgeCollector {
    pub fn new(b: &mut Builder, inputs: CollectorInputs) -> Result<Self> {
        let n = usize::from(inputs.att_sal) + usize::from(inputs.att_edge);
        let fuse = if n > 0 {
            Some(Conv2d::pointwise(b, "kc.att_fuse", n, 2, true)?)
        } else {
            None
        };
        Ok(Self { inputs, fuse })
    }

    /// `σ(W_f * concat(Att_sal, Att_edge) + b_f)`, foreground channel.
    pub fn fused_attention<'t>(
        &self,
        s: &Session<'_, 't>,
        att_sal: Option<&Var<'t>>,
        att_edge: Option<&Var<'t>>,
    ) -> Result<Option<Var<'t>>> {
        let Some(conv) = &self.fuse else {
            return Ok(None);
        };
        let mut maps = Vec::with_capacity(2);
        for (wanted, map, label) in [
            (self.inputs.att_sal, att_sal, "Att_sal"),
            (self.inputs.att_edge, att_edge, "Att_edge"),
        ] {
            if wanted {
                maps.push(map.ok_or_else(|| config(format!("collector needs {label}")))?);
            }
        }
        let logits = conv.forward(s, &Var::concat_channels(&maps)?)?;
        Ok(Some(logits.softmax_channels()?.narrow_channels(1, 1)?))
    }

    pub fn collect<'t>(
        &self,
        s: &Session<'_, 't>,
        f_g: &Var<'t>,
        att_edge: Option<&Var<'t>>,
        att_sal: Option<&Var<'t>>,
        att_depth: Option<&Var<'t>>,
    ) -> Result<CollectorOutputs<'t>> {
        let att_f = self.fused_attention(s, att_sal, att_edge)?;
        let f_g_tilde = if self.inputs.att_depth {
            let d = att_depth.ok_or_else(|| config("collector needs Att_depth"))?;
            residual_spatial(f_g, d)?
        } else {
            f_g.clone()
        };
        let f = match &att_f {
            Some(a) => residual_spatial(&f_g_tilde, a)?,
            None => f_g_tilde.clone(),
        };
        Ok(CollectorOutputs {
            att_f,
            f_g_tilde,
            f,
        })
    }
}
