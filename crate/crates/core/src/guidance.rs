//! Global perception (multi-dilation context) and the top-down global
//! guidance that produces the integrated high-level feature `f_h`.

use colsod_autograd::Var;

use crate::backbone::FEATURE_CHANNELS;
use crate::error::{shape, Result};
use crate::nn::{Conv2d, ConvBnPrelu};
use crate::params::Builder;
use crate::session::Session;

pub const GPM_DILATIONS: [usize; 4] = [1, 6, 12, 18];
/// `f_h` is brought from a quarter of the input side back to full resolution.
pub const HIGH_LEVEL_UPSAMPLE: usize = 4;

/// Four dilated 3×3 branches and a 1×1 branch, concatenated and fused by 1×1.
#[derive(Debug, Clone)]
pub struct Gpm {
    branches: Vec<ConvBnPrelu>,
    fuse: ConvBnPrelu,
}

impl Gpm {
    pub fn new(b: &mut Builder, name: &str) -> Result<Self> {
        let c = FEATURE_CHANNELS;
        let mut branches = GPM_DILATIONS
            .iter()
            .map(|&d| ConvBnPrelu::same3(b, &format!("{name}.dil{d}"), c, c, d))
            .collect::<Result<Vec<_>>>()?;
        branches.push(ConvBnPrelu::pointwise(b, &format!("{name}.point"), c, c)?);
        let fuse = ConvBnPrelu::pointwise(b, &format!("{name}.fuse"), c * branches.len(), c)?;
        Ok(Self { branches, fuse })
    }

    /// Branch outputs before concatenation, in dilation order then the 1×1 branch.
    pub fn branch_outputs<'t>(&self, s: &Session<'_, 't>, x: &Var<'t>) -> Result<Vec<Var<'t>>> {
        if x.shape().get(1) != Some(&FEATURE_CHANNELS) {
            return Err(shape(format!(
                "GPM expects {FEATURE_CHANNELS} channels, got {:?}",
                x.shape()
            )));
        }
        self.branches.iter().map(|br| br.forward(s, x)).collect()
    }

    pub fn forward<'t>(&self, s: &Session<'_, 't>, x: &Var<'t>) -> Result<Var<'t>> {
        let outs = self.branch_outputs(s, x)?;
        let refs: Vec<&Var<'t>> = outs.iter().collect();
        self.fuse.forward(s, &Var::concat_channels(&refs)?)
    }
}

/// The top-down recursion `f̃5 = Φ(t5)`, `f̃4 = Φ(t4 + f̃5)`,
/// `f̃3 = Φ(t3 + f̃4 + f̃5)` with an arbitrary `Φ` keyed by level (3, 4 or 5).
/// Returns `[f̃3, f̃4, f̃5]`.
pub fn guide<'t>(
    t3: &Var<'t>,
    t4: &Var<'t>,
    t5: &Var<'t>,
    mut phi: impl FnMut(usize, &Var<'t>) -> Result<Var<'t>>,
) -> Result<[Var<'t>; 3]> {
    if t3.shape() != t4.shape() || t4.shape() != t5.shape() {
        return Err(shape(format!(
            "t3 {:?}, t4 {:?} and t5 {:?} must match",
            t3.shape(),
            t4.shape(),
            t5.shape()
        )));
    }
    let g5 = phi(5, t5)?;
    let g4 = phi(4, &t4.add(&g5)?)?;
    let g3 = phi(3, &Var::add_all(&[t3, &g4, &g5])?)?;
    Ok([g3, g4, g5])
}

/// Builds `f_h` from t3..t5. With global guidance the inputs pass through the
/// GPM recursion first; without it they are fused directly (the baseline).
#[derive(Debug, Clone)]
pub struct HighLevel {
    gpms: Option<[Gpm; 3]>,
    fuse: Conv2d,
}

#[derive(Clone)]
pub struct HighLevelOutput<'t> {
    /// `[f̃3, f̃4, f̃5]`, or `[t3, t4, t5]` without guidance.
    pub guided: [Var<'t>; 3],
    pub f_h: Var<'t>,
}

impl HighLevel {
    pub fn new(b: &mut Builder, use_ggm: bool) -> Result<Self> {
        let gpms = if use_ggm {
            Some([
                Gpm::new(b, "ggm.gpm3")?,
                Gpm::new(b, "ggm.gpm4")?,
                Gpm::new(b, "ggm.gpm5")?,
            ])
        } else {
            None
        };
        let fuse = Conv2d::pointwise(b, "ggm.fuse", 3 * FEATURE_CHANNELS, FEATURE_CHANNELS, true)?;
        Ok(Self { gpms, fuse })
    }

    pub fn forward<'t>(
        &self,
        s: &Session<'_, 't>,
        t3: &Var<'t>,
        t4: &Var<'t>,
        t5: &Var<'t>,
    ) -> Result<HighLevelOutput<'t>> {
        let guided = match &self.gpms {
            Some(gpms) => guide(t3, t4, t5, |level, x| gpms[level - 3].forward(s, x))?,
            None => [t3.clone(), t4.clone(), t5.clone()],
        };
        let f_h = self.fuse_guided(s, &guided)?;
        Ok(HighLevelOutput { guided, f_h })
    }

    /// `Up×4(W_h * concat(g3, g4, g5) + b_h)`.
    pub fn fuse_guided<'t>(&self, s: &Session<'_, 't>, g: &[Var<'t>; 3]) -> Result<Var<'t>> {
        let cat = Var::concat_channels(&[&g[0], &g[1], &g[2]])?;
        Ok(self.fuse.forward(s, &cat)?.upsample(HIGH_LEVEL_UPSAMPLE)?)
    }
}
