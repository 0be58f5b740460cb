//! Full network assembly, ablation toggles and the supervised objective.

use colsod_autograd::{Reduction, Tensor, Var};

use crate::backbone::{Backbone, BackboneConfig, SideOutputs, Transitioned, FEATURE_CHANNELS};
use crate::collaborators::{DepthCollaborator, DepthOutputs, SaliencyCollaborator, SaliencyOutputs};
use crate::collector::{CollectorInputs, CollectorOutputs, KnowledgeCollector};
use crate::error::{config, shape, Result};
use crate::guidance::{HighLevel, HighLevelOutput};
use crate::losses::{bce_loss_var, depth_loss_var, LossBreakdown, LossWeights};
use crate::nn::{HeadOutput, TwoWayHead};
use crate::params::{Builder, ParamStore};
use crate::session::Session;

/// Module toggles. All off is the backbone-plus-concatenation baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Ablation {
    pub use_ggm: bool,
    /// Edge collaborator on `f_l` (E).
    pub use_edge: bool,
    /// Coarse saliency supervision on `f_h` (S).
    pub use_coarse_sal: bool,
    /// Extra saliency supervision on `f_l` (S_l); its loss adds to `loss_s`.
    pub use_low_sal: bool,
    /// Depth supervision on `f_h` without channel attention (D).
    pub use_depth: bool,
    /// Depth supervision with channel attention (D_CA).
    pub use_depth_ca: bool,
    /// Saliency spatial attention plus depth channel attention (S_SA + D_CA).
    pub use_mutual_sa_ca: bool,
    pub use_kc: bool,
    pub kc_use_att_edge: bool,
    pub kc_use_att_sal: bool,
    pub kc_use_att_depth: bool,
}

/// Named rows of the two ablation tables, in table order.
pub const PRESETS: [&str; 12] = [
    "a", "b", "c", "d", "e", "f", "c+sl", "d+depth", "d+depth_ca", "e+att_edge", "e+att_sal",
    "e+att_edge+att_sal",
];

impl Ablation {
    /// (a) backbone baseline.
    pub fn baseline() -> Self {
        Self::default()
    }

    /// (f) the complete model.
    pub fn full() -> Self {
        Self::preset("f").expect("preset f")
    }

    pub fn preset(name: &str) -> Option<Self> {
        let b = Self {
            use_ggm: true,
            ..Self::default()
        };
        let c = Self {
            use_edge: true,
            ..b
        };
        let d = Self {
            use_coarse_sal: true,
            ..c
        };
        let e = Self {
            use_mutual_sa_ca: true,
            ..d
        };
        let kc = |edge, sal, depth| Self {
            use_kc: true,
            kc_use_att_edge: edge,
            kc_use_att_sal: sal,
            kc_use_att_depth: depth,
            ..e
        };
        Some(match name {
            "a" => Self::baseline(),
            "b" => b,
            "c" => c,
            "d" => d,
            "e" => e,
            "f" => kc(true, true, true),
            "c+sl" => Self {
                use_low_sal: true,
                ..c
            },
            "d+depth" => Self {
                use_depth: true,
                ..d
            },
            "d+depth_ca" => Self {
                use_depth_ca: true,
                ..d
            },
            "e+att_edge" => kc(true, false, false),
            "e+att_sal" => kc(false, true, false),
            "e+att_edge+att_sal" => kc(true, true, false),
            _ => return None,
        })
    }

    pub fn has_depth(&self) -> bool {
        self.use_depth || self.use_depth_ca || self.use_mutual_sa_ca
    }

    pub fn channel_attention(&self) -> bool {
        self.use_depth_ca || self.use_mutual_sa_ca
    }

    fn collector_inputs(&self) -> Option<CollectorInputs> {
        let inputs = CollectorInputs {
            att_edge: self.kc_use_att_edge,
            att_sal: self.kc_use_att_sal,
            att_depth: self.kc_use_att_depth,
        };
        (self.use_kc && (inputs.att_edge || inputs.att_sal || inputs.att_depth)).then_some(inputs)
    }

    pub fn validate(&self) -> Result<()> {
        let needs = [
            (self.use_mutual_sa_ca && !self.use_coarse_sal, "use_mutual_sa_ca needs use_coarse_sal"),
            (self.kc_use_att_edge && !self.use_edge, "kc_use_att_edge needs use_edge"),
            (self.kc_use_att_sal && !self.use_coarse_sal, "kc_use_att_sal needs use_coarse_sal"),
            (self.kc_use_att_depth && !self.has_depth(), "kc_use_att_depth needs a depth head"),
            (
                !self.use_kc && (self.kc_use_att_edge || self.kc_use_att_sal || self.kc_use_att_depth),
                "kc_use_att_* needs use_kc",
            ),
        ];
        match needs.iter().find(|(bad, _)| *bad) {
            Some((_, msg)) => Err(config(*msg)),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub backbone: BackboneConfig,
    pub ablation: Ablation,
    /// Side of `S_final`; the input side when `None`.
    pub output_side: Option<usize>,
}

impl ModelConfig {
    pub fn new(backbone: BackboneConfig, ablation: Ablation) -> Self {
        Self {
            backbone,
            ablation,
            output_side: None,
        }
    }
}

/// Supervision for one batch, all (N,1,H,W) at the input side.
#[derive(Debug, Clone)]
pub struct Targets {
    pub sal: Tensor,
    pub edge: Option<Tensor>,
    pub depth: Option<Tensor>,
}

#[derive(Clone)]
pub struct Outputs<'t> {
    pub side: SideOutputs<'t>,
    pub transitioned: Transitioned<'t>,
    pub f_l: Var<'t>,
    pub high: HighLevelOutput<'t>,
    pub edge: Option<HeadOutput<'t>>,
    pub low_sal: Option<HeadOutput<'t>>,
    pub saliency: Option<SaliencyOutputs<'t>>,
    pub depth: Option<DepthOutputs<'t>>,
    /// `concat(f_l, f_hc)`.
    pub f_g: Var<'t>,
    pub collector: Option<CollectorOutputs<'t>>,
    pub final_head: HeadOutput<'t>,
    /// Final saliency probability, (N,1,side,side).
    pub s_final: Var<'t>,
}

impl<'t> Outputs<'t> {
    /// Names of the optional heads present, for structural comparisons.
    pub fn heads(&self) -> Vec<&'static str> {
        let mut h = Vec::new();
        if self.edge.is_some() {
            h.push("edge");
        }
        if self.low_sal.is_some() {
            h.push("low_sal");
        }
        if self.saliency.is_some() {
            h.push("saliency");
        }
        if let Some(d) = &self.depth {
            h.push("depth");
            if d.m_c.is_some() {
                h.push("channel_attention");
            }
        }
        if let Some(c) = &self.collector {
            h.push("collector");
            if c.att_f.is_some() {
                h.push("att_f");
            }
        }
        h
    }
}

#[derive(Debug, Clone)]
pub struct Model {
    cfg: ModelConfig,
    backbone: Backbone,
    high: HighLevel,
    edge: Option<TwoWayHead>,
    low_sal: Option<TwoWayHead>,
    saliency: Option<SaliencyCollaborator>,
    depth: Option<DepthCollaborator>,
    collector: Option<KnowledgeCollector>,
    final_head: TwoWayHead,
}

impl Model {
    /// Builds the network and its freshly initialized parameters. The seed and
    /// configuration fully determine every initial value.
    pub fn new(cfg: ModelConfig, seed: u64) -> Result<(Self, ParamStore)> {
        cfg.backbone.validate()?;
        let ab = cfg.ablation;
        ab.validate()?;
        let mut store = ParamStore::new();
        let mut b = Builder::new(&mut store, seed);
        let backbone = Backbone::new(&mut b, &cfg.backbone)?;
        let high = HighLevel::new(&mut b, ab.use_ggm)?;
        let c = FEATURE_CHANNELS;
        let edge = ab
            .use_edge
            .then(|| TwoWayHead::new(&mut b, "edge.head", c))
            .transpose()?;
        let low_sal = ab
            .use_low_sal
            .then(|| TwoWayHead::new(&mut b, "low_saliency.head", c))
            .transpose()?;
        let saliency = ab
            .use_coarse_sal
            .then(|| SaliencyCollaborator::new(&mut b, ab.use_mutual_sa_ca))
            .transpose()?;
        let depth = ab
            .has_depth()
            .then(|| DepthCollaborator::new(&mut b, ab.channel_attention()))
            .transpose()?;
        let collector = ab
            .collector_inputs()
            .map(|inputs| KnowledgeCollector::new(&mut b, inputs))
            .transpose()?;
        let final_head = TwoWayHead::new(&mut b, "final.head", 2 * c)?;
        let model = Self {
            cfg,
            backbone,
            high,
            edge,
            low_sal,
            saliency,
            depth,
            collector,
            final_head,
        };
        model.backbone.load_pretrained(&mut store)?;
        Ok((model, store))
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn backbone(&self) -> &Backbone {
        &self.backbone
    }

    pub fn high_level(&self) -> &HighLevel {
        &self.high
    }

    pub fn depth_collaborator(&self) -> Option<&DepthCollaborator> {
        self.depth.as_ref()
    }

    pub fn collector(&self) -> Option<&KnowledgeCollector> {
        self.collector.as_ref()
    }

    pub fn output_side(&self) -> usize {
        self.cfg.output_side.unwrap_or(self.cfg.backbone.input_side)
    }

    /// RGB-only forward pass. `image` is (N,3,side,side), already normalized.
    pub fn forward<'t>(&self, s: &Session<'_, 't>, image: &Var<'t>) -> Result<Outputs<'t>> {
        let side = self.backbone.extract_side_features(s, image)?;
        let tr = self.backbone.apply_transitions(s, &side)?;
        let [t1, t2, t3, t4, t5] = &tr.t;
        let f_l = self.backbone.integrate_low_level(s, t1, t2)?;
        let high = self.high.forward(s, t3, t4, t5)?;

        let edge = self.edge.as_ref().map(|h| h.forward(s, &f_l)).transpose()?;
        let low_sal = self.low_sal.as_ref().map(|h| h.forward(s, &f_l)).transpose()?;
        let saliency = self
            .saliency
            .as_ref()
            .map(|c| c.forward(s, &high.f_h))
            .transpose()?;
        let f_h_tilde = saliency.as_ref().map_or(&high.f_h, |o| &o.f_h_tilde);
        let depth = self
            .depth
            .as_ref()
            .map(|c| c.forward(s, f_h_tilde))
            .transpose()?;
        let f_hc = depth.as_ref().map_or(f_h_tilde, |d| &d.f_hc);
        if f_hc.shape()[2..] != f_l.shape()[2..] {
            return Err(shape(format!(
                "f_hc {:?} and f_l {:?} differ spatially",
                f_hc.shape(),
                f_l.shape()
            )));
        }
        let f_g = Var::concat_channels(&[&f_l, f_hc])?;
        let collector = self
            .collector
            .as_ref()
            .map(|kc| {
                kc.collect(
                    s,
                    &f_g,
                    edge.as_ref().map(|e| &e.att),
                    saliency.as_ref().map(|o| &o.head.att),
                    depth.as_ref().map(|d| &d.att_depth),
                )
            })
            .transpose()?;
        let fused = collector.as_ref().map_or(&f_g, |c| &c.f);
        let final_head = self.final_head.forward(s, fused)?;
        let out = self.output_side();
        let s_final = final_head.prob.resize_bilinear(out, out)?;
        Ok(Outputs {
            side,
            transitioned: tr,
            f_l,
            high,
            edge,
            low_sal,
            saliency,
            depth,
            f_g,
            collector,
            final_head,
            s_final,
        })
    }

    /// Weighted objective over the enabled heads. Disabled heads contribute
    /// zero terms; a head whose target is missing is an error.
    pub fn loss<'t>(
        &self,
        out: &Outputs<'t>,
        targets: &Targets,
        weights: &LossWeights,
        reduction: Reduction,
    ) -> Result<(Var<'t>, LossBreakdown)> {
        weights.validate()?;
        let mut terms: Vec<Var<'t>> = Vec::new();
        let mut w: Vec<f64> = Vec::new();
        let mut values = [0.0; 4];

        let mut push = |slot: usize, v: Var<'t>, weight: f64| {
            values[slot] += v.value().data()[0];
            terms.push(v);
            w.push(weight);
        };
        if let Some(e) = &out.edge {
            let gt = targets
                .edge
                .as_ref()
                .ok_or_else(|| config("edge head enabled but no edge targets"))?;
            push(0, bce_loss_var(&e.prob, gt, reduction)?, weights.edge);
        }
        for head in [out.saliency.as_ref().map(|o| &o.head), out.low_sal.as_ref()]
            .into_iter()
            .flatten()
        {
            push(1, bce_loss_var(&head.prob, &targets.sal, reduction)?, weights.sal);
        }
        if let Some(d) = &out.depth {
            let gt = targets
                .depth
                .as_ref()
                .ok_or_else(|| config("depth head enabled but no depth targets"))?;
            push(2, depth_loss_var(&d.att_depth, gt, reduction)?, weights.depth);
        }
        push(3, bce_loss_var(&out.s_final, &targets.sal, reduction)?, weights.fin);

        let refs: Vec<&Var<'t>> = terms.iter().collect();
        let total = Var::weighted_sum(&refs, &w)?;
        let breakdown = LossBreakdown::from_terms(values, weights)?;
        Ok((total, breakdown))
    }
}
