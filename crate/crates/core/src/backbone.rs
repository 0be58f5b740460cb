//! Feature extraction: side outputs, transitions and the integrated low-level feature.

use std::path::PathBuf;

use colsod_autograd::{Conv2dOptions, Tensor, Var};

use crate::error::{config, shape, Result};
use crate::nn::{BatchNorm2d, Conv2d, ConvBnPrelu};
use crate::params::{Builder, ParamStore};
use crate::session::Session;

/// Channel count of every transitioned and fused feature.
pub const FEATURE_CHANNELS: usize = 64;
pub const FULL_WIDTHS: [usize; 5] = [64, 256, 512, 1024, 2048];
pub const TINY_WIDTHS: [usize; 5] = [8, 16, 32, 64, 64];
const IMAGENET_MEAN: [f64; 3] = [0.485, 0.456, 0.406];
const IMAGENET_STD: [f64; 3] = [0.229, 0.224, 0.225];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    /// ResNet-50 with a dilated, unit-stride last stage.
    Full,
    /// Five plain conv stages with the same stride schedule.
    Tiny,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackboneConfig {
    pub scale: Scale,
    pub input_side: usize,
    pub channel_widths: [usize; 5],
    pub pretrained_weights_path: Option<PathBuf>,
}

impl BackboneConfig {
    pub fn full() -> Self {
        Self {
            scale: Scale::Full,
            input_side: 256,
            channel_widths: FULL_WIDTHS,
            pretrained_weights_path: None,
        }
    }

    pub fn tiny(input_side: usize) -> Self {
        Self {
            scale: Scale::Tiny,
            input_side,
            channel_widths: TINY_WIDTHS,
            pretrained_weights_path: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_side == 0 || !self.input_side.is_multiple_of(16) {
            return Err(config(format!(
                "input side {} is not a positive multiple of 16",
                self.input_side
            )));
        }
        if self.channel_widths.contains(&0) {
            return Err(config("channel widths must be positive"));
        }
        if self.scale == Scale::Full && self.channel_widths != FULL_WIDTHS {
            return Err(config(format!(
                "the full backbone has fixed widths {FULL_WIDTHS:?}"
            )));
        }
        Ok(())
    }

    /// Side lengths of f1..f5.
    pub fn side_out_sides(&self) -> [usize; 5] {
        let s = self.input_side;
        [s / 2, s / 4, s / 8, s / 16, s / 16]
    }

    /// Maps an RGB batch in `[0, 1]` to the range the backbone expects:
    /// ImageNet standardization with pretrained weights, identity otherwise.
    pub fn normalize(&self, rgb: &mut Tensor) -> Result<()> {
        if self.pretrained_weights_path.is_none() {
            return Ok(());
        }
        let (_, c, h, w) = rgb.dims4()?;
        if c != 3 {
            return Err(shape(format!("expected 3 input channels, got {c}")));
        }
        for (i, plane) in rgb.data_mut().chunks_mut(h * w).enumerate() {
            let ch = i % 3;
            plane
                .iter_mut()
                .for_each(|v| *v = (*v - IMAGENET_MEAN[ch]) / IMAGENET_STD[ch]);
        }
        Ok(())
    }
}

#[derive(Clone)]
pub struct SideOutputs<'t> {
    pub f: [Var<'t>; 5],
}

#[derive(Clone)]
pub struct Transitioned<'t> {
    pub t: [Var<'t>; 5],
}

#[derive(Debug, Clone)]
struct Bottleneck {
    conv1: Conv2d,
    bn1: BatchNorm2d,
    conv2: Conv2d,
    bn2: BatchNorm2d,
    conv3: Conv2d,
    bn3: BatchNorm2d,
    downsample: Option<(Conv2d, BatchNorm2d)>,
}

impl Bottleneck {
    fn new(
        b: &mut Builder,
        name: &str,
        (cin, planes): (usize, usize),
        stride: usize,
        dilation: usize,
    ) -> Result<Self> {
        let cout = planes * 4;
        let downsample = if stride != 1 || cin != cout {
            Some((
                Conv2d::new(
                    b,
                    &format!("{name}.downsample.conv"),
                    (cin, cout, 1),
                    Conv2dOptions::new(stride, 0, 1),
                    false,
                )?,
                BatchNorm2d::new(b, &format!("{name}.downsample.bn"), cout)?,
            ))
        } else {
            None
        };
        Ok(Self {
            conv1: Conv2d::pointwise(b, &format!("{name}.conv1"), cin, planes, false)?,
            bn1: BatchNorm2d::new(b, &format!("{name}.bn1"), planes)?,
            conv2: Conv2d::new(
                b,
                &format!("{name}.conv2"),
                (planes, planes, 3),
                Conv2dOptions::new(stride, dilation, dilation),
                false,
            )?,
            bn2: BatchNorm2d::new(b, &format!("{name}.bn2"), planes)?,
            conv3: Conv2d::pointwise(b, &format!("{name}.conv3"), planes, cout, false)?,
            bn3: BatchNorm2d::new(b, &format!("{name}.bn3"), cout)?,
            downsample,
        })
    }

    fn forward<'t>(&self, s: &Session<'_, 't>, x: &Var<'t>) -> Result<Var<'t>> {
        let y = self.bn1.forward(s, &self.conv1.forward(s, x)?)?.relu();
        let y = self.bn2.forward(s, &self.conv2.forward(s, &y)?)?.relu();
        let y = self.bn3.forward(s, &self.conv3.forward(s, &y)?)?;
        let skip = match &self.downsample {
            Some((conv, bn)) => bn.forward(s, &conv.forward(s, x)?)?,
            None => x.clone(),
        };
        Ok(y.add(&skip)?.relu())
    }
}

#[derive(Debug, Clone)]
struct ResNet50 {
    conv1: Conv2d,
    bn1: BatchNorm2d,
    layers: [Vec<Bottleneck>; 4],
}

impl ResNet50 {
    fn new(b: &mut Builder, name: &str) -> Result<Self> {
        let conv1 = Conv2d::new(
            b,
            &format!("{name}.conv1"),
            (3, 64, 7),
            Conv2dOptions::new(2, 3, 1),
            false,
        )?;
        let bn1 = BatchNorm2d::new(b, &format!("{name}.bn1"), 64)?;
        // (planes, blocks, stride, dilation of blocks after the first)
        let plan = [(64, 3, 1, 1), (128, 4, 2, 1), (256, 6, 2, 1), (512, 3, 1, 2)];
        let mut cin = 64;
        let mut layers: [Vec<Bottleneck>; 4] = Default::default();
        for (li, &(planes, blocks, stride, dilation)) in plan.iter().enumerate() {
            for bi in 0..blocks {
                let block_name = format!("{name}.layer{}.{bi}", li + 1);
                let (st, dil) = if bi == 0 { (stride, 1) } else { (1, dilation) };
                layers[li].push(Bottleneck::new(b, &block_name, (cin, planes), st, dil)?);
                cin = planes * 4;
            }
        }
        Ok(Self { conv1, bn1, layers })
    }

    fn forward<'t>(&self, s: &Session<'_, 't>, x: &Var<'t>) -> Result<[Var<'t>; 5]> {
        let f1 = self.bn1.forward(s, &self.conv1.forward(s, x)?)?.relu();
        let mut y = f1.max_pool2d(3, 2, 1)?;
        let mut outs = Vec::with_capacity(4);
        for layer in &self.layers {
            for block in layer {
                y = block.forward(s, &y)?;
            }
            outs.push(y.clone());
        }
        let [f2, f3, f4, f5]: [Var<'t>; 4] = outs.try_into().unwrap_or_else(|_| unreachable!("four stages"));
        Ok([f1, f2, f3, f4, f5])
    }
}

#[derive(Debug, Clone)]
struct TinyEncoder {
    stages: Vec<ConvBnPrelu>,
}

impl TinyEncoder {
    fn new(b: &mut Builder, name: &str, widths: [usize; 5]) -> Result<Self> {
        let strides = [2, 2, 2, 2, 1];
        let dilations = [1, 1, 1, 1, 2];
        let mut cin = 3;
        let mut stages = Vec::with_capacity(5);
        for i in 0..5 {
            stages.push(ConvBnPrelu::new(
                b,
                &format!("{name}.stage{}", i + 1),
                (cin, widths[i], 3),
                Conv2dOptions::new(strides[i], dilations[i], dilations[i]),
            )?);
            cin = widths[i];
        }
        Ok(Self { stages })
    }

    fn forward<'t>(&self, s: &Session<'_, 't>, x: &Var<'t>) -> Result<[Var<'t>; 5]> {
        let mut outs = Vec::with_capacity(5);
        let mut y = x.clone();
        for stage in &self.stages {
            y = stage.forward(s, &y)?;
            outs.push(y.clone());
        }
        Ok(outs.try_into().unwrap_or_else(|_| unreachable!("five stages")))
    }
}

#[derive(Debug, Clone)]
enum Encoder {
    Full(Box<ResNet50>),
    Tiny(TinyEncoder),
}

/// Backbone, the five transition layers and the low-level fusion.
#[derive(Debug, Clone)]
pub struct Backbone {
    cfg: BackboneConfig,
    encoder: Encoder,
    transitions: [ConvBnPrelu; 3],
    low_level: ConvBnPrelu,
}

/// Upsampling factors of trans1..trans5.
pub const TRANSITION_FACTORS: [usize; 5] = [2, 4, 2, 4, 4];

impl Backbone {
    pub fn new(b: &mut Builder, cfg: &BackboneConfig) -> Result<Self> {
        cfg.validate()?;
        let encoder = match cfg.scale {
            Scale::Full => Encoder::Full(Box::new(ResNet50::new(b, "backbone")?)),
            Scale::Tiny => Encoder::Tiny(TinyEncoder::new(b, "backbone", cfg.channel_widths)?),
        };
        let w = cfg.channel_widths;
        let transitions = [
            ConvBnPrelu::same3(b, "trans3", w[2], FEATURE_CHANNELS, 1)?,
            ConvBnPrelu::same3(b, "trans4", w[3], FEATURE_CHANNELS, 1)?,
            ConvBnPrelu::same3(b, "trans5", w[4], FEATURE_CHANNELS, 1)?,
        ];
        let low_level = ConvBnPrelu::same3(b, "low_level", w[0] + w[1], FEATURE_CHANNELS, 1)?;
        Ok(Self {
            cfg: cfg.clone(),
            encoder,
            transitions,
            low_level,
        })
    }

    pub fn config(&self) -> &BackboneConfig {
        &self.cfg
    }

    /// Overwrites the backbone parameters with those stored in the configured
    /// pretrained-weights file, if any.
    pub fn load_pretrained(&self, store: &mut ParamStore) -> Result<usize> {
        let Some(path) = &self.cfg.pretrained_weights_path else {
            return Ok(0);
        };
        let file = std::fs::File::open(path)
            .map_err(|e| config(format!("pretrained weights {}: {e}", path.display())))?;
        let weights = ParamStore::read_from(&mut std::io::BufReader::new(file))?;
        let n = store.load_prefixed(&weights, "backbone.")?;
        if n == 0 {
            return Err(config(format!(
                "{} holds no `backbone.` parameters",
                path.display()
            )));
        }
        Ok(n)
    }

    pub fn extract_side_features<'t>(
        &self,
        s: &Session<'_, 't>,
        image: &Var<'t>,
    ) -> Result<SideOutputs<'t>> {
        let side = self.cfg.input_side;
        match image.shape() {
            [_, 3, h, w] if *h == side && *w == side => {}
            other => {
                return Err(shape(format!(
                    "expected an (N, 3, {side}, {side}) image, got {other:?}"
                )))
            }
        }
        let f = match &self.encoder {
            Encoder::Full(net) => net.forward(s, image)?,
            Encoder::Tiny(net) => net.forward(s, image)?,
        };
        Ok(SideOutputs { f })
    }

    pub fn apply_transitions<'t>(
        &self,
        s: &Session<'_, 't>,
        side: &SideOutputs<'t>,
    ) -> Result<Transitioned<'t>> {
        for (i, f) in side.f.iter().enumerate() {
            let c = f.shape()[1];
            if c != self.cfg.channel_widths[i] {
                return Err(shape(format!(
                    "f{} has {c} channels, the configuration says {}",
                    i + 1,
                    self.cfg.channel_widths[i]
                )));
            }
        }
        let up = |i: usize| side.f[i].upsample(TRANSITION_FACTORS[i]);
        let t1 = up(0)?;
        let t2 = up(1)?;
        let t3 = self.transitions[0].forward(s, &up(2)?)?;
        let t4 = self.transitions[1].forward(s, &up(3)?)?;
        let t5 = self.transitions[2].forward(s, &up(4)?)?;
        Ok(Transitioned {
            t: [t1, t2, t3, t4, t5],
        })
    }

    /// `f_l`: concatenation of t1 and t2 fused by a 3×3 conv to 64 channels.
    pub fn integrate_low_level<'t>(
        &self,
        s: &Session<'_, 't>,
        t1: &Var<'t>,
        t2: &Var<'t>,
    ) -> Result<Var<'t>> {
        if t1.shape()[2..] != t2.shape()[2..] {
            return Err(shape(format!(
                "t1 {:?} and t2 {:?} differ spatially",
                t1.shape(),
                t2.shape()
            )));
        }
        self.low_level
            .forward(s, &Var::concat_channels(&[t1, t2])?)
    }
}
