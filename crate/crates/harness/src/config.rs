use std::path::{Path, PathBuf};

use colsod_autograd::Reduction;
use colsod_core::{Ablation, BackboneConfig, LossWeights, ModelConfig, Scale};
use serde::{Deserialize, Serialize};

use crate::error::{config, file, Result};

/// Prefix of environment variables that override configuration keys:
/// `COLSOD_LR=0.01` sets `lr`.
pub const ENV_PREFIX: &str = "COLSOD_";

/// Learning rate with mean-reduced losses.
pub const MEAN_LR: f64 = 1e-3;
/// Learning rate of the summed-loss profile.
pub const SUM_LR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleName {
    Tiny,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReductionMode {
    Mean,
    Sum,
}

/// Everything a run needs, read from a flat `key = value` TOML file. Every
/// key is optional; see the README for the full list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scale: ScaleName,
    /// Square input side, a multiple of 16.
    pub input_side: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pretrained_weights: Option<PathBuf>,

    pub lambda_edge: f64,
    pub lambda_sal: f64,
    pub lambda_depth: f64,
    pub lambda_final: f64,
    pub reduction: ReductionMode,

    /// Defaults to [`MEAN_LR`] or [`SUM_LR`] by reduction.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    pub momentum: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Stops training after this many SGD steps.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    pub augment: bool,

    /// Ablation row the toggles below start from.
    pub ablation: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub use_ggm: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub use_edge: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub use_coarse_sal: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub use_low_sal: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub use_depth: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub use_depth_ca: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub use_mutual_sa_ca: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub use_kc: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kc_use_att_edge: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kc_use_att_sal: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kc_use_att_depth: Option<bool>,

    pub seed: u64,
    /// Dataset root holding `train/`; synthetic scenes are used when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_data: Option<PathBuf>,
    pub synthetic_samples: usize,
    pub invert_depth: bool,
    /// Checkpoints and logs go here when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    pub gradcheck_samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scale: ScaleName::Tiny,
            input_side: 64,
            pretrained_weights: None,
            lambda_edge: 1.0,
            lambda_sal: 1.0,
            lambda_depth: 3.0,
            lambda_final: 1.0,
            reduction: ReductionMode::Mean,
            lr: None,
            momentum: 0.9,
            weight_decay: 0.0005,
            epochs: 50,
            batch_size: 2,
            max_steps: None,
            augment: true,
            ablation: "f".into(),
            use_ggm: None,
            use_edge: None,
            use_coarse_sal: None,
            use_low_sal: None,
            use_depth: None,
            use_depth_ca: None,
            use_mutual_sa_ca: None,
            use_kc: None,
            kc_use_att_edge: None,
            kc_use_att_sal: None,
            kc_use_att_depth: None,
            seed: 0,
            train_data: None,
            synthetic_samples: 8,
            invert_depth: false,
            out_dir: None,
            gradcheck_samples: 256,
        }
    }
}

/// Reads an override value as a TOML scalar, or as a bare string.
fn env_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

impl RunConfig {
    /// Parses TOML text, then applies `COLSOD_*` overrides from `env`.
    pub fn parse(text: &str, env: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| config(e.to_string()))?;
        for (key, raw) in env {
            if let Some(name) = key.strip_prefix(ENV_PREFIX) {
                table.insert(name.to_ascii_lowercase(), env_value(&raw));
            }
        }
        // Integers are accepted wherever a float is expected.
        for key in ["lambda_edge", "lambda_sal", "lambda_depth", "lambda_final", "lr", "momentum", "weight_decay"] {
            if let Some(toml::Value::Integer(i)) = table.get(key) {
                let f = *i as f64;
                table.insert(key.into(), toml::Value::Float(f));
            }
        }
        let cfg: Self = table.try_into().map_err(|e: toml::de::Error| config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a configuration file with overrides from the process environment.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(file(path))?;
        Self::parse(&text, std::env::vars())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("a flat config always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.backbone().validate()?;
        self.loss_weights().validate()?;
        self.ablation()?.validate()?;
        if self.batch_size == 0 {
            return Err(config("batch_size must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) || self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return Err(config("momentum must lie in [0, 1) and weight_decay be >= 0"));
        }
        if self.lr.is_some_and(|lr| !(lr > 0.0 && lr.is_finite())) {
            return Err(config("lr must be positive"));
        }
        if self.train_data.is_none() && self.synthetic_samples == 0 {
            return Err(config("set train_data or a positive synthetic_samples"));
        }
        Ok(())
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr.unwrap_or(match self.reduction {
            ReductionMode::Mean => MEAN_LR,
            ReductionMode::Sum => SUM_LR,
        })
    }

    pub fn reduction(&self) -> Reduction {
        match self.reduction {
            ReductionMode::Mean => Reduction::Mean,
            ReductionMode::Sum => Reduction::Sum,
        }
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            edge: self.lambda_edge,
            sal: self.lambda_sal,
            depth: self.lambda_depth,
            fin: self.lambda_final,
        }
    }

    /// The preset row with the explicit toggles applied on top.
    pub fn ablation(&self) -> Result<Ablation> {
        let mut a = Ablation::preset(&self.ablation)
            .ok_or_else(|| config(format!("unknown ablation row `{}`", self.ablation)))?;
        let toggles = [
            (self.use_ggm, &mut a.use_ggm),
            (self.use_edge, &mut a.use_edge),
            (self.use_coarse_sal, &mut a.use_coarse_sal),
            (self.use_low_sal, &mut a.use_low_sal),
            (self.use_depth, &mut a.use_depth),
            (self.use_depth_ca, &mut a.use_depth_ca),
            (self.use_mutual_sa_ca, &mut a.use_mutual_sa_ca),
            (self.use_kc, &mut a.use_kc),
            (self.kc_use_att_edge, &mut a.kc_use_att_edge),
            (self.kc_use_att_sal, &mut a.kc_use_att_sal),
            (self.kc_use_att_depth, &mut a.kc_use_att_depth),
        ];
        for (value, slot) in toggles {
            if let Some(v) = value {
                *slot = v;
            }
        }
        Ok(a)
    }

    pub fn backbone(&self) -> BackboneConfig {
        let mut b = match self.scale {
            ScaleName::Tiny => BackboneConfig::tiny(self.input_side),
            ScaleName::Full => BackboneConfig {
                input_side: self.input_side,
                ..BackboneConfig::full()
            },
        };
        b.pretrained_weights_path = self.pretrained_weights.clone();
        b
    }

    pub fn model_config(&self) -> Result<ModelConfig> {
        Ok(ModelConfig::new(self.backbone(), self.ablation()?))
    }

    pub fn is_tiny(&self) -> bool {
        self.backbone().scale == Scale::Tiny
    }
}
