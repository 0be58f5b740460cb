use colsod_core::gradcheck::{check_model_gradients, ModelGradCheckOptions, ModelGradCheckReport};
use colsod_core::Model;
use colsod_data::synthetic;

use crate::batch::{image_tensor, targets};
use crate::config::RunConfig;
use crate::error::{config, HarnessError, Result};

/// Any probe above this fails the command.
pub const FAIL_ABOVE: f64 = 1e-3;
/// Largest input side the check accepts.
pub const MAX_SIDE: usize = 16;

/// Compares analytic gradients of the configured objective with finite
/// differences on a two-scene synthetic batch.
pub fn grad_check(cfg: &RunConfig) -> Result<ModelGradCheckReport> {
    if !cfg.is_tiny() || cfg.input_side > MAX_SIDE {
        return Err(config(format!("gradient check needs the tiny scale and input_side <= {MAX_SIDE}")));
    }
    let (model, store) = Model::new(cfg.model_config()?, cfg.seed)?;
    let scenes = synthetic::scenes(cfg.input_side as u32, 2, cfg.seed)?;
    let batch: Vec<_> = scenes.iter().collect();
    let opts = ModelGradCheckOptions {
        samples: cfg.gradcheck_samples,
        seed: cfg.seed,
        ..ModelGradCheckOptions::default()
    };
    let report = check_model_gradients(
        &model,
        &store,
        &image_tensor(cfg, &batch)?,
        &targets(&batch)?,
        &cfg.loss_weights(),
        cfg.reduction(),
        &opts,
    )?;
    let failures = report.failures(FAIL_ABOVE);
    if !failures.is_empty() {
        let names: Vec<String> = failures
            .iter()
            .map(|p| format!("{}[{}] ({:.2e})", p.name, p.index, p.rel_error))
            .collect();
        return Err(HarnessError::GradCheck(names.join(", ")));
    }
    Ok(report)
}
