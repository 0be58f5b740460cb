//! Finite-difference verification of the full network objective.

use std::collections::BTreeMap;

use colsod_autograd::gradcheck::{kink_aware_difference, relative_error, StencilOptions};
use colsod_autograd::{Reduction, Tape, Tensor};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{config, Result};
use crate::losses::LossWeights;
use crate::model::{Model, Targets};
use crate::params::ParamStore;
use crate::session::{Mode, Session};

#[derive(Debug, Clone)]
pub struct ModelGradCheckOptions {
    /// Total number of scalar parameters probed.
    pub samples: usize,
    /// Difference stencil; its floor also floors the relative error.
    pub stencil: StencilOptions,
    pub seed: u64,
    /// Normalization mode of the checked passes.
    pub mode: Mode,
}

impl Default for ModelGradCheckOptions {
    fn default() -> Self {
        Self {
            samples: 256,
            stencil: StencilOptions::default(),
            seed: 0,
            mode: Mode::Train,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamProbe {
    pub name: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
    /// Step of the stencil behind `numeric`.
    pub step: f64,
    /// Whether a kink was detected and a one-sided or smaller stencil used.
    pub kinked: bool,
}

#[derive(Debug, Clone, Default)]
pub struct ModelGradCheckReport {
    pub probes: Vec<ParamProbe>,
}

impl ModelGradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.probes.iter().map(|p| p.rel_error).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&ParamProbe> {
        self.probes
            .iter()
            .max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
    }

    /// Probes whose relative error exceeds `limit`.
    pub fn failures(&self, limit: f64) -> Vec<&ParamProbe> {
        self.probes.iter().filter(|p| p.rel_error > limit).collect()
    }

    pub fn kinked(&self) -> usize {
        self.probes.iter().filter(|p| p.kinked).count()
    }
}

/// Objective of one batch with the stored parameters.
pub fn objective(
    mode: Mode,
    model: &Model,
    store: &ParamStore,
    image: &Tensor,
    targets: &Targets,
    weights: &LossWeights,
    reduction: Reduction,
) -> Result<f64> {
    let tape = Tape::new();
    let s = Session::new(&tape, store, mode).with_frozen_params();
    let out = model.forward(&s, &tape.constant(image.clone()))?;
    let (loss, _) = model.loss(&out, targets, weights, reduction)?;
    Ok(loss.value().data()[0])
}

/// Analytic gradients of the training objective for every parameter.
pub fn analytic_gradients(
    mode: Mode,
    model: &Model,
    store: &ParamStore,
    image: &Tensor,
    targets: &Targets,
    weights: &LossWeights,
    reduction: Reduction,
) -> Result<BTreeMap<String, Tensor>> {
    let tape = Tape::new();
    let s = Session::new(&tape, store, mode).with_tracked_params();
    let out = model.forward(&s, &tape.constant(image.clone()))?;
    let (loss, _) = model.loss(&out, targets, weights, reduction)?;
    let grads = tape.backward(&loss);
    let mut all = s.gradients(&grads);
    // Parameters the forward pass never touched have zero gradient.
    for (name, t) in store.params() {
        all.entry(name.to_string())
            .or_insert_with(|| Tensor::zeros(t.shape()));
    }
    Ok(all)
}

/// Compares analytic gradients with central differences at `samples`
/// coordinates spread over every parameter tensor (at least one per tensor).
pub fn check_model_gradients(
    model: &Model,
    store: &ParamStore,
    image: &Tensor,
    targets: &Targets,
    weights: &LossWeights,
    reduction: Reduction,
    opts: &ModelGradCheckOptions,
) -> Result<ModelGradCheckReport> {
    let analytic = analytic_gradients(opts.mode, model, store, image, targets, weights, reduction)?;
    let names: Vec<String> = store.params().map(|(n, _)| n.to_string()).collect();
    if names.is_empty() {
        return Err(config("model has no parameters"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let per = opts.samples.div_ceil(names.len()).max(1);
    let mut picks: Vec<(String, usize)> = Vec::new();
    for name in &names {
        let numel = store.param(name)?.numel();
        let mut idx: Vec<usize> = (0..numel).collect();
        idx.shuffle(&mut rng);
        picks.extend(idx.into_iter().take(per).map(|i| (name.clone(), i)));
    }
    // Keep one pick per tensor, then fill up to the requested total at random.
    if picks.len() > opts.samples.max(names.len()) {
        let (mut head, mut rest): (Vec<_>, Vec<_>) = (Vec::new(), Vec::new());
        let mut seen = std::collections::BTreeSet::new();
        for p in picks {
            if seen.insert(p.0.clone()) {
                head.push(p);
            } else {
                rest.push(p);
            }
        }
        rest.shuffle(&mut rng);
        let extra = opts.samples.saturating_sub(head.len());
        head.extend(rest.into_iter().take(extra));
        picks = head;
    }

    let mut probe_store = store.clone();
    let mut report = ModelGradCheckReport::default();
    for (name, index) in picks {
        let original = probe_store.param(&name)?.data()[index];
        let mut eval_at = |x: f64| -> Result<f64> {
            probe_store.param_mut(&name)?.data_mut()[index] = x;
            objective(opts.mode, model, &probe_store, image, targets, weights, reduction)
        };
        let diff = kink_aware_difference(&mut eval_at, original, &opts.stencil)?;
        probe_store.param_mut(&name)?.data_mut()[index] = original;
        let a = analytic[&name].data()[index];
        report.probes.push(ParamProbe {
            rel_error: relative_error(a, diff.value, opts.stencil.floor),
            name,
            index,
            analytic: a,
            numeric: diff.value,
            step: diff.step,
            kinked: diff.kinked,
        });
    }
    Ok(report)
}
