use std::fs::File;
use std::io::{BufWriter, Write};

use colsod_autograd::Tape;
use colsod_core::{LossBreakdown, Mode, Model, ParamStore, Session, Sgd};
use colsod_data::{augment, synthetic, DatasetManifest, LoadOptions, Loader, SaliencySample, Split};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::batch::{image_tensor, targets};
use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::error::{file, Result};

/// File names inside `out_dir`.
pub const CHECKPOINT_FILE: &str = "checkpoint.ckpt";
pub const TRAIN_LOG: &str = "train.log";

/// Training samples: synthetic scenes, or the `train` split of `train_data`
/// with depth required.
pub fn training_samples(cfg: &RunConfig) -> Result<Vec<SaliencySample>> {
    let side = cfg.input_side as u32;
    match &cfg.train_data {
        None => Ok(synthetic::scenes(side, cfg.synthetic_samples, cfg.seed)?),
        Some(root) => {
            let mut m = DatasetManifest::scan(root, Split::Train)?;
            m.invert_depth |= cfg.invert_depth;
            let loader = Loader::new(LoadOptions {
                invert_depth: m.invert_depth,
                ..LoadOptions::for_split(Split::Train, side)
            });
            Ok(loader.load_all(&m.records)?)
        }
    }
}

/// One SGD step on a batch; returns the loss of the batch before the update.
pub fn train_step(
    cfg: &RunConfig,
    model: &Model,
    store: &mut ParamStore,
    sgd: &mut Sgd,
    batch: &[&SaliencySample],
) -> Result<LossBreakdown> {
    let image = image_tensor(cfg, batch)?;
    let targets = targets(batch)?;
    let tape = Tape::new();
    let s = Session::new(&tape, store, Mode::Train);
    let out = model.forward(&s, &tape.constant(image))?;
    let (loss, breakdown) = model.loss(&out, &targets, &cfg.loss_weights(), cfg.reduction())?;
    breakdown.check_finite()?;
    let grads = s.gradients(&tape.backward(&loss));
    let stats = s.into_batch_stats();
    sgd.step(store, &grads)?;
    stats.apply(store)?;
    Ok(breakdown)
}

fn log_line(step: usize, epoch: usize, b: &LossBreakdown) -> String {
    let terms: Vec<String> = b.terms().iter().map(|(k, v)| format!("{k}={v:.6e}")).collect();
    format!("step={step} epoch={epoch} {}", terms.join(" "))
}

/// Full training run: shuffled mini-batches, optional augmentation, SGD with
/// momentum. The same configuration always produces the same checkpoint.
pub fn train(cfg: &RunConfig) -> Result<Checkpoint> {
    cfg.validate()?;
    let samples = training_samples(cfg)?;
    let (model, store) = Model::new(cfg.model_config()?, cfg.seed)?;
    let mut sgd = Sgd::new(cfg.learning_rate(), cfg.momentum, cfg.weight_decay)?;
    let mut ckpt = Checkpoint {
        config: cfg.clone(),
        epoch: 0,
        step: 0,
        history: Vec::new(),
        params: store,
    };
    let mut log = match &cfg.out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(file(dir))?;
            let path = dir.join(TRAIN_LOG);
            Some(BufWriter::new(File::create(&path).map_err(file(path))?))
        }
        None => None,
    };
    log::info!(
        "training {} samples, {} parameters, lr {:e}",
        samples.len(),
        ckpt.params.num_params(),
        cfg.learning_rate()
    );
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let max_steps = cfg.max_steps.unwrap_or(usize::MAX);
    'epochs: for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            if ckpt.step >= max_steps {
                break 'epochs;
            }
            let augmented: Vec<SaliencySample> = if cfg.augment {
                chunk
                    .iter()
                    .enumerate()
                    .map(|(j, &i)| {
                        let seed = cfg.seed.wrapping_mul(1_000_003) ^ ((ckpt.step * cfg.batch_size + j) as u64);
                        augment(&samples[i], seed).map(|(s, _)| s)
                    })
                    .collect::<colsod_data::Result<_>>()?
            } else {
                chunk.iter().map(|&i| samples[i].clone()).collect()
            };
            let batch: Vec<&SaliencySample> = augmented.iter().collect();
            let b = train_step(cfg, &model, &mut ckpt.params, &mut sgd, &batch)?;
            ckpt.step += 1;
            let line = log_line(ckpt.step, epoch, &b);
            log::debug!("{line}");
            if let Some(w) = &mut log {
                writeln!(w, "{line}")?;
            }
            ckpt.history.push(b);
        }
        ckpt.epoch = epoch + 1;
        let recent = &ckpt.history[ckpt.history.len().saturating_sub(order.len().div_ceil(cfg.batch_size))..];
        let mean = recent.iter().map(|b| b.total).sum::<f64>() / recent.len().max(1) as f64;
        log::info!("epoch {} mean loss {mean:.6}", ckpt.epoch);
        if let Some(dir) = &cfg.out_dir {
            ckpt.save(&dir.join(CHECKPOINT_FILE))?;
        }
    }
    if let Some(w) = &mut log {
        w.flush()?;
    }
    if let Some(dir) = &cfg.out_dir {
        ckpt.save(&dir.join(CHECKPOINT_FILE))?;
    }
    Ok(ckpt)
}
