//! Conversion between data samples and network tensors.

use colsod_autograd::{Tape, Tensor};
use colsod_core::{Mode, Model, ParamStore, Session, Targets};
use colsod_data::{Rgb32FImage, SaliencySample};
use ndarray::Array2;

use crate::config::RunConfig;
use crate::error::{config, Result};

fn stack(n: usize, c: usize, side: usize, planes: impl Iterator<Item = Vec<f64>>) -> Result<Tensor> {
    let data: Vec<f64> = planes.flatten().collect();
    Ok(Tensor::new(&[n, c, side, side], data)?)
}

fn side_of(samples: &[&SaliencySample]) -> Result<usize> {
    let (w, h) = samples.first().ok_or_else(|| config("empty batch"))?.dimensions();
    if w != h || samples.iter().any(|s| s.dimensions() != (w, h)) {
        return Err(config("batch samples must share one square size"));
    }
    Ok(w as usize)
}

/// RGB batch, normalized the way the configured backbone expects.
pub fn image_tensor(cfg: &RunConfig, samples: &[&SaliencySample]) -> Result<Tensor> {
    let side = side_of(samples)?;
    let mut t = stack(samples.len(), 3, side, samples.iter().map(|s| s.rgb_planes()))?;
    cfg.backbone().normalize(&mut t)?;
    Ok(t)
}

/// Saliency, edge and (when every sample has it) depth targets.
pub fn targets(samples: &[&SaliencySample]) -> Result<Targets> {
    let (n, side) = (samples.len(), side_of(samples)?);
    let depth = samples
        .iter()
        .map(|s| s.depth_values())
        .collect::<Option<Vec<_>>>()
        .map(|d| stack(n, 1, side, d.into_iter()))
        .transpose()?;
    Ok(Targets {
        sal: stack(n, 1, side, samples.iter().map(|s| s.sal_values()))?,
        edge: Some(stack(n, 1, side, samples.iter().map(|s| s.edge_values()))?),
        depth,
    })
}

/// Evaluation-mode saliency map of one RGB image already at the input side.
/// Nothing but the image enters the network.
pub fn predict(cfg: &RunConfig, model: &Model, store: &ParamStore, rgb: &Rgb32FImage) -> Result<Array2<f64>> {
    let side = cfg.input_side;
    if rgb.dimensions() != (side as u32, side as u32) {
        return Err(config(format!("image is {:?}, expected {side}×{side}", rgb.dimensions())));
    }
    let mut planes = vec![0.0; 3 * side * side];
    for (i, p) in rgb.pixels().enumerate() {
        for c in 0..3 {
            planes[c * side * side + i] = p[c] as f64;
        }
    }
    let mut t = Tensor::new(&[1, 3, side, side], planes)?;
    cfg.backbone().normalize(&mut t)?;
    let tape = Tape::new();
    let s = Session::new(&tape, store, Mode::Eval);
    let out = model.forward(&s, &tape.constant(t))?;
    let map = out.s_final.value();
    let out_side = model.output_side();
    Ok(Array2::from_shape_vec((out_side, out_side), map.data().to_vec()).expect("s_final is N×1×side×side"))
}
