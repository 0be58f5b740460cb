#[path = "support/oracle.rs"]
mod oracle;

use std::time::Instant;

use colsod_autograd::{Tape, Tensor};
use colsod_core::backbone::SideOutputs;
use colsod_core::{Ablation, BackboneConfig, CoreError, Mode, Model, ModelConfig, Session};
use oracle::*;

fn shapes<const N: usize>(vars: &[colsod_autograd::Var<'_>; N]) -> Vec<Vec<usize>> {
    vars.iter().map(|v| v.shape().to_vec()).collect()
}

#[test]
fn full_scale_reproduces_the_transition_table() {
    let (model, store) = Model::new(ModelConfig::new(BackboneConfig::full(), Ablation::full()), 0).unwrap();
    let image = random(&[1, 3, 256, 256], 1).map(|v| 0.5 + 0.5 * v);
    let start = Instant::now();
    let tape = Tape::new();
    let s = Session::new(&tape, &store, Mode::Eval);
    let out = model.forward(&s, &tape.constant(image)).unwrap();
    let elapsed = start.elapsed();

    assert_eq!(
        shapes(&out.side.f),
        vec![
            vec![1, 64, 128, 128],
            vec![1, 256, 64, 64],
            vec![1, 512, 32, 32],
            vec![1, 1024, 16, 16],
            vec![1, 2048, 16, 16],
        ]
    );
    assert_eq!(
        shapes(&out.transitioned.t),
        vec![
            vec![1, 64, 256, 256],
            vec![1, 256, 256, 256],
            vec![1, 64, 64, 64],
            vec![1, 64, 64, 64],
            vec![1, 64, 64, 64],
        ]
    );
    assert_eq!(out.f_l.shape(), &[1, 64, 256, 256]);
    assert_eq!(shapes(&out.high.guided), vec![vec![1, 64, 64, 64]; 3]);
    assert_eq!(out.high.f_h.shape(), &[1, 64, 256, 256]);
    assert_eq!(out.s_final.shape(), &[1, 1, 256, 256]);
    assert!(out.s_final.value().is_finite());
    assert!(elapsed.as_secs_f64() < 30.0, "forward took {elapsed:?}");
}

#[test]
fn tiny_scale_keeps_the_spatial_ratios() {
    let (model, store) = Model::new(ModelConfig::new(BackboneConfig::tiny(64), Ablation::full()), 0).unwrap();
    let tape = Tape::new();
    let s = Session::new(&tape, &store, Mode::Eval);
    let out = model.forward(&s, &tape.constant(random(&[1, 3, 64, 64], 2))).unwrap();
    assert_eq!(out.side.f[0].shape(), &[1, 8, 32, 32]);
    assert_eq!(out.side.f[4].shape(), &[1, 64, 4, 4]);
    let sides: Vec<usize> = out.side.f.iter().map(|f| f.shape()[2]).collect();
    assert_eq!(sides, vec![32, 16, 8, 4, 4]);
    assert_eq!(sides, BackboneConfig::tiny(64).side_out_sides().to_vec());
    assert_eq!(out.f_l.shape(), &[1, 64, 64, 64]);
    assert_eq!(out.high.f_h.shape(), &[1, 64, 64, 64]);
    assert!(store.num_params() < 1_000_000);
}

#[test]
fn wrong_input_side_is_a_shape_error() {
    let (model, store) = Model::new(ModelConfig::new(BackboneConfig::tiny(32), Ablation::full()), 0).unwrap();
    let tape = Tape::new();
    let s = Session::new(&tape, &store, Mode::Eval);
    let err = model.forward(&s, &tape.constant(Tensor::zeros(&[1, 3, 48, 48])));
    assert!(matches!(err, Err(CoreError::Shape(_))));
    assert!(BackboneConfig::tiny(40).validate().is_err());
}

#[test]
fn missing_pretrained_file_is_a_configuration_error() {
    let mut cfg = BackboneConfig::tiny(32);
    cfg.pretrained_weights_path = Some("/nonexistent/weights.bin".into());
    let err = Model::new(ModelConfig::new(cfg, Ablation::baseline()), 0);
    assert!(matches!(err, Err(CoreError::Config(_))));
}

#[test]
fn zero_input_gives_finite_output_in_both_modes() {
    let (model, store) = Model::new(ModelConfig::new(BackboneConfig::tiny(32), Ablation::full()), 7).unwrap();
    for mode in [Mode::Train, Mode::Eval] {
        let tape = Tape::new();
        let s = Session::new(&tape, &store, mode);
        let out = model.forward(&s, &tape.constant(Tensor::zeros(&[2, 3, 32, 32]))).unwrap();
        assert!(out.s_final.value().is_finite(), "{mode:?}");
        assert!(out.f_l.value().is_finite() && out.high.f_h.value().is_finite());
    }
}

#[test]
fn evaluation_is_bitwise_deterministic() {
    let (model, store) = Model::new(ModelConfig::new(BackboneConfig::tiny(32), Ablation::full()), 3).unwrap();
    let image = random(&[1, 3, 32, 32], 4);
    let run = || {
        let tape = Tape::new();
        let s = Session::new(&tape, &store, Mode::Eval);
        let out = model.forward(&s, &tape.constant(image.clone())).unwrap();
        out.s_final.value().clone()
    };
    let (a, b) = (run(), run());
    assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn zero_low_level_inputs_give_zero_f_l() {
    let (model, store) = Model::new(ModelConfig::new(BackboneConfig::tiny(64), Ablation::baseline()), 0).unwrap();
    for mode in [Mode::Train, Mode::Eval] {
        let tape = Tape::new();
        let s = Session::new(&tape, &store, mode);
        let t1 = tape.constant(Tensor::zeros(&[1, 8, 64, 64]));
        let t2 = tape.constant(Tensor::zeros(&[1, 16, 64, 64]));
        let f_l = model.backbone().integrate_low_level(&s, &t1, &t2).unwrap();
        assert_eq!(f_l.shape(), &[1, 64, 64, 64]);
        assert!(f_l.value().data().iter().all(|&v| v == 0.0), "{mode:?}");
        let t2 = tape.constant(Tensor::zeros(&[1, 16, 32, 32]));
        assert!(model.backbone().integrate_low_level(&s, &t1, &t2).is_err());
    }
}

#[test]
fn transitions_match_direct_computation() {
    let (model, mut store) = Model::new(ModelConfig::new(BackboneConfig::tiny(32), Ablation::baseline()), 5).unwrap();
    randomize_norms(&mut store, 2);
    let widths = BackboneConfig::tiny(32).channel_widths;
    let sides = [16, 8, 4, 2, 2];
    let f: Vec<Tensor> = (0..5)
        .map(|i| {
            if i == 2 {
                // A constant f3: its transition is constant away from the border.
                Tensor::full(&[1, widths[i], sides[i], sides[i]], 0.7)
            } else {
                random(&[1, widths[i], sides[i], sides[i]], 10 + i as u64)
            }
        })
        .collect();
    let tape = Tape::new();
    let s = Session::new(&tape, &store, Mode::Eval);
    let side = SideOutputs {
        f: std::array::from_fn(|i| tape.constant(f[i].clone())),
    };
    let tr = model.backbone().apply_transitions(&s, &side).unwrap();

    assert!(tr.t[0].value().max_abs_diff(&bilinear(&f[0], 32, 32)) < 1e-12);
    assert!(tr.t[1].value().max_abs_diff(&bilinear(&f[1], 32, 32)) < 1e-12);
    for (k, factor) in [(2, 2), (3, 4), (4, 4)] {
        let up = bilinear(&f[k], sides[k] * factor, sides[k] * factor);
        let expected = conv_bn_prelu(&store, &format!("trans{}", k + 1), &up, 1, 1);
        assert!(tr.t[k].value().max_abs_diff(&expected) < 1e-9, "t{}", k + 1);
    }

    let t3 = tr.t[2].value();
    let (_, c, h, w) = t3.dims4().unwrap();
    for ch in 0..c {
        let centre = t3.at4(0, ch, 1, 1);
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                assert!((t3.at4(0, ch, y, x) - centre).abs() < 1e-12);
            }
        }
    }

    let mut wrong = side.f.clone();
    wrong[3] = tape.constant(Tensor::zeros(&[1, 7, 2, 2]));
    assert!(model.backbone().apply_transitions(&s, &SideOutputs { f: wrong }).is_err());
}
