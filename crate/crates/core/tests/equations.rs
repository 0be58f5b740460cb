#[path = "support/oracle.rs"]
mod oracle;

use colsod_autograd::{Tape, Tensor, Var};
use colsod_core::collaborators::{DepthCollaborator, SaliencyCollaborator};
use colsod_core::collector::{CollectorInputs, KnowledgeCollector};
use colsod_core::nn::TwoWayHead;
use colsod_core::{Builder, Mode, ParamStore, Session};
use oracle::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-6;

fn assert_close(actual: &Tensor, expected: &Tensor, what: &str) {
    assert_eq!(actual.shape(), expected.shape(), "{what} shape");
    let d = actual.max_abs_diff(expected);
    assert!(d < TOL, "{what}: max difference {d}");
}

fn fill(store: &mut ParamStore, name: &str, values: &[f64]) {
    let t = store.param_mut(name).unwrap();
    for (i, v) in t.data_mut().iter_mut().enumerate() {
        *v = values[i % values.len()];
    }
}

#[test]
fn edge_head_matches_scalar_softmax() {
    let mut store = ParamStore::new();
    let head = TwoWayHead::new(&mut Builder::new(&mut store, 3), "edge.head", 64).unwrap();
    let f_l = random(&[1, 64, 16, 16], 5);
    let tape = Tape::new();
    let s = Session::new(&tape, &store, Mode::Eval);
    let out = head.forward(&s, &tape.constant(f_l.clone())).unwrap();

    let w = store.param("edge.head.weight").unwrap();
    let b = store.param("edge.head.bias").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..10 {
        let (y, x) = (rng.gen_range(0..16), rng.gen_range(0..16));
        let logit = |k: usize| {
            b.data()[k] + (0..64).map(|c| w.at4(k, c, 0, 0) * f_l.at4(0, c, y, x)).sum::<f64>()
        };
        let (l0, l1) = (logit(0), logit(1));
        let m = 1.0 / (1.0 + (l0 - l1).exp());
        assert!((out.prob.value().at4(0, 0, y, x) - m).abs() < TOL);
        assert!((out.att.value().at4(0, 0, y, x) - l1).abs() < TOL);
    }
    assert!(out.prob.value().data().iter().all(|p| (0.0..=1.0).contains(p)));
}

#[test]
fn zero_head_gives_one_half() {
    let mut store = ParamStore::new();
    let head = TwoWayHead::new(&mut Builder::new(&mut store, 3), "edge.head", 64).unwrap();
    fill(&mut store, "edge.head.weight", &[0.0]);
    fill(&mut store, "edge.head.bias", &[0.0]);
    let tape = Tape::new();
    let s = Session::new(&tape, &store, Mode::Eval);
    let out = head.forward(&s, &tape.constant(random(&[1, 64, 8, 8], 1))).unwrap();
    assert!(out.prob.value().data().iter().all(|&p| p == 0.5));
}

/// `Att_sal = W_s * f_h + b_s`, `f̃_h = Att_sal ⊙ f_h + f_h`.
#[test]
fn saliency_attention_matches_oracle() {
    let mut store = ParamStore::new();
    let sal = SaliencyCollaborator::new(&mut Builder::new(&mut store, 11), true).unwrap();
    let f_h = random(&[2, 64, 4, 4], 1);
    let tape = Tape::new();
    let s = Session::new(&tape, &store, Mode::Eval);
    let out = sal.forward(&s, &tape.constant(f_h.clone())).unwrap();

    let logits = pointwise(&store, "saliency.head", &f_h);
    let att = channel(&logits, 1);
    assert_close(out.head.att.value(), &att, "Att_sal");
    assert_close(out.head.prob.value(), &softmax_fg(&logits), "S_coarse");
    assert_close(out.f_h_tilde.value(), &residual_spatial(&f_h, &att), "f_h_tilde");
}

#[test]
fn saliency_residual_identities() {
    let mut store = ParamStore::new();
    let sal = SaliencyCollaborator::new(&mut Builder::new(&mut store, 11), true).unwrap();
    let f_h = random(&[1, 64, 4, 4], 2);
    fill(&mut store, "saliency.head.weight", &[0.0]);
    for (bias, factor) in [(0.0, 1.0), (1.0, 2.0)] {
        fill(&mut store, "saliency.head.bias", &[0.0, bias]);
        let tape = Tape::new();
        let s = Session::new(&tape, &store, Mode::Eval);
        let out = sal.forward(&s, &tape.constant(f_h.clone())).unwrap();
        assert!(out.head.att.value().data().iter().all(|&a| a == bias));
        let expected = f_h.map(|v| factor * v);
        assert_eq!(out.f_h_tilde.value(), &expected, "Att_sal = {bias}");
    }
}

/// `Att_depth = W_d * Ψ(f̃_h) + b_d`, `M_c = softmax(GP(W_c * Att_depth + b_c))`,
/// `f_hc = M_c ⊗ f̃_h + f̃_h`.
#[test]
fn depth_chain_matches_oracle() {
    let mut store = ParamStore::new();
    let depth = DepthCollaborator::new(&mut Builder::new(&mut store, 21), true).unwrap();
    randomize_norms(&mut store, 4);
    let x = random(&[2, 64, 4, 4], 3);
    let tape = Tape::new();
    let s = Session::new(&tape, &store, Mode::Eval);
    let out = depth.forward(&s, &tape.constant(x.clone())).unwrap();

    let mut psi = x.clone();
    for i in 1..=3 {
        psi = conv_bn_prelu(&store, &format!("depth.psi{i}"), &psi, 1, 1);
    }
    let att_depth = pointwise(&store, "depth.out", &psi);
    assert_close(out.att_depth.value(), &att_depth, "Att_depth");

    let z = pointwise(&store, "depth.channel", &att_depth);
    let (n, c, h, w) = z.dims4().unwrap();
    let mut m_c = Tensor::zeros(&[n, c, 1, 1]);
    for ni in 0..n {
        let pooled: Vec<f64> = (0..c)
            .map(|ci| {
                let mut acc = 0.0;
                for y in 0..h {
                    for xx in 0..w {
                        acc += z.at4(ni, ci, y, xx);
                    }
                }
                acc / (h * w) as f64
            })
            .collect();
        let total: f64 = pooled.iter().map(|v| v.exp()).sum();
        for (ci, p) in pooled.iter().enumerate() {
            m_c.data_mut()[ni * c + ci] = p.exp() / total;
        }
    }
    let got_m = out.m_c.as_ref().unwrap().value();
    assert_close(got_m, &m_c, "M_c");
    for ni in 0..n {
        let sum: f64 = got_m.data()[ni * c..(ni + 1) * c].iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }
    let f_hc = Tensor::from_fn(x.shape(), |i| {
        let (ni, ci) = (i / (c * 16), (i / 16) % c);
        m_c.data()[ni * c + ci] * x.data()[i] + x.data()[i]
    });
    assert_close(out.f_hc.value(), &f_hc, "f_hc");
    assert_eq!(out.att_depth.shape(), &[2, 1, 4, 4]);
}

#[test]
fn uniform_channel_weights_scale_by_65_over_64() {
    let mut store = ParamStore::new();
    let depth = DepthCollaborator::new(&mut Builder::new(&mut store, 21), true).unwrap();
    fill(&mut store, "depth.channel.weight", &[0.0]);
    fill(&mut store, "depth.channel.bias", &[0.3]);
    let x = random(&[1, 64, 4, 4], 8);
    let tape = Tape::new();
    let s = Session::new(&tape, &store, Mode::Eval);
    let out = depth.forward(&s, &tape.constant(x.clone())).unwrap();
    let m = out.m_c.unwrap();
    assert!(m.value().data().iter().all(|&v| (v - 1.0 / 64.0).abs() < 1e-15));
    assert!(out.f_hc.value().max_abs_diff(&x.map(|v| v * 65.0 / 64.0)) < 1e-15);
}

fn collector_fixture() -> (KnowledgeCollector, ParamStore) {
    let mut store = ParamStore::new();
    let inputs = CollectorInputs {
        att_edge: true,
        att_sal: true,
        att_depth: true,
    };
    let kc = KnowledgeCollector::new(&mut Builder::new(&mut store, 31), inputs).unwrap();
    (kc, store)
}

/// `Att_f = σ(W_f * [Att_sal, Att_edge] + b_f)`, `F̃_g = Att_depth ⊙ F_g + F_g`,
/// `F = Att_f ⊙ F̃_g + F̃_g`.
#[test]
fn collector_matches_oracle() {
    let (kc, store) = collector_fixture();
    let f_g = random(&[2, 128, 4, 4], 1);
    let (edge, sal, depth) = (random(&[2, 1, 4, 4], 2), random(&[2, 1, 4, 4], 3), random(&[2, 1, 4, 4], 4));
    let tape = Tape::new();
    let s = Session::new(&tape, &store, Mode::Eval);
    let c = |t: &Tensor| tape.constant(t.clone());
    let out = kc
        .collect(&s, &c(&f_g), Some(&c(&edge)), Some(&c(&sal)), Some(&c(&depth)))
        .unwrap();

    let att_f = softmax_fg(&pointwise(&store, "kc.att_fuse", &concat(&sal, &edge)));
    assert_close(out.att_f.as_ref().unwrap().value(), &att_f, "Att_f");
    let f_g_tilde = residual_spatial(&f_g, &depth);
    assert_close(out.f_g_tilde.value(), &f_g_tilde, "F_g_tilde");
    assert_close(out.f.value(), &residual_spatial(&f_g_tilde, &att_f), "F");
}

#[test]
fn collector_residual_identities() {
    let (kc, mut store) = collector_fixture();
    fill(&mut store, "kc.att_fuse.weight", &[0.0]);
    let f_g = random(&[1, 128, 4, 4], 1);
    let maps = random(&[1, 1, 4, 4], 2);
    // A -1000 logit gap makes the softmax exactly 0 or 1 in double precision.
    for (att, bias, factor) in [(0.0, [0.0, -1000.0], 1.0), (1.0, [-1000.0, 0.0], 4.0)] {
        fill(&mut store, "kc.att_fuse.bias", &bias);
        let tape = Tape::new();
        let s = Session::new(&tape, &store, Mode::Eval);
        let m = tape.constant(maps.clone());
        let d = tape.constant(Tensor::full(&[1, 1, 4, 4], att));
        let out = kc
            .collect(&s, &tape.constant(f_g.clone()), Some(&m), Some(&m), Some(&d))
            .unwrap();
        assert!(out.att_f.unwrap().value().data().iter().all(|&a| a == att));
        assert_eq!(out.f.value(), &f_g.map(|v| factor * v), "attention {att}");
    }
}

#[test]
fn fused_attention_ignores_features() {
    let (kc, store) = collector_fixture();
    let (edge, sal, depth) = (random(&[1, 1, 4, 4], 2), random(&[1, 1, 4, 4], 3), random(&[1, 1, 4, 4], 4));
    let run = |f_g: Tensor| {
        let tape = Tape::new();
        let s = Session::new(&tape, &store, Mode::Eval);
        let c = |t: &Tensor| tape.constant(t.clone());
        let out = kc
            .collect(&s, &c(&f_g), Some(&c(&edge)), Some(&c(&sal)), Some(&c(&depth)))
            .unwrap();
        out.att_f.unwrap().value().clone()
    };
    let a = run(random(&[1, 128, 4, 4], 10));
    let b = run(random(&[1, 128, 4, 4], 11));
    assert_eq!(a.data(), b.data());
}

#[test]
fn collaborator_gradients_match_finite_differences() {
    let mut store = ParamStore::new();
    let (sal, depth) = {
        let mut b = Builder::new(&mut store, 41);
        (
            SaliencyCollaborator::new(&mut b, true).unwrap(),
            DepthCollaborator::new(&mut b, true).unwrap(),
        )
    };
    randomize_norms(&mut store, 6);
    let f_h = random(&[1, 64, 4, 4], 12);
    let f = objective(|s| {
        let out = sal.forward(s, &s.tape().constant(f_h.clone()))?;
        let d = depth.forward(s, &out.f_h_tilde)?;
        let terms = [
            project(&out.head.prob, 1),
            project(&d.att_depth, 2),
            project(&d.f_hc, 3),
        ];
        Ok(Var::add_all(&[&terms[0], &terms[1], &terms[2]])?)
    });
    let names: Vec<String> = store.params().map(|(n, _)| n.to_string()).collect();
    let (worst, at) = param_gradcheck(&store, &names, Mode::Eval, 40, f);
    assert!(worst < 1e-4, "relative error {worst} at {at}");
}

#[test]
fn collector_gradients_match_finite_differences() {
    let (kc, store) = collector_fixture();
    let f_g = random(&[1, 128, 4, 4], 1);
    let (edge, sal, depth) = (random(&[1, 1, 4, 4], 2), random(&[1, 1, 4, 4], 3), random(&[1, 1, 4, 4], 4));
    let f = objective(|s| {
        let c = |t: &Tensor| s.tape().constant(t.clone());
        let out = kc.collect(s, &c(&f_g), Some(&c(&edge)), Some(&c(&sal)), Some(&c(&depth)))?;
        Ok(project(&out.f, 5))
    });
    let names: Vec<String> = store.params().map(|(n, _)| n.to_string()).collect();
    let (worst, at) = param_gradcheck(&store, &names, Mode::Eval, 40, f);
    assert!(worst < 1e-4, "relative error {worst} at {at}");
}
