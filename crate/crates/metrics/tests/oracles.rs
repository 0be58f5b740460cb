#[path = "support/oracle.rs"]
mod oracle;

use colsod_metrics::{
    e_measure, mae, mean_f_measure, pr_curve, s_measure, weighted_f_measure, EMeasureInput,
    MetricAccumulator, PrAccumulation,
};
use ndarray::{array, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;

/// 100 random 8x8 pairs. Every fourth prediction is quantized to /255 levels so
/// threshold ties occur; foreground density varies per instance.
fn instances() -> Vec<(Array2<f64>, Array2<bool>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..100)
        .map(|i| {
            let density = rng.gen_range(0.1..0.7);
            let mut gt = Array2::from_shape_fn((8, 8), |_| rng.gen_bool(density));
            if !gt.iter().any(|&v| v) {
                gt[(3, 4)] = true;
            }
            let pred = Array2::from_shape_fn((8, 8), |_| {
                let v: f64 = rng.gen();
                if i % 4 == 0 {
                    (v * 255.0).round() / 255.0
                } else {
                    v
                }
            });
            (pred, gt)
        })
        .collect()
}

#[test]
fn every_metric_matches_its_oracle_on_random_instances() {
    for (i, (pred, gt)) in instances().iter().enumerate() {
        let pairs = [
            ("mae", mae(pred, gt).unwrap(), oracle::mae(pred, gt)),
            ("f", mean_f_measure(pred, gt).unwrap().unwrap(), oracle::mean_f(pred, gt)),
            (
                "fw",
                weighted_f_measure(pred, gt).unwrap().unwrap(),
                oracle::weighted_f(pred, gt),
            ),
            ("s", s_measure(pred, gt).unwrap(), oracle::s_measure(pred, gt)),
            (
                "e",
                e_measure(pred, gt, EMeasureInput::AdaptiveBinary).unwrap(),
                oracle::e_measure(pred, gt),
            ),
            (
                "e_cont",
                e_measure(pred, gt, EMeasureInput::Continuous).unwrap(),
                oracle::e_measure_of(pred, gt),
            ),
        ];
        for (name, got, want) in pairs {
            assert!((got - want).abs() < TOL, "{name} on instance {i}: {got} vs {want}");
        }
        let curve = pr_curve(
            std::slice::from_ref(pred),
            std::slice::from_ref(gt),
            PrAccumulation::PerImage,
        )
        .unwrap();
        for (t, &(p, r)) in curve.points.iter().enumerate() {
            let (op, or) = oracle::pr_point(pred, gt, t);
            assert!((p - op).abs() < TOL && (r - or).abs() < TOL, "pr at {t} on {i}");
        }
    }
}

#[test]
fn perfect_prediction_scores() {
    for (_, gt) in instances().iter().take(20) {
        let pred = gt.mapv(|g| if g { 1.0 } else { 0.0 });
        assert_eq!(mae(&pred, gt).unwrap(), 0.0);
        assert_eq!(mean_f_measure(&pred, gt).unwrap(), Some(1.0));
        assert!((weighted_f_measure(&pred, gt).unwrap().unwrap() - 1.0).abs() < 1e-9);
        assert!((s_measure(&pred, gt).unwrap() - 1.0).abs() < 1e-6);
        assert!((e_measure(&pred, gt, EMeasureInput::AdaptiveBinary).unwrap() - 1.0).abs() < 1e-6);
    }
}

#[test]
fn four_by_four_mean_f_example() {
    // Four true pixels; 0.9 on three of them and 0.6 on one false pixel.
    let mut gt = Array2::from_elem((4, 4), false);
    let mut pred = Array2::zeros((4, 4));
    for (r, c) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
        gt[(r, c)] = true;
    }
    for (r, c) in [(1, 1), (1, 2), (2, 1)] {
        pred[(r, c)] = 0.9;
    }
    pred[(0, 0)] = 0.6;
    // Threshold 2 * 3.3 / 16 = 0.4125: the three 0.9 pixels and the 0.6 pixel survive.
    // P = 3/4, R = 3/4, so F = 1.3 * 0.5625 / (0.3 * 0.75 + 0.75) = 0.75.
    let f = mean_f_measure(&pred, &gt).unwrap().unwrap();
    assert_eq!(f, oracle::mean_f(&pred, &gt));
    assert!((f - 0.75).abs() < 1e-15);
}

#[test]
fn checker_e_measure_closed_form() {
    let gt = array![[true, false], [false, true]];
    let pred = array![[0.0, 1.0], [1.0, 0.0]];
    let xi = -0.5 / (0.5 + oracle::EPS);
    let phi: f64 = (xi + 1.0) * (xi + 1.0) / 4.0;
    let e = e_measure(&pred, &gt, EMeasureInput::AdaptiveBinary).unwrap();
    assert!((e - phi).abs() < 1e-300);
    assert_eq!(e, oracle::e_measure(&pred, &gt));
}

#[test]
fn permutation_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (pred, gt) in instances().iter().take(20) {
        let mut perm: Vec<usize> = (0..64).collect();
        for i in (1..64).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let p2 = Array2::from_shape_fn((8, 8), |(r, c)| {
            let k = perm[r * 8 + c];
            pred[(k / 8, k % 8)]
        });
        let g2 = Array2::from_shape_fn((8, 8), |(r, c)| {
            let k = perm[r * 8 + c];
            gt[(k / 8, k % 8)]
        });
        assert!((mae(pred, gt).unwrap() - mae(&p2, &g2).unwrap()).abs() < 1e-12);
        assert!(
            (mean_f_measure(pred, gt).unwrap().unwrap() - mean_f_measure(&p2, &g2).unwrap().unwrap())
                .abs()
                < 1e-12
        );
        let e = |p, g| e_measure(p, g, EMeasureInput::AdaptiveBinary).unwrap();
        assert!((e(pred, gt) - e(&p2, &g2)).abs() < 1e-12);
    }
}

#[test]
fn degrading_towards_half_is_monotone() {
    let (_, gt) = &instances()[5];
    let perfect = gt.mapv(|g| if g { 1.0 } else { 0.0 });
    let mut last: Option<(f64, f64, f64)> = None;
    let mut f_values = Vec::new();
    for step in 0..=10 {
        let a = step as f64 / 10.0;
        let pred = perfect.mapv(|v| v * (1.0 - a) + 0.5 * a);
        let now = (
            mean_f_measure(&pred, gt).unwrap().unwrap(),
            e_measure(&pred, gt, EMeasureInput::Continuous).unwrap(),
            mae(&pred, gt).unwrap(),
        );
        if let Some(prev) = last {
            assert!(now.2 > prev.2, "mae must increase at step {step}");
            assert!(now.1 < prev.1, "e-measure must decrease at step {step}");
            assert!(now.0 <= prev.0, "f-measure must not increase at step {step}");
        }
        f_values.push(now.0);
        last = Some(now);
    }
    // The adaptive binarization keeps the mask intact until the map is flat, so
    // F only drops at the end; it never rises on the way.
    assert_eq!(f_values[0], 1.0);
    assert_eq!(*f_values.last().unwrap(), 0.0);
}

#[test]
fn uniform_half_pr_steps_at_half() {
    let (_, gt) = &instances()[3];
    let pred = Array2::from_elem((8, 8), 0.5);
    let curve = pr_curve(std::slice::from_ref(&pred), std::slice::from_ref(gt), PrAccumulation::PerImage).unwrap();
    for (t, &(p, r)) in curve.points.iter().enumerate() {
        assert_eq!((p, r), oracle::pr_point(&pred, gt, t));
        let expected_recall = if (t as f64) / 255.0 < 0.5 { 1.0 } else { 0.0 };
        assert_eq!(r, expected_recall, "threshold {t}");
    }
    assert_eq!(curve.points[127].1, 1.0);
    assert_eq!(curve.points[128].1, 0.0);
}

#[test]
fn two_image_curve_is_mean_of_per_image_curves() {
    let inst = instances();
    let (p1, g1) = &inst[10];
    let (p2, g2) = &inst[11];
    let both = pr_curve(&[p1.clone(), p2.clone()], &[g1.clone(), g2.clone()], PrAccumulation::PerImage)
        .unwrap();
    for t in 0..256 {
        let a = oracle::pr_point(p1, g1, t);
        let b = oracle::pr_point(p2, g2, t);
        let (p, r) = both.points[t];
        assert!((p - (a.0 + b.0) / 2.0).abs() < 1e-12);
        assert!((r - (a.1 + b.1) / 2.0).abs() < 1e-12);
    }
}

#[test]
fn accumulator_matches_direct_averages() {
    let inst = instances();
    let mut acc = MetricAccumulator::default();
    for (p, g) in &inst[..10] {
        acc.add(p, g).unwrap();
    }
    let report = acc.finish().unwrap();
    let avg = |f: &dyn Fn(&Array2<f64>, &Array2<bool>) -> f64| {
        inst[..10].iter().map(|(p, g)| f(p, g)).sum::<f64>() / 10.0
    };
    assert!((report.mae - avg(&oracle::mae)).abs() < 1e-12);
    assert!((report.f_beta - avg(&oracle::mean_f)).abs() < 1e-12);
    assert!((report.f_beta_w - avg(&oracle::weighted_f)).abs() < 1e-9);
    assert!((report.s_measure - avg(&oracle::s_measure)).abs() < 1e-9);
    assert!((report.e_measure - avg(&oracle::e_measure)).abs() < 1e-12);
    let preds: Vec<_> = inst[..10].iter().map(|(p, _)| p.clone()).collect();
    let gts: Vec<_> = inst[..10].iter().map(|(_, g)| g.clone()).collect();
    let direct = pr_curve(&preds, &gts, PrAccumulation::PerImage).unwrap();
    assert_eq!(report.pr_curve.unwrap(), direct);
}

#[test]
fn pooled_pr_sums_counts() {
    let gt1 = array![[true, false]];
    let gt2 = array![[true, true]];
    let p1 = array![[0.9, 0.9]];
    let p2 = array![[0.9, 0.0]];
    let c = pr_curve(&[p1, p2], &[gt1, gt2], PrAccumulation::Pooled).unwrap();
    // At threshold 0: tp = 1 + 1, predicted = 2 + 1, positives = 1 + 2.
    assert_eq!(c.points[0], (2.0 / 3.0, 2.0 / 3.0));
}
