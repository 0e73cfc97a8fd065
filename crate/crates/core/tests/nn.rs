mod common;

use std::fs;
use std::path::Path;

use fedcross_core::nn::*;
use fedcross_core::Error;
use proptest::prelude::*;

#[test]
fn backprop_matches_finite_differences() {
    let mut r = common::rng(7);
    let specs = [
        ModelSpec { input_dim: 2, hidden: vec![8], classes: 2, norm_positions: vec![0] },
        ModelSpec { input_dim: 3, hidden: vec![5, 4], classes: 2, norm_positions: vec![0, 2] },
    ];
    let mut worst = 0.0f64;
    for draw in 0..20 {
        let spec = &specs[draw % 2];
        let params = common::random_params(&mut r, spec);
        let batch = common::random_batch(&mut r, spec.input_dim, 1, 4);
        let anchor = common::random_params(&mut r, spec);
        let prox = (draw % 3 == 0).then_some(Prox { mu: 0.3, anchor: &anchor });
        let (_, g) = loss_and_grad(spec, &params, &batch, prox).unwrap();
        let fd = finite_diff_grad(spec, &params, &batch, 1e-5, prox).unwrap();
        worst = worst.max(max_relative_error(&g, &fd, 1e-6).unwrap());
    }
    assert!(worst < 1e-4, "max relative error {worst:e}");
}

#[test]
fn golden_forward_output() {
    let spec = ModelSpec::reference(10);
    let params = spec.init_params(42).unwrap();
    let mut r = common::rng(42);
    let batch = common::random_batch(&mut r, 10, 2, 6);
    let probs = forward(&spec, &params, &batch).unwrap();
    let text: String = probs.values.iter().map(|v| format!("{v}\n")).collect();
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/forward_seed42.txt");
    if !path.exists() {
        fs::write(&path, &text).unwrap();
    }
    let golden = fs::read_to_string(&path).unwrap();
    assert_eq!(golden, text);
}

#[test]
fn loss_and_grad_rejects_empty_batch_and_bad_anchor() {
    let spec = ModelSpec { input_dim: 2, hidden: vec![3], classes: 2, norm_positions: vec![0] };
    let params = spec.init_params(1).unwrap();
    let empty = Batch::new(0, 4, 2, vec![], vec![]).unwrap();
    assert!(matches!(loss_and_grad(&spec, &params, &empty, None), Err(Error::Input(_))));
    let other = ParameterVector::from_flat(vec![0.0; 3]).unwrap();
    let batch = common::random_batch(&mut common::rng(1), 2, 1, 4);
    assert!(loss_and_grad(&spec, &params, &batch, Some(Prox { mu: 1.0, anchor: &other })).is_err());
}

#[test]
fn poly_lr_examples() {
    let s = LrSchedule::new(0.01, 1000, 0.9);
    assert_eq!(poly_lr(0, &s).unwrap(), 0.01);
    assert_eq!(poly_lr(1000, &s).unwrap(), 0.0);
    // 0.5^0.9 = 0.535886731268146582... (50-digit arithmetic)
    assert!((poly_lr(500, &s).unwrap() - 0.01 * 0.535_886_731_268_146_6).abs() < 1e-17);
    assert!(matches!(poly_lr(1001, &s), Err(Error::Input(_))));
}

#[test]
fn sgd_step_examples() {
    let p = ParameterVector::from_flat(vec![1.0]).unwrap();
    let g = ParameterVector::from_flat(vec![2.0]).unwrap();
    assert!((sgd_step(&p, &g, 0.1).unwrap().values()[0] - 0.8).abs() < 1e-15);
    assert_eq!(sgd_step(&p, &g, 0.0).unwrap(), p);
    let bad = ParameterVector::zeros(p.layout().clone());
    let mut v = bad.clone().into_values();
    v[0] = f64::NAN;
    assert!(bad.with_values(v).is_err());
}

#[test]
fn training_is_deterministic() {
    let spec = ModelSpec { input_dim: 2, hidden: vec![4], classes: 2, norm_positions: vec![0] };
    let batch = common::random_batch(&mut common::rng(3), 2, 2, 5);
    let run = || {
        let mut p = spec.init_params(5).unwrap();
        for _ in 0..10 {
            let (_, g) = loss_and_grad(&spec, &p, &batch, None).unwrap();
            p = sgd_step(&p, &g, 0.1).unwrap();
        }
        p
    };
    let (a, b) = (run(), run());
    assert!(a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
}

/// 2-class model whose logits equal its two inputs.
fn identity_logits() -> (ModelSpec, ParameterVector) {
    let spec = ModelSpec { input_dim: 2, hidden: vec![], classes: 2, norm_positions: vec![0] };
    let base = spec.init_params(0).unwrap();
    let mut v = vec![0.0; base.len()];
    let l = base.layout().clone();
    v[l.slot("norm0.scale").unwrap().range()].copy_from_slice(&[1.0, 1.0]);
    v[l.slot("dense0.weight").unwrap().range()].copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
    (spec, base.with_values(v).unwrap())
}

proptest! {
    #[test]
    fn softmax_rows_normalized(l0 in -50.0f64..50.0, l1 in -50.0f64..50.0) {
        let (spec, params) = identity_logits();
        let batch = Batch::new(1, 1, 2, vec![l0, l1], vec![0]).unwrap();
        let p = forward(&spec, &params, &batch).unwrap();
        prop_assert!((p.row(0).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(p.row(0).iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn sgd_linear_in_grad_and_lr(
        p in prop::collection::vec(-10.0f64..10.0, 5),
        g1 in prop::collection::vec(-10.0f64..10.0, 5),
        g2 in prop::collection::vec(-10.0f64..10.0, 5),
        lr in 0.0f64..1.0,
    ) {
        let pv = |v: &Vec<f64>| ParameterVector::from_flat(v.clone()).unwrap();
        let two = sgd_step(&sgd_step(&pv(&p), &pv(&g1), lr).unwrap(), &pv(&g2), lr).unwrap();
        let sum = pv(&g1).axpy(1.0, &pv(&g2)).unwrap();
        let one = sgd_step(&pv(&p), &sum, lr).unwrap();
        prop_assert!(two.max_abs_diff(&one).unwrap() < 1e-12);
        let half = sgd_step(&pv(&p), &pv(&g1), lr / 2.0).unwrap();
        let scaled = sgd_step(&pv(&p), &pv(&g1).scale(0.5).unwrap(), lr).unwrap();
        prop_assert!(half.max_abs_diff(&scaled).unwrap() < 1e-12);
    }
}
