use proptest::prelude::*;
use twinreg_core::data::{gen_tf, split, standardize, Dataset, SplitSpec};
use twinreg_core::knn::{knn_predict, KnnIndex};
use twinreg_core::nn::{init_params, MlpParams, TrainConfig, HIDDEN};
use twinreg_core::pairing::{NnPairOptions, PairMode};
use twinreg_core::twin::{
    loop_violation, sym_diff, train_twin, Estimator, PredictOptions, TwinConfig, TwinModel,
};
use twinreg_core::{Matrix, Neighbors};

fn points(n: usize, d: usize, seed: u64) -> Matrix {
    let mut s = seed;
    let data = (0..n * d)
        .map(|_| {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 4.0 - 2.0
        })
        .collect();
    Matrix::from_vec(n, d, data).unwrap()
}

/// A network computing `h(a) - h(b)` with `h(v) = relu(v0) - relu(-v0) + 2 relu(v1)`.
fn difference_network() -> MlpParams {
    let mut p = MlpParams::zeros(4).unwrap();
    let taps = [(0, 0, 1.0), (1, 0, -1.0), (2, 1, 2.0)];
    for (unit, input, out_w) in taps {
        p.w1_mut()[unit * 4 + input] = 1.0;
        p.w1_mut()[(3 + unit) * 4 + 2 + input] = 1.0;
        if unit == 1 {
            p.w1_mut()[unit * 4 + input] = -1.0;
            p.w1_mut()[(3 + unit) * 4 + 2 + input] = -1.0;
        }
        p.w2_mut()[unit * HIDDEN + unit] = 1.0;
        p.w2_mut()[(3 + unit) * HIDDEN + 3 + unit] = 1.0;
        p.w3_mut()[unit] = out_w;
        p.w3_mut()[3 + unit] = -out_w;
    }
    p
}

fn h(v: &[f64]) -> f64 {
    v[0].max(0.0) - (-v[0]).max(0.0) + 2.0 * v[1].max(0.0)
}

#[test]
fn block_network_is_an_exact_difference() {
    let p = difference_network();
    let pts = points(50, 2, 3);
    for a in pts.iter_rows() {
        for b in pts.iter_rows().take(5) {
            let mut ab = a.to_vec();
            ab.extend_from_slice(b);
            assert!((p.forward(&ab).unwrap() - (h(a) - h(b))).abs() < 1e-12);
        }
    }
    assert!(loop_violation(&p, &pts, 500, 1).unwrap() < 1e-12);
}

#[test]
fn closure_difference_has_no_loop_violation() {
    let f = |a: &[f64], b: &[f64]| (a[0] * a[0] + a[1]) - (b[0] * b[0] + b[1]);
    assert!(loop_violation(&f, &points(30, 2, 9), 1000, 4).unwrap() < 1e-12);
}

#[test]
fn loop_violation_needs_three_points_and_triples() {
    let f = |_: &[f64], _: &[f64]| 0.0;
    assert!(loop_violation(&f, &points(2, 2, 1), 10, 0).is_err());
    assert!(loop_violation(&f, &points(5, 2, 1), 0, 0).is_err());
}

proptest! {
    #[test]
    fn symmetrized_difference_is_antisymmetric(
        a in prop::collection::vec(-3.0f64..3.0, 3),
        b in prop::collection::vec(-3.0f64..3.0, 3),
        seed in 0u64..50,
    ) {
        let p = init_params(6, seed).unwrap();
        let ab = sym_diff(&p, &a, &b).unwrap();
        let ba = sym_diff(&p, &b, &a).unwrap();
        prop_assert_eq!(ab, -ba);
        prop_assert_eq!(sym_diff(&p, &a, &a).unwrap(), 0.0);
    }
}

fn model(params: MlpParams, x: Matrix, y: Vec<f64>) -> TwinModel {
    TwinModel::from_parts(params, x, y, PairMode::AllPairs).unwrap()
}

#[test]
fn zero_network_reduces_to_knn() {
    let x = points(200, 2, 11);
    let y: Vec<f64> = x.iter_rows().map(|r| r[0] * 3.0 - r[1]).collect();
    let m = model(MlpParams::zeros(4).unwrap(), x.clone(), y.clone());
    let idx = KnnIndex::build(x).unwrap();
    let opts = PredictOptions::fast();
    for q in points(50, 2, 12).iter_rows() {
        for k in [
            Neighbors::Count(1),
            Neighbors::Count(3),
            Neighbors::Count(5),
            Neighbors::All,
        ] {
            let twin = m.predict_nn(q, k, &opts).unwrap().value;
            let knn = knn_predict(&idx, &y, q, k).unwrap();
            assert!((twin - knn).abs() <= 1e-12, "k={k}: {twin} vs {knn}");
        }
        let full = m.predict_full(q, &opts).unwrap().value;
        let everyone = m.predict_random_anchors(q, 1000, 5, &opts).unwrap().value;
        assert_eq!(full, everyone);
    }
}

#[test]
fn summation_matches_a_direct_loop() {
    let x = points(40, 3, 21);
    let y: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
    let m = model(init_params(6, 8).unwrap(), x.clone(), y.clone());
    let q = [0.3, -0.2, 1.1];
    let opts = PredictOptions::fast();
    let ids = m
        .anchor_index()
        .query(&q, Neighbors::Count(7), None)
        .unwrap();
    let mut sorted = ids.clone();
    sorted.sort_unstable();
    let mut total = 0.0;
    for &j in &sorted {
        total += sym_diff(m.params(), &q, x.row(j)).unwrap() + y[j];
    }
    let got = m.predict_nn(&q, Neighbors::Count(7), &opts).unwrap();
    assert_eq!(got.value, total / 7.0);
    assert_eq!(got.anchor_count, 7);

    let one_sided = PredictOptions {
        estimator: Estimator::OneSided,
        ..opts
    };
    let mut total = 0.0;
    for &j in &sorted {
        let mut qa = q.to_vec();
        qa.extend_from_slice(x.row(j));
        total += m.params().forward(&qa).unwrap() + y[j];
    }
    assert_eq!(
        m.predict_nn(&q, Neighbors::Count(7), &one_sided)
            .unwrap()
            .value,
        total / 7.0
    );
}

#[test]
fn all_neighbors_and_all_random_anchors_equal_full_ensemble() {
    let x = points(60, 2, 5);
    let y: Vec<f64> = x.iter_rows().map(|r| r[0] - r[1] * r[1]).collect();
    let m = model(init_params(4, 3).unwrap(), x, y);
    let opts = PredictOptions::default();
    for q in points(20, 2, 6).iter_rows() {
        let full = m.predict_full(q, &opts).unwrap();
        assert_eq!(m.predict_nn(q, Neighbors::All, &opts).unwrap(), full);
        assert_eq!(m.predict_random_anchors(q, 60, 77, &opts).unwrap(), full);
        assert!(full.loop_violation.unwrap() >= 0.0);
    }
}

#[test]
fn random_anchors_with_zero_network_average_the_drawn_targets() {
    let x = points(30, 2, 2);
    let y: Vec<f64> = (0..30).map(|i| i as f64).collect();
    let m = model(MlpParams::zeros(4).unwrap(), x, y);
    let opts = PredictOptions::fast();
    let r = m.predict_random_anchors(&[0.0, 0.0], 5, 3, &opts).unwrap();
    assert_eq!(r.anchor_count, 5);
    assert_eq!((r.value * 5.0).fract(), 0.0);
    assert_eq!(
        r,
        m.predict_random_anchors(&[0.0, 0.0], 5, 3, &opts).unwrap()
    );
    assert!(m.predict_random_anchors(&[0.0, 0.0], 0, 3, &opts).is_err());
}

#[test]
fn non_finite_queries_are_rejected() {
    let m = model(MlpParams::zeros(4).unwrap(), points(5, 2, 1), vec![0.0; 5]);
    assert!(m
        .predict_full(&[f64::NAN, 0.0], &PredictOptions::fast())
        .is_err());
    assert!(m.predict_full(&[0.0], &PredictOptions::fast()).is_err());
}

fn tiny_config(mode: PairMode, seed: u64) -> TwinConfig {
    let mut train = TrainConfig::twin().with_seed(seed);
    train.max_epochs = 40;
    train.samples_per_epoch = Some(512);
    TwinConfig {
        train,
        pair_mode: mode,
        val_pair_limit: Some(400),
    }
}

fn constant(n: usize, c: f64) -> Dataset {
    let d = gen_tf(n, 4).unwrap();
    Dataset { y: vec![c; n], ..d }
}

#[test]
fn constant_target_gives_constant_predictions() {
    let ds = constant(120, -2.5);
    let (tr, va, te) = split(&ds, &SplitSpec::new(1)).unwrap();
    let (tr, va, te, _) = standardize(&tr, &va, &te).unwrap();
    let (m, _) = train_twin(&tr, &va, &tiny_config(PairMode::AllPairs, 3)).unwrap();
    for q in te.x.iter_rows() {
        let v = m.predict_full(q, &PredictOptions::fast()).unwrap().value;
        assert!((v + 2.5).abs() < 1e-2, "{v}");
    }
}

#[test]
fn training_is_deterministic() {
    let ds = gen_tf(80, 2).unwrap();
    let (tr, va, _) = split(&ds, &SplitSpec::new(0)).unwrap();
    let mode = PairMode::NearestNeighbors(NnPairOptions::new(Neighbors::Count(4)));
    let (a, ha) = train_twin(&tr, &va, &tiny_config(mode, 9)).unwrap();
    let (b, hb) = train_twin(&tr, &va, &tiny_config(mode, 9)).unwrap();
    assert_eq!(a.params(), b.params());
    assert_eq!(ha.val_loss, hb.val_loss);
    let (c, _) = train_twin(&tr, &va, &tiny_config(mode, 10)).unwrap();
    assert_ne!(a.params(), c.params());
}

#[test]
fn training_needs_two_rows_and_a_validation_set() {
    let ds = gen_tf(20, 1).unwrap();
    let one = ds.subset(&[0]);
    let empty = ds.subset(&[]);
    let cfg = tiny_config(PairMode::AllPairs, 0);
    assert!(train_twin(&one, &ds, &cfg).is_err());
    assert!(train_twin(&ds, &empty, &cfg).is_err());
}
