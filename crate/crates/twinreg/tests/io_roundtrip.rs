use proptest::prelude::*;
use twinreg::core::data::{gen_tf, split, standardize, SplitSpec};
use twinreg::core::nn::init_params;
use twinreg::core::pairing::{NnPairOptions, PairMode};
use twinreg::core::twin::{PredictOptions, TwinModel};
use twinreg::core::{Matrix, Neighbors};
use twinreg::dataset_io::{load_csv, write_csv};
use twinreg::model_io;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn csv_round_trip_is_bit_exact(
        n in 1usize..20,
        d in 1usize..5,
        seed in any::<u64>(),
    ) {
        let ds = gen_tf(n * d, seed).unwrap();
        let values: Vec<f64> = ds.x.as_slice()[..n * d].iter().map(|v| v * 1e-7 + v.exp()).collect();
        let x = Matrix::from_vec(n, d, values).unwrap();
        let orig = twinreg::core::data::Dataset::new(
            "t",
            x,
            ds.y[..n].to_vec(),
            (0..d).map(|i| format!("f{i}")).collect(),
            vec![twinreg::core::data::FeatureKind::Continuous; d],
        ).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_csv(&orig, &path).unwrap();
        let back = load_csv(&path, None).unwrap();
        prop_assert_eq!(back.x, orig.x);
        prop_assert_eq!(back.y, orig.y);
        prop_assert_eq!(back.feature_names, orig.feature_names);
    }

    #[test]
    fn saved_models_predict_identically(seed in any::<u64>(), k in 1usize..6) {
        let ds = gen_tf(40, seed).unwrap();
        let (tr, va, te) = split(&ds, &SplitSpec::new(seed)).unwrap();
        let (tr, _, te, stats) = standardize(&tr, &va, &te).unwrap();
        let mode = PairMode::NearestNeighbors(NnPairOptions::new(Neighbors::Count(k)));
        let model = TwinModel::from_parts(init_params(4, seed).unwrap(), tr.x.clone(), tr.y.clone(), mode).unwrap();
        let back = model_io::decode(&model_io::encode(&model, &stats)).unwrap();
        prop_assert_eq!(back.stats, stats);
        prop_assert_eq!(back.model.train_mode(), mode);
        let opts = PredictOptions::default();
        for q in te.x.iter_rows() {
            prop_assert_eq!(
                model.predict_nn(q, Neighbors::Count(k), &opts).unwrap(),
                back.model.predict_nn(q, Neighbors::Count(k), &opts).unwrap()
            );
        }
    }
}
