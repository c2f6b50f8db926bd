use proptest::prelude::*;
use twinreg_core::knn::{knn_predict, squared_distance, KnnIndex};
use twinreg_core::{Matrix, Neighbors};

fn brute(points: &Matrix, x: &[f64], k: usize, exclude: Option<usize>) -> Vec<usize> {
    let mut all: Vec<(f64, usize)> = (0..points.rows())
        .filter(|&i| Some(i) != exclude)
        .map(|i| (squared_distance(points.row(i), x), i))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    all.into_iter().take(k).map(|(_, i)| i).collect()
}

/// Points on a coarse grid so that distance ties are common.
fn grid_points(max_rows: usize, dim: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(prop::collection::vec(-3i32..=3, dim), 1..max_rows).prop_map(|rows| {
        let rows: Vec<Vec<f64>> = rows
            .into_iter()
            .map(|r| r.into_iter().map(f64::from).collect())
            .collect();
        let n = rows.len();
        let d = rows[0].len();
        Matrix::from_vec(n, d, rows.concat()).unwrap()
    })
}

fn neighbors() -> impl Strategy<Value = Neighbors> {
    prop_oneof![
        (1usize..40).prop_map(Neighbors::Count),
        Just(Neighbors::All)
    ]
}

proptest! {
    #[test]
    fn query_matches_sorted_scan(
        points in grid_points(60, 2),
        q in prop::collection::vec(-4i32..=4, 2),
        k in neighbors(),
    ) {
        let x: Vec<f64> = q.into_iter().map(f64::from).collect();
        let idx = KnnIndex::build(points.clone()).unwrap();
        let got = idx.query(&x, k, None).unwrap();
        prop_assert_eq!(&got, &brute(&points, &x, k.clip(points.rows()), None));
        let y: Vec<f64> = (0..points.rows()).map(|i| (i as f64).sin()).collect();
        let mean = got.iter().map(|&i| y[i]).sum::<f64>() / got.len() as f64;
        prop_assert_eq!(knn_predict(&idx, &y, &x, k).unwrap(), mean);
    }

    #[test]
    fn exclusion_removes_exactly_one_row(
        points in grid_points(40, 3),
        k in neighbors(),
        pick in any::<prop::sample::Index>(),
    ) {
        let idx = KnnIndex::build(points.clone()).unwrap();
        let j = pick.index(points.rows());
        let got = idx.query(points.row(j), k, Some(j)).unwrap();
        prop_assert!(!got.contains(&j));
        prop_assert_eq!(got.len(), k.clip(points.rows() - 1));
        prop_assert_eq!(got, brute(&points, points.row(j), k.clip(points.rows()), Some(j)));
    }

    #[test]
    fn continuous_points_match_scan(
        raw in prop::collection::vec(-10.0f64..10.0, 5 * 120),
        q in prop::collection::vec(-12.0f64..12.0, 5),
        k in 1usize..30,
    ) {
        let points = Matrix::from_vec(120, 5, raw).unwrap();
        let idx = KnnIndex::build(points.clone()).unwrap();
        let got = idx.query_with_distances(&q, Neighbors::Count(k), None).unwrap();
        let expect = brute(&points, &q, k, None);
        prop_assert_eq!(got.iter().map(|p| p.0).collect::<Vec<_>>(), expect);
        prop_assert!(got.windows(2).all(|w| w[0].1 <= w[1].1));
    }
}

#[test]
fn k_beyond_size_is_clipped() {
    let points = Matrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
    let idx = KnnIndex::build(points).unwrap();
    assert_eq!(
        idx.query(&[1.6], Neighbors::Count(10), None).unwrap(),
        vec![2, 1, 0]
    );
    assert_eq!(
        idx.query(&[1.6], Neighbors::All, Some(2)).unwrap(),
        vec![1, 0]
    );
    assert!(idx.query(&[1.6], Neighbors::Count(0), None).is_err());
    assert!(idx.query(&[1.6, 0.0], Neighbors::All, None).is_err());
    assert!(idx.query(&[1.6], Neighbors::All, Some(3)).is_err());
}

#[test]
fn equidistant_points_prefer_lower_ids() {
    let points = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]]).unwrap();
    let idx = KnnIndex::build(points).unwrap();
    assert_eq!(
        idx.query(&[0.0, 0.0], Neighbors::Count(2), None).unwrap(),
        vec![0, 1]
    );
}
