use twinreg_core::data::{
    gen_rcl, gen_rcl_with, gen_tf, gen_wsb, gen_wsb_with, RclRanges, WsbFormula, WsbRanges,
};

#[test]
fn tf_targets_follow_the_polynomial() {
    let ds = gen_tf(1000, 17).unwrap();
    assert_eq!(ds.dim(), 2);
    for (r, &y) in ds.x.iter_rows().zip(&ds.y) {
        let (a, b) = (r[0], r[1]);
        assert_eq!(y, a * a * a + a * a - a - 1.0 + a * b + libm::sin(b));
        assert!((-2.0..=2.0).contains(&a) && (-2.0..=2.0).contains(&b));
    }
}

#[test]
fn rcl_targets_follow_the_circuit() {
    let ds = gen_rcl(1000, 3, 0.0).unwrap();
    assert_eq!(ds.dim(), 6);
    for (r, &y) in ds.x.iter_rows().zip(&ds.y) {
        let [v0, w, t, res, l, c] = [r[0], r[1], r[2], r[3], r[4], r[5]];
        let x = w * l - 1.0 / (w * c);
        assert_eq!(y, v0 * libm::cos(w * t) / (res * res + x * x).sqrt());
    }
}

#[test]
fn wsb_targets_follow_the_bridge() {
    let printed = gen_wsb(1000, 5, 0.0).unwrap();
    let fixed = gen_wsb_with(1000, 5, 0.0, &WsbRanges::default(), WsbFormula::Corrected).unwrap();
    assert_eq!(printed.x, fixed.x);
    for ((r, &y), &z) in printed.x.iter_rows().zip(&printed.y).zip(&fixed.y) {
        let [u, r1, r2, r3] = [r[0], r[1], r[2], r[3]];
        assert_eq!(y, u * (r2 / (r1 + r2) - r3 / (r2 + r3)));
        assert_eq!(z, u * (r2 / (r1 + r2) - r3 / (r1 + r3)));
    }
}

#[test]
fn noise_leaves_features_alone() {
    let clean = gen_rcl(300, 8, 0.0).unwrap();
    let noisy = gen_rcl(300, 8, 0.1).unwrap();
    assert_eq!(clean.x, noisy.x);
    let resid: Vec<f64> = noisy.y.iter().zip(&clean.y).map(|(a, b)| a - b).collect();
    let mean = resid.iter().sum::<f64>() / 300.0;
    let sd = (resid.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / 299.0).sqrt();
    assert!(mean.abs() < 0.03 && (sd - 0.1).abs() < 0.02, "{mean} {sd}");
}

#[test]
fn bad_ranges_are_rejected() {
    let mut r = RclRanges::default();
    r.c.lo = 0.0;
    assert!(gen_rcl_with(10, 0, 0.0, &r).is_err());
    assert!(gen_tf(0, 0).is_err());
    assert!(gen_wsb(10, 0, -1.0).is_err());
}
