use monogp::experiments::*;

#[test]
fn quantiles() {
    let v = [3.0, 1.0, 2.0, 4.0, f64::NAN];
    assert_eq!(quantile(&v, 0.5), Some(2.5));
    assert_eq!(quantile(&v, 0.0), Some(1.0));
    assert_eq!(quantile(&v, 1.0), Some(4.0));
    assert_eq!(quantile(&[], 0.5), None);
    let s = summarize(&[5.0]).unwrap();
    assert_eq!((s.median, s.q05, s.q95, s.count), (5.0, 5.0, 5.0, 1));
}

#[test]
fn seeds_differ_across_reps_and_roles() {
    let (a, b) = repetition_seeds(1, 0, 0);
    let (c, _) = repetition_seeds(1, 0, 1);
    assert!(a != b && a != c);
}
