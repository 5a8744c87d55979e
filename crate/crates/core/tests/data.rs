use monogp::*;
use nalgebra::{DMatrix, DVector};

fn sample_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
}
use monogp::data::*;
use proptest::prelude::*;

#[test]
fn parses_families() {
    assert_eq!(SyntheticFamily::parse("linear:-1").unwrap(), SyntheticFamily::Linear { a: -1.0 });
    assert_eq!(SyntheticFamily::parse("sigmoid:2").unwrap(), SyntheticFamily::Sigmoid { a: 2.0 });
    assert!(SyntheticFamily::parse("sigmoid:0").is_err());
    assert!(SyntheticFamily::parse("cubic:1").is_err());
    assert!(SyntheticFamily::parse("linear").is_err());
}

#[test]
fn zero_function_is_unit_noise() {
    let d = generate(&SyntheticSpec {
        family: SyntheticFamily::Linear { a: 0.0 },
        n: 2000,
        snr: 0.5,
        seed: 3,
    })
    .unwrap();
    assert_eq!(d.truth, 0);
    assert_eq!(d.noise_variance, 1.0);
    let v = sample_variance(d.y_raw.as_slice());
    assert!((v - 1.0).abs() < 0.1, "{v}");
}

#[test]
fn realized_signal_fraction() {
    for (n, tol) in [(1000, 0.02), (10_000, 0.02)] {
        let spec = SyntheticSpec {
            family: SyntheticFamily::Linear { a: 1.0 },
            n,
            snr: 0.9,
            seed: 11,
        };
        let d = generate(&spec).unwrap();
        let f: Vec<f64> = d.x_raw.iter().map(|&x| x).collect();
        let ratio = sample_variance(&f) / sample_variance(d.y_raw.as_slice());
        assert!((ratio - 0.9).abs() < tol, "n={n}: {ratio}");
    }
}

#[test]
fn generation_is_deterministic() {
    let spec = SyntheticSpec {
        family: SyntheticFamily::Sigmoid { a: 1.0 },
        n: 30,
        snr: 0.7,
        seed: 42,
    };
    let a = generate(&spec).unwrap();
    let b = generate(&spec).unwrap();
    assert_eq!(a.y_raw, b.y_raw);
    assert_eq!(a.x, b.x);
    assert!(generate(&SyntheticSpec { family: SyntheticFamily::Sigmoid { a: -1.0 }, ..spec.clone() }).is_err());
    assert!(generate(&SyntheticSpec { snr: 1.0, ..spec }).is_err());
}

#[test]
fn normalizes_simple_column() {
    let x = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
    let y = DVector::from_vec(vec![1.0, 0.0, 4.0]);
    let (xn, _, info) = normalize(&x, &y).unwrap();
    let s = (2.0f64 / 3.0).sqrt();
    assert!((xn[(0, 0)] + 1.0 / s).abs() < 1e-12);
    assert!(xn.column(0).mean().abs() < 1e-12);
    assert_eq!(info.x_mean, vec![2.0]);
}

#[test]
fn constant_column_is_rejected() {
    let x = DMatrix::from_row_slice(3, 2, &[1.0, 5.0, 2.0, 5.0, 3.0, 5.0]);
    let y = DVector::from_vec(vec![1.0, 0.0, 4.0]);
    match normalize(&x, &y) {
        Err(Error::InvalidArgument(m)) => assert!(m.contains("column 1"), "{m}"),
        other => panic!("{other:?}"),
    }
}

proptest! {
    #[test]
    fn normalize_roundtrip(vals in prop::collection::vec(-50.0f64..50.0, 12..40)) {
        let n = vals.len() / 3;
        let x = DMatrix::from_column_slice(n, 2, &vals[..2 * n]);
        let y = DVector::from_column_slice(&vals[2 * n..3 * n]);
        prop_assume!(normalize(&x, &y).is_ok());
        let (xn, yn, info) = normalize(&x, &y).unwrap();
        for col in xn.column_iter() {
            prop_assert!(col.mean().abs() < 1e-12);
            prop_assert!((col.variance().sqrt() - 1.0).abs() < 1e-12);
        }
        let xb = info.denormalize_x(&xn).unwrap();
        let yb = info.denormalize_y(&yn);
        prop_assert!((xb - &x).amax() < 1e-12 * (1.0 + x.amax()));
        prop_assert!((yb - &y).amax() < 1e-12 * (1.0 + y.amax()));
    }

    #[test]
    fn edge_and_rest_partition(vals in prop::collection::vec(-5.0f64..5.0, 5..60), frac in 0.05f64..0.95) {
        let x = DMatrix::from_column_slice(vals.len(), 1, &vals);
        let idx = edge_indices(&x, frac).unwrap();
        let l = vals.len();
        prop_assert_eq!(idx.len(), ((frac * l as f64) - 1e-9).ceil() as usize);
        let mean = x.mean();
        let min_edge = idx.iter().map(|&i| (vals[i] - mean).abs()).fold(f64::INFINITY, f64::min);
        for i in (0..l).filter(|i| !idx.contains(i)) {
            prop_assert!((vals[i] - mean).abs() <= min_edge + 1e-12);
        }
    }
}

#[test]
fn single_point_lppd_zero() {
    let v = 1.0 / (2.0 * std::f64::consts::PI);
    let p = PredictiveDistribution::new(DVector::from_vec(vec![0.3]), DMatrix::from_element(1, 1, v / 2.0));
    let l = lppd(&p, v / 2.0, &DVector::from_vec(vec![0.3])).unwrap();
    assert!(l.abs() < 1e-14);
}

#[test]
fn lppd_properties() {
    let y = DVector::from_vec(vec![0.5, -1.0, 2.0]);
    let tight = PredictiveDistribution::new(y.clone(), DMatrix::from_diagonal_element(3, 3, 0.01));
    let wide = PredictiveDistribution::new(y.clone(), DMatrix::from_diagonal_element(3, 3, 0.5));
    assert!(lppd(&tight, 0.01, &y).unwrap() > lppd(&wide, 0.01, &y).unwrap());
    let mut cov = DMatrix::from_diagonal(&DVector::from_vec(vec![0.2, 0.3, 0.4]));
    cov[(0, 1)] = 0.1;
    cov[(1, 0)] = 0.1;
    let mean = DVector::from_vec(vec![0.0, -0.5, 1.0]);
    let full = lppd(&PredictiveDistribution::new(mean.clone(), cov.clone()), 0.1, &y).unwrap();
    let parts: f64 = (0..3)
        .map(|i| {
            let p = PredictiveDistribution::new(DVector::from_element(1, mean[i]), DMatrix::from_element(1, 1, cov[(i, i)]));
            lppd(&p, 0.1, &DVector::from_element(1, y[i])).unwrap()
        })
        .sum();
    assert!((full - parts).abs() < 1e-12);
    let bad = PredictiveDistribution { mean: DVector::zeros(1), covariance: DMatrix::from_element(1, 1, -1.0) };
    assert!(lppd(&bad, 0.5, &DVector::zeros(1)).is_err());
}

#[test]
fn edge_examples() {
    let x = DMatrix::from_column_slice(5, 1, &[-3.0, -1.0, 0.0, 1.0, 3.0]);
    let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0, 5.0]);
    let (xe, ye) = edge_subset(&x, &y, 0.4).unwrap();
    assert_eq!(xe.as_slice(), &[-3.0, 3.0]);
    assert_eq!(ye.as_slice(), &[1.0, 5.0]);
    let x30 = DMatrix::from_fn(30, 1, |i, _| i as f64);
    assert_eq!(edge_indices(&x30, 0.2).unwrap().len(), 6);
    assert!(edge_indices(&x30, 1.0).is_err());
}

#[test]
fn parses_tables() {
    let d = parse_table("a,b\n1,2\n3,4\n5,6\n", "t", &TargetColumn::Name("b".into()), true).unwrap();
    assert_eq!((d.x.nrows(), d.x.ncols()), (3, 1));
    assert_eq!(d.y.as_slice(), &[2.0, 4.0, 6.0]);
    let d = parse_table("1 2 3\n4\t5 6\n", "t", &TargetColumn::Index(0), false).unwrap();
    assert_eq!(d.y.as_slice(), &[1.0, 4.0]);
    assert_eq!(d.column_names, vec!["x1", "x2"]);
    match parse_table("a,b\n1,2\n3,\n", "t", &TargetColumn::Last, true) {
        Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (3, 2)),
        other => panic!("{other:?}"),
    }
    match parse_table("a,b\n1,2\n3\n", "t", &TargetColumn::Last, true) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    assert!(parse_table("a,b\n1,x\n", "t", &TargetColumn::Last, true).is_err());
}

#[test]
fn csv_roundtrip() {
    let x = DMatrix::from_row_slice(2, 2, &[0.5, -1.25, 3.0, 1e-3]);
    let y = DVector::from_vec(vec![0.1, 7.0]);
    let text = to_csv(&x, &y, &["u".into(), "v".into()], "y");
    let d = parse_table(&text, "t", &TargetColumn::Name("y".into()), true).unwrap();
    assert_eq!(d.x, x);
    assert_eq!(d.y, y);
}
