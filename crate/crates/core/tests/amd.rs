use nalgebra::DMatrix;
use monogp::amd::*;

fn column(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_column_slice(v.len(), 1, v)
}

#[test]
fn grid_placement() {
    let x = column(&[0.5, -2.0, 2.0, 1.0]);
    let v = place_virtual_points(&x, 0, 5, Placement::Grid1D, 0, 1e-6).unwrap();
    assert_eq!(v.locations.as_slice(), &[-2.0, -1.0, 0.0, 1.0, 2.0]);
    assert!(v.signs.iter().all(|&s| s == 1.0));
    let x2 = DMatrix::zeros(4, 2);
    assert!(place_virtual_points(&x2, 0, 3, Placement::Grid1D, 0, 1e-6).is_err());
}

#[test]
fn random_placements() {
    let x = DMatrix::from_fn(6, 2, |i, j| (i * (j + 1)) as f64);
    let a = place_virtual_points(&x, 1, 4, Placement::UniformRandom, 9, 1e-6).unwrap();
    let b = place_virtual_points(&x, 1, 4, Placement::UniformRandom, 9, 1e-6).unwrap();
    assert_eq!(a, b);
    assert!(a.dims.iter().all(|&d| d == 1));
    for r in 0..4 {
        assert!((0.0..=5.0).contains(&a.locations[(r, 0)]));
        assert!((0.0..=10.0).contains(&a.locations[(r, 1)]));
    }
    let s = place_virtual_points(&x, 0, 6, Placement::SubsampleTraining, 3, 1e-6).unwrap();
    let mut rows: Vec<f64> = s.locations.column(1).iter().copied().collect();
    rows.sort_by(f64::total_cmp);
    assert_eq!(rows, vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
    assert!(place_virtual_points(&x, 0, 7, Placement::SubsampleTraining, 3, 1e-6).is_err());
}

#[test]
fn m_count_rules() {
    assert_eq!(MCount::default().resolve(30).unwrap(), 10);
    assert_eq!(MCount::default().resolve(442).unwrap(), 147);
    assert_eq!(MCount::FractionCeil(1.0 / 3.0).resolve(442).unwrap(), 148);
    assert_eq!(MCount::FractionCeil(1.0 / 3.0).resolve(30).unwrap(), 10);
    assert_eq!(MCount::default().resolve(1).unwrap(), 1);
    assert!(MCount::Fixed(0).resolve(5).is_err());
}

#[test]
fn decision_rule() {
    // accept at -10, reject at -5
    assert_eq!(decide(Some(-11.0), Some(0.0), -10.0, -5.0), 1);
    assert_eq!(decide(Some(0.0), Some(-10.0), -10.0, -5.0), -1);
    assert_eq!(decide(Some(-11.0), Some(-6.0), -10.0, -5.0), 0);
    assert_eq!(decide(Some(-11.0), None, -10.0, -5.0), 0);
    let coefficients = |p1, p2| AmdConfig { p1, p2, ..AmdConfig::default() }.validate();
    assert!(coefficients(0.5, 0.5).is_err());
    assert!(coefficients(1.1, 0.5).is_err());
    assert!(coefficients(-3.0, -4.0).is_ok());
}
