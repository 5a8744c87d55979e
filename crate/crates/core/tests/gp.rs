use monogp::*;
use monogp::stats::LN_2PI;
use nalgebra::{DMatrix, DVector};
use monogp::gp::*;
use monogp::ep::VirtualDerivativeSet;

fn se(sv: f64, l: f64) -> KernelSpec {
    KernelSpec::squared_exponential(sv, vec![l]).unwrap()
}

#[test]
fn joint_covariance_without_virtual_points_is_kff() {
    let x = DMatrix::from_column_slice(3, 1, &[0.0, 0.5, 2.0]);
    let j = build_joint_covariance(&se(1.0, 1.0), &x, &VirtualDerivativeSet::empty(1), 0.0).unwrap();
    assert_eq!(j.assembled, j.k_ff);
}

#[test]
fn joint_covariance_single_point_and_derivative() {
    let x = DMatrix::from_column_slice(1, 1, &[0.0]);
    let virt = VirtualDerivativeSet::new(DMatrix::from_column_slice(1, 1, &[0.0]), vec![0], vec![1.0], 1e-6).unwrap();
    let j = build_joint_covariance(&se(1.0, 1.0), &x, &virt, 0.0).unwrap();
    assert_eq!(j.assembled, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]));
}

#[test]
fn joint_covariance_is_symmetric() {
    let k = KernelSpec::se_linear(1.3, vec![0.7, 1.5], vec![0.2, 0.4]).unwrap();
    let x = DMatrix::from_row_slice(5, 2, &[0.1, 0.2, -1.0, 0.3, 0.8, -0.7, 1.4, 1.1, -0.2, -1.5]);
    let virt = VirtualDerivativeSet::new(
        DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 0.5, -0.5, -1.0, 1.0]),
        vec![0, 1, 0],
        vec![1.0, -1.0, 1.0],
        1e-6,
    )
    .unwrap();
    let j = build_joint_covariance(&k, &x, &virt, 1e-10).unwrap();
    let a = &j.assembled;
    assert!((a - a.transpose()).amax() < 1e-15);
    // block layout
    assert_eq!(a[(0, 5)], j.k_fd[(0, 0)]);
    assert_eq!(a[(6, 7)], j.k_dd[(1, 2)]);
}

#[test]
fn scalar_marginal_likelihood() {
    let model = GpModel::new(se(1.0, 1.0), 1.0).unwrap();
    let x = DMatrix::from_column_slice(1, 1, &[0.0]);
    let y = DVector::from_vec(vec![0.0]);
    let v = model.log_marginal_likelihood(&x, &y).unwrap();
    let expected = -0.5 * (2.0 * std::f64::consts::PI * 2.0).ln();
    assert!((v - expected).abs() < 1e-14);
    assert!((v + 1.2655).abs() < 1e-4);
}

#[test]
fn two_point_marginal_likelihood_against_explicit_inverse() {
    let model = GpModel::new(se(1.4, 0.8), 0.3).unwrap();
    let x = DMatrix::from_column_slice(2, 1, &[-0.4, 0.5]);
    let y = DVector::from_vec(vec![0.7, -0.2]);
    let k01 = 1.4 * (-0.5 * (0.9f64 / 0.8).powi(2)).exp();
    let (a, b, d) = (1.4 + 0.3, k01, 1.4 + 0.3);
    let det = a * d - b * b;
    let quad = (d * 0.7 * 0.7 - 2.0 * b * 0.7 * -0.2 + a * 0.04) / det;
    let expected = -0.5 * quad - 0.5 * det.ln() - (2.0 * std::f64::consts::PI).ln();
    let v = model.log_marginal_likelihood(&x, &y).unwrap();
    assert!((v - expected).abs() < 1e-10, "{v} vs {expected}");
}

#[test]
fn zero_targets_leave_only_log_determinant() {
    let model = GpModel::new(se(1.0, 0.5), 0.2).unwrap();
    let x = DMatrix::from_column_slice(3, 1, &[-1.0, 0.0, 1.3]);
    let y = DVector::zeros(3);
    let mut k = DMatrix::from_fn(3, 3, |i, j| model.kernel.eval(&[x[i]], &[x[j]]).unwrap());
    for i in 0..3 {
        k[(i, i)] += 0.2;
    }
    let expected = -0.5 * k.determinant().ln() - 1.5 * LN_2PI;
    assert!((model.log_marginal_likelihood(&x, &y).unwrap() - expected).abs() < 1e-12);
}

#[test]
fn scalar_prediction() {
    // k ≡ 1: a linear kernel with c = 1 evaluated at x = 1
    let model = GpModel::new(KernelSpec::linear(vec![1.0]).unwrap(), 1.0).unwrap();
    let x = DMatrix::from_column_slice(1, 1, &[1.0]);
    let y = DVector::from_vec(vec![2.0]);
    let p = model.predict(&x, &y, &x).unwrap();
    assert!((p.mean[0] - 1.0).abs() < 1e-14);
    assert!((p.covariance[(0, 0)] - 0.5).abs() < 1e-14);
}

#[test]
fn interpolates_in_small_noise_limit() {
    let model = GpModel::new(se(1.0, 1.0), 1e-12).unwrap().with_jitter(0.0).unwrap();
    let x = DMatrix::from_column_slice(4, 1, &[-1.5, -0.2, 0.9, 2.0]);
    let y = DVector::from_vec(vec![0.3, -1.0, 0.5, 1.2]);
    let p = model.predict(&x, &y, &x).unwrap();
    for i in 0..4 {
        assert!((p.mean[i] - y[i]).abs() < 1e-4, "{} vs {}", p.mean[i], y[i]);
    }
}

#[test]
fn empty_test_set() {
    let model = GpModel::new(se(1.0, 1.0), 0.1).unwrap();
    let x = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
    let y = DVector::from_vec(vec![0.0, 1.0]);
    let p = model.predict(&x, &y, &DMatrix::zeros(0, 1)).unwrap();
    assert!(p.is_empty());
    assert!(model.predict(&DMatrix::zeros(0, 1), &DVector::zeros(0), &x).is_err());
}

#[test]
fn gradient_matches_finite_difference() {
    let x = DMatrix::from_row_slice(6, 2, &[0.1, 0.2, -1.0, 0.3, 0.8, -0.7, 1.4, 1.1, -0.2, -1.5, 0.5, 0.9]);
    let y = DVector::from_vec(vec![0.3, -0.8, 0.6, 1.5, -1.1, 0.4]);
    for family in [KernelFamily::SquaredExponential, KernelFamily::Linear, KernelFamily::SeLinear] {
        let n = family.n_params(2) + 1;
        let p0: Vec<f64> = (0..n).map(|i| -0.3 + 0.17 * i as f64).collect();
        let model = GpModel::from_log_params(family, 2, &p0, 0.0).unwrap();
        let (_, grad) = model.energy_and_gradient(&x, &y).unwrap();
        for j in 0..n {
            let h = 1e-5;
            let mut up = p0.clone();
            up[j] += h;
            let mut dn = p0.clone();
            dn[j] -= h;
            let e = |p: &[f64]| GpModel::from_log_params(family, 2, p, 0.0).unwrap().energy_and_gradient(&x, &y).unwrap().0;
            let fd = (e(&up) - e(&dn)) / (2.0 * h);
            assert!((fd - grad[j]).abs() < 1e-4 * fd.abs().max(1e-3), "{family:?} {j}: {fd} vs {}", grad[j]);
        }
    }
}

#[test]
fn fit_is_deterministic_and_survives_zero_targets() {
    let x = DMatrix::from_column_slice(8, 1, &[-1.5, -1.0, -0.6, -0.1, 0.3, 0.7, 1.2, 1.8]);
    let y = DVector::zeros(8);
    let cfg = OptimConfig::default();
    let m = fit_hyperparameters(&x, &y, KernelFamily::SquaredExponential, &cfg).unwrap();
    // signal variance driven to (just past) its lower bound e^-3
    assert!(m.kernel.signal_variance().ln() < -2.9, "{:?}", m);
    let y2 = DVector::from_vec(vec![-1.2, -0.9, -0.5, 0.1, 0.2, 0.8, 1.1, 1.7]);
    let a = fit_hyperparameters(&x, &y2, KernelFamily::SquaredExponential, &cfg).unwrap();
    let b = fit_hyperparameters(&x, &y2, KernelFamily::SquaredExponential, &cfg).unwrap();
    assert_eq!(a, b);
}
