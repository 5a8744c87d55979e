use monogp::*;
use monogp::stats::LN_2PI;
use nalgebra::{DMatrix, DVector};
use monogp::ep::*;
use monogp::kernels::KernelSpec;

fn toy() -> (GpModel, DMatrix<f64>, DVector<f64>) {
    let model = GpModel::new(KernelSpec::squared_exponential(1.2, vec![0.9]).unwrap(), 0.25).unwrap();
    let x = DMatrix::from_column_slice(3, 1, &[-1.0, 0.2, 1.1]);
    let y = DVector::from_vec(vec![-0.8, 0.1, 0.9]);
    (model, x, y)
}

fn grid(points: &[f64], sign: f64) -> VirtualDerivativeSet {
    VirtualDerivativeSet::uniform(DMatrix::from_column_slice(points.len(), 1, points), 0, sign, 1e-6).unwrap()
}

#[test]
fn validates_virtual_sets() {
    let loc = DMatrix::zeros(2, 1);
    assert!(VirtualDerivativeSet::new(loc.clone(), vec![0, 1], vec![1.0, 1.0], 1e-6).is_err());
    assert!(VirtualDerivativeSet::new(loc.clone(), vec![0, 0], vec![1.0, 0.5], 1e-6).is_err());
    assert!(VirtualDerivativeSet::new(loc.clone(), vec![0, 0], vec![1.0, -1.0], 0.0).is_err());
    assert!(VirtualDerivativeSet::new(loc, vec![0], vec![1.0], 1e-6).is_err());
}

#[test]
fn joint_energy_matches_factored_energy() {
    // -log N(μ̃_joint | 0, A + Σ̃_joint) - Σ log Z̃_i in the (Z̃, μ̃, σ̃²) form
    let (model, x, y) = toy();
    let virt = grid(&[-0.5, 0.5], 1.0);
    let mut virt_soft = virt.clone();
    virt_soft.nu = 0.7;
    let s = ep_fit(&model, &x, &y, &virt_soft, &EpConfig::default()).unwrap();
    let n = 3;
    let joint = gp::build_joint_covariance(&model.kernel, &x, &virt_soft, 0.0).unwrap();
    let mut c = joint.assembled.clone();
    let mut mu_t = DVector::zeros(5);
    for i in 0..n {
        c[(i, i)] += model.noise_variance;
        mu_t[i] = y[i];
    }
    let vars = s.site_variances();
    let means = s.site_means();
    for i in 0..2 {
        c[(n + i, n + i)] += vars[i];
        mu_t[n + i] = means[i];
    }
    let ci = c.clone().try_inverse().unwrap();
    let log_n = -0.5 * mu_t.dot(&(&ci * &mu_t)) - 0.5 * c.determinant().ln() - 2.5 * LN_2PI;
    // log Z̃_i = c_i + ½ log(2π σ̃²) + ½ μ̃²/σ̃²
    let log_zt: f64 = (0..2)
        .map(|i| s.site_log_scales[i] + 0.5 * (2.0 * std::f64::consts::PI * vars[i]).ln() + 0.5 * means[i] * means[i] / vars[i])
        .sum();
    let expected = -(log_n + log_zt);
    assert!((s.energy - expected).abs() < 1e-9, "{} vs {expected}", s.energy);
}

#[test]
fn posterior_derivative_positive_for_agreeing_data() {
    let n = 30;
    let xs: Vec<f64> = (0..n).map(|i| -2.0 + 4.0 * i as f64 / (n - 1) as f64).collect();
    let x = DMatrix::from_column_slice(n, 1, &xs);
    let y = DVector::from_iterator(n, xs.iter().map(|v| v + 0.05 * (7.0 * v).sin()));
    let model = GpModel::new(KernelSpec::squared_exponential(1.0, vec![1.5]).unwrap(), 0.01).unwrap();
    let s = ep_fit(&model, &x, &y, &grid(&[0.3], 1.0), &EpConfig::default()).unwrap();
    assert!(s.converged);
    assert!(s.derivative_moments(0).0 > 0.0);
}

#[test]
fn flat_probit_recovers_plain_posterior() {
    let (model, x, y) = toy();
    let mut virt = grid(&[-0.5, 0.0, 0.7], 1.0);
    virt.nu = 1e6;
    let s = ep_fit(&model, &x, &y, &virt, &EpConfig::default()).unwrap();
    let joint = gp::build_joint_covariance(&model.kernel, &x, &virt, 0.0).unwrap();
    // exact posterior of (f, f') given only y
    let a = &joint.assembled;
    let kxy = a.columns(0, 3).clone_owned();
    let mut kyy = a.view((0, 0), (3, 3)).clone_owned();
    for i in 0..3 {
        kyy[(i, i)] += model.noise_variance;
    }
    let inv = kyy.try_inverse().unwrap();
    let mean = &kxy * (&inv * &y);
    let cov = a - &kxy * &inv * kxy.transpose();
    assert!((&s.posterior_mean - mean).amax() < 1e-3);
    assert!((&s.posterior_cov - cov).amax() < 1e-3);

    let xs = DMatrix::from_column_slice(4, 1, &[-2.0, -0.3, 0.4, 2.5]);
    let a = ep_predict(&s, &model, &x, &y, &virt, &xs).unwrap();
    let b = model.predict(&x, &y, &xs).unwrap();
    assert!((&a.mean - &b.mean).amax() < 1e-3);
    assert!((&a.covariance - &b.covariance).amax() < 1e-3);
    assert!(ep_predict(&s, &model, &x, &y, &virt, &DMatrix::zeros(0, 1)).unwrap().is_empty());
}

#[test]
fn stored_energy_matches_recomputation_and_permutation() {
    let (model, x, y) = toy();
    let virt = grid(&[-1.2, -0.4, 0.3, 1.0], -1.0);
    let cfg = EpConfig { tolerance: 1e-10, max_sweeps: 1000, ..EpConfig::default() };
    let s = ep_fit(&model, &x, &y, &virt, &cfg).unwrap();
    let e = ep_energy(&s, &model, &x, &y, &virt).unwrap();
    assert!((e - s.energy).abs() < 1e-12);
    let perm = virt.permuted(&[2, 0, 3, 1]).unwrap();
    let sp = ep_fit(&model, &x, &y, &perm, &cfg).unwrap();
    assert!((sp.energy - s.energy).abs() < 1e-6, "{} vs {}", sp.energy, s.energy);
}

#[test]
fn gradient_matches_finite_difference_at_fixed_point() {
    let (_, x, y) = toy();
    let virt = grid(&[-0.8, 0.0, 0.8], 1.0);
    let cfg = EpConfig { tolerance: 1e-12, max_sweeps: 2000, ..EpConfig::default() };
    for family in [KernelFamily::SquaredExponential, KernelFamily::SeLinear] {
        let n = family.n_params(1) + 1;
        let p0: Vec<f64> = (0..n).map(|i| -0.4 + 0.3 * i as f64).collect();
        let model = GpModel::from_log_params(family, 1, &p0, 0.0).unwrap();
        let (_, grad) = ep_energy_and_gradient(&model, &x, &y, &virt, &cfg).unwrap();
        for j in 0..n {
            let h = 1e-5;
            let e = |d: f64| {
                let mut p = p0.clone();
                p[j] += d;
                let m = GpModel::from_log_params(family, 1, &p, 0.0).unwrap();
                ep_fit(&m, &x, &y, &virt, &cfg).unwrap().energy
            };
            let fd = (e(h) - e(-h)) / (2.0 * h);
            assert!((fd - grad[j]).abs() < 1e-4 * fd.abs().max(1e-2), "{family:?} {j}: fd {fd} vs {}", grad[j]);
        }
    }
}

#[test]
fn contradicting_signs_stay_finite() {
    let n = 20;
    let xs: Vec<f64> = (0..n).map(|i| -2.0 + 4.0 * i as f64 / (n - 1) as f64).collect();
    let x = DMatrix::from_column_slice(n, 1, &xs);
    let y = DVector::from_iterator(n, xs.iter().map(|v| 2.0 * v));
    let model = GpModel::new(KernelSpec::squared_exponential(4.0, vec![2.0]).unwrap(), 0.001).unwrap();
    let pts: Vec<f64> = (0..7).map(|i| -2.0 + i as f64 * 4.0 / 6.0).collect();
    let up = ep_fit(&model, &x, &y, &grid(&pts, 1.0), &EpConfig::default()).unwrap();
    let down = ep_fit(&model, &x, &y, &grid(&pts, -1.0), &EpConfig::default()).unwrap();
    assert!(down.energy.is_finite() && down.energy > up.energy + 10.0, "{} {}", down.energy, up.energy);
    assert!(down.posterior_cov.iter().all(|v| v.is_finite()));
}
