use monogp::*;
use monogp::optim::*;

fn free(n: usize) -> SoftBounds {
    SoftBounds {
        lower: vec![-1e9; n],
        upper: vec![1e9; n],
        weight: 1.0,
    }
}

#[test]
fn rosenbrock() {
    let f = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
        let (a, b) = (x[0], x[1]);
        let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![
            -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
            200.0 * (b - a * a),
        ];
        Ok((v, g))
    };
    let opts = MinimizeOptions {
        max_iters: 500,
        grad_tol: 1e-8,
        value_tol: 0.0,
        ..Default::default()
    };
    let m = minimize(f, &[-1.2, 1.0], &free(2), &opts).unwrap();
    assert!(m.converged);
    assert!((m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] - 1.0).abs() < 1e-5, "{:?}", m.x);
}

#[test]
fn soft_bound_holds_unbounded_descent() {
    // f = x decreases forever; the penalty w (lo - x)² stops it at lo - 1/(2w)
    let f = |x: &[f64]| -> Result<(f64, Vec<f64>)> { Ok((x[0], vec![1.0])) };
    let b = SoftBounds {
        lower: vec![-3.0],
        upper: vec![3.0],
        weight: 100.0,
    };
    let m = minimize(f, &[0.0], &b, &MinimizeOptions::default()).unwrap();
    assert!((m.x[0] - (-3.005)).abs() < 1e-4, "{:?}", m.x);
}

#[test]
fn failing_region_is_avoided() {
    // undefined for x < 0.5, minimum of (x-2)² at 2
    let f = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
        if x[0] < 0.5 {
            Err(Error::NumericalFailure {
                message: "outside".into(),
                jitter: 0.0,
            })
        } else {
            Ok(((x[0] - 2.0).powi(2), vec![2.0 * (x[0] - 2.0)]))
        }
    };
    let m = minimize(f, &[0.6], &free(1), &MinimizeOptions::default()).unwrap();
    assert!((m.x[0] - 2.0).abs() < 1e-5);
    assert!(minimize(f, &[0.0], &free(1), &MinimizeOptions::default()).is_err());
}
