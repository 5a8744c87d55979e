//! End-to-end properties of the detection rule on synthetic data.

use monogp::amd::{amd_detect, p1_upper_limit, robustness_region, AmdConfig, MonotonicityReport};
use monogp::data::{generate, load_csv, normalize, SyntheticFamily, SyntheticSpec, TargetColumn};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn data(family: SyntheticFamily, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
    let d = generate(&SyntheticSpec {
        family,
        n: 30,
        snr: 0.9,
        seed,
    })
    .unwrap();
    (d.x, d.y)
}

const FAMILIES: [SyntheticFamily; 4] = [
    SyntheticFamily::Linear { a: 1.0 },
    SyntheticFamily::Linear { a: -1.0 },
    SyntheticFamily::Linear { a: 0.0 },
    SyntheticFamily::Sigmoid { a: 1.0 },
];

#[test]
fn negating_targets_mirrors_the_report() {
    for (i, family) in FAMILIES.into_iter().enumerate() {
        let (x, y) = data(family, 30 + i as u64);
        let cfg = AmdConfig::default().seeded(7);
        let a = amd_detect(&x, &y, &cfg).unwrap();
        let b = amd_detect(&x, &(-&y), &cfg).unwrap();
        let flipped: Vec<i8> = a.directions.iter().map(|d| -d).collect();
        assert_eq!(b.directions, flipped, "{}", family.label());
        let (da, db) = (&a.dimensions[0], &b.dimensions[0]);
        assert!((da.energy_plus.unwrap() - db.energy_minus.unwrap()).abs() < 1e-6);
        assert!((da.energy_minus.unwrap() - db.energy_plus.unwrap()).abs() < 1e-6);
    }
}

fn never_gains_detection(before: &[i8], after: &[i8]) -> bool {
    before.iter().zip(after).all(|(b, a)| *b != 0 || *a == 0)
}

fn check_thresholds(r: &MonotonicityReport) {
    assert_eq!(r.recompute_directions(r.p1, r.p2).unwrap(), r.directions);
    let p1s = [0.55, 0.7, 0.9, 0.95, 0.99, 0.999, 1.0];
    for w in p1s.windows(2) {
        let lo = r.recompute_directions(w[0], 0.5).unwrap();
        let hi = r.recompute_directions(w[1], 0.5).unwrap();
        assert!(never_gains_detection(&lo, &hi), "p₁ {} → {}", w[0], w[1]);
    }
    let p2s = [-1.0, -0.2, 0.0, 0.3, 0.5, 0.8, 0.98];
    for w in p2s.windows(2) {
        let lo = r.recompute_directions(0.99, w[0]).unwrap();
        let hi = r.recompute_directions(0.99, w[1]).unwrap();
        assert!(never_gains_detection(&hi, &lo), "p₂ {} → {}", w[1], w[0]);
    }
}

#[test]
fn stricter_thresholds_never_add_detections() {
    for (i, family) in FAMILIES.into_iter().enumerate() {
        for seed in 0..3 {
            let (x, y) = data(family, 50 + 10 * i as u64 + seed);
            check_thresholds(&amd_detect(&x, &y, &AmdConfig::default().seeded(seed)).unwrap());
        }
    }
}

#[test]
fn three_inputs_take_six_monotone_fits() {
    let (x1, y) = data(SyntheticFamily::Linear { a: 1.0 }, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = DMatrix::from_fn(30, 3, |i, j| if j == 0 { x1[(i, 0)] } else { rng.random_range(-2.0..2.0) });
    let (x, y, _) = normalize(&x, &y).unwrap();
    let r = amd_detect(&x, &y, &AmdConfig::default()).unwrap();
    assert_eq!((r.plain_fits, r.ep_fits), (1, 6));
    assert_eq!(r.directions.len(), 3);
    assert_ne!(r.directions[0], -1);
    check_thresholds(&r);
}

#[test]
fn parallel_and_serial_runs_agree() {
    let (x, y) = data(SyntheticFamily::Sigmoid { a: 1.0 }, 8);
    let cfg = AmdConfig::default().seeded(2);
    let a = amd_detect(&x, &y, &cfg).unwrap();
    let b = amd_detect(&x, &y, &AmdConfig { parallel: true, ..cfg }).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn linear_trend_has_wide_region() {
    for seed in 0..5 {
        let (x, y) = data(SyntheticFamily::Linear { a: 1.0 }, 70 + seed);
        let cfg = AmdConfig::default().seeded(seed);
        let limit = p1_upper_limit(&x, &y, 0, 1.0, &cfg).unwrap();
        assert!(limit > 0.95, "seed {seed}: {limit}");
        let (report, regions) = robustness_region(&x, &y, &cfg).unwrap();
        assert_eq!(regions[0].direction_if_detected, 1);
        assert_eq!(report.p1_limit(0, 1.0), Some(limit));
    }
}

#[test]
fn diabetes_table_loads() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/diabetes.tab");
    let ds = load_csv(path, &TargetColumn::Name("y".into()), true).unwrap();
    assert_eq!(ds.x.shape(), (442, 10));
    assert_eq!(ds.column_names, ["age", "sex", "bmi", "map", "tc", "ldl", "hdl", "tch", "ltg", "glu"]);
    assert_eq!(ds.target_name, "y");
}
