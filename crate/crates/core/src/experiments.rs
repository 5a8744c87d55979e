//! Repetition-level building blocks of the synthetic studies: distributions
//! of the `p₁` acceptance limit, and edge-lppd comparisons between the plain
//! GP, a monotone GP and the detected model.

use serde::{Deserialize, Serialize};

use crate::amd::{self, AmdConfig};
use crate::data::{self, SyntheticFamily, SyntheticSpec};
use crate::error::{Error, Result};
use crate::seeds::derive_seed;

/// One repetition of a `p₁` sweep cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct P1Row {
    pub rep: usize,
    pub data_seed: u64,
    pub detection_seed: u64,
    /// Acceptance limit for the tested sign.
    pub p1_limit: Option<f64>,
    /// Rejection limit for the tested sign.
    pub p2_limit: Option<f64>,
    pub direction: i8,
}

/// The sign whose limit is reported for a family: the true direction, or
/// `+1` for the zero function.
pub fn tested_sign(family: SyntheticFamily) -> f64 {
    if family.truth() < 0 {
        -1.0
    } else {
        1.0
    }
}

/// Seeds for repetition `rep` of cell `cell` under `master`: `(data, detection)`.
pub fn repetition_seeds(master: u64, cell: u64, rep: usize) -> (u64, u64) {
    (
        derive_seed(master, &[cell, rep as u64, 0]),
        derive_seed(master, &[cell, rep as u64, 1]),
    )
}

/// Run one repetition of a `p₁` sweep cell.
pub fn p1_sweep_rep(
    family: SyntheticFamily,
    n: usize,
    snr: f64,
    master: u64,
    cell: u64,
    rep: usize,
    config: &AmdConfig,
) -> Result<P1Row> {
    let (data_seed, detection_seed) = repetition_seeds(master, cell, rep);
    let data = data::generate(&SyntheticSpec {
        family,
        n,
        snr,
        seed: data_seed,
    })?;
    let config = config.clone().seeded(detection_seed);
    let report = amd::amd_detect(&data.x, &data.y, &config)?;
    let sign = tested_sign(family);
    Ok(P1Row {
        rep,
        data_seed,
        detection_seed,
        p1_limit: report.p1_limit(0, sign),
        p2_limit: report.p2_limit(0, sign),
        direction: report.directions[0],
    })
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() || !(0.0..=1.0).contains(&q) {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

/// Median and 90% central interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub median: f64,
    pub q05: f64,
    pub q95: f64,
    pub count: usize,
}

pub fn summarize(values: &[f64]) -> Option<Summary> {
    Some(Summary {
        median: quantile(values, 0.5)?,
        q05: quantile(values, 0.05)?,
        q95: quantile(values, 0.95)?,
        count: values.iter().filter(|v| v.is_finite()).count(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LppdSettings {
    pub test_points: usize,
    pub edge_fraction: f64,
    /// Sign assumed by the always-monotone model.
    pub assumed_sign: f64,
    /// Use only the acceptance half of the detection rule.
    pub one_sided: bool,
}

impl Default for LppdSettings {
    fn default() -> Self {
        LppdSettings {
            test_points: 1000,
            edge_fraction: 0.2,
            assumed_sign: 1.0,
            one_sided: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LppdRow {
    pub rep: usize,
    pub data_seed: u64,
    pub detection_seed: u64,
    pub test_seed: u64,
    pub direction: i8,
    pub lppd_plain: f64,
    pub lppd_monotone: f64,
    pub lppd_amd: f64,
    pub delta_monotone: f64,
    pub delta_amd: f64,
}

/// Edge-lppd of the plain, monotone and detected models on fresh test data.
/// All densities are in the normalized units of the training data.
pub fn lppd_compare_rep(
    family: SyntheticFamily,
    n: usize,
    snr: f64,
    master: u64,
    cell: u64,
    rep: usize,
    config: &AmdConfig,
    settings: &LppdSettings,
) -> Result<LppdRow> {
    if settings.assumed_sign != 1.0 && settings.assumed_sign != -1.0 {
        return Err(Error::invalid("assumed sign must be ±1"));
    }
    let (data_seed, detection_seed) = repetition_seeds(master, cell, rep);
    let test_seed = derive_seed(master, &[cell, rep as u64, 2]);
    let train = data::generate(&SyntheticSpec {
        family,
        n,
        snr,
        seed: data_seed,
    })?;
    let config = config.clone().seeded(detection_seed);
    let det = amd::amd_detect_full(&train.x, &train.y, &config)?;

    let (xt_raw, yt_raw) = data::generate_like(family, train.noise_variance, settings.test_points, test_seed);
    let xt = train.info.apply_x(&xt_raw)?;
    let yt = train.info.apply_y(&yt_raw);
    let (xe, ye) = data::edge_subset(&xt, &yt, settings.edge_fraction)?;

    let plain_pred = det.plain.predict(&train.x, &train.y, &xe)?;
    let lppd_plain = data::lppd(&plain_pred, det.plain.noise_variance, &ye)?;

    let fit_for = |sign: f64| {
        let (plus, minus) = &det.fits[0];
        let fit = if sign > 0.0 { plus } else { minus };
        fit.as_ref()
            .ok_or_else(|| Error::numerical(format!("monotone fit with sign {sign} failed")))
    };
    let lppd_of = |sign: f64| -> Result<f64> {
        let fit = fit_for(sign)?;
        let pred = fit.predict(&train.x, &train.y, &xe)?;
        data::lppd(&pred, fit.model.noise_variance, &ye)
    };
    let lppd_monotone = lppd_of(settings.assumed_sign)?;

    let report = &det.report;
    let direction = if settings.one_sided {
        let dim = &report.dimensions[0];
        let ok = |e: Option<f64>| e.is_some_and(|e| e <= report.baseline_accept);
        match (ok(dim.energy_plus), ok(dim.energy_minus)) {
            (true, true) => {
                if dim.energy_plus <= dim.energy_minus {
                    1
                } else {
                    -1
                }
            }
            (true, false) => 1,
            (false, true) => -1,
            (false, false) => 0,
        }
    } else {
        report.directions[0]
    };
    let lppd_amd = match direction {
        0 => lppd_plain,
        d if f64::from(d) == settings.assumed_sign => lppd_monotone,
        d => lppd_of(f64::from(d))?,
    };

    Ok(LppdRow {
        rep,
        data_seed,
        detection_seed,
        test_seed,
        direction,
        lppd_plain,
        lppd_monotone,
        lppd_amd,
        delta_monotone: lppd_monotone - lppd_plain,
        delta_amd: lppd_amd - lppd_plain,
    })
}
