//! Synthetic data, normalization, table I/O and predictive evaluation.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::PredictiveDistribution;
use crate::stats::LN_2PI;

/// Function families for synthetic one-dimensional data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum SyntheticFamily {
    /// `f(x) = a x`
    Linear { a: f64 },
    /// `f(x) = 1 / (1 + exp(-a x))`, `a > 0`
    Sigmoid { a: f64 },
}

impl SyntheticFamily {
    /// Parse `linear:<a>` or `sigmoid:<a>`.
    pub fn parse(s: &str) -> Result<Self> {
        let (name, a) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("expected family:slope, got '{s}'")))?;
        let a: f64 = a
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("slope '{a}' is not a number")))?;
        let family = match name.trim().to_ascii_lowercase().as_str() {
            "linear" | "lin" => SyntheticFamily::Linear { a },
            "sigmoid" | "sig" => SyntheticFamily::Sigmoid { a },
            other => return Err(Error::invalid(format!("unknown function family '{other}'"))),
        };
        if let SyntheticFamily::Sigmoid { a } = family {
            if !(a > 0.0) {
                return Err(Error::invalid("sigmoid slope must be positive"));
            }
        }
        Ok(family)
    }

    /// `(name, slope)` as used in the parse syntax.
    pub fn parts(&self) -> (&'static str, f64) {
        match *self {
            SyntheticFamily::Linear { a } => ("linear", a),
            SyntheticFamily::Sigmoid { a } => ("sigmoid", a),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            SyntheticFamily::Linear { a } => a * x,
            SyntheticFamily::Sigmoid { a } => 1.0 / (1.0 + (-a * x).exp()),
        }
    }

    /// Sign of the true monotonic direction, 0 for the zero function.
    pub fn truth(&self) -> i8 {
        match *self {
            SyntheticFamily::Linear { a } if a > 0.0 => 1,
            SyntheticFamily::Linear { a } if a < 0.0 => -1,
            SyntheticFamily::Linear { .. } => 0,
            SyntheticFamily::Sigmoid { .. } => 1,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(*self, SyntheticFamily::Linear { a } if a == 0.0)
    }

    pub fn label(&self) -> String {
        match *self {
            SyntheticFamily::Linear { a } => format!("linear(a={a})"),
            SyntheticFamily::Sigmoid { a } => format!("sigmoid(a={a})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub family: SyntheticFamily,
    pub n: usize,
    /// Fraction of variance explained by the signal, `σ²_signal / (σ²_signal + σ²_noise)`.
    /// Ignored for the zero function, whose noise variance is fixed at 1.
    pub snr: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::invalid("synthetic data needs at least two points"));
        }
        match self.family {
            SyntheticFamily::Sigmoid { a } if !(a > 0.0 && a.is_finite()) => {
                return Err(Error::invalid(format!("sigmoid slope must be positive, got {a}")))
            }
            SyntheticFamily::Linear { a } if !a.is_finite() => {
                return Err(Error::invalid("linear slope must be finite"))
            }
            _ => {}
        }
        if !self.family.is_zero() && !(self.snr > 0.0 && self.snr < 1.0) {
            return Err(Error::invalid(format!(
                "signal fraction must lie in (0, 1), got {}",
                self.snr
            )));
        }
        Ok(())
    }
}

/// A synthetic data set in raw and normalized form.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub x_raw: DMatrix<f64>,
    pub y_raw: DVector<f64>,
    /// Raw-scale noise variance used to draw `y_raw`.
    pub noise_variance: f64,
    pub truth: i8,
    pub info: NormalizationInfo,
}

fn sample_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

/// Draw a data set: `x ~ N(0, 1)`, `y = f(x) + ε`. The noise is rescaled so
/// that its sample variance gives exactly the requested signal fraction.
pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let xs: Vec<f64> = (0..spec.n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let eps: Vec<f64> = (0..spec.n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let f: Vec<f64> = xs.iter().map(|&x| spec.family.eval(x)).collect();
    let noise_variance = if spec.family.is_zero() {
        1.0
    } else {
        sample_variance(&f) * (1.0 - spec.snr) / spec.snr
    };
    let scale = if spec.family.is_zero() {
        1.0
    } else {
        (noise_variance / sample_variance(&eps)).sqrt()
    };
    let y: Vec<f64> = f.iter().zip(&eps).map(|(f, e)| f + scale * e).collect();
    let x_raw = DMatrix::from_column_slice(spec.n, 1, &xs);
    let y_raw = DVector::from_vec(y);
    let (x, y, info) = normalize(&x_raw, &y_raw)?;
    Ok(SyntheticData {
        x,
        y,
        x_raw,
        y_raw,
        noise_variance,
        truth: spec.family.truth(),
        info,
    })
}

/// Fresh raw data from the same distribution as a training set: same
/// function, same noise variance.
pub fn generate_like(family: SyntheticFamily, noise_variance: f64, n: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = noise_variance.sqrt();
    let xs: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| {
            let e: f64 = StandardNormal.sample(&mut rng);
            family.eval(x) + sd * e
        })
        .collect();
    (DMatrix::from_column_slice(n, 1, &xs), DVector::from_vec(ys))
}

/// Column means and (population) standard deviations of the inputs and targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationInfo {
    pub x_mean: Vec<f64>,
    pub x_std: Vec<f64>,
    pub y_mean: f64,
    pub y_std: f64,
}

fn mean_std(v: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = v.clone().count() as f64;
    let mean = v.clone().sum::<f64>() / n;
    let var = v.map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Shift and scale every column of `x` and `y` to zero mean and unit variance.
pub fn normalize(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(DMatrix<f64>, DVector<f64>, NormalizationInfo)> {
    if x.nrows() != y.len() || x.nrows() < 2 {
        return Err(Error::invalid("normalization needs at least two matching rows"));
    }
    let mut x_mean = Vec::with_capacity(x.ncols());
    let mut x_std = Vec::with_capacity(x.ncols());
    for (j, col) in x.column_iter().enumerate() {
        let (m, s) = mean_std(col.iter().copied());
        if !(s > 1e-12 * (1.0 + m.abs())) {
            return Err(Error::invalid(format!("input column {j} is constant")));
        }
        x_mean.push(m);
        x_std.push(s);
    }
    let (y_mean, y_std) = mean_std(y.iter().copied());
    if !(y_std > 1e-12 * (1.0 + y_mean.abs())) {
        return Err(Error::invalid("target is constant"));
    }
    let info = NormalizationInfo {
        x_mean,
        x_std,
        y_mean,
        y_std,
    };
    let xn = info.apply_x(x)?;
    let yn = info.apply_y(y);
    Ok((xn, yn, info))
}

impl NormalizationInfo {
    pub fn apply_x(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.x_mean.len() {
            return Err(Error::invalid("column count differs from the normalization"));
        }
        Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            (x[(i, j)] - self.x_mean[j]) / self.x_std[j]
        }))
    }

    pub fn apply_y(&self, y: &DVector<f64>) -> DVector<f64> {
        y.map(|v| (v - self.y_mean) / self.y_std)
    }

    pub fn denormalize_x(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.x_mean.len() {
            return Err(Error::invalid("column count differs from the normalization"));
        }
        Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            x[(i, j)] * self.x_std[j] + self.x_mean[j]
        }))
    }

    pub fn denormalize_y(&self, y: &DVector<f64>) -> DVector<f64> {
        y.map(|v| v * self.y_std + self.y_mean)
    }

    /// Map a predictive distribution of normalized targets back to raw units.
    pub fn denormalize_predictive(&self, p: &PredictiveDistribution) -> PredictiveDistribution {
        PredictiveDistribution::new(
            self.denormalize_y(&p.mean),
            &p.covariance * (self.y_std * self.y_std),
        )
    }
}

/// Log pointwise predictive density `Σ_i log N(y_i | μ*_i, Σ*_ii + σ²)`.
pub fn lppd(pred: &PredictiveDistribution, noise_variance: f64, y_test: &DVector<f64>) -> Result<f64> {
    if pred.len() != y_test.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} test targets",
            pred.len(),
            y_test.len()
        )));
    }
    let mut total = 0.0;
    for i in 0..y_test.len() {
        let var = pred.covariance[(i, i)] + noise_variance;
        if !(var > 0.0 && var.is_finite()) {
            return Err(Error::numerical(format!("non-positive predictive variance at point {i}")));
        }
        let r = y_test[i] - pred.mean[i];
        total += -0.5 * (LN_2PI + var.ln() + r * r / var);
    }
    Ok(total)
}

/// Indices of the `⌈fraction·L⌉` rows farthest (Euclidean) from the column
/// mean, farthest first; ties keep the lower index first.
pub fn edge_indices(x: &DMatrix<f64>, fraction: f64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!("edge fraction must lie in (0, 1), got {fraction}")));
    }
    let l = x.nrows();
    let count = ((fraction * l as f64) - 1e-9).ceil().max(0.0) as usize;
    let means: Vec<f64> = x.column_iter().map(|c| c.mean()).collect();
    let dist: Vec<f64> = (0..l)
        .map(|i| {
            (0..x.ncols())
                .map(|j| (x[(i, j)] - means[j]).powi(2))
                .sum::<f64>()
        })
        .collect();
    let mut idx: Vec<usize> = (0..l).collect();
    idx.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]).then(a.cmp(&b)));
    idx.truncate(count.min(l));
    Ok(idx)
}

/// The outermost `fraction` of the points and their targets.
pub fn edge_subset(x: &DMatrix<f64>, y: &DVector<f64>, fraction: f64) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if x.nrows() != y.len() {
        return Err(Error::invalid("inputs and targets differ in length"));
    }
    let idx = edge_indices(x, fraction)?;
    Ok((x.select_rows(&idx), y.select_rows(&idx)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TargetColumn {
    Name(String),
    Index(usize),
    Last,
}

impl TargetColumn {
    pub fn parse(s: &str) -> Self {
        match s.parse::<usize>() {
            Ok(i) => TargetColumn::Index(i),
            Err(_) => TargetColumn::Name(s.to_string()),
        }
    }
}

/// A numeric table split into inputs and target.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub column_names: Vec<String>,
    pub target_name: String,
}

/// Read a comma- or whitespace-delimited numeric table. The delimiter is
/// taken from the first line: commas if it has any, whitespace otherwise.
pub fn load_csv(path: impl AsRef<Path>, target: &TargetColumn, header: bool) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    parse_table(&text, &path.display().to_string(), target, header)
}

pub fn parse_table(text: &str, source: &str, target: &TargetColumn, header: bool) -> Result<Dataset> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let parse_err = |line: usize, column: usize, message: String| Error::Parse {
        path: source.to_string(),
        line: line + 1,
        column,
        message,
    };
    let Some((first_no, first)) = lines.next() else {
        return Err(parse_err(0, 0, "file has no data".into()));
    };
    let comma = first.contains(',');
    let split = |l: &str| -> Vec<String> {
        if comma {
            l.split(',').map(|s| s.trim().to_string()).collect()
        } else {
            l.split_whitespace().map(str::to_string).collect()
        }
    };
    let first_fields = split(first);
    let width = first_fields.len();
    let (names, mut data_lines): (Vec<String>, Vec<(usize, Vec<String>)>) = if header {
        (first_fields, Vec::new())
    } else {
        (
            (0..width).map(|i| format!("x{i}")).collect(),
            vec![(first_no, first_fields)],
        )
    };
    data_lines.extend(lines.map(|(no, l)| (no, split(l))));
    let target_idx = match target {
        TargetColumn::Last => width - 1,
        TargetColumn::Index(i) if *i < width => *i,
        TargetColumn::Index(i) => {
            return Err(Error::invalid(format!("target column {i} out of range ({width} columns)")))
        }
        TargetColumn::Name(name) => names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::invalid(format!("no column named '{name}'")))?,
    };
    if width < 2 {
        return Err(parse_err(first_no, 1, "need at least one input and one target column".into()));
    }
    let n = data_lines.len();
    if n == 0 {
        return Err(parse_err(first_no, 0, "no data rows".into()));
    }
    let mut x = DMatrix::zeros(n, width - 1);
    let mut y = DVector::zeros(n);
    for (r, (line_no, fields)) in data_lines.iter().enumerate() {
        if fields.len() != width {
            return Err(parse_err(
                *line_no,
                fields.len().min(width) + 1,
                format!("expected {width} fields, found {}", fields.len()),
            ));
        }
        let mut c_out = 0;
        for (c, field) in fields.iter().enumerate() {
            let v: f64 = field
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| parse_err(*line_no, c + 1, format!("'{field}' is not a number")))?;
            if c == target_idx {
                y[r] = v;
            } else {
                x[(r, c_out)] = v;
                c_out += 1;
            }
        }
    }
    let target_name = names[target_idx].clone();
    let column_names = names
        .into_iter()
        .enumerate()
        .filter(|(i, _)| *i != target_idx)
        .map(|(_, n)| n)
        .collect();
    Ok(Dataset {
        x,
        y,
        column_names,
        target_name,
    })
}

/// Comma-separated table with a header row, target last.
pub fn to_csv(x: &DMatrix<f64>, y: &DVector<f64>, names: &[String], target_name: &str) -> String {
    let mut out = String::new();
    let header: Vec<&str> = names.iter().map(String::as_str).chain([target_name]).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            let _ = write!(out, "{},", x[(i, j)]);
        }
        let _ = writeln!(out, "{}", y[i]);
    }
    out
}
