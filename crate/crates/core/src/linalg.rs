use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::{Mat, MatRef, Par, Side};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const JITTER_START: f64 = 1e-8;
const JITTER_MAX: f64 = 1e-2;

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub struct Chol(faer::linalg::solvers::Llt<f64>);

impl std::fmt::Debug for Chol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Chol({}×{})", self.0.L().nrows(), self.0.L().ncols())
    }
}

fn to_faer(m: &DMatrix<f64>) -> MatRef<'_, f64> {
    MatRef::from_column_major_slice(m.as_slice(), m.nrows(), m.ncols())
}

fn from_faer(m: MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

impl Chol {
    fn new(m: &DMatrix<f64>) -> Option<Chol> {
        to_faer(m).llt(Side::Lower).ok().map(Chol)
    }

    /// `A⁻¹ b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let rhs = MatRef::from_column_major_slice(b.as_slice(), b.len(), 1);
        let x: Mat<f64> = self.0.solve(rhs);
        DVector::from_fn(b.len(), |i, _| x[(i, 0)])
    }

    /// `A⁻¹`.
    pub fn inverse(&self) -> DMatrix<f64> {
        from_faer(self.0.inverse().as_ref())
    }

    fn solve_lower_in_place(&self, x: &mut DMatrix<f64>) {
        let (r, c) = x.shape();
        let view = faer::MatMut::from_column_major_slice_mut(x.as_mut_slice(), r, c);
        faer::linalg::triangular_solve::solve_lower_triangular_in_place(self.0.L(), view, Par::Seq);
    }
}

/// Cholesky factorization with diagonal jitter escalation.
///
/// Tries `base_jitter` first, then `1e-8 · mean(diag)` growing tenfold up to
/// `1e-2 · mean(diag)`. Returns the factor and the total jitter that was added.
pub fn cholesky_with_jitter(mat: &DMatrix<f64>, base_jitter: f64) -> Result<(Chol, f64)> {
    let n = mat.nrows();
    let mean_diag = if n == 0 {
        0.0
    } else {
        mat.diagonal().iter().map(|v| v.abs()).sum::<f64>() / n as f64
    };
    let scale = if mean_diag > 0.0 && mean_diag.is_finite() {
        mean_diag
    } else {
        1.0
    };
    if mat.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("matrix contains non-finite entries"));
    }
    let mut extra = 0.0;
    loop {
        let jitter = base_jitter + extra;
        let mut m = mat.clone();
        if jitter > 0.0 {
            for i in 0..n {
                m[(i, i)] += jitter;
            }
        }
        if let Some(ch) = Chol::new(&m) {
            return Ok((ch, jitter));
        }
        extra = if extra == 0.0 {
            JITTER_START * scale
        } else {
            extra * 10.0
        };
        if extra > JITTER_MAX * scale * 1.000_001 {
            return Err(Error::NumericalFailure {
                message: format!("matrix of size {n} not positive definite"),
                jitter,
            });
        }
    }
}

pub fn log_det(ch: &Chol) -> f64 {
    let l = ch.0.L();
    2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
}

/// Solve `L x = b` for the lower Cholesky factor.
pub(crate) fn solve_lower(ch: &Chol, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut x = b.clone();
    ch.solve_lower_in_place(&mut x);
    x
}

pub(crate) fn solve_lower_vec(ch: &Chol, b: &DVector<f64>) -> DVector<f64> {
    let mut x = DMatrix::from_column_slice(b.len(), 1, b.as_slice());
    ch.solve_lower_in_place(&mut x);
    DVector::from_column_slice(x.as_slice())
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Row `i` of a matrix as an owned vector.
pub(crate) fn row_vec(m: &DMatrix<f64>, i: usize) -> Vec<f64> {
    m.row(i).iter().copied().collect()
}

pub(crate) fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| row_vec(m, i)).collect()
}
