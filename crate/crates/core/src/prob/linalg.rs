use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Condition numbers above this trigger regularization.
pub const MAX_CONDITION_NUMBER: f64 = 1e8;
/// Shrinkage weights tried in turn when a correlation matrix is unstable.
pub const REGULARIZATION_STEPS: [f64; 3] = [1e-6, 1e-3, 1e-1];

const SYMMETRY_TOL: f64 = 1e-12;
const PIVOT_TOL: f64 = 1e-12;

/// Symmetric matrix with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    inner: DMatrix<f64>,
}

impl CorrelationMatrix {
    pub fn identity(n: usize) -> Self {
        Self {
            inner: DMatrix::identity(n, n),
        }
    }

    /// Builds from row-major entries, checking symmetry and the unit diagonal.
    pub fn from_row_major(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::InvalidParameter(format!(
                "{} entries cannot form a {n}x{n} matrix",
                entries.len()
            )));
        }
        let m = Self::from_row_major_unchecked(n, entries);
        for i in 0..n {
            if m.get(i, i) != 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "correlation diagonal entry {i} is {}",
                    m.get(i, i)
                )));
            }
            for j in 0..i {
                if (m.get(i, j) - m.get(j, i)).abs() > SYMMETRY_TOL {
                    return Err(Error::InvalidParameter(format!(
                        "correlation matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(m)
    }

    pub(crate) fn from_row_major_unchecked(n: usize, entries: Vec<f64>) -> Self {
        Self {
            inner: DMatrix::from_row_slice(n, n, &entries),
        }
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    /// `(1 - eps) R + eps I`.
    pub fn shrunk(&self, eps: f64) -> Self {
        let n = self.dim();
        let mut inner = &self.inner * (1.0 - eps) + DMatrix::identity(n, n) * eps;
        for i in 0..n {
            inner[(i, i)] = 1.0;
        }
        Self { inner }
    }
}

/// Lower-triangular `L` with `L Lᵀ = R`; fails on a non-positive pivot.
pub fn cholesky(r: &CorrelationMatrix) -> Result<DMatrix<f64>> {
    let a = r.as_matrix();
    let n = a.nrows();
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut diag = a[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        // also rejects NaN
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(diag > PIVOT_TOL) {
            return Err(Error::CholeskyFailure { pivot: j });
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Ratio of extreme eigenvalue magnitudes; `+inf` for numerically singular input.
pub fn condition_number(r: &CorrelationMatrix) -> f64 {
    let n = r.dim();
    if n == 0 {
        return 1.0;
    }
    let eig = SymmetricEigen::new(r.as_matrix().clone());
    let mags = eig.eigenvalues.iter().map(|v| v.abs());
    let (lo, hi) = mags.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo <= hi * f64::EPSILON * n as f64 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// A correlation matrix that passed the stability checks, with its factor.
#[derive(Debug, Clone)]
pub struct StabilizedCorrelation {
    pub correlation: CorrelationMatrix,
    pub factor: DMatrix<f64>,
    /// Shrinkage weight applied, zero when the estimate was used as is.
    pub shrinkage: f64,
}

fn accept(r: &CorrelationMatrix) -> Option<DMatrix<f64>> {
    if condition_number(r) > MAX_CONDITION_NUMBER {
        return None;
    }
    cholesky(r).ok()
}

/// Returns `R` if it is well conditioned, otherwise the first shrunk version
/// that is; `None` once every shrinkage step has failed.
pub fn stabilize_correlation(r: &CorrelationMatrix) -> Option<StabilizedCorrelation> {
    if let Some(factor) = accept(r) {
        return Some(StabilizedCorrelation {
            correlation: r.clone(),
            factor,
            shrinkage: 0.0,
        });
    }
    REGULARIZATION_STEPS.iter().find_map(|&eps| {
        let shrunk = r.shrunk(eps);
        accept(&shrunk).map(|factor| StabilizedCorrelation {
            correlation: shrunk,
            factor,
            shrinkage: eps,
        })
    })
}
