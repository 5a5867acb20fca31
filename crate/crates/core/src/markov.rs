//! Transition matrices, state-probability propagation and absorption times.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Row sums must be within this distance of one.
pub const ROW_SUM_TOL: f64 = 1e-10;

/// Pattern of structurally allowed transitions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SupportMask {
    r: usize,
    allowed: Vec<bool>,
}

impl SupportMask {
    pub fn new(r: usize, allowed: Vec<bool>) -> Result<Self> {
        if allowed.len() != r * r {
            return Err(Error::Structure(format!(
                "support mask has {} entries, expected {}",
                allowed.len(),
                r * r
            )));
        }
        if let Some(i) = (0..r).find(|&i| !allowed[i * r..(i + 1) * r].iter().any(|&a| a)) {
            return Err(Error::Structure(format!("row {} has no allowed transition", i + 1)));
        }
        Ok(Self { r, allowed })
    }

    pub fn full(r: usize) -> Self {
        Self {
            r,
            allowed: vec![true; r * r],
        }
    }

    /// Irreversible degradation: only transitions to the same or a worse state.
    pub fn upper_triangular(r: usize) -> Self {
        let allowed = (0..r * r).map(|k| k / r <= k % r).collect();
        Self { r, allowed }
    }

    /// Support inferred from the nonzero entries of a row-major matrix.
    pub fn from_nonzero(r: usize, entries: &[f64]) -> Result<Self> {
        Self::new(r, entries.iter().map(|&v| v != 0.0).collect())
    }

    pub fn dim(&self) -> usize {
        self.r
    }

    pub fn allows(&self, i: usize, j: usize) -> bool {
        self.allowed[i * self.r + j]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.allowed
    }

    /// Allowed column indices of row `i`, ascending.
    pub fn row_support(&self, i: usize) -> Vec<usize> {
        (0..self.r).filter(|&j| self.allows(i, j)).collect()
    }

    pub fn row_len(&self, i: usize) -> usize {
        self.allowed[i * self.r..(i + 1) * self.r]
            .iter()
            .filter(|&&a| a)
            .count()
    }

    /// Rows with at least two allowed entries, i.e. with something to estimate.
    pub fn free_rows(&self) -> Vec<usize> {
        (0..self.r).filter(|&i| self.row_len(i) >= 2).collect()
    }

    /// `(row, col)` of every allowed entry in a free row, row-major order.
    pub fn free_entries(&self) -> Vec<(usize, usize)> {
        self.free_rows()
            .into_iter()
            .flat_map(|i| self.row_support(i).into_iter().map(move |j| (i, j)))
            .collect()
    }

    /// `(row, col)` of every allowed entry, row-major order.
    pub fn entries(&self) -> Vec<(usize, usize)> {
        (0..self.r)
            .flat_map(|i| (0..self.r).map(move |j| (i, j)))
            .filter(|&(i, j)| self.allows(i, j))
            .collect()
    }
}

/// First constraint a candidate transition matrix breaks.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Shape { expected: usize, found: usize },
    NonFinite { row: usize, col: usize },
    OutOfBounds { row: usize, col: usize, value: f64 },
    OffSupport { row: usize, col: usize, value: f64 },
    EmptyRow { row: usize },
    RowSum { row: usize, sum: f64 },
}

impl fmt::Display for Violation {
    // rows and columns are reported 1-based, like state labels
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Shape { expected, found } => {
                write!(f, "expected {expected} entries, found {found}")
            }
            Violation::NonFinite { row, col } => {
                write!(f, "entry ({}, {}) is not finite", row + 1, col + 1)
            }
            Violation::OutOfBounds { row, col, value } => {
                write!(f, "entry ({}, {}) = {value} is outside [0, 1]", row + 1, col + 1)
            }
            Violation::OffSupport { row, col, value } => write!(
                f,
                "entry ({}, {}) = {value} is nonzero on a forbidden transition",
                row + 1,
                col + 1
            ),
            Violation::EmptyRow { row } => write!(f, "row {} has no allowed entry", row + 1),
            Violation::RowSum { row, sum } => write!(f, "row {} sums to {sum}", row + 1),
        }
    }
}

/// Row-stochastic matrix with its structural support.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    r: usize,
    entries: Vec<f64>,
    support: SupportMask,
}

impl TransitionMatrix {
    /// Builds and validates.
    pub fn new(entries: Vec<f64>, support: SupportMask) -> Result<Self> {
        let m = Self::from_parts(entries, support);
        m.validate().map_err(Error::InvalidMatrix)?;
        Ok(m)
    }

    /// Builds without validation; pair with [`TransitionMatrix::validate`].
    pub fn from_parts(entries: Vec<f64>, support: SupportMask) -> Self {
        Self {
            r: support.dim(),
            entries,
            support,
        }
    }

    /// Support inferred from exact zeros.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        if let Some(row) = rows.iter().find(|row| row.len() != r) {
            return Err(Error::InvalidMatrix(Violation::Shape {
                expected: r,
                found: row.len(),
            }));
        }
        let entries: Vec<f64> = rows.iter().flatten().copied().collect();
        let support = SupportMask::from_nonzero(r, &entries)?;
        Self::new(entries, support)
    }

    pub fn identity(r: usize) -> Self {
        let entries = (0..r * r)
            .map(|k| if k / r == k % r { 1.0 } else { 0.0 })
            .collect();
        Self::from_parts(entries, SupportMask::full(r))
    }

    pub fn dim(&self) -> usize {
        self.r
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.r + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.r..(i + 1) * self.r]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn support(&self) -> &SupportMask {
        &self.support
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.r).map(|i| self.row(i).to_vec()).collect()
    }

    /// Checks bounds, support consistency and row sums, reporting the first violation.
    pub fn validate(&self) -> std::result::Result<(), Violation> {
        let r = self.r;
        if self.entries.len() != r * r {
            return Err(Violation::Shape {
                expected: r * r,
                found: self.entries.len(),
            });
        }
        for i in 0..r {
            if self.support.row_len(i) == 0 {
                return Err(Violation::EmptyRow { row: i });
            }
            let mut sum = 0.0;
            for j in 0..r {
                let v = self.get(i, j);
                if !v.is_finite() {
                    return Err(Violation::NonFinite { row: i, col: j });
                }
                if !(0.0..=1.0).contains(&v) {
                    return Err(Violation::OutOfBounds { row: i, col: j, value: v });
                }
                if v != 0.0 && !self.support.allows(i, j) {
                    return Err(Violation::OffSupport { row: i, col: j, value: v });
                }
                sum += v;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Violation::RowSum { row: i, sum });
            }
        }
        Ok(())
    }

    /// `p · ψ` for a row vector `p`.
    pub fn step(&self, p: &[f64]) -> Vec<f64> {
        let r = self.r;
        let mut out = vec![0.0; r];
        for (i, &pi) in p.iter().enumerate() {
            if pi == 0.0 {
                continue;
            }
            for (o, &v) in out.iter_mut().zip(self.row(i)) {
                *o += pi * v;
            }
        }
        out
    }

    /// Bitwise equality of entries.
    pub fn same_entries(&self, other: &TransitionMatrix) -> bool {
        self.entries
            .iter()
            .zip(&other.entries)
            .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// State-occupation probabilities at a given time.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDistribution {
    probs: Vec<f64>,
    time: usize,
}

impl StateDistribution {
    pub fn new(probs: Vec<f64>, time: usize) -> Result<Self> {
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidParameter(
                "state probabilities must lie in [0, 1]".into(),
            ));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::InvalidParameter(format!(
                "state probabilities sum to {sum}"
            )));
        }
        Ok(Self { probs, time })
    }

    /// Distribution at time zero.
    pub fn initial(probs: Vec<f64>) -> Result<Self> {
        Self::new(probs, 0)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn time(&self) -> usize {
        self.time
    }
}

/// `p(t0 + t) = p(t0) · ψ^t` by `t` successive vector-matrix products.
pub fn propagate(p0: &StateDistribution, matrix: &TransitionMatrix, t: usize) -> StateDistribution {
    let mut p = p0.probs.clone();
    for _ in 0..t {
        p = matrix.step(&p);
    }
    StateDistribution {
        probs: p,
        time: p0.time + t,
    }
}

/// `p(0), p(1), …, p(horizon)`.
pub fn propagate_path(p0: &[f64], matrix: &TransitionMatrix, horizon: usize) -> Vec<Vec<f64>> {
    let mut path = Vec::with_capacity(horizon + 1);
    path.push(p0.to_vec());
    for t in 0..horizon {
        let next = matrix.step(&path[t]);
        path.push(next);
    }
    path
}

/// Expected number of steps to reach `absorbing` starting from `start`,
/// from the fundamental matrix `(I - ζ)⁻¹` of the transient block `ζ`.
pub fn mttf(matrix: &TransitionMatrix, absorbing: usize, start: usize) -> Result<f64> {
    Ok(expected_absorption_times(matrix, absorbing)?[start])
}

/// Expected absorption time from every state (zero for the absorbing one).
pub fn expected_absorption_times(matrix: &TransitionMatrix, absorbing: usize) -> Result<Vec<f64>> {
    let r = matrix.dim();
    if absorbing >= r {
        return Err(Error::InvalidParameter(format!(
            "absorbing state {} out of range",
            absorbing + 1
        )));
    }
    if (matrix.get(absorbing, absorbing) - 1.0).abs() > ROW_SUM_TOL {
        return Err(Error::NonAbsorbing { state: absorbing });
    }
    // every transient state must reach the absorbing one through positive entries
    let mut reaches = vec![false; r];
    reaches[absorbing] = true;
    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..r {
            if !reaches[i] && (0..r).any(|j| reaches[j] && matrix.get(i, j) > 0.0) {
                reaches[i] = true;
                changed = true;
            }
        }
    }
    if reaches.iter().any(|&x| !x) {
        return Err(Error::NonAbsorbing { state: absorbing });
    }

    let transient: Vec<usize> = (0..r).filter(|&i| i != absorbing).collect();
    let n = transient.len();
    let mut a = DMatrix::<f64>::identity(n, n);
    for (x, &i) in transient.iter().enumerate() {
        for (y, &j) in transient.iter().enumerate() {
            a[(x, y)] -= matrix.get(i, j);
        }
    }
    let ones = DVector::from_element(n, 1.0);
    let times = a
        .lu()
        .solve(&ones)
        .ok_or(Error::NonAbsorbing { state: absorbing })?;
    let mut out = vec![0.0; r];
    for (x, &i) in transient.iter().enumerate() {
        out[i] = times[x];
    }
    Ok(out)
}
