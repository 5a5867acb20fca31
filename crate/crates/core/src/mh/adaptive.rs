use std::collections::VecDeque;

use rand::{Rng, RngExt};

use super::proposal::{shape, Proposal, MAX_REDRAWS};
use super::KernelKind;
use crate::error::{Error, Result};
use crate::markov::{SupportMask, TransitionMatrix};
use crate::prob::{
    empirical_cdf_scores, log_dirichlet_density, pearson_correlation, sample_dirichlet,
    stabilize_correlation, DirichletParams, GaussianCopula,
};

/// Two matrices closer than this in every entry count as the same state.
pub const DISTINCT_TOL: f64 = 1e-12;

/// The most recent pairwise-distinct chain states, oldest first.
#[derive(Debug, Clone)]
pub struct HistoryWindow {
    capacity: usize,
    states: VecDeque<Vec<f64>>,
}

impl HistoryWindow {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            states: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.states.len() == self.capacity
    }

    /// Records a state unless it duplicates one already held. Returns whether it was added.
    pub fn push(&mut self, matrix: &TransitionMatrix) -> bool {
        let entries = matrix.entries();
        let duplicate = self.states.iter().any(|s| {
            s.iter()
                .zip(entries)
                .all(|(a, b)| (a - b).abs() <= DISTINCT_TOL)
        });
        if duplicate {
            return false;
        }
        if self.states.len() == self.capacity {
            self.states.pop_front();
        }
        self.states.push_back(entries.to_vec());
        true
    }

    /// Replicates of entry `(i, j)` across the window (row-major index `k`).
    fn series(&self, k: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[k]).collect()
    }
}

/// One pivot column per free row: the diagonal for the diagonal kernels
/// (first supported column if the diagonal is structurally zero), a uniformly
/// drawn supported column for the randomized ones.
pub fn select_pivots<R: Rng + ?Sized>(support: &SupportMask, kernel: KernelKind, rng: &mut R) -> Vec<usize> {
    support
        .free_rows()
        .into_iter()
        .map(|i| {
            let cols = support.row_support(i);
            if kernel.random_pivots() {
                cols[rng.random_range(0..cols.len())]
            } else if support.allows(i, i) {
                i
            } else {
                cols[0]
            }
        })
        .collect()
}

struct RowLayout {
    row: usize,
    pivot: usize,
    /// Supported columns other than the pivot.
    rest: Vec<usize>,
}

fn marginals(m: &TransitionMatrix, layout: &[RowLayout], d: &[f64]) -> Vec<(f64, f64)> {
    layout
        .iter()
        .zip(d)
        .map(|(l, &di)| {
            let x = m.get(l.row, l.pivot);
            (shape(di, x), shape(di, 1.0 - x))
        })
        .collect()
}

fn remainder_params(m: &TransitionMatrix, l: &RowLayout, di: f64) -> Result<DirichletParams> {
    let rest = 1.0 - m.get(l.row, l.pivot);
    DirichletParams::new(l.rest.iter().map(|&j| shape(di, m.get(l.row, j) / rest)).collect())
}

/// `log J(to | from)` for fixed correlation, pivots and coefficients.
fn log_density(
    copula: &GaussianCopula,
    layout: &[RowLayout],
    to: &TransitionMatrix,
    from: &TransitionMatrix,
    d: &[f64],
) -> Result<f64> {
    let pivots: Vec<f64> = layout.iter().map(|l| to.get(l.row, l.pivot)).collect();
    let mut total = copula.log_density_beta(&pivots, &marginals(from, layout, d));
    for ((l, &di), &x) in layout.iter().zip(d).zip(&pivots) {
        if l.rest.len() < 2 {
            continue;
        }
        let y: Vec<f64> = l.rest.iter().map(|&j| to.get(l.row, j) / (1.0 - x)).collect();
        total += log_dirichlet_density(&y, &remainder_params(from, l, di)?)?;
        total += (l.rest.len() as f64 - 1.0) * -(1.0 - x).ln();
    }
    Ok(total)
}

/// Correlated proposal built from the history window.
///
/// Returns `Ok(None)` when the window is not full, when the estimated
/// correlation cannot be stabilized, or when the copula keeps producing
/// pivots on the boundary; the caller then falls back to the basic kernel.
pub fn adaptive_proposal<R: Rng + ?Sized>(
    current: &TransitionMatrix,
    window: &HistoryWindow,
    kernel: KernelKind,
    d: &[f64],
    rng: &mut R,
) -> Result<Option<Proposal>> {
    let support = current.support();
    let free = support.free_rows();
    if d.len() != free.len() {
        return Err(Error::InvalidParameter(format!(
            "{} tuning coefficients for {} free rows",
            d.len(),
            free.len()
        )));
    }
    if !kernel.is_adaptive() {
        return Err(Error::InvalidParameter("the basic kernel has no adaptive form".into()));
    }
    if !window.is_full() || free.is_empty() {
        return Ok(None);
    }
    let r = current.dim();
    let pivots = select_pivots(support, kernel, rng);
    let layout: Vec<RowLayout> = free
        .iter()
        .zip(&pivots)
        .map(|(&row, &pivot)| RowLayout {
            row,
            pivot,
            rest: support.row_support(row).into_iter().filter(|&j| j != pivot).collect(),
        })
        .collect();

    let columns: Vec<Vec<f64>> = layout
        .iter()
        .map(|l| {
            let s = window.series(l.row * r + l.pivot);
            if kernel.uses_ranks() {
                empirical_cdf_scores(&s)
            } else {
                s
            }
        })
        .collect();
    let Some(stable) = stabilize_correlation(&pearson_correlation(&columns)) else {
        return Ok(None);
    };
    let copula = GaussianCopula::from_factor(stable.factor);

    let margins = marginals(current, &layout, d);
    let Some(x) = (0..MAX_REDRAWS)
        .map(|_| copula.sample_beta(&margins, rng))
        .find(|x| x.iter().all(|&v| v > 0.0 && v < 1.0))
    else {
        return Ok(None);
    };

    let mut entries = current.entries().to_vec();
    for ((l, &di), &xi) in layout.iter().zip(d).zip(&x) {
        entries[l.row * r + l.pivot] = xi;
        if l.rest.len() == 1 {
            entries[l.row * r + l.rest[0]] = 1.0 - xi;
            continue;
        }
        let params = remainder_params(current, l, di)?;
        let y = (0..MAX_REDRAWS)
            .map(|_| sample_dirichlet(&params, rng))
            .find(|y| y.iter().all(|&v| v > 0.0))
            .ok_or(Error::DegenerateWeights)?;
        for (&j, yj) in l.rest.iter().zip(y) {
            entries[l.row * r + j] = (1.0 - xi) * yj;
        }
    }
    let candidate = TransitionMatrix::from_parts(entries, support.clone());
    if candidate.validate().is_err() {
        return Ok(None);
    }
    let log_forward = log_density(&copula, &layout, &candidate, current, d)?;
    let log_reverse = log_density(&copula, &layout, current, &candidate, d)?;
    Ok(Some(Proposal {
        candidate,
        log_forward,
        log_reverse,
    }))
}
