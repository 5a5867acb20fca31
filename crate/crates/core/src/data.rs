//! Observation containers and sufficient statistics.

use crate::error::{Error, Result};
use crate::markov::SupportMask;

/// Individual state sequences over `t = 0..=T`; `None` marks a missing cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequencePanel {
    n_states: usize,
    horizon: usize,
    cells: Vec<Option<usize>>,
}

impl SequencePanel {
    /// States are 0-based indices below `n_states`.
    pub fn new(n_states: usize, horizon: usize, rows: Vec<Vec<Option<usize>>>) -> Result<Self> {
        let mut cells = Vec::with_capacity(rows.len() * (horizon + 1));
        for (k, row) in rows.into_iter().enumerate() {
            if row.len() != horizon + 1 {
                return Err(Error::InvalidParameter(format!(
                    "individual {k} has {} cells, expected {}",
                    row.len(),
                    horizon + 1
                )));
            }
            if let Some(s) = row.iter().flatten().find(|&&s| s >= n_states) {
                return Err(Error::InvalidParameter(format!(
                    "individual {k} has state index {s} but only {n_states} states"
                )));
            }
            cells.extend(row);
        }
        Ok(Self {
            n_states,
            horizon,
            cells,
        })
    }

    pub fn empty(n_states: usize, horizon: usize) -> Self {
        Self {
            n_states,
            horizon,
            cells: Vec::new(),
        }
    }

    pub(crate) fn from_cells(n_states: usize, horizon: usize, cells: Vec<Option<usize>>) -> Self {
        debug_assert_eq!(cells.len() % (horizon + 1), 0);
        Self {
            n_states,
            horizon,
            cells,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    /// Final time index `T`.
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Number of individuals `m`.
    pub fn individuals(&self) -> usize {
        self.cells.len() / (self.horizon + 1)
    }

    pub fn get(&self, k: usize, t: usize) -> Option<usize> {
        self.cells[k * (self.horizon + 1) + t]
    }

    pub fn row(&self, k: usize) -> &[Option<usize>] {
        let w = self.horizon + 1;
        &self.cells[k * w..(k + 1) * w]
    }

    pub(crate) fn row_mut(&mut self, k: usize) -> &mut [Option<usize>] {
        let w = self.horizon + 1;
        &mut self.cells[k * w..(k + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Option<usize>]> {
        self.cells.chunks(self.horizon + 1)
    }

    pub fn is_missing(&self, k: usize, t: usize) -> bool {
        self.get(k, t).is_none()
    }

    /// The missingness indicator table, row-major, `true` where missing.
    pub fn missing_mask(&self) -> Vec<bool> {
        self.cells.iter().map(Option::is_none).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.cells.iter().all(Option::is_some)
    }

    pub fn observed_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    /// Individuals stacked: `self` first, then `other`.
    pub fn concat(&self, other: &SequencePanel) -> Result<SequencePanel> {
        if self.n_states != other.n_states || self.horizon != other.horizon {
            return Err(Error::InvalidParameter(
                "panels differ in state count or horizon".into(),
            ));
        }
        let mut cells = self.cells.clone();
        cells.extend_from_slice(&other.cells);
        Ok(Self::from_cells(self.n_states, self.horizon, cells))
    }

    /// Keeps the listed individuals in the given order.
    pub fn select(&self, individuals: &[usize]) -> SequencePanel {
        let cells = individuals
            .iter()
            .flat_map(|&k| self.row(k).iter().copied())
            .collect();
        Self::from_cells(self.n_states, self.horizon, cells)
    }

    /// True when every individual has at most one observed cell.
    pub fn is_single_observation(&self) -> bool {
        self.rows()
            .all(|row| row.iter().filter(|c| c.is_some()).count() <= 1)
    }
}

/// Counts of one-step transitions `w[i][j]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionCounts {
    r: usize,
    w: Vec<u64>,
}

impl TransitionCounts {
    pub fn zeros(r: usize) -> Self {
        Self { r, w: vec![0; r * r] }
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let r = rows.len();
        if rows.iter().any(|row| row.len() != r) {
            return Err(Error::InvalidParameter("transition counts must be square".into()));
        }
        Ok(Self {
            r,
            w: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.r
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.w[i * self.r + j]
    }

    pub fn row(&self, i: usize) -> &[u64] {
        &self.w[i * self.r..(i + 1) * self.r]
    }

    pub(crate) fn bump(&mut self, i: usize, j: usize) {
        self.w[i * self.r + j] += 1;
    }

    pub fn total(&self) -> u64 {
        self.w.iter().sum()
    }

    pub fn add(&self, other: &TransitionCounts) -> Result<TransitionCounts> {
        if self.r != other.r {
            return Err(Error::InvalidParameter("count tables differ in size".into()));
        }
        Ok(Self {
            r: self.r,
            w: self.w.iter().zip(&other.w).map(|(a, b)| a + b).collect(),
        })
    }

    /// Fails on the first positive count of a forbidden transition.
    pub fn check_support(&self, support: &SupportMask) -> Result<()> {
        if support.dim() != self.r {
            return Err(Error::InvalidParameter(
                "support and counts differ in size".into(),
            ));
        }
        for i in 0..self.r {
            for j in 0..self.r {
                if self.get(i, j) > 0 && !support.allows(i, j) {
                    return Err(Error::InconsistentCounts { from: i + 1, to: j + 1 });
                }
            }
        }
        Ok(())
    }
}

/// Per-time state occupation counts `n_j(t)` for `t = 0..=T`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregateCounts {
    n_states: usize,
    counts: Vec<Vec<u64>>,
}

impl AggregateCounts {
    pub fn new(n_states: usize, counts: Vec<Vec<u64>>) -> Result<Self> {
        if counts.iter().any(|row| row.len() != n_states) {
            return Err(Error::InvalidParameter(format!(
                "every time row needs {n_states} counts"
            )));
        }
        Ok(Self { n_states, counts })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    /// Final time index `T`; `None` for an empty table.
    pub fn horizon(&self) -> Option<usize> {
        self.counts.len().checked_sub(1)
    }

    pub fn at(&self, t: usize) -> &[u64] {
        &self.counts[t]
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.counts
    }

    /// Per-time totals.
    pub fn population(&self) -> Vec<u64> {
        self.counts.iter().map(|row| row.iter().sum()).collect()
    }

    pub fn total(&self) -> u64 {
        self.population().iter().sum()
    }
}

/// Single-observation panel with one individual per counted observation; the
/// inverse of [`aggregate`] up to the order of individuals.
pub fn expand_counts(counts: &AggregateCounts) -> Result<SequencePanel> {
    let horizon = counts
        .horizon()
        .ok_or_else(|| Error::InvalidParameter("aggregate table has no time rows".into()))?;
    let r = counts.n_states();
    let mut cells = Vec::new();
    for (t, row) in counts.rows().iter().enumerate() {
        for (s, &n) in row.iter().enumerate() {
            for _ in 0..n {
                let start = cells.len();
                cells.resize(start + horizon + 1, None);
                cells[start + t] = Some(s);
            }
        }
    }
    Ok(SequencePanel::from_cells(r, horizon, cells))
}

/// `w[i][j]` = number of adjacent pairs `(s_i at t-1, s_j at t)` over all individuals.
pub fn count_transitions(panel: &SequencePanel) -> Result<TransitionCounts> {
    if !panel.is_complete() {
        return Err(Error::IncompleteData);
    }
    let mut w = TransitionCounts::zeros(panel.n_states());
    for row in panel.rows() {
        for pair in row.windows(2) {
            if let [Some(a), Some(b)] = pair {
                w.bump(*a, *b);
            }
        }
    }
    Ok(w)
}

/// Number of individuals observed in each state at each time.
pub fn aggregate(panel: &SequencePanel) -> AggregateCounts {
    let mut counts = vec![vec![0u64; panel.n_states()]; panel.horizon() + 1];
    for row in panel.rows() {
        for (t, cell) in row.iter().enumerate() {
            if let Some(s) = cell {
                counts[t][*s] += 1;
            }
        }
    }
    AggregateCounts {
        n_states: panel.n_states(),
        counts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn expand_counts_inverts_aggregate() {
        let counts = AggregateCounts::new(2, vec![vec![0, 1], vec![2, 0], vec![1, 3]]).unwrap();
        let panel = expand_counts(&counts).unwrap();
        assert_eq!(panel.individuals(), 7);
        assert!(panel.is_single_observation());
        assert_eq!(aggregate(&panel), counts);
    }

    fn complete(rows: &[&[usize]], r: usize) -> SequencePanel {
        let t = rows[0].len() - 1;
        SequencePanel::new(
            r,
            t,
            rows.iter().map(|row| row.iter().map(|&s| Some(s)).collect()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn count_examples() {
        let one = complete(&[&[0, 0, 1]], 2);
        let w = count_transitions(&one).unwrap();
        assert_eq!(w, TransitionCounts::from_rows(&[vec![1, 1], vec![0, 0]]).unwrap());

        let two = one.concat(&one).unwrap();
        let w2 = count_transitions(&two).unwrap();
        assert_eq!(w2, w.add(&w).unwrap());
    }

    #[test]
    fn incomplete_panel_rejected() {
        let p = SequencePanel::new(2, 2, vec![vec![Some(0), None, Some(1)]]).unwrap();
        assert!(matches!(count_transitions(&p), Err(Error::IncompleteData)));
    }

    #[test]
    fn aggregate_examples() {
        let p = complete(&[&[0, 1, 1], &[1, 1, 0], &[0, 0, 0]], 2);
        let a = aggregate(&p);
        assert!(a.population().iter().all(|&n| n == 3));
        assert_eq!(a.at(1), &[1, 2]);

        let single = SequencePanel::new(
            3,
            3,
            vec![
                vec![None, Some(2), None, None],
                vec![None, None, None, Some(0)],
            ],
        )
        .unwrap();
        assert_eq!(aggregate(&single).total(), 2);

        let blank = SequencePanel::new(3, 2, vec![vec![None; 3]; 4]).unwrap();
        assert_eq!(aggregate(&blank).total(), 0);
    }

    #[test]
    fn forbidden_counts_detected() {
        let w = TransitionCounts::from_rows(&[vec![1, 0], vec![2, 3]]).unwrap();
        assert!(matches!(
            w.check_support(&SupportMask::upper_triangular(2)),
            Err(Error::InconsistentCounts { from: 2, to: 1 })
        ));
        assert!(w.check_support(&SupportMask::full(2)).is_ok());
    }

    #[test]
    fn constructor_checks() {
        assert!(SequencePanel::new(2, 1, vec![vec![Some(0)]]).is_err());
        assert!(SequencePanel::new(2, 1, vec![vec![Some(0), Some(2)]]).is_err());
    }

    fn arb_panel() -> impl Strategy<Value = SequencePanel> {
        (1usize..6, 1usize..8).prop_flat_map(|(m, t)| {
            proptest::collection::vec(proptest::collection::vec(0usize..3, t + 1), m).prop_map(
                move |rows| {
                    SequencePanel::new(
                        3,
                        t,
                        rows.into_iter()
                            .map(|row| row.into_iter().map(Some).collect())
                            .collect(),
                    )
                    .unwrap()
                },
            )
        })
    }

    proptest! {
        #[test]
        fn every_pair_counted_once(p in arb_panel()) {
            let w = count_transitions(&p).unwrap();
            prop_assert_eq!(w.total(), (p.individuals() * p.horizon()) as u64);
        }

        #[test]
        fn counts_additive_over_concatenation(a in arb_panel(), b in arb_panel()) {
            if a.horizon() == b.horizon() {
                let joined = a.concat(&b).unwrap();
                let sum = count_transitions(&a).unwrap().add(&count_transitions(&b).unwrap()).unwrap();
                prop_assert_eq!(count_transitions(&joined).unwrap(), sum);
            }
        }

        #[test]
        fn aggregate_permutation_invariant(p in arb_panel()) {
            let order: Vec<usize> = (0..p.individuals()).rev().collect();
            prop_assert_eq!(aggregate(&p), aggregate(&p.select(&order)));
        }
    }
}
