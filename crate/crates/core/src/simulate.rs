//! Ground-truth data generation: trajectories, masking schemes and the
//! reliability (RRA) family of upper-triangular matrices.

use rand::{Rng, RngExt};

use crate::data::SequencePanel;
use crate::error::{Error, Result};
use crate::markov::{StateDistribution, SupportMask, TransitionMatrix};
use crate::prob::{sample_categorical, sample_dirichlet, DirichletParams};

/// Whole-matrix attempts before the RRA sampler gives up.
pub const RRA_MAX_ATTEMPTS: u64 = 1_000_000;

/// Complete trajectories: `t = 0` from `p0`, then one row of `matrix` per step.
pub fn simulate_panel<R: Rng + ?Sized>(
    matrix: &TransitionMatrix,
    p0: &StateDistribution,
    m: usize,
    horizon: usize,
    rng: &mut R,
) -> SequencePanel {
    let r = matrix.dim();
    let mut cells = Vec::with_capacity(m * (horizon + 1));
    for _ in 0..m {
        let mut s = sample_categorical(p0.probs(), rng).expect("p0 is a distribution");
        cells.push(Some(s));
        for _ in 0..horizon {
            s = sample_categorical(matrix.row(s), rng).expect("rows are distributions");
            cells.push(Some(s));
        }
    }
    SequencePanel::from_cells(r, horizon, cells)
}

/// Probability of keeping an observed cell at `t ≥ 1`.
#[derive(Debug, Clone, PartialEq)]
pub enum KeepSchedule {
    Constant(f64),
    /// Indexed by `t`; entry 0 is ignored because `t = 0` is always kept.
    PerTime(Vec<f64>),
}

impl KeepSchedule {
    fn at(&self, t: usize) -> f64 {
        match self {
            KeepSchedule::Constant(p) => *p,
            KeepSchedule::PerTime(ps) => ps[t],
        }
    }

    fn check(&self, horizon: usize) -> Result<()> {
        let probs: Vec<f64> = match self {
            KeepSchedule::Constant(p) => vec![*p],
            KeepSchedule::PerTime(ps) => {
                if ps.len() != horizon + 1 {
                    return Err(Error::InvalidParameter(format!(
                        "keep schedule has {} entries, expected {}",
                        ps.len(),
                        horizon + 1
                    )));
                }
                ps[1..].to_vec()
            }
        };
        match probs.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
            Some(p) => Err(Error::InvalidParameter(format!(
                "keep probability must be in (0, 1], got {p}"
            ))),
            None => Ok(()),
        }
    }
}

/// Hides each cell with `t ≥ 1` independently; the initial state stays known.
pub fn mask_random<R: Rng + ?Sized>(
    panel: &SequencePanel,
    keep: &KeepSchedule,
    rng: &mut R,
) -> Result<SequencePanel> {
    keep.check(panel.horizon())?;
    let mut out = panel.clone();
    for k in 0..out.individuals() {
        let row = out.row_mut(k);
        for (t, cell) in row.iter_mut().enumerate().skip(1) {
            if rng.random::<f64>() >= keep.at(t) {
                *cell = None;
            }
        }
    }
    Ok(out)
}

/// Keeps one cell per individual at a time drawn uniformly from `1..=T`;
/// everything else, `t = 0` included, becomes missing.
pub fn mask_single_observation<R: Rng + ?Sized>(
    panel: &SequencePanel,
    rng: &mut R,
) -> Result<SequencePanel> {
    if panel.horizon() < 1 {
        return Err(Error::InvalidParameter(
            "single-observation masking needs T >= 1".into(),
        ));
    }
    mask_single_observation_within(panel, 1, panel.horizon(), rng)
}

/// Like [`mask_single_observation`] with the observation time drawn from `first..=last`.
pub fn mask_single_observation_within<R: Rng + ?Sized>(
    panel: &SequencePanel,
    first: usize,
    last: usize,
    rng: &mut R,
) -> Result<SequencePanel> {
    if first > last || last > panel.horizon() {
        return Err(Error::InvalidParameter(format!(
            "observation window {first}..={last} does not fit T = {}",
            panel.horizon()
        )));
    }
    let mut out = panel.clone();
    for k in 0..out.individuals() {
        let keep_t = rng.random_range(first..=last);
        for (t, cell) in out.row_mut(k).iter_mut().enumerate() {
            if t != keep_t {
                *cell = None;
            }
        }
    }
    Ok(out)
}

/// Missing-not-at-random masking: a cell at `t ≥ 1` whose true state is `s_i`
/// goes missing with probability `eta[i]`.
pub fn mask_state_dependent<R: Rng + ?Sized>(
    panel: &SequencePanel,
    eta: &[f64],
    rng: &mut R,
) -> Result<SequencePanel> {
    if eta.len() != panel.n_states() || eta.iter().any(|e| !(0.0..=1.0).contains(e)) {
        return Err(Error::InvalidParameter(
            "eta needs one probability in [0, 1] per state".into(),
        ));
    }
    let mut out = panel.clone();
    for k in 0..out.individuals() {
        for cell in out.row_mut(k).iter_mut().skip(1) {
            if let Some(s) = *cell {
                if rng.random::<f64>() < eta[s] {
                    *cell = None;
                }
            }
        }
    }
    Ok(out)
}

/// An accepted RRA matrix and the number of whole-matrix attempts it took.
#[derive(Debug, Clone)]
pub struct RraSample {
    pub matrix: TransitionMatrix,
    pub attempts: u64,
}

fn is_absorbing_upper_triangular(m: &TransitionMatrix) -> bool {
    let r = m.dim();
    (0..r).all(|i| (0..i).all(|j| m.get(i, j) == 0.0)) && m.get(r - 1, r - 1) == 1.0
}

/// Row `i` of an upper-triangular matrix satisfies the ordering constraints:
/// for `k = 1..=r-i-2`, `ψ_ii > ψ_{i,i+k} > Σ_{p>k} ψ_{i,i+p}`, and the
/// second-to-last row has `ψ_{r-1,r-1} > ψ_{r-1,r}` (1-based).
fn row_ordering_holds(row: &[f64], i: usize) -> bool {
    let r = row.len();
    if i + 2 == r {
        return row[i] > row[i + 1];
    }
    if i + 1 >= r {
        return true;
    }
    (1..(r - i - 1)).all(|k| {
        let tail: f64 = row[i + k + 1..].iter().sum();
        row[i] > row[i + k] && row[i + k] > tail
    })
}

/// Checks every RRA constraint family for a matrix of any dimension `r ≥ 2`:
/// upper-triangular with absorbing last state, per-row decreasing order, and a
/// nondecreasing diagonal.
pub fn rra_constraints_hold(m: &TransitionMatrix) -> bool {
    let r = m.dim();
    if r < 2 || m.validate().is_err() || !is_absorbing_upper_triangular(m) {
        return false;
    }
    let rows_ok = (0..r - 1).all(|i| row_ordering_holds(m.row(i), i));
    let diag_ok = (0..r - 1).all(|i| m.get(i, i) <= m.get(i + 1, i + 1));
    rows_ok && diag_ok
}

/// Draws an upper-triangular degradation matrix with absorbing last state that
/// satisfies [`rra_constraints_hold`] and keeps doing so under every
/// [`collapse_matrix`] step down to `r = 2`.
///
/// Rows are uniform Dirichlet draws rejected until they meet the ordering
/// constraints; the whole matrix is redrawn until the diagonal is nondecreasing.
pub fn sample_rra_matrix<R: Rng + ?Sized>(r_max: usize, rng: &mut R) -> Result<RraSample> {
    if r_max < 3 {
        return Err(Error::InvalidParameter("RRA matrices need r_max >= 3".into()));
    }
    let r = r_max;
    for attempt in 1..=RRA_MAX_ATTEMPTS {
        let mut entries = vec![0.0; r * r];
        entries[r * r - 1] = 1.0;
        for i in 0..r - 1 {
            let k = r - i;
            let uniform = DirichletParams::new(vec![1.0; k]).expect("k >= 2");
            let row = loop {
                let draw = sample_dirichlet(&uniform, rng);
                let mut row = vec![0.0; r];
                row[i..].copy_from_slice(&draw);
                // the diagonal must also dominate everything after it, otherwise
                // collapsing the last columns breaks the order of row r'-1
                let rest: f64 = row[i + 1..].iter().sum();
                if row_ordering_holds(&row, i) && row[i] > rest {
                    break row;
                }
            };
            entries[i * r..(i + 1) * r].copy_from_slice(&row);
        }
        if (0..r - 1).all(|i| entries[i * r + i] <= entries[(i + 1) * r + i + 1]) {
            let matrix = TransitionMatrix::new(entries, SupportMask::upper_triangular(r))?;
            return Ok(RraSample {
                matrix,
                attempts: attempt,
            });
        }
    }
    Err(Error::RejectionExhausted(RRA_MAX_ATTEMPTS))
}

/// Merges the last two states: columns `r-1` and `r` are summed and the last
/// row becomes absorbing.
pub fn collapse_matrix(m: &TransitionMatrix) -> Result<TransitionMatrix> {
    let r = m.dim();
    if r < 3 {
        return Err(Error::Structure(format!("cannot collapse a {r}x{r} matrix")));
    }
    if !is_absorbing_upper_triangular(m) {
        return Err(Error::Structure(
            "collapse needs an upper-triangular matrix with absorbing last state".into(),
        ));
    }
    let n = r - 1;
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n - 1 {
            entries[i * n + j] = m.get(i, j);
        }
        entries[i * n + n - 1] = m.get(i, n - 1) + m.get(i, n);
    }
    // the former second-to-last row merges into the new absorbing row
    for j in 0..n - 1 {
        entries[(n - 1) * n + j] = 0.0;
    }
    entries[n * n - 1] = 1.0;
    TransitionMatrix::new(entries, SupportMask::upper_triangular(n))
}

/// `ψ^(r_max), ψ^(r_max-1), …, ψ^(r_min)` from one RRA draw.
pub fn rra_family<R: Rng + ?Sized>(
    r_max: usize,
    r_min: usize,
    rng: &mut R,
) -> Result<Vec<TransitionMatrix>> {
    if r_min < 2 || r_min > r_max {
        return Err(Error::InvalidParameter(format!(
            "family range {r_min}..={r_max} is invalid"
        )));
    }
    let top = sample_rra_matrix(r_max, rng)?.matrix;
    let mut family = vec![top];
    while family.last().map(TransitionMatrix::dim) > Some(r_min) {
        let next = collapse_matrix(family.last().expect("nonempty"))?;
        family.push(next);
    }
    Ok(family)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::aggregate;
    use crate::markov::propagate;
    use crate::presets::{lee_initial, lee_matrix};
    use crate::rng::RandomStream;

    #[test]
    fn windowed_single_observation_stays_in_window() {
        let mut rng = RandomStream::new(3, 0);
        let full = simulate_panel(&lee_matrix(), &lee_initial(), 300, 7, &mut rng);
        let masked = mask_single_observation_within(&full, 2, 7, &mut rng).unwrap();
        assert!(masked.is_single_observation());
        let counts = aggregate(&masked);
        assert_eq!(counts.population()[..2], [0, 0]);
        assert!(counts.population()[2..].iter().all(|&n| n > 0));
        assert!(mask_single_observation_within(&full, 5, 8, &mut rng).is_err());
    }

    #[test]
    fn absorbing_start_stays_put() {
        let psi = TransitionMatrix::from_rows(&[
            vec![0.7, 0.2, 0.05, 0.05],
            vec![0.0, 0.8, 0.1, 0.1],
            vec![0.0, 0.0, 0.9, 0.1],
            vec![0.0, 0.0, 0.0, 1.0],
        ])
        .unwrap();
        let p0 = StateDistribution::initial(vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        let mut rng = RandomStream::new(1, 0);
        let panel = simulate_panel(&psi, &p0, 50, 10, &mut rng);
        assert!(panel.rows().all(|row| row.iter().all(|&c| c == Some(3))));
    }

    #[test]
    fn identity_keeps_initial_state() {
        let mut rng = RandomStream::new(2, 0);
        let panel = simulate_panel(&TransitionMatrix::identity(4), &lee_initial(), 100, 8, &mut rng);
        assert!(panel.rows().all(|row| row.iter().all(|&c| c == row[0])));
    }

    #[test]
    fn simulation_is_reproducible() {
        let a = simulate_panel(&lee_matrix(), &lee_initial(), 30, 5, &mut RandomStream::new(9, 3));
        let b = simulate_panel(&lee_matrix(), &lee_initial(), 30, 5, &mut RandomStream::new(9, 3));
        assert_eq!(a, b);
    }

    #[test]
    fn frequencies_follow_propagation() {
        let mut rng = RandomStream::new(3, 0);
        let m = 1_000_000;
        let panel = simulate_panel(&lee_matrix(), &lee_initial(), m, 5, &mut rng);
        let counts = aggregate(&panel);
        for t in 0..=5 {
            let p = propagate(&lee_initial(), &lee_matrix(), t);
            for j in 0..4 {
                let freq = counts.at(t)[j] as f64 / m as f64;
                assert!((freq - p.probs()[j]).abs() < 0.005, "t={t} j={j}");
            }
        }
    }

    #[test]
    fn random_mask_limits() {
        let mut rng = RandomStream::new(4, 0);
        let panel = simulate_panel(&lee_matrix(), &lee_initial(), 100, 10, &mut rng);
        assert_eq!(mask_random(&panel, &KeepSchedule::Constant(1.0), &mut rng).unwrap(), panel);
        let sparse = mask_random(&panel, &KeepSchedule::Constant(1e-12), &mut rng).unwrap();
        assert_eq!(sparse.observed_cells(), 100);
        assert!(sparse.rows().all(|row| row[0].is_some()));
        assert!(mask_random(&panel, &KeepSchedule::Constant(0.0), &mut rng).is_err());
        assert!(mask_random(&panel, &KeepSchedule::PerTime(vec![1.0; 3]), &mut rng).is_err());
    }

    #[test]
    fn random_mask_fraction() {
        let mut rng = RandomStream::new(5, 0);
        let panel = simulate_panel(&lee_matrix(), &lee_initial(), 1000, 20, &mut rng);
        let masked = mask_random(&panel, &KeepSchedule::Constant(0.5), &mut rng).unwrap();
        let kept = masked.observed_cells() - 1000;
        let frac = kept as f64 / 20_000.0;
        assert!((frac - 0.5).abs() < 0.02);
        // observed values are never altered
        for k in 0..1000 {
            for t in 0..=20 {
                if let Some(s) = masked.get(k, t) {
                    assert_eq!(Some(s), panel.get(k, t));
                }
            }
        }
    }

    #[test]
    fn single_observation_mask() {
        let mut rng = RandomStream::new(6, 0);
        let panel = simulate_panel(&lee_matrix(), &lee_initial(), 500, 20, &mut rng);
        let masked = mask_single_observation(&panel, &mut rng).unwrap();
        for (k, row) in masked.rows().enumerate() {
            let observed: Vec<usize> = (0..=20).filter(|&t| row[t].is_some()).collect();
            assert_eq!(observed.len(), 1);
            assert!(observed[0] >= 1);
            assert_eq!(row[observed[0]], panel.get(k, observed[0]));
        }

        let short = simulate_panel(&lee_matrix(), &lee_initial(), 50, 1, &mut rng);
        let masked = mask_single_observation(&short, &mut rng).unwrap();
        assert!(masked.rows().all(|row| row[0].is_none() && row[1].is_some()));

        let flat = simulate_panel(&lee_matrix(), &lee_initial(), 5, 0, &mut rng);
        assert!(mask_single_observation(&flat, &mut rng).is_err());
    }

    #[test]
    fn single_observation_times_uniform() {
        let mut rng = RandomStream::new(7, 0);
        let m = 100_000;
        let panel = simulate_panel(&lee_matrix(), &lee_initial(), m, 20, &mut rng);
        let masked = mask_single_observation(&panel, &mut rng).unwrap();
        let mut hist = [0usize; 21];
        for row in masked.rows() {
            hist[row.iter().position(Option::is_some).unwrap()] += 1;
        }
        assert_eq!(hist[0], 0);
        for &h in &hist[1..] {
            assert!((h as f64 / m as f64 - 0.05).abs() < 0.005);
        }
    }

    #[test]
    fn state_dependent_mask_rates() {
        let mut rng = RandomStream::new(8, 0);
        let psi = TransitionMatrix::from_rows(&[
            vec![0.5, 0.3, 0.2],
            vec![0.2, 0.5, 0.3],
            vec![0.3, 0.2, 0.5],
        ])
        .unwrap();
        let p0 = StateDistribution::initial(vec![1.0 / 3.0; 3]).unwrap();
        let panel = simulate_panel(&psi, &p0, 2000, 20, &mut rng);
        let eta = [0.2, 0.5, 0.8];
        let masked = mask_state_dependent(&panel, &eta, &mut rng).unwrap();
        let mut seen = [0usize; 3];
        let mut lost = [0usize; 3];
        for k in 0..2000 {
            assert!(masked.get(k, 0).is_some());
            for t in 1..=20 {
                let s = panel.get(k, t).unwrap();
                seen[s] += 1;
                if masked.get(k, t).is_none() {
                    lost[s] += 1;
                }
            }
        }
        for i in 0..3 {
            assert!((lost[i] as f64 / seen[i] as f64 - eta[i]).abs() < 0.02);
        }
    }

    #[test]
    fn rra_three_state_ordering() {
        let mut rng = RandomStream::new(10, 0);
        for _ in 0..200 {
            let m = sample_rra_matrix(3, &mut rng).unwrap().matrix;
            assert!(m.get(0, 0) > m.get(0, 1) && m.get(0, 1) > m.get(0, 2));
            assert!(m.get(1, 1) > m.get(1, 2));
            assert!(rra_constraints_hold(&m));
        }
        assert!(sample_rra_matrix(2, &mut rng).is_err());
    }

    #[test]
    fn rra_diagonal_nondecreasing() {
        let mut rng = RandomStream::new(11, 0);
        for _ in 0..1000 {
            let m = sample_rra_matrix(5, &mut rng).unwrap().matrix;
            assert!((0..4).all(|i| m.get(i, i) <= m.get(i + 1, i + 1)));
        }
    }

    #[test]
    fn collapse_example() {
        let m = TransitionMatrix::from_rows(&[
            vec![0.7, 0.2, 0.1],
            vec![0.0, 0.8, 0.2],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        let c = collapse_matrix(&m).unwrap();
        let want = TransitionMatrix::from_rows(&[vec![0.7, 0.3], vec![0.0, 1.0]]).unwrap();
        for (a, b) in c.entries().iter().zip(want.entries()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(collapse_matrix(&want).is_err());
        assert!(collapse_matrix(&lee_matrix()).is_err());
    }

    #[test]
    fn collapse_composes() {
        let mut rng = RandomStream::new(12, 0);
        let m4 = sample_rra_matrix(4, &mut rng).unwrap().matrix;
        let twice = collapse_matrix(&collapse_matrix(&m4).unwrap()).unwrap();
        let fam = rra_family(4, 2, &mut RandomStream::new(12, 0)).unwrap();
        assert_eq!(fam.len(), 3);
        assert_eq!(fam[2], twice);
    }

    #[test]
    fn displayed_constraints_alone_do_not_survive_collapse() {
        // (0.45, 0.35, 0.2) meets the displayed ordering but its collapse (0.45, 0.55) does not
        let m = TransitionMatrix::from_rows(&[
            vec![0.42, 0.3, 0.18, 0.1],
            vec![0.0, 0.45, 0.35, 0.2],
            vec![0.0, 0.0, 0.9, 0.1],
            vec![0.0, 0.0, 0.0, 1.0],
        ])
        .unwrap();
        assert!(rra_constraints_hold(&m));
        assert!(!rra_constraints_hold(&collapse_matrix(&m).unwrap()));
    }
}
