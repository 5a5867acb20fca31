use rand::{Rng, RngExt};

use crate::error::{Error, Result};
use crate::markov::TransitionMatrix;
use crate::prob::{log_dirichlet_density, sample_dirichlet, DirichletParams};

/// Redraws allowed when a Dirichlet variate underflows to an exact zero.
pub(crate) const MAX_REDRAWS: usize = 1000;

/// Lower bound on every proposal shape parameter. Without it a chain that
/// wanders close to a face of the simplex proposes shapes near zero, whose
/// draws underflow to exact zeros and never come back.
pub const SHAPE_FLOOR: f64 = 1.0;

pub(crate) fn shape(d: f64, x: f64) -> f64 {
    (d * x).max(SHAPE_FLOOR)
}

/// Candidate matrix with the proposal log-densities needed by the acceptance ratio.
#[derive(Debug, Clone)]
pub struct Proposal {
    pub candidate: TransitionMatrix,
    /// `log J(candidate | current)`.
    pub log_forward: f64,
    /// `log J(current | candidate)`.
    pub log_reverse: f64,
}

fn row_params(m: &TransitionMatrix, i: usize, cols: &[usize], d: f64) -> Result<DirichletParams> {
    DirichletParams::new(cols.iter().map(|&j| shape(d, m.get(i, j))).collect())
}

/// Draws every free row `i` from `Dir(d_i ψ_i)` over its supported entries,
/// each shape floored at [`SHAPE_FLOOR`].
///
/// `d` holds one coefficient per free row, in [`crate::markov::SupportMask::free_rows`] order.
pub fn basic_proposal<R: Rng + ?Sized>(
    current: &TransitionMatrix,
    d: &[f64],
    rng: &mut R,
) -> Result<Proposal> {
    let support = current.support();
    let free = support.free_rows();
    if d.len() != free.len() {
        return Err(Error::InvalidParameter(format!(
            "{} tuning coefficients for {} free rows",
            d.len(),
            free.len()
        )));
    }
    let r = current.dim();
    let mut entries = current.entries().to_vec();
    for (&i, &di) in free.iter().zip(d) {
        let cols = support.row_support(i);
        let params = row_params(current, i, &cols, di)?;
        let row = (0..MAX_REDRAWS)
            .map(|_| sample_dirichlet(&params, rng))
            .find(|x| x.iter().all(|&v| v > 0.0))
            .ok_or(Error::DegenerateWeights)?;
        for (&j, v) in cols.iter().zip(row) {
            entries[i * r + j] = v;
        }
    }
    let candidate = TransitionMatrix::from_parts(entries, support.clone());
    let log_forward = basic_log_density(&candidate, current, d)?;
    let log_reverse = basic_log_density(current, &candidate, d)?;
    Ok(Proposal {
        candidate,
        log_forward,
        log_reverse,
    })
}

/// `log J(to | from)` for the basic kernel with coefficients `d`.
pub fn basic_log_density(to: &TransitionMatrix, from: &TransitionMatrix, d: &[f64]) -> Result<f64> {
    let support = from.support();
    let mut total = 0.0;
    for (&i, &di) in support.free_rows().iter().zip(d) {
        let cols = support.row_support(i);
        let x: Vec<f64> = cols.iter().map(|&j| to.get(i, j)).collect();
        total += log_dirichlet_density(&x, &row_params(from, i, &cols, di)?)?;
    }
    Ok(total)
}

/// Metropolis-Hastings acceptance test.
///
/// A uniform variate is consumed on every call so the stream position does not
/// depend on the outcome.
pub fn mh_accept<R: Rng + ?Sized>(
    logpost_cur: f64,
    logpost_cand: f64,
    log_forward: f64,
    log_reverse: f64,
    rng: &mut R,
) -> Result<bool> {
    if logpost_cur == f64::NEG_INFINITY || logpost_cur.is_nan() {
        return Err(Error::InvalidChainState);
    }
    let u: f64 = rng.random();
    if logpost_cand == f64::NEG_INFINITY || logpost_cand.is_nan() {
        return Ok(false);
    }
    let log_ratio = logpost_cand - logpost_cur + log_reverse - log_forward;
    if log_ratio.is_nan() {
        return Ok(false);
    }
    Ok(u.ln() < log_ratio)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::lee_matrix;
    use crate::rng::RandomStream;

    #[test]
    fn candidates_are_centred_with_expected_spread() {
        let current = lee_matrix();
        let d = vec![200.0; 4];
        let mut rng = RandomStream::new(1, 0);
        let n = 100_000;
        let mut sum = [0.0; 16];
        let mut sq = [0.0; 16];
        for _ in 0..n {
            let p = basic_proposal(&current, &d, &mut rng).unwrap();
            assert!(p.candidate.validate().is_ok());
            for (k, v) in p.candidate.entries().iter().enumerate() {
                sum[k] += v;
                sq[k] += v * v;
            }
        }
        for (k, &psi) in current.entries().iter().enumerate() {
            let mean = sum[k] / n as f64;
            assert!((mean - psi).abs() < 0.005);
            if psi > 0.0 {
                let var = sq[k] / n as f64 - mean * mean;
                let expected = psi * (1.0 - psi) / 201.0;
                assert!((var / expected - 1.0).abs() < 0.1, "entry {k}: {var} vs {expected}");
            }
        }
    }

    #[test]
    fn symmetric_at_equality() {
        let m = lee_matrix();
        let d = vec![500.0, 800.0, 1200.0, 300.0];
        let f = basic_log_density(&m, &m, &d).unwrap();
        assert!(f.is_finite());
        let mut rng = RandomStream::new(2, 0);
        for _ in 0..100 {
            assert!(mh_accept(-10.0, -10.0, f, f, &mut rng).unwrap());
        }
    }

    #[test]
    fn acceptance_rules() {
        let mut rng = RandomStream::new(3, 0);
        assert!(!mh_accept(-1.0, f64::NEG_INFINITY, 0.0, 0.0, &mut rng).unwrap());
        assert!(matches!(
            mh_accept(f64::NEG_INFINITY, -1.0, 0.0, 0.0, &mut rng),
            Err(Error::InvalidChainState)
        ));
        let n = 100_000;
        let half = 0.5f64.ln();
        let hits = (0..n)
            .filter(|_| mh_accept(0.0, half, 0.0, 0.0, &mut rng).unwrap())
            .count();
        assert!((hits as f64 / n as f64 - 0.5).abs() < 0.005);
    }

    #[test]
    fn coefficient_count_is_checked() {
        let mut rng = RandomStream::new(4, 0);
        assert!(basic_proposal(&lee_matrix(), &[100.0], &mut rng).is_err());
    }
}
