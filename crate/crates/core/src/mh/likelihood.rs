use crate::data::AggregateCounts;
use crate::exact::PriorSpec;
use crate::markov::TransitionMatrix;

/// Log-likelihood of per-time state counts, multinomial coefficients dropped:
/// `Σ_t Σ_j n_j(t) log p_j(t)` with `p(t) = p(0) ψ^t`.
///
/// Returns `-inf` when a state with positive count has zero probability.
pub fn log_likelihood_counts(matrix: &TransitionMatrix, counts: &AggregateCounts, p0: &[f64]) -> f64 {
    let mut p = p0.to_vec();
    let mut total = 0.0;
    for (t, n) in counts.rows().iter().enumerate() {
        if t > 0 {
            p = matrix.step(&p);
        }
        for (&nj, &pj) in n.iter().zip(&p) {
            if nj == 0 {
                continue;
            }
            if pj <= 0.0 {
                return f64::NEG_INFINITY;
            }
            total += nj as f64 * pj.ln();
        }
    }
    total
}

/// Unnormalized Dirichlet log prior `Σ (γ_ij - 1) log ψ_ij` over free rows.
pub fn log_prior(matrix: &TransitionMatrix, prior: &PriorSpec) -> f64 {
    let mut total = 0.0;
    for (i, j) in prior.support().free_entries() {
        let g = prior.gamma(i, j);
        if g == 1.0 {
            continue;
        }
        let v = matrix.get(i, j);
        if v <= 0.0 {
            return if g > 1.0 { f64::NEG_INFINITY } else { f64::INFINITY };
        }
        total += (g - 1.0) * v.ln();
    }
    total
}

pub fn log_posterior(
    matrix: &TransitionMatrix,
    counts: &AggregateCounts,
    prior: &PriorSpec,
    p0: &[f64],
) -> f64 {
    let lp = log_prior(matrix, prior);
    if lp == f64::NEG_INFINITY {
        return lp;
    }
    lp + log_likelihood_counts(matrix, counts, p0)
}
