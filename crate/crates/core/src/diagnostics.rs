//! Brooks-Gelman convergence monitoring and error metrics against a known truth.

use crate::error::{Error, Result};
use crate::markov::TransitionMatrix;

/// Quasi-stationarity is declared once the max PSRF stays below this.
pub const RT_THRESHOLD: f64 = 1.1;
pub const DEFAULT_CHECK_INTERVAL: usize = 100;
pub const DEFAULT_PATIENCE: usize = 5;

/// Potential scale reduction factor of `c` scalar chains, computed on the
/// second half of each (equal-length) trace.
///
/// `√(V̂/W)` with `V̂ = (n-1)/n·W + (1 + 1/c)·B/n`. Returns 1 when every
/// chain is constant at the same value and `+inf` when chains are constant at
/// different values.
pub fn psrf(chains: &[&[f64]]) -> Result<f64> {
    let c = chains.len();
    if c < 2 {
        return Err(Error::InvalidParameter(format!(
            "PSRF needs at least 2 chains, got {c}"
        )));
    }
    let len = chains.iter().map(|x| x.len()).min().unwrap_or(0);
    if len < 4 {
        return Err(Error::InvalidParameter(format!(
            "PSRF needs at least 4 draws per chain, got {len}"
        )));
    }
    let start = len / 2;
    let n = (len - start) as f64;
    let halves: Vec<&[f64]> = chains.iter().map(|x| &x[start..len]).collect();
    // constant halves are special-cased so rounding in the mean cannot fake a spread
    let constant = |h: &[f64]| h.iter().all(|&v| v == h[0]);
    let means: Vec<f64> = halves
        .iter()
        .map(|h| if constant(h) { h[0] } else { h.iter().sum::<f64>() / n })
        .collect();
    let w = halves
        .iter()
        .zip(&means)
        .filter(|(h, _)| !constant(h))
        .map(|(h, m)| h.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0))
        .sum::<f64>()
        / c as f64;
    let grand = means.iter().sum::<f64>() / c as f64;
    let b_over_n = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (c as f64 - 1.0);
    if w == 0.0 {
        return Ok(if b_over_n == 0.0 { 1.0 } else { f64::INFINITY });
    }
    let v_hat = (n - 1.0) / n * w + (1.0 + 1.0 / c as f64) * b_over_n;
    Ok((v_hat / w).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckPoint {
    /// Number of iterations seen by this check.
    pub iter: usize,
    pub psrf: Vec<f64>,
    pub max_psrf: f64,
    pub rt_met: bool,
}

/// PSRF values at regularly spaced check points.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiagnosticTrace {
    pub points: Vec<CheckPoint>,
}

impl DiagnosticTrace {
    pub fn push(&mut self, point: CheckPoint) {
        debug_assert!(self.points.last().is_none_or(|p| p.iter < point.iter));
        self.points.push(point);
    }

    /// CSV with columns `check_iter,max_psrf,rt_met`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("check_iter,max_psrf,rt_met\n");
        for p in &self.points {
            s.push_str(&format!("{},{},{}\n", p.iter, p.max_psrf, u8::from(p.rt_met)));
        }
        s
    }
}

/// Evaluates the max-over-parameters PSRF on the first `iter` draws.
///
/// `chains[c][k]` is the trace of parameter `k` in chain `c`.
pub fn check_point(chains: &[Vec<Vec<f64>>], iter: usize) -> Result<CheckPoint> {
    let n_params = chains.first().map(Vec::len).unwrap_or(0);
    let mut values = Vec::with_capacity(n_params);
    for k in 0..n_params {
        let per_chain: Vec<&[f64]> = chains.iter().map(|c| &c[k][..iter]).collect();
        values.push(psrf(&per_chain)?);
    }
    // no free parameter: nothing can fail to mix
    let max_psrf = values.iter().cloned().fold(1.0f64, f64::max);
    let max_psrf = if values.iter().any(|v| v.is_nan()) {
        f64::INFINITY
    } else {
        max_psrf
    };
    Ok(CheckPoint {
        iter,
        psrf: values,
        max_psrf,
        rt_met: max_psrf < RT_THRESHOLD,
    })
}

/// Check points every `check_interval` iterations over recorded traces.
pub fn diagnostic_trace(chains: &[Vec<Vec<f64>>], check_interval: usize) -> Result<DiagnosticTrace> {
    if check_interval == 0 {
        return Err(Error::InvalidParameter("check interval must be positive".into()));
    }
    let len = chains
        .iter()
        .flat_map(|c| c.iter().map(Vec::len))
        .min()
        .unwrap_or(0);
    let mut trace = DiagnosticTrace::default();
    let mut iter = check_interval;
    while iter <= len {
        if iter >= 4 {
            trace.push(check_point(chains, iter)?);
        }
        iter += check_interval;
    }
    Ok(trace)
}

/// First check point that opens a run of `patience` consecutive points with
/// the rule of thumb met; `None` if that never happens.
pub fn detect_burn_in(trace: &DiagnosticTrace, patience: usize) -> Option<usize> {
    let patience = patience.max(1);
    let mut run = 0;
    for (idx, p) in trace.points.iter().enumerate() {
        if p.rt_met {
            run += 1;
            if run == patience {
                return Some(trace.points[idx + 1 - patience].iter);
            }
        } else {
            run = 0;
        }
    }
    None
}

/// [`diagnostic_trace`] followed by [`detect_burn_in`].
pub fn detect_burn_in_from_traces(
    chains: &[Vec<Vec<f64>>],
    check_interval: usize,
    patience: usize,
) -> Result<Option<usize>> {
    if chains.len() < 2 {
        return Err(Error::InvalidParameter("burn-in detection needs 2 chains".into()));
    }
    Ok(detect_burn_in(&diagnostic_trace(chains, check_interval)?, patience))
}

/// Entry-wise and overall discrepancies between an estimate and the truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMetrics {
    /// Row-major; `|est - true| / true` on supported entries with `true > 0`,
    /// absolute error on supported zeros, `None` off the support.
    pub relative: Vec<Option<f64>>,
    /// `‖est - true‖₂ / ‖true‖₂` over supported entries.
    pub relative_euclidean: f64,
}

pub fn error_metrics(estimate: &TransitionMatrix, truth: &TransitionMatrix) -> Result<ErrorMetrics> {
    if estimate.dim() != truth.dim() {
        return Err(Error::InvalidParameter(format!(
            "cannot compare a {0}x{0} estimate with a {1}x{1} truth",
            estimate.dim(),
            truth.dim()
        )));
    }
    let r = truth.dim();
    let support = truth.support();
    let mut relative = vec![None; r * r];
    let mut diff2 = 0.0;
    let mut norm2 = 0.0;
    for i in 0..r {
        for j in 0..r {
            if !support.allows(i, j) && !estimate.support().allows(i, j) {
                continue;
            }
            let (e, t) = (estimate.get(i, j), truth.get(i, j));
            let abs = (e - t).abs();
            relative[i * r + j] = Some(if t > 0.0 { abs / t } else { abs });
            diff2 += abs * abs;
            norm2 += t * t;
        }
    }
    Ok(ErrorMetrics {
        relative,
        relative_euclidean: (diff2 / norm2).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomStream;
    use proptest::prelude::*;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn identical_chains_fall_below_one() {
        let x: Vec<f64> = (0..200).map(|k| ((k * 37) % 11) as f64).collect();
        let got = psrf(&[&x, &x, &x]).unwrap();
        let n: f64 = 100.0;
        assert!((got - ((n - 1.0) / n).sqrt()).abs() < 1e-12);
        assert!(got < 1.0);
    }

    #[test]
    fn constant_chains() {
        let x = vec![0.3; 50];
        assert_eq!(psrf(&[&x, &x]).unwrap(), 1.0);
        let y = vec![0.4; 50];
        assert_eq!(psrf(&[&x, &y]).unwrap(), f64::INFINITY);
    }

    #[test]
    fn separated_chains() {
        let mut rng = RandomStream::new(1, 0);
        let a: Vec<f64> = (0..1000).map(|_| Normal::new(0.0, 1.0).unwrap().sample(&mut rng)).collect();
        let b: Vec<f64> = (0..1000).map(|_| Normal::new(10.0, 1.0).unwrap().sample(&mut rng)).collect();
        assert!(psrf(&[&a, &b]).unwrap() > 1.1);
    }

    #[test]
    fn psrf_needs_two_chains_and_four_draws() {
        let x = vec![1.0, 2.0, 3.0, 4.0];
        assert!(psrf(&[&x]).is_err());
        assert!(psrf(&[&x[..3], &x[..3]]).is_err());
    }

    #[test]
    fn burn_in_examples() {
        let x: Vec<f64> = (0..2000).map(|k| (k as f64 * 0.37).sin()).collect();
        let chains = vec![vec![x.clone()], vec![x.clone()], vec![x]];
        assert_eq!(detect_burn_in_from_traces(&chains, 100, 5).unwrap(), Some(100));

        let lo: Vec<f64> = (0..2000).map(|k| (k as f64).sin() * 0.1).collect();
        let hi: Vec<f64> = lo.iter().map(|v| v + 1.0).collect();
        let chains = vec![vec![lo], vec![hi]];
        assert_eq!(detect_burn_in_from_traces(&chains, 100, 5).unwrap(), None);
    }

    #[test]
    fn patience_counts_consecutive_points() {
        let pt = |iter, rt_met| CheckPoint { iter, psrf: vec![], max_psrf: 1.0, rt_met };
        let trace = DiagnosticTrace {
            points: vec![pt(100, true), pt(200, false), pt(300, true), pt(400, true), pt(500, true)],
        };
        assert_eq!(detect_burn_in(&trace, 1), Some(100));
        assert_eq!(detect_burn_in(&trace, 2), Some(300));
        assert_eq!(detect_burn_in(&trace, 3), Some(300));
        assert_eq!(detect_burn_in(&trace, 4), None);
    }

    #[test]
    fn metrics_examples() {
        let truth = TransitionMatrix::from_rows(&[vec![0.6, 0.4], vec![0.0, 1.0]]).unwrap();
        let m = error_metrics(&truth, &truth).unwrap();
        assert!(m.relative.iter().flatten().all(|&v| v == 0.0));
        assert_eq!(m.relative_euclidean, 0.0);

        let est = TransitionMatrix::from_rows(&[vec![0.58, 0.42], vec![0.0, 1.0]]).unwrap();
        let m = error_metrics(&est, &truth).unwrap();
        assert!((m.relative[1].unwrap() - 0.05).abs() < 1e-12);
        assert_eq!(m.relative[2], None);

        let scaled = TransitionMatrix::from_parts(
            truth.entries().iter().map(|v| v * 1.05).collect(),
            truth.support().clone(),
        );
        assert!((error_metrics(&scaled, &truth).unwrap().relative_euclidean - 0.05).abs() < 1e-12);
        assert!(error_metrics(&TransitionMatrix::identity(3), &truth).is_err());
    }

    fn arb_chains() -> impl Strategy<Value = Vec<Vec<f64>>> {
        proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, 40), 2..5)
    }

    proptest! {
        #[test]
        fn psrf_affine_invariant(chains in arb_chains(), a in 0.1f64..10.0, b in -5.0f64..5.0, flip in any::<bool>()) {
            let a = if flip { -a } else { a };
            let refs: Vec<&[f64]> = chains.iter().map(Vec::as_slice).collect();
            let mapped: Vec<Vec<f64>> = chains.iter().map(|c| c.iter().map(|x| a * x + b).collect()).collect();
            let mrefs: Vec<&[f64]> = mapped.iter().map(Vec::as_slice).collect();
            let (p, q) = (psrf(&refs).unwrap(), psrf(&mrefs).unwrap());
            prop_assert!((p - q).abs() < 1e-9 * p.max(1.0));
        }

        #[test]
        fn larger_patience_never_earlier(flags in proptest::collection::vec(any::<bool>(), 1..40), p in 1usize..6) {
            let trace = DiagnosticTrace {
                points: flags.iter().enumerate().map(|(k, &f)| CheckPoint { iter: (k + 1) * 100, psrf: vec![], max_psrf: 1.0, rt_met: f }).collect(),
            };
            match (detect_burn_in(&trace, p), detect_burn_in(&trace, p + 1)) {
                (_, None) => {}
                (Some(a), Some(b)) => prop_assert!(a <= b),
                (None, Some(_)) => prop_assert!(false),
            }
        }

        #[test]
        fn euclidean_triangle_inequality(x in proptest::collection::vec(0.01f64..1.0, 3), y in proptest::collection::vec(0.01f64..1.0, 3), z in proptest::collection::vec(0.01f64..1.0, 3)) {
            let mk = |v: &Vec<f64>| TransitionMatrix::from_rows(&[vec![v[0], 1.0 - v[0]], vec![v[1], 1.0 - v[1]]]).unwrap_or_else(|_| TransitionMatrix::identity(2));
            let (a, b, c) = (mk(&x), mk(&y), mk(&z));
            // absolute distances scale by the same 1/‖truth‖ so the triangle inequality carries over
            let d = |u: &TransitionMatrix, v: &TransitionMatrix| error_metrics(u, v).unwrap().relative_euclidean * v.entries().iter().map(|e| e * e).sum::<f64>().sqrt();
            prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
        }
    }
}
