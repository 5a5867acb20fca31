use rand::RngExt;

use super::adaptive::{adaptive_proposal, HistoryWindow};
use super::likelihood::log_posterior;
use super::proposal::{basic_proposal, mh_accept};
use super::KernelKind;
use crate::chains::{run_lockstep, Schedule};
use crate::data::AggregateCounts;
use crate::diagnostics::{DiagnosticTrace, DEFAULT_CHECK_INTERVAL, DEFAULT_PATIENCE};
use crate::error::{Error, Result};
use crate::exact::PriorSpec;
use crate::markov::{SupportMask, TransitionMatrix};
use crate::posterior::{Draw, MhStepInfo, PosteriorSample};
use crate::rng::RandomStream;

/// Attempts at drawing a starting matrix with finite posterior density.
const INIT_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct MhConfig {
    pub kernel: KernelKind,
    /// Each iteration draws `d_i` uniformly from this interval.
    pub d_range: (f64, f64),
    /// Number of distinct past states calibrating the adaptive kernels.
    pub p_window: usize,
    /// First iteration allowed to use the adaptive kernel.
    pub adapt_start: usize,
    /// Iteration after which the kernel is frozen to the basic one, unless the
    /// rule of thumb is met earlier.
    pub n_adapt: usize,
    pub n_iter: usize,
    pub n_chains: usize,
    pub check_interval: usize,
    pub patience: usize,
    pub stop_at_burn_in: bool,
}

impl Default for MhConfig {
    fn default() -> Self {
        Self {
            kernel: KernelKind::Basic,
            d_range: (100.0, 2500.0),
            p_window: 30,
            adapt_start: 200,
            n_adapt: 5000,
            n_iter: 20_000,
            n_chains: 3,
            check_interval: DEFAULT_CHECK_INTERVAL,
            patience: DEFAULT_PATIENCE,
            stop_at_burn_in: false,
        }
    }
}

impl MhConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.d_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::Config(format!("d range [{lo}, {hi}] must be positive and ordered")));
        }
        if self.p_window < 3 {
            return Err(Error::Config("history window needs at least 3 states".into()));
        }
        if self.adapt_start <= self.p_window {
            return Err(Error::Config(format!(
                "adaptation start {} must exceed the window size {}",
                self.adapt_start, self.p_window
            )));
        }
        if self.n_chains == 0 || self.n_iter == 0 {
            return Err(Error::Config("need at least one chain and one iteration".into()));
        }
        if self.check_interval == 0 || self.patience == 0 {
            return Err(Error::Config("check interval and patience must be positive".into()));
        }
        Ok(())
    }

    /// Iteration from which only the basic kernel is used.
    fn freeze_at(&self, first_rt: Option<usize>) -> usize {
        first_rt.map_or(self.n_adapt, |t| t.min(self.n_adapt))
    }
}

/// Per-chain proposal bookkeeping.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChainStats {
    pub accepted: usize,
    pub adaptive_proposals: usize,
    pub fallbacks: usize,
    /// Last iteration that used an adaptive proposal.
    pub last_adaptive_iter: Option<usize>,
}

#[derive(Debug)]
pub struct MhRun {
    pub chains: Vec<PosteriorSample>,
    pub trace: DiagnosticTrace,
    pub burn_in: Option<usize>,
    /// Iteration from which the kernel was frozen to the basic one.
    pub freeze_at: usize,
    pub stats: Vec<ChainStats>,
}

struct ChainState {
    rng: RandomStream,
    current: TransitionMatrix,
    logpost: f64,
    window: HistoryWindow,
    stats: ChainStats,
}

fn initial_state(
    counts: &AggregateCounts,
    prior: &PriorSpec,
    p0: &[f64],
    rng: &mut RandomStream,
) -> Result<(TransitionMatrix, f64)> {
    for _ in 0..INIT_ATTEMPTS {
        let m = prior.sample(rng);
        let lp = log_posterior(&m, counts, prior, p0);
        if lp.is_finite() {
            return Ok((m, lp));
        }
    }
    Err(Error::InvalidChainState)
}

/// Every state with a positive count at time t must be reachable in t steps
/// from the support of p0; otherwise the likelihood is zero for every matrix.
fn check_reachable(counts: &AggregateCounts, support: &SupportMask, p0: &[f64]) -> Result<()> {
    let r = p0.len();
    let mut reach: Vec<bool> = p0.iter().map(|&p| p > 0.0).collect();
    for (time, row) in counts.rows().iter().enumerate() {
        if time > 0 {
            reach = (0..r).map(|j| (0..r).any(|i| reach[i] && support.allows(i, j))).collect();
        }
        if let Some(state) = (0..r).find(|&j| row[j] > 0 && !reach[j]) {
            return Err(Error::Unreachable { state, time });
        }
    }
    Ok(())
}

/// Metropolis-Hastings on per-time state counts.
///
/// Chain `c` uses stream `c` of `seed`. Iterations before `adapt_start` and
/// from the freeze point on use the basic kernel.
pub fn run_mh(
    counts: &AggregateCounts,
    prior: &PriorSpec,
    p0: &[f64],
    config: &MhConfig,
    seed: u64,
) -> Result<MhRun> {
    config.validate()?;
    let r = prior.dim();
    if counts.n_states() != r || p0.len() != r {
        return Err(Error::InvalidParameter(format!(
            "counts cover {} states and p0 {} but the prior has {r}",
            counts.n_states(),
            p0.len()
        )));
    }
    let support = prior.support();
    check_reachable(counts, support, p0)?;
    let n_free = support.free_rows().len();
    let mut states = (0..config.n_chains)
        .map(|c| {
            let mut rng = RandomStream::for_chain(seed, c);
            let (current, logpost) = initial_state(counts, prior, p0, &mut rng)?;
            let mut window = HistoryWindow::new(config.p_window);
            window.push(&current);
            Ok(ChainState {
                rng,
                current,
                logpost,
                window,
                stats: ChainStats::default(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let step = |s: &mut ChainState, h: usize, first_rt: Option<usize>| -> Result<Draw> {
        let (lo, hi) = config.d_range;
        let d: Vec<f64> = (0..n_free)
            .map(|_| if lo < hi { s.rng.random_range(lo..hi) } else { lo })
            .collect();
        let wants_adaptive = config.kernel.is_adaptive()
            && h >= config.adapt_start
            && h < config.freeze_at(first_rt);
        let mut kind = KernelKind::Basic;
        let mut fallback = false;
        let proposal = if wants_adaptive {
            match adaptive_proposal(&s.current, &s.window, config.kernel, &d, &mut s.rng)? {
                Some(p) => {
                    kind = config.kernel;
                    s.stats.adaptive_proposals += 1;
                    s.stats.last_adaptive_iter = Some(h);
                    p
                }
                None => {
                    fallback = true;
                    s.stats.fallbacks += 1;
                    basic_proposal(&s.current, &d, &mut s.rng)?
                }
            }
        } else {
            basic_proposal(&s.current, &d, &mut s.rng)?
        };
        let cand_lp = log_posterior(&proposal.candidate, counts, prior, p0);
        let accepted = mh_accept(s.logpost, cand_lp, proposal.log_forward, proposal.log_reverse, &mut s.rng)?;
        if accepted {
            s.current = proposal.candidate;
            s.logpost = cand_lp;
            s.window.push(&s.current);
            s.stats.accepted += 1;
        }
        Ok(Draw {
            iter: h,
            entries: s.current.entries().to_vec(),
            eta: None,
            mh: Some(MhStepInfo {
                accepted,
                kernel: kind,
                d,
                fallback,
            }),
        })
    };

    let schedule = Schedule {
        n_iter: config.n_iter,
        check_interval: config.check_interval,
        patience: config.patience,
        stop_at_burn_in: config.stop_at_burn_in,
    };
    let outcome = run_lockstep(&mut states, support, schedule, step)?;
    Ok(MhRun {
        chains: outcome.chains,
        trace: outcome.trace,
        burn_in: outcome.burn_in,
        freeze_at: config.freeze_at(outcome.first_rt),
        stats: states.into_iter().map(|s| s.stats).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::SupportMask;

    fn two_state_counts() -> AggregateCounts {
        AggregateCounts::new(2, vec![vec![0, 0], vec![30, 10], vec![20, 20], vec![12, 28]]).unwrap()
    }

    #[test]
    fn config_validation() {
        let ok = MhConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            MhConfig { d_range: (0.0, 10.0), ..ok.clone() },
            MhConfig { p_window: 2, ..ok.clone() },
            MhConfig { adapt_start: 30, ..ok.clone() },
            MhConfig { n_chains: 0, ..ok.clone() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn rejections_repeat_the_state() {
        let prior = PriorSpec::uniform(SupportMask::upper_triangular(2));
        let config = MhConfig { n_iter: 500, n_chains: 2, ..MhConfig::default() };
        let run = run_mh(&two_state_counts(), &prior, &[1.0, 0.0], &config, 3).unwrap();
        for chain in &run.chains {
            for pair in chain.draws().windows(2) {
                if !pair[1].mh.as_ref().unwrap().accepted {
                    assert_eq!(pair[0].entries, pair[1].entries);
                }
            }
            for k in 0..chain.len() {
                assert!(chain.matrix(k).validate().is_ok());
            }
        }
    }

    #[test]
    fn no_adaptive_proposal_after_freeze() {
        let prior = PriorSpec::uniform(SupportMask::full(2));
        let config = MhConfig {
            kernel: KernelKind::Rcs,
            n_iter: 3000,
            adapt_start: 100,
            n_adapt: 1000,
            ..MhConfig::default()
        };
        let counts = AggregateCounts::new(2, vec![vec![50, 0], vec![30, 20], vec![26, 24]]).unwrap();
        let run = run_mh(&counts, &prior, &[1.0, 0.0], &config, 8).unwrap();
        assert!(run.freeze_at <= 1000);
        for (chain, stats) in run.chains.iter().zip(&run.stats) {
            assert!(stats.adaptive_proposals > 0);
            assert!(stats.last_adaptive_iter.unwrap() < run.freeze_at);
            for d in &chain.draws()[run.freeze_at..] {
                assert_eq!(d.mh.as_ref().unwrap().kernel, KernelKind::Basic);
            }
        }
    }

    #[test]
    fn seeded_runs_repeat() {
        let prior = PriorSpec::uniform(SupportMask::upper_triangular(2));
        let config = MhConfig { n_iter: 200, ..MhConfig::default() };
        let a = run_mh(&two_state_counts(), &prior, &[1.0, 0.0], &config, 5).unwrap();
        let b = run_mh(&two_state_counts(), &prior, &[1.0, 0.0], &config, 5).unwrap();
        assert_eq!(a.chains, b.chains);
        assert_ne!(a.chains[0].draws(), a.chains[1].draws());
    }

    #[test]
    fn unreachable_counts_are_a_data_error() {
        let support = SupportMask::upper_triangular(3);
        // s3 at t=0 while everyone starts in s1
        let counts = AggregateCounts::new(3, vec![vec![4, 0, 1], vec![2, 2, 1]]).unwrap();
        let err = check_reachable(&counts, &support, &[1.0, 0.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::Unreachable { state: 2, time: 0 }));
        assert!(err.is_data());

        // bidiagonal support needs two steps to reach s3
        let bidiag = SupportMask::new(3, vec![true, true, false, false, true, true, false, false, true]).unwrap();
        let counts = AggregateCounts::new(3, vec![vec![5, 0, 0], vec![3, 1, 1], vec![2, 2, 1]]).unwrap();
        let err = check_reachable(&counts, &bidiag, &[1.0, 0.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::Unreachable { state: 2, time: 1 }));
        assert!(check_reachable(&counts, &support, &[1.0, 0.0, 0.0]).is_ok());
    }
}
