//! Gibbs sampler with data augmentation for panels with missing cells,
//! optionally with state-dependent (not at random) missingness.

use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::chains::{run_lockstep, Schedule};
use crate::data::{count_transitions, SequencePanel};
use crate::diagnostics::{DiagnosticTrace, DEFAULT_CHECK_INTERVAL, DEFAULT_PATIENCE};
use crate::error::{Error, Result};
use crate::exact::{draw_row, PriorSpec};
use crate::markov::TransitionMatrix;
use crate::posterior::{Draw, PosteriorSample};
use crate::prob::sample_categorical;
use crate::rng::RandomStream;

/// Forward simulations tried per gap when completing an individual initially.
const INIT_ATTEMPTS: usize = 10_000;

/// Conditional law of a missing state at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryRule {
    /// `∝ p_j(0) ψ_{j,next}`.
    #[default]
    InitialLaw,
    /// `∝ ψ_{j,next}`, ignoring the initial law.
    NextStateOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GibbsConfig {
    pub n_iter: usize,
    pub n_chains: usize,
    /// Model missingness as state dependent and sample its probabilities.
    pub mnar: bool,
    pub boundary: BoundaryRule,
    pub check_interval: usize,
    pub patience: usize,
    pub stop_at_burn_in: bool,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            n_iter: 5000,
            n_chains: 3,
            mnar: false,
            boundary: BoundaryRule::default(),
            check_interval: DEFAULT_CHECK_INTERVAL,
            patience: DEFAULT_PATIENCE,
            stop_at_burn_in: false,
        }
    }
}

impl GibbsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_iter == 0 || self.n_chains == 0 {
            return Err(Error::Config("need at least one chain and one iteration".into()));
        }
        if self.check_interval == 0 || self.patience == 0 {
            return Err(Error::Config("check interval and patience must be positive".into()));
        }
        Ok(())
    }
}

/// Current parameters and completed panel of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsState {
    pub psi: TransitionMatrix,
    pub eta: Option<Vec<f64>>,
    pub imputed: SequencePanel,
    pub iter: usize,
}

/// Redraws every missing cell of `panel` from its full conditional given the
/// neighbouring states of `state.imputed`, one cell at a time in time order.
/// Missingness probabilities in `state.eta` weight cells at `t ≥ 1`.
pub fn impute_step<R: Rng + ?Sized>(
    state: &mut GibbsState,
    panel: &SequencePanel,
    p0: &[f64],
    boundary: BoundaryRule,
    rng: &mut R,
) -> Result<()> {
    let r = state.psi.dim();
    let horizon = panel.horizon();
    let mut weights = vec![0.0; r];
    for k in 0..panel.individuals() {
        let observed = panel.row(k);
        let row = state.imputed.row_mut(k);
        for t in 0..=horizon {
            if observed[t].is_some() {
                continue;
            }
            let prev = (t > 0).then(|| row[t - 1].expect("completed panel"));
            let next = (t < horizon).then(|| row[t + 1].expect("completed panel"));
            for (j, w) in weights.iter_mut().enumerate() {
                let mut v = match prev {
                    Some(a) => state.psi.get(a, j),
                    None if boundary == BoundaryRule::InitialLaw => p0[j],
                    None => 1.0,
                };
                if let Some(b) = next {
                    v *= state.psi.get(j, b);
                }
                if t > 0 {
                    if let Some(eta) = &state.eta {
                        v *= eta[j];
                    }
                }
                *w = v;
            }
            row[t] = Some(match sample_categorical(&weights, rng) {
                Ok(j) => j,
                Err(Error::DegenerateWeights) => {
                    return Err(Error::ImputationImpossible { individual: k, time: t })
                }
                Err(e) => return Err(e),
            });
        }
        debug_assert!(observed
            .iter()
            .zip(state.imputed.row(k))
            .all(|(o, c)| o.is_none() || o == c));
    }
    Ok(())
}

/// Missing (`a_i`) and observed (`b_i`) cell counts per true state over `t ≥ 1`.
pub fn missingness_counts(imputed: &SequencePanel, panel: &SequencePanel) -> (Vec<u64>, Vec<u64>) {
    let r = panel.n_states();
    let (mut a, mut b) = (vec![0; r], vec![0; r]);
    for (obs, full) in panel.rows().zip(imputed.rows()) {
        for (o, s) in obs.iter().zip(full).skip(1) {
            let s = s.expect("completed panel");
            if o.is_some() {
                b[s] += 1;
            } else {
                a[s] += 1;
            }
        }
    }
    (a, b)
}

/// Draws `ψ_i ~ Dir(γ_i + w_i)` from the completed panel and, when the state
/// carries missingness probabilities, `η_i ~ Be(α_i + a_i, β_i + b_i)`.
pub fn parameter_step<R: Rng + ?Sized>(
    state: &mut GibbsState,
    panel: &SequencePanel,
    prior: &PriorSpec,
    rng: &mut R,
) -> Result<()> {
    let w = count_transitions(&state.imputed)?;
    w.check_support(prior.support())?;
    let r = prior.dim();
    let support = prior.support();
    let mut entries = vec![0.0; r * r];
    for i in 0..r {
        let cols = support.row_support(i);
        let alpha: Vec<f64> = cols.iter().map(|&j| prior.gamma(i, j) + w.get(i, j) as f64).collect();
        for (&j, v) in cols.iter().zip(draw_row(&alpha, rng)) {
            entries[i * r + j] = v;
        }
    }
    state.psi = TransitionMatrix::from_parts(entries, support.clone());
    if state.eta.is_some() {
        let (a, b) = missingness_counts(&state.imputed, panel);
        let eta_prior = prior.eta_prior().map(<[_]>::to_vec).unwrap_or_else(|| vec![(1.0, 1.0); r]);
        let eta = (0..r)
            .map(|i| {
                let (al, be) = eta_prior[i];
                let dist = Beta::new(al + a[i] as f64, be + b[i] as f64)
                    .map_err(|e| Error::InvalidParameter(e.to_string()))?;
                Ok(dist.sample(rng))
            })
            .collect::<Result<Vec<f64>>>()?;
        state.eta = Some(eta);
    }
    Ok(())
}

/// Completes each individual by forward simulation from `matrix`, retrying
/// every stretch between observations until it lands on the next observed state.
pub fn initial_imputation<R: Rng + ?Sized>(
    panel: &SequencePanel,
    matrix: &TransitionMatrix,
    p0: &[f64],
    rng: &mut R,
) -> Result<SequencePanel> {
    let mut out = panel.clone();
    let horizon = panel.horizon();
    for k in 0..panel.individuals() {
        let observed = panel.row(k).to_vec();
        let row = out.row_mut(k);
        let mut t = 0;
        // cells before and including the first observation
        let first_obs = observed.iter().position(Option::is_some);
        let mut prev = match observed[0] {
            Some(s) => s,
            None => {
                let target = first_obs.map(|f| (f, observed[f].unwrap()));
                let mut done = None;
                for _ in 0..INIT_ATTEMPTS {
                    let s0 = sample_categorical(p0, rng)?;
                    let path = forward(matrix, s0, target.map_or(horizon, |(f, _)| f), rng)?;
                    if target.is_none_or(|(_, s)| path.last() == Some(&s)) {
                        done = Some(path);
                        break;
                    }
                }
                let path = done.ok_or(Error::InitializationFailed { individual: k })?;
                for (u, s) in path.iter().enumerate() {
                    row[u] = Some(*s);
                }
                t = path.len() - 1;
                path[t]
            }
        };
        while t < horizon {
            let next_obs = (t + 1..=horizon).find(|&u| observed[u].is_some());
            let end = next_obs.unwrap_or(horizon);
            let mut done = None;
            for _ in 0..INIT_ATTEMPTS {
                let path = forward(matrix, prev, end - t, rng)?;
                if next_obs.is_none() || path.last() == observed[end].as_ref() {
                    done = Some(path);
                    break;
                }
            }
            let path = done.ok_or(Error::InitializationFailed { individual: k })?;
            for (u, s) in path.iter().enumerate().skip(1) {
                row[t + u] = Some(*s);
            }
            t = end;
            prev = row[t].unwrap();
        }
    }
    Ok(out)
}

/// `steps` transitions from `start`; the returned path includes `start`.
fn forward<R: Rng + ?Sized>(
    matrix: &TransitionMatrix,
    start: usize,
    steps: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let mut path = Vec::with_capacity(steps + 1);
    path.push(start);
    for _ in 0..steps {
        let s = *path.last().unwrap();
        path.push(sample_categorical(matrix.row(s), rng)?);
    }
    Ok(path)
}

#[derive(Debug)]
pub struct GibbsRun {
    pub chains: Vec<PosteriorSample>,
    pub trace: DiagnosticTrace,
    pub burn_in: Option<usize>,
    /// Individuals left out because none of their cells was observed.
    pub dropped: Vec<usize>,
}

/// Runs `config.n_chains` Gibbs chains; chain `c` uses stream `c` of `seed`.
pub fn run_gibbs(
    panel: &SequencePanel,
    prior: &PriorSpec,
    p0: &[f64],
    config: &GibbsConfig,
    seed: u64,
) -> Result<GibbsRun> {
    config.validate()?;
    let r = prior.dim();
    if panel.n_states() != r || p0.len() != r {
        return Err(Error::InvalidParameter(format!(
            "panel has {} states and p0 {} but the prior has {r}",
            panel.n_states(),
            p0.len()
        )));
    }
    let (kept, dropped): (Vec<usize>, Vec<usize>) = (0..panel.individuals())
        .partition(|&k| panel.row(k).iter().any(Option::is_some));
    let panel = if dropped.is_empty() { panel.clone() } else { panel.select(&kept) };
    let start = prior.mean_matrix();

    let mut states = (0..config.n_chains)
        .map(|c| {
            let mut rng = RandomStream::for_chain(seed, c);
            let imputed = initial_imputation(&panel, &start, p0, &mut rng)?;
            let eta = config.mnar.then(|| {
                prior
                    .eta_prior()
                    .map(|p| p.iter().map(|&(a, b)| a / (a + b)).collect())
                    .unwrap_or_else(|| vec![0.5; r])
            });
            Ok((
                rng,
                GibbsState {
                    psi: start.clone(),
                    eta,
                    imputed,
                    iter: 0,
                },
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let step = |(rng, s): &mut (RandomStream, GibbsState), h: usize, _: Option<usize>| -> Result<Draw> {
        parameter_step(s, &panel, prior, rng)?;
        impute_step(s, &panel, p0, config.boundary, rng)?;
        s.iter = h;
        Ok(Draw {
            iter: h,
            entries: s.psi.entries().to_vec(),
            eta: s.eta.clone(),
            mh: None,
        })
    };
    let schedule = Schedule {
        n_iter: config.n_iter,
        check_interval: config.check_interval,
        patience: config.patience,
        stop_at_burn_in: config.stop_at_burn_in,
    };
    let outcome = run_lockstep(&mut states, prior.support(), schedule, step)?;
    Ok(GibbsRun {
        chains: outcome.chains,
        trace: outcome.trace,
        burn_in: outcome.burn_in,
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::SupportMask;
    use crate::presets::{lee_initial, lee_matrix};
    use crate::simulate::{mask_random, simulate_panel, KeepSchedule};

    fn state_with(panel: SequencePanel, psi: TransitionMatrix, eta: Option<Vec<f64>>) -> GibbsState {
        GibbsState { psi, eta, imputed: panel, iter: 0 }
    }

    #[test]
    fn bridging_cell_is_forced() {
        let panel = SequencePanel::new(4, 2, vec![vec![Some(0), None, Some(2)]]).unwrap();
        let completed = SequencePanel::new(4, 2, vec![vec![Some(0), Some(0), Some(2)]]).unwrap();
        let mut rng = RandomStream::new(1, 0);
        for _ in 0..50 {
            let mut s = state_with(completed.clone(), lee_matrix(), None);
            impute_step(&mut s, &panel, lee_initial().probs(), BoundaryRule::InitialLaw, &mut rng).unwrap();
            assert_eq!(s.imputed.get(0, 1), Some(1));
        }
    }

    #[test]
    fn impossible_cell_is_reported() {
        let panel = SequencePanel::new(4, 2, vec![vec![Some(0), None, Some(3)]]).unwrap();
        let completed = SequencePanel::new(4, 2, vec![vec![Some(0), Some(1), Some(3)]]).unwrap();
        let mut s = state_with(completed, lee_matrix(), None);
        let mut rng = RandomStream::new(1, 0);
        let err = impute_step(&mut s, &panel, lee_initial().probs(), BoundaryRule::InitialLaw, &mut rng);
        assert!(matches!(err, Err(Error::ImputationImpossible { individual: 0, time: 1 })));
    }

    #[test]
    fn complete_panel_is_untouched() {
        let mut rng = RandomStream::new(2, 0);
        let panel = simulate_panel(&lee_matrix(), &lee_initial(), 30, 10, &mut rng);
        let mut s = state_with(panel.clone(), lee_matrix(), None);
        impute_step(&mut s, &panel, lee_initial().probs(), BoundaryRule::InitialLaw, &mut rng).unwrap();
        assert_eq!(s.imputed, panel);
    }

    #[test]
    fn constant_eta_gives_the_missing_at_random_law() {
        let mut rng = RandomStream::new(3, 0);
        let full = simulate_panel(&lee_matrix(), &lee_initial(), 50, 8, &mut rng);
        let panel = mask_random(&full, &KeepSchedule::Constant(0.4), &mut rng).unwrap();
        let start = initial_imputation(&panel, &lee_matrix(), lee_initial().probs(), &mut rng).unwrap();
        let mut a = state_with(start.clone(), lee_matrix(), None);
        let mut b = state_with(start, lee_matrix(), Some(vec![0.3; 4]));
        let mut ra = RandomStream::new(4, 0);
        let mut rb = RandomStream::new(4, 0);
        impute_step(&mut a, &panel, lee_initial().probs(), BoundaryRule::InitialLaw, &mut ra).unwrap();
        impute_step(&mut b, &panel, lee_initial().probs(), BoundaryRule::InitialLaw, &mut rb).unwrap();
        // the categorical sampler normalizes, so a common factor cannot change the draws
        assert_eq!(a.imputed, b.imputed);
    }

    #[test]
    fn eta_without_counts_follows_prior() {
        let panel = SequencePanel::new(2, 0, vec![vec![Some(0)]]).unwrap();
        let prior = PriorSpec::uniform(SupportMask::full(2)).with_eta_prior(vec![(2.0, 5.0); 2]).unwrap();
        let mut rng = RandomStream::new(5, 0);
        let n = 20_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let mut s = state_with(panel.clone(), TransitionMatrix::identity(2), Some(vec![0.5; 2]));
            parameter_step(&mut s, &panel, &prior, &mut rng).unwrap();
            sum += s.eta.unwrap()[1];
        }
        assert!((sum / n as f64 - 2.0 / 7.0).abs() < 0.005);
    }

    #[test]
    fn initial_imputation_agrees_with_observations() {
        let mut rng = RandomStream::new(6, 0);
        let full = simulate_panel(&lee_matrix(), &lee_initial(), 200, 20, &mut rng);
        let panel = crate::simulate::mask_single_observation(&full, &mut rng).unwrap();
        let prior = PriorSpec::uniform(lee_matrix().support().clone());
        let imputed = initial_imputation(&panel, &prior.mean_matrix(), lee_initial().probs(), &mut rng).unwrap();
        assert!(imputed.is_complete());
        count_transitions(&imputed).unwrap().check_support(prior.support()).unwrap();
        for k in 0..panel.individuals() {
            for t in 0..=20 {
                if let Some(s) = panel.get(k, t) {
                    assert_eq!(imputed.get(k, t), Some(s));
                }
            }
        }
    }

    #[test]
    fn unobserved_individuals_are_dropped() {
        let panel = SequencePanel::new(2, 2, vec![vec![Some(0), None, Some(1)], vec![None, None, None]]).unwrap();
        let prior = PriorSpec::uniform(SupportMask::full(2));
        let config = GibbsConfig { n_iter: 20, n_chains: 2, ..GibbsConfig::default() };
        let run = run_gibbs(&panel, &prior, &[0.5, 0.5], &config, 1).unwrap();
        assert_eq!(run.dropped, vec![1]);
        assert_eq!(run.chains.len(), 2);
        assert_ne!(run.chains[0].draws(), run.chains[1].draws());
        let again = run_gibbs(&panel, &prior, &[0.5, 0.5], &config, 1).unwrap();
        assert_eq!(run.chains, again.chains);
    }

    #[test]
    fn empty_panel_samples_the_prior() {
        let panel = SequencePanel::empty(2, 3);
        let prior = PriorSpec::uniform(SupportMask::full(2));
        let config = GibbsConfig { n_iter: 4000, n_chains: 2, ..GibbsConfig::default() };
        let run = run_gibbs(&panel, &prior, &[0.5, 0.5], &config, 2).unwrap();
        let t = run.chains[0].trace(0, 0);
        let mean = t.iter().sum::<f64>() / t.len() as f64;
        assert!((mean - 0.5).abs() < 0.03);
    }
}
