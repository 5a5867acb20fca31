//! Python bindings. States are 0-based and panels are lists of rows with
//! `None` for missing cells.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use transition_bayes::diagnostics::{psrf as core_psrf, DiagnosticTrace};
use transition_bayes::gibbs::BoundaryRule;
use transition_bayes::posterior::{posterior_mean, summarize, summarize_eta};
use transition_bayes::presets;
use transition_bayes::rng::{DATA_STREAM, MASK_STREAM, MATRIX_STREAM};
use transition_bayes::simulate::{
    collapse_matrix, mask_random, mask_single_observation_within, mask_state_dependent, sample_rra_matrix,
    simulate_panel, KeepSchedule,
};
use transition_bayes::{
    aggregate as core_aggregate, conjugate_posterior, count_transitions, run_gibbs, run_mh, sample_posterior,
    AggregateCounts, Error, GibbsConfig, KernelKind, MhConfig, PosteriorSample, PriorSpec, RandomStream,
    SequencePanel, StateDistribution, SupportMask, TransitionMatrix,
};

fn py_err(e: Error) -> PyErr {
    if e.is_numerical() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for transition_bayes::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

/// Row-stochastic transition matrix with a support mask.
#[pyclass(name = "TransitionMatrix", module = "transition_bayes_py", skip_from_py_object)]
#[derive(Clone)]
struct PyMatrix {
    inner: TransitionMatrix,
}

#[pymethods]
impl PyMatrix {
    /// `support` is a nested list of booleans; by default it is the nonzero pattern.
    #[new]
    #[pyo3(signature = (rows, support=None))]
    fn new(rows: Vec<Vec<f64>>, support: Option<Vec<Vec<bool>>>) -> PyResult<Self> {
        let inner = match support {
            None => TransitionMatrix::from_rows(&rows).py()?,
            Some(mask) => {
                let mask = SupportMask::new(mask.len(), mask.into_iter().flatten().collect()).py()?;
                TransitionMatrix::new(rows.into_iter().flatten().collect(), mask).py()?
            }
        };
        Ok(Self { inner })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.inner.rows()
    }

    fn support(&self) -> Vec<Vec<bool>> {
        let r = self.inner.dim();
        (0..r).map(|i| (0..r).map(|j| self.inner.support().allows(i, j)).collect()).collect()
    }

    /// State probabilities `p(t)` for `t = 0..=horizon`.
    fn propagate(&self, p0: Vec<f64>, horizon: usize) -> PyResult<Vec<Vec<f64>>> {
        let p0 = StateDistribution::initial(p0).py()?;
        Ok(transition_bayes::markov::propagate_path(p0.probs(), &self.inner, horizon))
    }

    /// Expected number of steps from `start` until `absorbing` is reached.
    fn mttf(&self, absorbing: usize, start: usize) -> PyResult<f64> {
        transition_bayes::mttf(&self.inner, absorbing, start).py()
    }

    /// Merges the last two states.
    fn collapse(&self) -> PyResult<Self> {
        Ok(Self {
            inner: collapse_matrix(&self.inner).py()?,
        })
    }

    fn __repr__(&self) -> String {
        format!("TransitionMatrix({:?})", self.inner.rows())
    }
}

/// Posterior draws from one of the samplers with their summaries.
#[pyclass(name = "Fit", module = "transition_bayes_py")]
struct PyFit {
    #[pyo3(get)]
    method: String,
    #[pyo3(get)]
    burn_in: usize,
    #[pyo3(get)]
    converged: bool,
    chains: Vec<PosteriorSample>,
    trace: Option<DiagnosticTrace>,
}

#[pymethods]
impl PyFit {
    /// Number of draws kept after burn-in, pooled over chains.
    #[getter]
    fn n_draws(&self) -> usize {
        self.chains.iter().map(|c| c.after(self.burn_in).len()).sum()
    }

    fn mean(&self) -> PyResult<PyMatrix> {
        Ok(PyMatrix {
            inner: posterior_mean(&self.chains, self.burn_in).py()?,
        })
    }

    /// One dict per supported entry: `row`, `col`, `mean`, `sd`, `q025`, `q975`.
    fn summary<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        summarize(&self.chains, self.burn_in)
            .into_iter()
            .map(|e| {
                let d = PyDict::new(py);
                d.set_item("row", e.row)?;
                d.set_item("col", e.col)?;
                d.set_item("mean", e.stats.mean)?;
                d.set_item("sd", e.stats.sd)?;
                d.set_item("q025", e.stats.q025)?;
                d.set_item("q975", e.stats.q975)?;
                Ok(d)
            })
            .collect()
    }

    /// `(mean, q025, q975)` per state for MNAR fits, else `None`.
    fn eta_summary(&self) -> Option<Vec<(f64, f64, f64)>> {
        summarize_eta(&self.chains, self.burn_in).map(|v| v.iter().map(|s| (s.mean, s.q025, s.q975)).collect())
    }

    /// Post-burn-in values of entry `(i, j)` pooled over chains.
    fn draws(&self, i: usize, j: usize) -> Vec<f64> {
        self.chains.iter().flat_map(|c| c.after(self.burn_in).trace(i, j)).collect()
    }

    /// `(iteration, max_psrf, rt_met)` at every checkpoint.
    fn trace(&self) -> Vec<(usize, f64, bool)> {
        self.trace
            .as_ref()
            .map(|t| t.points.iter().map(|p| (p.iter, p.max_psrf, p.rt_met)).collect())
            .unwrap_or_default()
    }

    fn acceptance_rates(&self) -> Vec<f64> {
        self.chains.iter().filter_map(|c| c.acceptance_rate()).collect()
    }
}

/// `None` or `"full"`, `"upper"`, or a nested list of booleans.
fn parse_support(spec: Option<&Bound<'_, PyAny>>, r: usize) -> PyResult<SupportMask> {
    let Some(spec) = spec else {
        return Ok(SupportMask::full(r));
    };
    if let Ok(name) = spec.extract::<String>() {
        return match name.as_str() {
            "full" => Ok(SupportMask::full(r)),
            "upper" => Ok(SupportMask::upper_triangular(r)),
            other => Err(PyValueError::new_err(format!("unknown support `{other}`"))),
        };
    }
    let rows: Vec<Vec<bool>> = spec.extract()?;
    if rows.len() != r {
        return Err(PyValueError::new_err(format!("support has {} rows, expected {r}", rows.len())));
    }
    SupportMask::new(r, rows.into_iter().flatten().collect()).py()
}

fn to_panel(rows: Vec<Vec<Option<usize>>>, n_states: usize) -> PyResult<SequencePanel> {
    let horizon = rows
        .first()
        .map(|r| r.len().saturating_sub(1))
        .ok_or_else(|| PyValueError::new_err("panel has no rows"))?;
    SequencePanel::new(n_states, horizon, rows).py()
}

fn from_panel(panel: &SequencePanel) -> Vec<Vec<Option<usize>>> {
    panel.rows().map(|r| r.to_vec()).collect()
}

fn settled(burn_in: Option<usize>, n_iter: usize) -> (usize, bool) {
    match burn_in {
        Some(b) => (b, true),
        None => (n_iter / 2, false),
    }
}

/// The four-state reference matrix used in the examples.
#[pyfunction]
fn lee_matrix() -> PyMatrix {
    PyMatrix {
        inner: presets::lee_matrix(),
    }
}

#[pyfunction]
fn lee_initial() -> Vec<f64> {
    presets::lee_initial().probs().to_vec()
}

/// Random upper-triangular degradation matrix of size `r_max`, collapsed to `states`.
#[pyfunction]
#[pyo3(signature = (r_max, seed=1, states=None))]
fn sample_rra(r_max: usize, seed: u64, states: Option<usize>) -> PyResult<PyMatrix> {
    let mut rng = RandomStream::new(seed, MATRIX_STREAM);
    let mut m = sample_rra_matrix(r_max, &mut rng).py()?.matrix;
    let target = states.unwrap_or(r_max);
    while m.dim() > target.max(3) {
        m = collapse_matrix(&m).py()?;
    }
    Ok(PyMatrix { inner: m })
}

/// Simulates `m` trajectories over `t = 0..=horizon`.
///
/// `mask` is one of `none`, `single`, `random` (needs `keep`) or `mnar` (needs `eta`).
#[pyfunction]
#[pyo3(signature = (matrix, p0, m, horizon, seed=1, mask="none", keep=None, eta=None, observe_from=1))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    matrix: PyRef<'_, PyMatrix>,
    p0: Vec<f64>,
    m: usize,
    horizon: usize,
    seed: u64,
    mask: &str,
    keep: Option<f64>,
    eta: Option<Vec<f64>>,
    observe_from: usize,
) -> PyResult<Vec<Vec<Option<usize>>>> {
    let p0 = StateDistribution::initial(p0).py()?;
    let panel = simulate_panel(&matrix.inner, &p0, m, horizon, &mut RandomStream::new(seed, DATA_STREAM));
    let mut rng = RandomStream::new(seed, MASK_STREAM);
    let panel = match (mask, keep, eta) {
        ("none", _, _) => panel,
        ("single", _, _) => mask_single_observation_within(&panel, observe_from, horizon, &mut rng).py()?,
        ("random", Some(k), _) => mask_random(&panel, &KeepSchedule::Constant(k), &mut rng).py()?,
        ("mnar", _, Some(e)) => mask_state_dependent(&panel, &e, &mut rng).py()?,
        _ => return Err(PyValueError::new_err(format!("mask `{mask}` is unknown or misses its parameter"))),
    };
    Ok(from_panel(&panel))
}

/// Counts of individuals observed in each state at each time.
#[pyfunction]
fn aggregate(panel: Vec<Vec<Option<usize>>>, n_states: usize) -> PyResult<Vec<Vec<u64>>> {
    Ok(core_aggregate(&to_panel(panel, n_states)?).rows().to_vec())
}

/// Exact Dirichlet posterior of a complete panel, sampled `draws` times.
#[pyfunction]
#[pyo3(signature = (panel, n_states, support=None, draws=5000, prior=1.0, seed=1))]
fn fit_exact(
    panel: Vec<Vec<Option<usize>>>,
    n_states: usize,
    support: Option<Bound<'_, PyAny>>,
    draws: usize,
    prior: f64,
    seed: u64,
) -> PyResult<PyFit> {
    let panel = to_panel(panel, n_states)?;
    let prior = PriorSpec::new(vec![prior; n_states * n_states], parse_support(support.as_ref(), n_states)?).py()?;
    let post = conjugate_posterior(&prior, &count_transitions(&panel).py()?).py()?;
    let sample = sample_posterior(&post, draws, &mut RandomStream::for_chain(seed, 0));
    Ok(PyFit {
        method: "exact".into(),
        burn_in: 0,
        converged: true,
        chains: vec![sample],
        trace: None,
    })
}

/// Gibbs sampler with data augmentation for incomplete panels.
#[pyfunction]
#[pyo3(signature = (panel, n_states, p0, support=None, iterations=5000, chains=3, mnar=false, next_state_boundary=false, prior=1.0, seed=1))]
#[allow(clippy::too_many_arguments)]
fn fit_gibbs(
    py: Python<'_>,
    panel: Vec<Vec<Option<usize>>>,
    n_states: usize,
    p0: Vec<f64>,
    support: Option<Bound<'_, PyAny>>,
    iterations: usize,
    chains: usize,
    mnar: bool,
    next_state_boundary: bool,
    prior: f64,
    seed: u64,
) -> PyResult<PyFit> {
    let panel = to_panel(panel, n_states)?;
    let mut spec = PriorSpec::new(vec![prior; n_states * n_states], parse_support(support.as_ref(), n_states)?).py()?;
    if mnar {
        spec = spec.with_eta_prior(vec![(1.0, 1.0); n_states]).py()?;
    }
    let config = GibbsConfig {
        n_iter: iterations,
        n_chains: chains,
        mnar,
        boundary: if next_state_boundary {
            BoundaryRule::NextStateOnly
        } else {
            BoundaryRule::InitialLaw
        },
        ..GibbsConfig::default()
    };
    let run = py.detach(|| run_gibbs(&panel, &spec, &p0, &config, seed)).py()?;
    let (burn_in, converged) = settled(run.burn_in, iterations);
    Ok(PyFit {
        method: "gibbs".into(),
        burn_in,
        converged,
        chains: run.chains,
        trace: Some(run.trace),
    })
}

/// Metropolis-Hastings on aggregate counts (`counts[t][state]`).
///
/// `kernel` is one of `basic`, `dcs`, `rcs`, `dcs-coarse`, `rcs-coarse`.
#[pyfunction]
#[pyo3(signature = (counts, p0, support=None, kernel="basic", iterations=20000, chains=3, prior=1.0, seed=1))]
#[allow(clippy::too_many_arguments)]
fn fit_mh(
    py: Python<'_>,
    counts: Vec<Vec<u64>>,
    p0: Vec<f64>,
    support: Option<Bound<'_, PyAny>>,
    kernel: &str,
    iterations: usize,
    chains: usize,
    prior: f64,
    seed: u64,
) -> PyResult<PyFit> {
    let r = p0.len();
    let counts = AggregateCounts::new(r, counts).py()?;
    let spec = PriorSpec::new(vec![prior; r * r], parse_support(support.as_ref(), r)?).py()?;
    let kernel: KernelKind = kernel.parse().py()?;
    let config = MhConfig {
        kernel,
        n_iter: iterations,
        n_chains: chains,
        ..MhConfig::default()
    };
    let run = py.detach(|| run_mh(&counts, &spec, &p0, &config, seed)).py()?;
    let (mut burn_in, converged) = settled(run.burn_in, iterations);
    if kernel.is_adaptive() && run.freeze_at < iterations {
        burn_in = burn_in.max(run.freeze_at);
    }
    Ok(PyFit {
        method: format!("mh-{kernel}"),
        burn_in,
        converged,
        chains: run.chains,
        trace: Some(run.trace),
    })
}

/// Potential scale reduction factor of equally long chains.
#[pyfunction]
fn psrf(chains: Vec<Vec<f64>>) -> PyResult<f64> {
    let refs: Vec<&[f64]> = chains.iter().map(Vec::as_slice).collect();
    core_psrf(&refs).py()
}

#[pymodule]
pub fn transition_bayes_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMatrix>()?;
    m.add_class::<PyFit>()?;
    m.add_function(wrap_pyfunction!(lee_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(lee_initial, m)?)?;
    m.add_function(wrap_pyfunction!(sample_rra, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate, m)?)?;
    m.add_function(wrap_pyfunction!(fit_exact, m)?)?;
    m.add_function(wrap_pyfunction!(fit_gibbs, m)?)?;
    m.add_function(wrap_pyfunction!(fit_mh, m)?)?;
    m.add_function(wrap_pyfunction!(psrf, m)?)?;
    Ok(())
}
