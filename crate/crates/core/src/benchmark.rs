//! Iterations and wall time needed by each sampler to reach quasi-stationarity
//! on simulated single-observation data.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::data::{aggregate, SequencePanel};
use crate::error::{Error, Result};
use crate::exact::PriorSpec;
use crate::gibbs::{run_gibbs, GibbsConfig};
use crate::markov::{StateDistribution, TransitionMatrix};
use crate::mh::{run_mh, KernelKind, MhConfig};
use crate::posterior::quantile;
use crate::presets::{lee_initial, lee_matrix, start_in_first};
use crate::rng::{RandomStream, DATA_STREAM, MASK_STREAM, MATRIX_STREAM};
use crate::simulate::{mask_single_observation, rra_family, simulate_panel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Gibbs,
    Mh(KernelKind),
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Gibbs => "gibbs",
            Method::Mh(KernelKind::Basic) => "mh",
            Method::Mh(k) => k.name(),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gibbs" => Ok(Method::Gibbs),
            "mh" | "basic" => Ok(Method::Mh(KernelKind::Basic)),
            other => match other.parse::<KernelKind>() {
                Ok(k) => Ok(Method::Mh(k)),
                Err(_) => Err(Error::Config(format!("unknown method '{other}'"))),
            },
        }
    }
}

/// Data-generating setting of one benchmark cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scenario {
    /// Lee's four-state matrix with `m` individuals.
    Lee { m: usize },
    /// A fresh RRA family per repeat; the `r`-state member generates the data.
    Rra { r: usize, m: usize },
}

impl Scenario {
    pub fn grid_label(&self) -> (&'static str, usize) {
        match *self {
            Scenario::Lee { m } => ("m", m),
            Scenario::Rra { r, .. } => ("r", r),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub methods: Vec<Method>,
    pub scenarios: Vec<Scenario>,
    pub repeats: usize,
    pub seed: u64,
    pub horizon: usize,
    /// Iteration budget per run; a run that has not converged by then reports no burn-in.
    pub max_iter: usize,
    pub mh: MhConfig,
    pub gibbs: GibbsConfig,
    /// Largest RRA dimension sampled before collapsing.
    pub r_max: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            methods: vec![Method::Gibbs, Method::Mh(KernelKind::Basic), Method::Mh(KernelKind::Rcs)],
            scenarios: vec![Scenario::Lee { m: 100 }],
            repeats: 10,
            seed: 1,
            horizon: 20,
            max_iter: 20_000,
            mh: MhConfig::default(),
            gibbs: GibbsConfig::default(),
            r_max: 6,
        }
    }
}

/// Outcome of one (method, scenario, repeat) run.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRow {
    pub method: Method,
    pub scenario: Scenario,
    pub repeat: usize,
    pub iterations_to_rt: Option<usize>,
    pub wall_seconds: f64,
}

/// Single-observation data for one cell and repeat.
pub struct Dataset {
    pub truth: TransitionMatrix,
    pub p0: StateDistribution,
    pub panel: SequencePanel,
}

fn cell_seed(master: u64, scenario: &Scenario, repeat: usize) -> u64 {
    let (tag, a, b) = match *scenario {
        Scenario::Lee { m } => (1u64, m as u64, 0u64),
        Scenario::Rra { r, m } => (2, r as u64, m as u64),
    };
    [tag, a, b, repeat as u64]
        .into_iter()
        .fold(splitmix(master), |h, v| splitmix(h ^ v))
}

fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn make_dataset(scenario: &Scenario, horizon: usize, r_max: usize, seed: u64) -> Result<Dataset> {
    let (truth, p0, m) = match *scenario {
        Scenario::Lee { m } => (lee_matrix(), lee_initial(), m),
        Scenario::Rra { r, m } => {
            let mut rng = RandomStream::new(seed, MATRIX_STREAM);
            let family = rra_family(r_max.max(r), r.max(2), &mut rng)?;
            let truth = family
                .into_iter()
                .find(|x| x.dim() == r)
                .ok_or_else(|| Error::Config(format!("no RRA member of dimension {r}")))?;
            (truth, start_in_first(r), m)
        }
    };
    let full = simulate_panel(&truth, &p0, m, horizon, &mut RandomStream::new(seed, DATA_STREAM));
    let panel = mask_single_observation(&full, &mut RandomStream::new(seed, MASK_STREAM))?;
    Ok(Dataset { truth, p0, panel })
}

/// Fit support: the zero pattern of the generating matrix for Lee, upper triangular for RRA.
fn fit_prior(scenario: &Scenario, truth: &TransitionMatrix) -> PriorSpec {
    match scenario {
        Scenario::Lee { .. } => PriorSpec::uniform(truth.support().clone()),
        Scenario::Rra { r, .. } => PriorSpec::uniform(crate::markov::SupportMask::upper_triangular(*r)),
    }
}

pub fn run_one(config: &BenchmarkConfig, method: Method, scenario: Scenario, repeat: usize) -> Result<BenchmarkRow> {
    let seed = cell_seed(config.seed, &scenario, repeat);
    let data = make_dataset(&scenario, config.horizon, config.r_max, seed)?;
    let prior = fit_prior(&scenario, &data.truth);
    let start = Instant::now();
    let burn_in = match method {
        Method::Gibbs => {
            let gc = GibbsConfig {
                n_iter: config.max_iter,
                stop_at_burn_in: true,
                ..config.gibbs.clone()
            };
            run_gibbs(&data.panel, &prior, data.p0.probs(), &gc, seed)?.burn_in
        }
        Method::Mh(kernel) => {
            let mc = MhConfig {
                kernel,
                n_iter: config.max_iter,
                stop_at_burn_in: true,
                ..config.mh.clone()
            };
            run_mh(&aggregate(&data.panel), &prior, data.p0.probs(), &mc, seed)?.burn_in
        }
    };
    Ok(BenchmarkRow {
        method,
        scenario,
        repeat,
        iterations_to_rt: burn_in,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Every (method, scenario, repeat) cell, sorted in that order. Runs execute
/// on the current rayon pool; data depend only on the scenario and repeat, so
/// all methods see the same datasets.
pub fn run_benchmark(config: &BenchmarkConfig) -> Result<Vec<BenchmarkRow>> {
    if config.repeats == 0 || config.methods.is_empty() || config.scenarios.is_empty() {
        return Err(Error::Config("benchmark needs methods, scenarios and repeats".into()));
    }
    let mut cells = Vec::new();
    for &method in &config.methods {
        for &scenario in &config.scenarios {
            for repeat in 0..config.repeats {
                cells.push((method, scenario, repeat));
            }
        }
    }
    let mut rows = cells
        .into_par_iter()
        .map(|(method, scenario, repeat)| run_one(config, method, scenario, repeat))
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|r| (r.method, r.scenario, r.repeat));
    Ok(rows)
}

/// Median and quartiles of a benchmark cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub method: Method,
    pub scenario: Scenario,
    pub converged: usize,
    pub repeats: usize,
    /// `(q25, median, q75)` of iterations to the rule of thumb; runs that never
    /// converged count as the iteration budget.
    pub iterations: (f64, f64, f64),
    pub wall_seconds: (f64, f64, f64),
    pub mean_wall_seconds: f64,
}

fn quartiles(mut v: Vec<f64>) -> (f64, f64, f64) {
    v.sort_by(f64::total_cmp);
    (quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75))
}

pub fn summarize_benchmark(rows: &[BenchmarkRow], max_iter: usize) -> Vec<CellSummary> {
    let mut keys: Vec<(Method, Scenario)> = rows.iter().map(|r| (r.method, r.scenario)).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|(method, scenario)| {
            let cell: Vec<&BenchmarkRow> = rows
                .iter()
                .filter(|r| r.method == method && r.scenario == scenario)
                .collect();
            let iters = cell
                .iter()
                .map(|r| r.iterations_to_rt.unwrap_or(max_iter) as f64)
                .collect();
            let wall: Vec<f64> = cell.iter().map(|r| r.wall_seconds).collect();
            CellSummary {
                method,
                scenario,
                converged: cell.iter().filter(|r| r.iterations_to_rt.is_some()).count(),
                repeats: cell.len(),
                iterations: quartiles(iters),
                mean_wall_seconds: wall.iter().sum::<f64>() / wall.len() as f64,
                wall_seconds: quartiles(wall),
            }
        })
        .collect()
}

/// One line per run: `method,grid,value,repeat,iterations_to_rt,wall_seconds`
/// (`NA` when the rule of thumb was never met).
pub fn write_rows<W: Write>(mut out: W, rows: &[BenchmarkRow], manifest: Option<&str>) -> Result<()> {
    if let Some(m) = manifest {
        for line in m.lines() {
            writeln!(out, "# {line}")?;
        }
    }
    writeln!(out, "method,grid,value,repeat,iterations_to_rt,wall_seconds")?;
    for r in rows {
        let (grid, value) = r.scenario.grid_label();
        let iters = r.iterations_to_rt.map_or("NA".to_string(), |v| v.to_string());
        writeln!(out, "{},{grid},{value},{},{iters},{:.6}", r.method, r.repeat, r.wall_seconds)?;
    }
    Ok(())
}

pub fn write_summary<W: Write>(mut out: W, summary: &[CellSummary], manifest: Option<&str>) -> Result<()> {
    if let Some(m) = manifest {
        for line in m.lines() {
            writeln!(out, "# {line}")?;
        }
    }
    writeln!(
        out,
        "method,grid,value,converged,repeats,iter_q25,iter_median,iter_q75,wall_q25,wall_median,wall_q75,wall_mean"
    )?;
    for s in summary {
        let (grid, value) = s.scenario.grid_label();
        writeln!(
            out,
            "{},{grid},{value},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6}",
            s.method,
            s.converged,
            s.repeats,
            s.iterations.0,
            s.iterations.1,
            s.iterations.2,
            s.wall_seconds.0,
            s.wall_seconds.1,
            s.wall_seconds.2,
            s.mean_wall_seconds
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names() {
        for name in ["gibbs", "mh", "dcs", "rcs", "dcs-coarse", "rcs-coarse"] {
            assert_eq!(name.parse::<Method>().unwrap().name(), name);
        }
        assert!("hmc".parse::<Method>().is_err());
    }

    #[test]
    fn datasets_depend_only_on_cell() {
        let a = make_dataset(&Scenario::Rra { r: 4, m: 50 }, 20, 6, 9).unwrap();
        let b = make_dataset(&Scenario::Rra { r: 4, m: 50 }, 20, 6, 9).unwrap();
        assert_eq!(a.panel, b.panel);
        assert_eq!(a.truth, b.truth);
        assert!(a.panel.is_single_observation());
        let lee = Scenario::Lee { m: 100 };
        assert_ne!(cell_seed(1, &lee, 0), cell_seed(1, &lee, 1));
        assert_ne!(cell_seed(2, &lee, 0), cell_seed(1, &lee, 1));
    }

    #[test]
    fn rows_are_sorted_and_repeatable() {
        let config = BenchmarkConfig {
            methods: vec![Method::Mh(KernelKind::Rcs), Method::Gibbs],
            scenarios: vec![Scenario::Lee { m: 60 }, Scenario::Lee { m: 30 }],
            repeats: 2,
            max_iter: 600,
            ..BenchmarkConfig::default()
        };
        let rows = run_benchmark(&config).unwrap();
        assert_eq!(rows.len(), 8);
        assert_eq!(rows[0].method, Method::Gibbs);
        assert_eq!(rows[0].scenario, Scenario::Lee { m: 30 });
        let again = run_benchmark(&config).unwrap();
        let iters = |rs: &[BenchmarkRow]| rs.iter().map(|r| r.iterations_to_rt).collect::<Vec<_>>();
        assert_eq!(iters(&rows), iters(&again));
        let summary = summarize_benchmark(&rows, 600);
        assert_eq!(summary.len(), 4);
        let mut csv = Vec::new();
        write_rows(&mut csv, &rows, Some("seed 1")).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 10);
    }
}
