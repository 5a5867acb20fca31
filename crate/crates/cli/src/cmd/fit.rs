use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use transition_bayes::gibbs::BoundaryRule;
use transition_bayes::io::{load_counts, load_panel};
use transition_bayes::posterior::{save_posterior, summarize, summarize_eta};
use transition_bayes::{
    aggregate, conjugate_posterior, count_transitions, expand_counts, run_gibbs, run_mh, sample_posterior,
    AggregateCounts, Error, GibbsConfig, KernelKind, MhConfig, PosteriorSample, PriorSpec, RandomStream,
    SequencePanel,
};

use super::{initial_law, parse_support, DEFAULT_SEED};
use crate::config::resolve;
use crate::output::{Manifest, Outputs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitMethod {
    /// Exact for complete panels, MH for aggregate or single-observation data,
    /// Gibbs otherwise.
    Auto,
    Exact,
    Gibbs,
    Mh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Initial,
    Next,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitOpts {
    /// TOML file whose `[fit]` table supplies defaults for these flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Panel CSV (one individual per row, NA for missing).
    #[arg(long, conflicts_with = "counts")]
    pub panel: Option<PathBuf>,
    /// Aggregate counts CSV (one row per time).
    #[arg(long)]
    pub counts: Option<PathBuf>,
    /// Number of states; required with --panel.
    #[arg(long)]
    pub states: Option<usize>,
    #[arg(long, value_enum)]
    pub method: Option<FitMethod>,
    /// MH kernel: basic, dcs, rcs, dcs-coarse, rcs-coarse.
    #[arg(long)]
    pub kernel: Option<String>,
    /// Support: full, upper, lee, or a 0/1 mask CSV.
    #[arg(long)]
    pub support: Option<String>,
    /// Dirichlet concentration of every supported entry.
    #[arg(long)]
    pub prior: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub p0: Option<Vec<f64>>,
    /// MCMC iterations per chain.
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub chains: Option<usize>,
    /// Posterior draws for the exact method.
    #[arg(long)]
    pub draws: Option<usize>,
    /// Model missingness as state dependent (Gibbs only).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub mnar: Option<bool>,
    /// Conditional law used for a missing state at t=0.
    #[arg(long, value_enum)]
    pub boundary: Option<Boundary>,
    #[arg(long)]
    pub check_interval: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

enum Data {
    Panel(SequencePanel),
    Counts(AggregateCounts),
}

impl Data {
    fn n_states(&self) -> usize {
        match self {
            Data::Panel(p) => p.n_states(),
            Data::Counts(c) => c.n_states(),
        }
    }

    fn single_observation(&self) -> bool {
        match self {
            Data::Panel(p) => p.is_single_observation(),
            Data::Counts(_) => true,
        }
    }
}

/// Method actually used for `requested` on `data`.
fn dispatch(requested: FitMethod, data: &Data) -> Result<FitMethod> {
    let complete = matches!(data, Data::Panel(p) if p.is_complete());
    let method = match requested {
        FitMethod::Auto if complete => FitMethod::Exact,
        FitMethod::Auto if data.single_observation() => FitMethod::Mh,
        FitMethod::Auto => FitMethod::Gibbs,
        m => m,
    };
    match method {
        FitMethod::Exact if !complete => Err(Error::Unsupported(
            "the exact posterior needs a complete panel; use gibbs or mh".into(),
        ))?,
        FitMethod::Mh if !data.single_observation() => Err(Error::Unsupported(
            "MH works on aggregate or single-observation data; panels with several observations per individual need gibbs"
                .into(),
        ))?,
        _ => Ok(method),
    }
}

struct Fit {
    method: FitMethod,
    chains: Vec<PosteriorSample>,
    trace_csv: Option<String>,
    burn_in: usize,
    notes: Vec<String>,
}

pub fn run(flags: FitOpts) -> Result<()> {
    let opts = resolve(&flags, flags.config.as_deref(), "fit")?;
    let seed = opts.seed.unwrap_or(DEFAULT_SEED);
    let data = match (&opts.panel, &opts.counts) {
        (Some(p), None) => {
            let r = opts.states.context("--states is required with --panel")?;
            Data::Panel(load_panel(p, r).with_context(|| format!("loading {}", p.display()))?)
        }
        (None, Some(c)) => Data::Counts(load_counts(c).with_context(|| format!("loading {}", c.display()))?),
        _ => bail!("give exactly one of --panel or --counts"),
    };
    let r = data.n_states();
    let support = parse_support(opts.support.as_deref().unwrap_or("full"), r)?;
    let conc = opts.prior.unwrap_or(1.0);
    let mut prior = PriorSpec::new(vec![conc; r * r], support)?;
    if opts.mnar.unwrap_or(false) {
        prior = prior.with_eta_prior(vec![(1.0, 1.0); r])?;
    }
    let p0 = initial_law(opts.p0.as_deref(), r)?;
    let method = dispatch(opts.method.unwrap_or(FitMethod::Auto), &data)?;
    let kernel: KernelKind = match &opts.kernel {
        Some(k) => k.parse()?,
        None => KernelKind::Basic,
    };
    if opts.mnar.unwrap_or(false) && method != FitMethod::Gibbs {
        Err(Error::Unsupported("--mnar needs the gibbs method".into()))?;
    }

    let fit = match method {
        FitMethod::Exact => {
            let Data::Panel(panel) = &data else { unreachable!() };
            let post = conjugate_posterior(&prior, &count_transitions(panel)?)?;
            let mut rng = RandomStream::for_chain(seed, 0);
            let sample = sample_posterior(&post, opts.draws.unwrap_or(5000), &mut rng);
            Fit {
                method,
                chains: vec![sample],
                trace_csv: None,
                burn_in: 0,
                notes: Vec::new(),
            }
        }
        FitMethod::Gibbs => {
            let panel = match &data {
                Data::Panel(p) => p.clone(),
                Data::Counts(c) => expand_counts(c)?,
            };
            let mut config = GibbsConfig {
                mnar: opts.mnar.unwrap_or(false),
                boundary: match opts.boundary.unwrap_or(Boundary::Initial) {
                    Boundary::Initial => BoundaryRule::InitialLaw,
                    Boundary::Next => BoundaryRule::NextStateOnly,
                },
                ..GibbsConfig::default()
            };
            set_schedule(&opts, &mut config.n_iter, &mut config.n_chains, &mut config.check_interval, &mut config.patience);
            let run = run_gibbs(&panel, &prior, p0.probs(), &config, seed)?;
            let mut notes = Vec::new();
            if !run.dropped.is_empty() {
                notes.push(format!("{} individuals without observations were left out", run.dropped.len()));
            }
            let burn_in = settle(run.burn_in, config.n_iter, &mut notes);
            Fit {
                method,
                chains: run.chains,
                trace_csv: Some(run.trace.to_csv()),
                burn_in,
                notes,
            }
        }
        FitMethod::Mh => {
            let counts = match &data {
                Data::Panel(p) => aggregate(p),
                Data::Counts(c) => c.clone(),
            };
            let mut config = MhConfig {
                kernel,
                ..MhConfig::default()
            };
            set_schedule(&opts, &mut config.n_iter, &mut config.n_chains, &mut config.check_interval, &mut config.patience);
            let run = run_mh(&counts, &prior, p0.probs(), &config, seed)?;
            let mut notes = Vec::new();
            let mut burn_in = settle(run.burn_in, config.n_iter, &mut notes);
            if config.kernel.is_adaptive() {
                if run.freeze_at < config.n_iter {
                    burn_in = burn_in.max(run.freeze_at);
                } else {
                    notes.push("warning: the adaptive kernel never froze within the run".into());
                }
            }
            let rates: Vec<String> = run
                .chains
                .iter()
                .filter_map(|c| c.acceptance_rate())
                .map(|a| format!("{a:.3}"))
                .collect();
            notes.push(format!("acceptance rates {}", rates.join(", ")));
            Fit {
                method,
                chains: run.chains,
                trace_csv: Some(run.trace.to_csv()),
                burn_in,
                notes,
            }
        }
        FitMethod::Auto => unreachable!(),
    };
    write(&opts, seed, fit)
}

fn set_schedule(opts: &FitOpts, n_iter: &mut usize, n_chains: &mut usize, interval: &mut usize, patience: &mut usize) {
    if let Some(v) = opts.iterations {
        *n_iter = v;
    }
    if let Some(v) = opts.chains {
        *n_chains = v;
    }
    if let Some(v) = opts.check_interval {
        *interval = v;
    }
    if let Some(v) = opts.patience {
        *patience = v;
    }
}

fn settle(burn_in: Option<usize>, n_iter: usize, notes: &mut Vec<String>) -> usize {
    match burn_in {
        Some(b) => {
            notes.push(format!("burn-in detected at iteration {b}"));
            b
        }
        None => {
            notes.push("warning: chains did not settle below R = 1.1; summarising the second half".into());
            n_iter / 2
        }
    }
}

fn method_name(m: FitMethod) -> &'static str {
    match m {
        FitMethod::Auto => "auto",
        FitMethod::Exact => "exact",
        FitMethod::Gibbs => "gibbs",
        FitMethod::Mh => "mh",
    }
}

fn write(opts: &FitOpts, seed: u64, fit: Fit) -> Result<()> {
    let kept: Vec<PosteriorSample> = fit.chains.iter().map(|c| c.after(fit.burn_in)).collect();
    if kept.iter().all(|c| c.is_empty()) {
        bail!("no draws left after burn-in {}", fit.burn_in);
    }
    let manifest = Manifest::new("fit", Some(seed), opts)?;
    let line = manifest.line();
    let mut out = Outputs::create(opts.out.as_deref().unwrap_or("out".as_ref()))?;

    let mut table = format!("# {line}\nfrom,to,mean,sd,q025,q975\n");
    for e in summarize(&kept, 0) {
        let s = &e.stats;
        writeln!(table, "{},{},{:.6},{:.6},{:.6},{:.6}", e.row + 1, e.col + 1, s.mean, s.sd, s.q025, s.q975)?;
    }
    std::fs::write(out.file("summary.csv"), &table)?;
    save_posterior(out.file("posterior.csv"), &kept, Some(&line))?;
    if let Some(trace) = &fit.trace_csv {
        std::fs::write(out.file("trace.csv"), format!("# {line}\n{trace}"))?;
    }
    if let Some(eta) = summarize_eta(&kept, 0) {
        let mut text = format!("# {line}\nstate,mean,sd,q025,q975\n");
        for (i, s) in eta.iter().enumerate() {
            writeln!(text, "{},{:.6},{:.6},{:.6},{:.6}", i + 1, s.mean, s.sd, s.q025, s.q975)?;
        }
        std::fs::write(out.file("eta.csv"), text)?;
    }
    out.write_manifest(&manifest, opts)?;
    out.commit();

    let draws: usize = kept.iter().map(|c| c.len()).sum();
    println!("method {}: {draws} draws after burn-in {}", method_name(fit.method), fit.burn_in);
    for note in &fit.notes {
        println!("{note}");
    }
    print!("{}", table.lines().skip(1).collect::<Vec<_>>().join("\n"));
    println!();
    Ok(())
}
