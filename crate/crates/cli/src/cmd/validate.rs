use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use transition_bayes::io::{load_counts, load_matrix, load_panel};
use transition_bayes::posterior::load_posterior;
use transition_bayes::simulate::rra_constraints_hold;

use super::{benchmark, fit, predict, simulate};
use crate::config::resolve;

/// Parses config and data files and reports what they contain.
#[derive(Debug, Clone, Default, Args)]
pub struct ValidateOpts {
    /// Config file; every subcommand table is checked.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub panel: Option<PathBuf>,
    /// Number of states; required with --panel.
    #[arg(long)]
    pub states: Option<usize>,
    #[arg(long)]
    pub counts: Option<PathBuf>,
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Support mask applied to --matrix.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long)]
    pub posterior: Option<PathBuf>,
}

pub fn run(opts: ValidateOpts) -> Result<()> {
    let mut checked = 0;
    if let Some(cfg) = &opts.config {
        let cfg = Some(cfg.as_path());
        resolve(&simulate::SimulateOpts::default(), cfg, "simulate")?;
        resolve(&fit::FitOpts::default(), cfg, "fit")?;
        resolve(&predict::PredictOpts::default(), cfg, "predict")?;
        resolve(&benchmark::BenchmarkOpts::default(), cfg, "benchmark")?;
        println!("config: ok");
        checked += 1;
    }
    if let Some(p) = &opts.panel {
        let r = opts.states.context("--states is required with --panel")?;
        let panel = load_panel(p, r).with_context(|| format!("loading {}", p.display()))?;
        let kind = if panel.is_complete() {
            "complete"
        } else if panel.is_single_observation() {
            "single observation"
        } else {
            "incomplete"
        };
        println!(
            "panel: {} individuals, t=0..={}, {} observed cells, {kind}",
            panel.individuals(),
            panel.horizon(),
            panel.observed_cells()
        );
        checked += 1;
    }
    if let Some(c) = &opts.counts {
        let counts = load_counts(c).with_context(|| format!("loading {}", c.display()))?;
        println!(
            "counts: {} states, {} time points, {} observations",
            counts.n_states(),
            counts.rows().len(),
            counts.total()
        );
        checked += 1;
    }
    if let Some(m) = &opts.matrix {
        let matrix = load_matrix(m, opts.mask.as_deref()).with_context(|| format!("loading {}", m.display()))?;
        let rra = if rra_constraints_hold(&matrix) { ", satisfies the RRA constraints" } else { "" };
        println!("matrix: {0}x{0} row-stochastic{rra}", matrix.dim());
        checked += 1;
    }
    if let Some(p) = &opts.posterior {
        let chains = load_posterior(p).with_context(|| format!("loading {}", p.display()))?;
        let draws: usize = chains.iter().map(|c| c.len()).sum();
        println!("posterior: {} chains, {draws} draws", chains.len());
        checked += 1;
    }
    if checked == 0 {
        bail!("nothing to validate; pass --config, --panel, --counts, --matrix or --posterior");
    }
    Ok(())
}
