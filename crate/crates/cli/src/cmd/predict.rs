use std::fs::File;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use transition_bayes::posterior::load_posterior;
use transition_bayes::predict::{mttf_sample, posterior_matrices, predictive_bands, write_mttf_csv};
use transition_bayes::PosteriorSample;

use super::{initial_law, state_index};
use crate::config::resolve;
use crate::output::{Manifest, Outputs};

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictOpts {
    /// TOML file whose `[predict]` table supplies defaults for these flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Posterior CSV written by `fit`.
    #[arg(long)]
    pub posterior: Option<PathBuf>,
    /// Last time index of the bands.
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub p0: Option<Vec<f64>>,
    /// Absorbing state for the MTTF (1-based; defaults to the last state).
    #[arg(long)]
    pub absorbing: Option<usize>,
    /// Starting state for the MTTF (1-based).
    #[arg(long)]
    pub start: Option<usize>,
    /// Skip the MTTF sample.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub no_mttf: Option<bool>,
    /// Use every k-th draw.
    #[arg(long)]
    pub thin: Option<usize>,
}

pub fn run(flags: PredictOpts) -> Result<()> {
    let opts = resolve(&flags, flags.config.as_deref(), "predict")?;
    let path = opts.posterior.as_ref().context("--posterior is required")?;
    let chains: Vec<PosteriorSample> = load_posterior(path)
        .with_context(|| format!("loading {}", path.display()))?
        .iter()
        .map(|c| c.thinned(opts.thin.unwrap_or(1)))
        .collect();
    let draws = posterior_matrices(&chains, 0);
    if draws.is_empty() {
        bail!("{} holds no draws", path.display());
    }
    let r = draws[0].dim();
    let p0 = initial_law(opts.p0.as_deref(), r)?;
    let horizon = opts.horizon.unwrap_or(20);
    let bands = predictive_bands(&draws, p0.probs(), horizon)?;
    let mttf = if opts.no_mttf.unwrap_or(false) {
        None
    } else {
        let absorbing = state_index(opts.absorbing.unwrap_or(r), r, "--absorbing")?;
        let start = state_index(opts.start.unwrap_or(1), r, "--start")?;
        Some(mttf_sample(&draws, absorbing, start)?)
    };

    let manifest = Manifest::new("predict", None, &opts)?;
    let line = manifest.line();
    let mut out = Outputs::create(opts.out.as_deref().unwrap_or("out".as_ref()))?;
    bands.write_csv(File::create(out.file("bands.csv"))?, Some(&line))?;
    if let Some(sample) = &mttf {
        write_mttf_csv(File::create(out.file("mttf.csv"))?, sample, Some(&line))?;
    }
    out.write_manifest(&manifest, &opts)?;
    out.commit();

    println!("{} posterior draws, bands for t=0..={horizon}", draws.len());
    if let Some(sample) = &mttf {
        let mut sorted = sample.clone();
        sorted.sort_by(f64::total_cmp);
        let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
        let q = |p| transition_bayes::posterior::quantile(&sorted, p);
        println!("MTTF mean {mean:.3}, 95% interval [{:.3}, {:.3}]", q(0.025), q(0.975));
    }
    Ok(())
}
