use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use transition_bayes::io::{load_matrix, save_counts, save_matrix, save_panel};
use transition_bayes::presets::{lee_initial, lee_matrix};
use transition_bayes::rng::{DATA_STREAM, MASK_STREAM, MATRIX_STREAM};
use transition_bayes::simulate::{
    collapse_matrix, mask_random, mask_single_observation_within, mask_state_dependent, sample_rra_matrix,
    simulate_panel, KeepSchedule,
};
use transition_bayes::{aggregate, RandomStream, StateDistribution, TransitionMatrix};

use super::{initial_law, DEFAULT_SEED};
use crate::config::resolve;
use crate::output::{Manifest, Outputs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Lee,
    Rra,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskKind {
    /// Complete panel.
    None,
    /// One observed cell per individual.
    Single,
    /// Each cell after t=0 kept with probability `keep`.
    Random,
    /// Cell in state i goes missing with probability `eta[i]`.
    Mnar,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateOpts {
    /// TOML file whose `[simulate]` table supplies defaults for these flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Generating matrix preset.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// CSV file with the generating matrix; overrides the preset.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// RRA: dimension sampled before collapsing.
    #[arg(long)]
    pub r_max: Option<usize>,
    /// RRA: number of states after collapsing.
    #[arg(long)]
    pub states: Option<usize>,
    /// Initial state law, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub p0: Option<Vec<f64>>,
    /// Number of individuals.
    #[arg(long)]
    pub m: Option<usize>,
    /// Final time index.
    #[arg(long = "T", alias = "horizon")]
    #[serde(rename = "T", alias = "horizon")]
    pub horizon: Option<usize>,
    #[arg(long, value_enum)]
    pub mask: Option<MaskKind>,
    /// Keep probability for `--mask random`.
    #[arg(long)]
    pub keep: Option<f64>,
    /// Per-state missingness probabilities for `--mask mnar`.
    #[arg(long, value_delimiter = ',')]
    pub eta: Option<Vec<f64>>,
    /// Earliest observation time for `--mask single`.
    #[arg(long)]
    pub observe_from: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn generating_matrix(opts: &SimulateOpts, seed: u64) -> Result<(TransitionMatrix, Option<StateDistribution>)> {
    if let Some(path) = &opts.matrix {
        let m = load_matrix(path, None).with_context(|| format!("loading {}", path.display()))?;
        return Ok((m, None));
    }
    match opts.preset.unwrap_or(Preset::Lee) {
        Preset::Lee => Ok((lee_matrix(), Some(lee_initial()))),
        Preset::Rra => {
            let r_max = opts.r_max.unwrap_or(6);
            let r = opts.states.unwrap_or(r_max);
            if r < 3 || r > r_max {
                bail!("RRA needs 3 <= states <= r_max, got states={r}, r_max={r_max}");
            }
            let mut rng = RandomStream::new(seed, MATRIX_STREAM);
            let mut m = sample_rra_matrix(r_max, &mut rng)?.matrix;
            while m.dim() > r {
                m = collapse_matrix(&m)?;
            }
            Ok((m, None))
        }
    }
}

pub fn run(flags: SimulateOpts) -> Result<()> {
    let opts = resolve(&flags, flags.config.as_deref(), "simulate")?;
    let seed = opts.seed.unwrap_or(DEFAULT_SEED);
    let m = opts.m.unwrap_or(100);
    let horizon = opts.horizon.unwrap_or(20);
    let mask = opts.mask.unwrap_or(MaskKind::None);

    let (matrix, preset_p0) = generating_matrix(&opts, seed)?;
    let p0 = match (&opts.p0, preset_p0) {
        (None, Some(p)) => p,
        (p, _) => initial_law(p.as_deref(), matrix.dim())?,
    };

    let complete = simulate_panel(&matrix, &p0, m, horizon, &mut RandomStream::new(seed, DATA_STREAM));
    let mut rng = RandomStream::new(seed, MASK_STREAM);
    let panel = match mask {
        MaskKind::None => complete,
        MaskKind::Single => {
            let from = opts.observe_from.unwrap_or(1);
            mask_single_observation_within(&complete, from, horizon, &mut rng)?
        }
        MaskKind::Random => {
            let keep = opts.keep.context("--mask random needs --keep")?;
            mask_random(&complete, &KeepSchedule::Constant(keep), &mut rng)?
        }
        MaskKind::Mnar => {
            let eta = opts.eta.as_deref().context("--mask mnar needs --eta")?;
            mask_state_dependent(&complete, eta, &mut rng)?
        }
    };

    let manifest = Manifest::new("simulate", Some(seed), &opts)?;
    let line = manifest.line();
    let mut out = Outputs::create(opts.out.as_deref().unwrap_or("out".as_ref()))?;
    save_panel(out.file("panel.csv"), &panel, Some(&line))?;
    save_counts(out.file("counts.csv"), &aggregate(&panel), Some(&line))?;
    save_matrix(out.file("matrix.csv"), &matrix, Some(&line))?;
    out.write_manifest(&manifest, &opts)?;
    out.commit();
    println!(
        "simulated {m} individuals over t=0..={horizon} from a {0}x{0} matrix; {1} cells observed",
        matrix.dim(),
        panel.observed_cells()
    );
    Ok(())
}
