pub mod benchmark;
pub mod fit;
pub mod predict;
pub mod simulate;
pub mod validate;

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use anyhow::{bail, Context, Result};
use transition_bayes::io::read_mask;
use transition_bayes::presets::lee_matrix;
use transition_bayes::{StateDistribution, SupportMask};

pub const DEFAULT_SEED: u64 = 1;

/// `full`, `upper`, `lee`, or the path of a 0/1 mask CSV.
pub fn parse_support(spec: &str, r: usize) -> Result<SupportMask> {
    let mask = match spec {
        "full" => SupportMask::full(r),
        "upper" => SupportMask::upper_triangular(r),
        "lee" => lee_matrix().support().clone(),
        path => read_mask(BufReader::new(
            File::open(Path::new(path)).with_context(|| format!("opening support mask {path}"))?,
        ))?,
    };
    if mask.dim() != r {
        bail!("support `{spec}` is {0}x{0} but the data have {r} states", mask.dim());
    }
    Ok(mask)
}

/// Initial law from an explicit vector, or starting in state 1.
pub fn initial_law(p0: Option<&[f64]>, r: usize) -> Result<StateDistribution> {
    match p0 {
        None => Ok(transition_bayes::presets::start_in_first(r)),
        Some(p) if p.len() != r => bail!("p0 has {} entries but there are {r} states", p.len()),
        Some(p) => Ok(StateDistribution::initial(p.to_vec())?),
    }
}

/// 1-based state label from the command line to a 0-based index.
pub fn state_index(label: usize, r: usize, what: &str) -> Result<usize> {
    if label == 0 || label > r {
        bail!("{what} must be a state in 1..={r}, got {label}");
    }
    Ok(label - 1)
}
