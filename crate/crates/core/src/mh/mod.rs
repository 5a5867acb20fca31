//! Metropolis-Hastings samplers for aggregate and single-observation data.
//!
//! The basic kernel proposes each free row from a Dirichlet centred on the
//! current row. The adaptive kernels couple one pivot entry per row through a
//! Gaussian copula calibrated on recent distinct states, then draw the rest of
//! each row from a conditional Dirichlet.

mod adaptive;
mod likelihood;
mod proposal;
mod sampler;

use std::fmt;
use std::str::FromStr;

use crate::error::Error;

pub use adaptive::{adaptive_proposal, select_pivots, HistoryWindow, DISTINCT_TOL};
pub use likelihood::{log_likelihood_counts, log_posterior, log_prior};
pub use proposal::{basic_log_density, basic_proposal, mh_accept, Proposal, SHAPE_FLOOR};
pub use sampler::{run_mh, ChainStats, MhConfig, MhRun};

/// Proposal mechanism of a Metropolis-Hastings run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KernelKind {
    Basic,
    Dcs,
    Rcs,
    DcsCoarse,
    RcsCoarse,
}

impl KernelKind {
    pub const ALL: [KernelKind; 5] = [
        KernelKind::Basic,
        KernelKind::Dcs,
        KernelKind::Rcs,
        KernelKind::DcsCoarse,
        KernelKind::RcsCoarse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Basic => "basic",
            KernelKind::Dcs => "dcs",
            KernelKind::Rcs => "rcs",
            KernelKind::DcsCoarse => "dcs-coarse",
            KernelKind::RcsCoarse => "rcs-coarse",
        }
    }

    pub fn is_adaptive(self) -> bool {
        self != KernelKind::Basic
    }

    /// Pivots drawn at random within each row rather than on the diagonal.
    pub fn random_pivots(self) -> bool {
        matches!(self, KernelKind::Rcs | KernelKind::RcsCoarse)
    }

    /// Correlation estimated on empirical-cdf ranks rather than raw values.
    pub fn uses_ranks(self) -> bool {
        matches!(self, KernelKind::Dcs | KernelKind::Rcs)
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        KernelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown kernel '{s}'")))
    }
}
