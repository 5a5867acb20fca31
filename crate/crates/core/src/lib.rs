//! Bayesian estimation of discrete-time Markov transition matrices from
//! complete, incomplete and aggregate panel data.
//!
//! Complete panels have a conjugate Dirichlet posterior ([`exact`]). Panels
//! with missing cells are handled by Gibbs sampling with data augmentation
//! ([`gibbs`]), and per-time state counts by Metropolis-Hastings with basic or
//! copula-coupled adaptive proposals ([`mh`]).

pub mod benchmark;
mod chains;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod exact;
pub mod gibbs;
pub mod io;
pub mod markov;
pub mod mh;
pub mod posterior;
pub mod predict;
pub mod presets;
pub mod prob;
pub mod rng;
pub mod simulate;

pub use data::{aggregate, count_transitions, expand_counts, AggregateCounts, SequencePanel, TransitionCounts};
pub use error::{Error, Result};
pub use exact::{conjugate_posterior, sample_posterior, PriorSpec, RowwisePosterior};
pub use gibbs::{run_gibbs, GibbsConfig, GibbsRun};
pub use markov::{propagate, mttf, StateDistribution, SupportMask, TransitionMatrix};
pub use mh::{run_mh, KernelKind, MhConfig, MhRun};
pub use posterior::PosteriorSample;
pub use rng::RandomStream;
