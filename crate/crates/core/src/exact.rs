//! Conjugate Dirichlet-multinomial posterior for complete panels.

use rand::Rng;

use crate::data::TransitionCounts;
use crate::error::{Error, Result};
use crate::markov::{SupportMask, TransitionMatrix};
use crate::posterior::{Draw, PosteriorSample};
use crate::prob::{sample_dirichlet, DirichletParams};

/// Dirichlet hyperparameters per row, plus optional Beta priors on the
/// missingness probabilities of a not-at-random model.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    /// Row-major `r × r`; only supported entries are used.
    gamma: Vec<f64>,
    support: SupportMask,
    eta_prior: Option<Vec<(f64, f64)>>,
}

impl PriorSpec {
    pub fn new(gamma: Vec<f64>, support: SupportMask) -> Result<Self> {
        let r = support.dim();
        if gamma.len() != r * r {
            return Err(Error::InvalidParameter(format!(
                "prior has {} hyperparameters, expected {}",
                gamma.len(),
                r * r
            )));
        }
        for (i, j) in support.entries() {
            let g = gamma[i * r + j];
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "prior hyperparameter ({}, {}) must be positive, got {g}",
                    i + 1,
                    j + 1
                )));
            }
        }
        Ok(Self {
            gamma,
            support,
            eta_prior: None,
        })
    }

    /// γ = 1 on every supported entry.
    pub fn uniform(support: SupportMask) -> Self {
        let r = support.dim();
        Self {
            gamma: vec![1.0; r * r],
            support,
            eta_prior: None,
        }
    }

    /// Adds `Be(α_i, β_i)` priors for the per-state missingness probabilities.
    pub fn with_eta_prior(mut self, prior: Vec<(f64, f64)>) -> Result<Self> {
        if prior.len() != self.support.dim() {
            return Err(Error::InvalidParameter(format!(
                "missingness prior has {} states, expected {}",
                prior.len(),
                self.support.dim()
            )));
        }
        if prior.iter().any(|&(a, b)| !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite())) {
            return Err(Error::InvalidParameter(
                "missingness prior parameters must be positive".into(),
            ));
        }
        self.eta_prior = Some(prior);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.support.dim()
    }

    pub fn gamma(&self, i: usize, j: usize) -> f64 {
        self.gamma[i * self.dim() + j]
    }

    pub fn support(&self) -> &SupportMask {
        &self.support
    }

    pub fn eta_prior(&self) -> Option<&[(f64, f64)]> {
        self.eta_prior.as_deref()
    }

    /// Row `i` hyperparameters over its supported columns.
    pub fn row_params(&self, i: usize) -> Vec<f64> {
        self.support
            .row_support(i)
            .into_iter()
            .map(|j| self.gamma(i, j))
            .collect()
    }

    /// Entry-wise prior mean.
    pub fn mean_matrix(&self) -> TransitionMatrix {
        let r = self.dim();
        let mut entries = vec![0.0; r * r];
        for i in 0..r {
            let cols = self.support.row_support(i);
            let total: f64 = cols.iter().map(|&j| self.gamma(i, j)).sum();
            for j in cols {
                entries[i * r + j] = self.gamma(i, j) / total;
            }
        }
        TransitionMatrix::from_parts(entries, self.support.clone())
    }

    /// A matrix drawn from the prior; rows with one supported entry are unit rows.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> TransitionMatrix {
        let r = self.dim();
        let mut entries = vec![0.0; r * r];
        for i in 0..r {
            let cols = self.support.row_support(i);
            let row = draw_row(&self.row_params(i), rng);
            for (&j, v) in cols.iter().zip(row) {
                entries[i * r + j] = v;
            }
        }
        TransitionMatrix::from_parts(entries, self.support.clone())
    }
}

/// Dirichlet draw over one row's supported entries; a single entry is fixed at one.
/// Draws with an exact zero component are repeated so the support is respected.
pub(crate) fn draw_row<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Vec<f64> {
    if alpha.len() == 1 {
        return vec![1.0];
    }
    let params = DirichletParams::new(alpha.to_vec()).expect("validated hyperparameters");
    loop {
        let x = sample_dirichlet(&params, rng);
        if x.iter().all(|&v| v > 0.0) {
            return x;
        }
    }
}

/// Independent Dirichlet posteriors, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct RowwisePosterior {
    prior: PriorSpec,
}

impl RowwisePosterior {
    /// The posterior expressed as a prior for further conjugate updates.
    pub fn as_prior(&self) -> &PriorSpec {
        &self.prior
    }

    pub fn support(&self) -> &SupportMask {
        self.prior.support()
    }

    /// Parameters of row `i` over its supported columns.
    pub fn row_params(&self, i: usize) -> Vec<f64> {
        self.prior.row_params(i)
    }

    pub fn mean(&self) -> TransitionMatrix {
        self.prior.mean_matrix()
    }

    /// Analytic marginal standard deviation of entry `(i, j)`.
    pub fn sd(&self, i: usize, j: usize) -> f64 {
        if !self.support().allows(i, j) {
            return 0.0;
        }
        let total: f64 = self.row_params(i).iter().sum();
        let a = self.prior.gamma(i, j);
        (a * (total - a) / (total * total * (total + 1.0))).sqrt()
    }
}

/// Row `i` becomes `Dir(γ_i + w_i)` over its supported entries.
pub fn conjugate_posterior(prior: &PriorSpec, w: &TransitionCounts) -> Result<RowwisePosterior> {
    let r = prior.dim();
    if w.dim() != r {
        return Err(Error::InvalidParameter(format!(
            "counts are {0}x{0} but the prior is {1}x{1}",
            w.dim(),
            r
        )));
    }
    w.check_support(prior.support())?;
    let mut gamma = prior.gamma.clone();
    for (i, j) in prior.support.entries() {
        gamma[i * r + j] += w.get(i, j) as f64;
    }
    Ok(RowwisePosterior {
        prior: PriorSpec {
            gamma,
            support: prior.support.clone(),
            eta_prior: prior.eta_prior.clone(),
        },
    })
}

/// `n_draws` independent matrices from the posterior, recorded as chain 0.
pub fn sample_posterior<R: Rng + ?Sized>(
    post: &RowwisePosterior,
    n_draws: usize,
    rng: &mut R,
) -> PosteriorSample {
    let mut sample = PosteriorSample::with_capacity(0, post.support().clone(), n_draws);
    for iter in 0..n_draws {
        let m = post.prior.sample(rng);
        sample.push(Draw {
            iter,
            entries: m.entries().to_vec(),
            eta: None,
            mh: None,
        });
    }
    sample
}
