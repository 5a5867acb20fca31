use rand::{Rng, RngExt};
use rand_distr::{Distribution, Gamma};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Shapes below this are drawn as `Gamma(a + 1) * U^(1/a)` in log space.
const BOOST_SHAPE: f64 = 1e-3;

/// Dirichlet concentration vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletParams {
    alpha: Vec<f64>,
}

impl DirichletParams {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "Dirichlet needs at least 2 components, got {}",
                alpha.len()
            )));
        }
        if let Some(a) = alpha.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "Dirichlet concentration must be positive and finite, got {a}"
            )));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn total(&self) -> f64 {
        self.alpha.iter().sum()
    }

    pub fn mean(&self) -> Vec<f64> {
        let total = self.total();
        self.alpha.iter().map(|a| a / total).collect()
    }

    /// Marginal variance of each component.
    pub fn variance(&self) -> Vec<f64> {
        let total = self.total();
        self.alpha
            .iter()
            .map(|a| a * (total - a) / (total * total * (total + 1.0)))
            .collect()
    }
}

fn log_gamma_variate<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape < BOOST_SHAPE {
        let boosted = Gamma::new(shape + 1.0, 1.0).expect("positive shape");
        let u: f64 = rng.random();
        // U in [0, 1); ln(0) would give -inf, so nudge it into the open interval.
        let u = u.max(f64::MIN_POSITIVE);
        boosted.sample(rng).ln() + u.ln() / shape
    } else {
        Gamma::new(shape, 1.0).expect("positive shape").sample(rng).ln()
    }
}

/// Draws a point of the simplex from `Dir(alpha)` by normalizing Gamma variates.
///
/// Components whose log-Gamma draw is more than ~745 below the largest one
/// underflow to exactly zero; callers that need the open simplex resample.
pub fn sample_dirichlet<R: Rng + ?Sized>(params: &DirichletParams, rng: &mut R) -> Vec<f64> {
    let logs: Vec<f64> = params
        .alpha
        .iter()
        .map(|&a| log_gamma_variate(a, rng))
        .collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut x: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = x.iter().sum();
    for v in &mut x {
        *v /= total;
    }
    x
}

/// `log Dir(x | alpha)`; `-inf` when `x` sits on the boundary where the density vanishes.
pub fn log_dirichlet_density(x: &[f64], params: &DirichletParams) -> Result<f64> {
    if x.len() != params.dim() {
        return Err(Error::InvalidParameter(format!(
            "point has {} components, Dirichlet has {}",
            x.len(),
            params.dim()
        )));
    }
    let mut log_density = ln_gamma(params.total());
    for (&xi, &a) in x.iter().zip(&params.alpha) {
        log_density -= ln_gamma(a);
        if a != 1.0 {
            if xi <= 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            log_density += (a - 1.0) * xi.ln();
        } else if xi < 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
    }
    Ok(log_density)
}
