use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::beta::{beta_reg, inv_beta_reg, ln_beta};
use statrs::function::erf::{erfc, erfc_inv};

use super::linalg::{cholesky, CorrelationMatrix};
use crate::error::{Error, Result};

/// Smallest tail probability fed to the normal quantile (score of about ±37.5).
const MIN_TAIL: f64 = 1e-300;

pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

pub fn std_normal_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

pub fn log_beta_density(x: f64, a: f64, b: f64) -> f64 {
    if !(x > 0.0 && x < 1.0) {
        return f64::NEG_INFINITY;
    }
    (a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - ln_beta(a, b)
}

/// `Φ⁻¹(F(x))` for `F` the `Be(a, b)` cdf, evaluated on the smaller tail.
pub fn beta_normal_score(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return std_normal_quantile(MIN_TAIL);
    }
    if x >= 1.0 {
        return -std_normal_quantile(MIN_TAIL);
    }
    let lower = beta_reg(a, b, x);
    if lower <= 0.5 {
        std_normal_quantile(lower.max(MIN_TAIL))
    } else {
        let upper = beta_reg(b, a, 1.0 - x);
        -std_normal_quantile(upper.max(MIN_TAIL))
    }
}

/// Inverse of [`beta_normal_score`].
fn beta_from_normal_score(z: f64, a: f64, b: f64) -> f64 {
    if z <= 0.0 {
        inv_beta_reg(a, b, std_normal_cdf(z))
    } else {
        1.0 - inv_beta_reg(b, a, std_normal_cdf(-z))
    }
}

/// Gaussian copula with Beta marginals.
#[derive(Debug, Clone)]
pub struct CopulaSpec {
    pub correlation: CorrelationMatrix,
    pub marginals: Vec<(f64, f64)>,
}

impl CopulaSpec {
    pub fn new(correlation: CorrelationMatrix, marginals: Vec<(f64, f64)>) -> Result<Self> {
        if correlation.dim() != marginals.len() {
            return Err(Error::InvalidParameter(format!(
                "copula dimension {} does not match {} marginals",
                correlation.dim(),
                marginals.len()
            )));
        }
        if let Some((a, b)) = marginals
            .iter()
            .find(|(a, b)| !(*a > 0.0 && *b > 0.0 && a.is_finite() && b.is_finite()))
        {
            return Err(Error::InvalidParameter(format!(
                "Beta marginal parameters must be positive, got ({a}, {b})"
            )));
        }
        Ok(Self {
            correlation,
            marginals,
        })
    }
}

/// Gaussian copula ready for sampling and density evaluation.
#[derive(Debug, Clone)]
pub struct GaussianCopula {
    factor: DMatrix<f64>,
    precision_minus_identity: DMatrix<f64>,
    log_det: f64,
}

impl GaussianCopula {
    pub fn new(correlation: &CorrelationMatrix) -> Result<Self> {
        let factor = cholesky(correlation)?;
        Ok(Self::from_factor(factor))
    }

    /// Uses an already computed lower Cholesky factor of the correlation.
    pub fn from_factor(factor: DMatrix<f64>) -> Self {
        let n = factor.nrows();
        let log_det = 2.0 * (0..n).map(|i| factor[(i, i)].ln()).sum::<f64>();
        let inv_l = factor
            .clone()
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .expect("factor has a positive diagonal");
        let precision = inv_l.transpose() * &inv_l;
        Self {
            factor,
            precision_minus_identity: precision - DMatrix::identity(n, n),
            log_det,
        }
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    /// Correlated standard-normal scores `L g`.
    pub fn sample_scores<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let g = DVector::from_iterator(
            self.dim(),
            (0..self.dim()).map(|_| StandardNormal.sample(rng)),
        );
        (&self.factor * g).iter().copied().collect()
    }

    /// Copula log-density expressed in normal scores.
    pub fn log_density_scores(&self, z: &[f64]) -> f64 {
        let z = DVector::from_column_slice(z);
        let quad = (z.transpose() * &self.precision_minus_identity * &z)[(0, 0)];
        -0.5 * quad - 0.5 * self.log_det
    }

    /// Draws a vector with the given Beta marginals coupled by this copula.
    pub fn sample_beta<R: Rng + ?Sized>(&self, marginals: &[(f64, f64)], rng: &mut R) -> Vec<f64> {
        self.sample_scores(rng)
            .into_iter()
            .zip(marginals)
            .map(|(z, &(a, b))| beta_from_normal_score(z, a, b))
            .collect()
    }

    /// Joint log-density of a vector under the copula with Beta marginals.
    pub fn log_density_beta(&self, x: &[f64], marginals: &[(f64, f64)]) -> f64 {
        let mut total = 0.0;
        let mut scores = Vec::with_capacity(x.len());
        for (&xi, &(a, b)) in x.iter().zip(marginals) {
            let ld = log_beta_density(xi, a, b);
            if ld == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            total += ld;
            scores.push(beta_normal_score(xi, a, b));
        }
        total + self.log_density_scores(&scores)
    }
}

/// One draw from the Gaussian copula with Beta marginals described by `spec`.
pub fn sample_gaussian_copula<R: Rng + ?Sized>(spec: &CopulaSpec, rng: &mut R) -> Result<Vec<f64>> {
    let copula = GaussianCopula::new(&spec.correlation)?;
    Ok(copula.sample_beta(&spec.marginals, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomStream;
    use statrs::distribution::{Beta, ContinuousCDF};

    fn corr2(rho: f64) -> CorrelationMatrix {
        CorrelationMatrix::from_row_major(2, vec![1.0, rho, rho, 1.0]).unwrap()
    }

    #[test]
    fn normal_helpers_are_inverse() {
        for &p in &[1e-12, 0.01, 0.3, 0.5, 0.9, 0.999999] {
            assert!((std_normal_cdf(std_normal_quantile(p)) - p).abs() < 1e-10 * p);
        }
        assert!((std_normal_quantile(0.975) - 1.959963984540054).abs() < 1e-9);
    }

    #[test]
    fn score_round_trip_in_both_tails() {
        for &(a, b) in &[(600.0, 400.0), (2.0, 2.0), (25.0, 2475.0)] {
            for &z in &[-6.0, -1.2, 0.0, 0.7, 5.5] {
                let x = beta_from_normal_score(z, a, b);
                assert!(x > 0.0 && x < 1.0);
                let back = beta_normal_score(x, a, b);
                assert!((back - z).abs() < 1e-6, "a={a} b={b} z={z} back={back}");
            }
        }
    }

    #[test]
    fn beta_density_matches_statrs() {
        use statrs::distribution::Continuous;
        let d = Beta::new(3.5, 1.2).unwrap();
        for &x in &[0.01, 0.3, 0.77] {
            assert!((log_beta_density(x, 3.5, 1.2) - d.ln_pdf(x)).abs() < 1e-10);
        }
    }

    #[test]
    fn spec_validation() {
        assert!(CopulaSpec::new(corr2(0.2), vec![(1.0, 1.0)]).is_err());
        assert!(CopulaSpec::new(corr2(0.2), vec![(1.0, 1.0), (0.0, 2.0)]).is_err());
    }

    #[test]
    fn singular_correlation_propagates_failure() {
        let spec = CopulaSpec::new(corr2(1.0), vec![(2.0, 2.0), (2.0, 2.0)]).unwrap();
        let mut rng = RandomStream::new(1, 0);
        assert!(matches!(
            sample_gaussian_copula(&spec, &mut rng),
            Err(Error::CholeskyFailure { .. })
        ));
    }

    #[test]
    fn independence_copula_marginal_mean() {
        let copula = GaussianCopula::new(&CorrelationMatrix::identity(2)).unwrap();
        let marg = [(600.0, 400.0), (2.0, 2.0)];
        let mut rng = RandomStream::new(2, 0);
        let n = 100_000;
        let draws: Vec<Vec<f64>> = (0..n).map(|_| copula.sample_beta(&marg, &mut rng)).collect();
        let mean0 = draws.iter().map(|d| d[0]).sum::<f64>() / n as f64;
        assert!((mean0 - 0.6).abs() < 0.005);
        let b = Beta::new(2.0, 2.0).unwrap();
        let mut col: Vec<f64> = draws.iter().map(|d| d[1]).collect();
        col.sort_by(f64::total_cmp);
        let ks = col
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = b.cdf(x);
                (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.01, "{ks}");
    }

    #[test]
    fn density_of_identity_copula_is_product_of_marginals() {
        let copula = GaussianCopula::new(&CorrelationMatrix::identity(2)).unwrap();
        let marg = [(3.0, 5.0), (2.0, 2.0)];
        let x = [0.3, 0.6];
        let want = log_beta_density(0.3, 3.0, 5.0) + log_beta_density(0.6, 2.0, 2.0);
        assert!((copula.log_density_beta(&x, &marg) - want).abs() < 1e-12);
    }

    #[test]
    fn bivariate_copula_density_matches_closed_form() {
        let rho: f64 = 0.6;
        let copula = GaussianCopula::new(&corr2(rho)).unwrap();
        let (z1, z2) = (0.4, -1.1);
        let det = 1.0 - rho * rho;
        let want = -0.5 * det.ln()
            - (rho * rho * (z1 * z1 + z2 * z2) - 2.0 * rho * z1 * z2) / (2.0 * det);
        assert!((copula.log_density_scores(&[z1, z2]) - want).abs() < 1e-12);
    }
}
