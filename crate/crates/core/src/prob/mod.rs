//! Random variates, densities and the small dense linear algebra used by the
//! samplers.

mod categorical;
mod copula;
mod dirichlet;
mod linalg;
mod rank;

pub use categorical::sample_categorical;
pub use copula::{
    beta_normal_score, log_beta_density, sample_gaussian_copula, std_normal_cdf,
    std_normal_quantile, CopulaSpec, GaussianCopula,
};
pub use dirichlet::{log_dirichlet_density, sample_dirichlet, DirichletParams};
pub use linalg::{
    cholesky, condition_number, stabilize_correlation, CorrelationMatrix, StabilizedCorrelation,
    MAX_CONDITION_NUMBER, REGULARIZATION_STEPS,
};
pub use rank::{empirical_cdf_scores, pearson_correlation};
