//! Reference matrices and initial laws used by the simulation studies.

use crate::markov::{StateDistribution, TransitionMatrix};

/// Four-state tridiagonal matrix of Lee's case study.
pub fn lee_matrix() -> TransitionMatrix {
    TransitionMatrix::from_rows(&[
        vec![0.6, 0.4, 0.0, 0.0],
        vec![0.1, 0.5, 0.4, 0.0],
        vec![0.0, 0.1, 0.7, 0.2],
        vec![0.0, 0.0, 0.1, 0.9],
    ])
    .expect("valid preset")
}

/// `(3/4, 1/4, 0, 0)`.
pub fn lee_initial() -> StateDistribution {
    StateDistribution::initial(vec![0.75, 0.25, 0.0, 0.0]).expect("valid preset")
}

/// All mass on the first state, as for a new component.
pub fn start_in_first(r: usize) -> StateDistribution {
    let mut p = vec![0.0; r];
    p[0] = 1.0;
    StateDistribution::initial(p).expect("valid preset")
}
