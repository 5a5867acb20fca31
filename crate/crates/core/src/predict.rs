//! Posterior predictive state probabilities and mean time to failure.

use std::io::Write;

use crate::error::{Error, Result};
use crate::markov::{mttf, propagate_path, TransitionMatrix};
use crate::posterior::{quantile, PosteriorSample};

/// Pointwise 95% bands of `p_j(t)` across posterior draws.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveBands {
    /// `[t][j]`
    pub mean: Vec<Vec<f64>>,
    pub lower: Vec<Vec<f64>>,
    pub upper: Vec<Vec<f64>>,
}

impl PredictiveBands {
    pub fn horizon(&self) -> usize {
        self.mean.len().saturating_sub(1)
    }

    /// CSV with columns `t,state,mean,q025,q975`; states are 1-based.
    pub fn write_csv<W: Write>(&self, mut out: W, manifest: Option<&str>) -> Result<()> {
        if let Some(m) = manifest {
            for line in m.lines() {
                writeln!(out, "# {line}")?;
            }
        }
        writeln!(out, "t,state,mean,q025,q975")?;
        for (t, ((m, lo), hi)) in self.mean.iter().zip(&self.lower).zip(&self.upper).enumerate() {
            for j in 0..m.len() {
                writeln!(out, "{t},{},{:?},{:?},{:?}", j + 1, m[j], lo[j], hi[j])?;
            }
        }
        Ok(())
    }
}

/// Matrices of every draw of every chain with iteration `>= from_iter`.
pub fn posterior_matrices(chains: &[PosteriorSample], from_iter: usize) -> Vec<TransitionMatrix> {
    chains
        .iter()
        .flat_map(|c| {
            c.draws()
                .iter()
                .enumerate()
                .filter(move |(_, d)| d.iter >= from_iter)
                .map(move |(k, _)| c.matrix(k))
        })
        .collect()
}

pub fn predictive_bands(draws: &[TransitionMatrix], p0: &[f64], horizon: usize) -> Result<PredictiveBands> {
    if draws.is_empty() {
        return Err(Error::InvalidParameter("no posterior draws".into()));
    }
    let r = p0.len();
    if draws.iter().any(|m| m.dim() != r) {
        return Err(Error::InvalidParameter("initial law and matrices differ in size".into()));
    }
    let paths: Vec<Vec<Vec<f64>>> = draws.iter().map(|m| propagate_path(p0, m, horizon)).collect();
    let n = draws.len() as f64;
    let mut bands = PredictiveBands {
        mean: Vec::with_capacity(horizon + 1),
        lower: Vec::with_capacity(horizon + 1),
        upper: Vec::with_capacity(horizon + 1),
    };
    for t in 0..=horizon {
        let (mut mean, mut lower, mut upper) = (vec![0.0; r], vec![0.0; r], vec![0.0; r]);
        for j in 0..r {
            let mut v: Vec<f64> = paths.iter().map(|p| p[t][j]).collect();
            mean[j] = v.iter().sum::<f64>() / n;
            v.sort_by(f64::total_cmp);
            lower[j] = quantile(&v, 0.025);
            upper[j] = quantile(&v, 0.975);
        }
        bands.mean.push(mean);
        bands.lower.push(lower);
        bands.upper.push(upper);
    }
    Ok(bands)
}

/// Expected steps to reach `absorbing` from `start`, one value per draw.
pub fn mttf_sample(draws: &[TransitionMatrix], absorbing: usize, start: usize) -> Result<Vec<f64>> {
    draws.iter().map(|m| mttf(m, absorbing, start)).collect()
}

pub fn write_mttf_csv<W: Write>(mut out: W, sample: &[f64], manifest: Option<&str>) -> Result<()> {
    if let Some(m) = manifest {
        for line in m.lines() {
            writeln!(out, "# {line}")?;
        }
    }
    writeln!(out, "draw,mttf")?;
    for (k, v) in sample.iter().enumerate() {
        writeln!(out, "{k},{v:?}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::SupportMask;
    use crate::presets::{lee_initial, lee_matrix};

    #[test]
    fn single_draw_collapses_to_the_curve() {
        let m = lee_matrix();
        let bands = predictive_bands(std::slice::from_ref(&m), lee_initial().probs(), 10).unwrap();
        let curve = propagate_path(lee_initial().probs(), &m, 10);
        assert_eq!(bands.lower, curve);
        assert_eq!(bands.upper, curve);
        assert_eq!(bands.horizon(), 10);
    }

    #[test]
    fn first_state_band_is_a_power_of_the_diagonal() {
        // 81 draws put the 0.025 and 0.975 quantiles exactly on order statistics
        let draws: Vec<TransitionMatrix> = (1..=81)
            .map(|k| {
                let a = 0.5 + 0.4 * k as f64 / 82.0;
                TransitionMatrix::new(vec![a, 1.0 - a, 0.0, 1.0], SupportMask::upper_triangular(2)).unwrap()
            })
            .collect();
        let mut diag: Vec<f64> = draws.iter().map(|m| m.get(0, 0)).collect();
        diag.sort_by(f64::total_cmp);
        let (lo, hi) = (quantile(&diag, 0.025), quantile(&diag, 0.975));
        let bands = predictive_bands(&draws, &[1.0, 0.0], 6).unwrap();
        for t in 0..=6 {
            assert!((bands.lower[t][0] - lo.powi(t as i32)).abs() < 1e-12);
            assert!((bands.upper[t][0] - hi.powi(t as i32)).abs() < 1e-12);
        }
    }

    #[test]
    fn mttf_of_each_draw() {
        let m = TransitionMatrix::new(vec![0.8, 0.2, 0.0, 1.0], SupportMask::upper_triangular(2)).unwrap();
        let s = mttf_sample(&[m.clone(), m], 1, 0).unwrap();
        assert!((s[0] - 5.0).abs() < 1e-12);
        assert!(mttf_sample(&[lee_matrix()], 3, 0).is_err());
    }
}
