use rand::{Rng, RngExt};

use crate::error::{Error, Result};

/// Draws index `j` with probability `weights[j] / sum(weights)`.
pub fn sample_categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Result<usize> {
    let mut total = 0.0;
    for &w in weights {
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "categorical weight must be finite and nonnegative, got {w}"
            )));
        }
        total += w;
    }
    if total <= 0.0 {
        return Err(Error::DegenerateWeights);
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (j, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = j;
            if target < acc {
                return Ok(j);
            }
        }
    }
    // rounding can leave target == total
    Ok(last_positive)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomStream;

    #[test]
    fn point_mass() {
        let mut rng = RandomStream::new(1, 0);
        for _ in 0..1000 {
            assert_eq!(sample_categorical(&[0.0, 1.0, 0.0], &mut rng).unwrap(), 1);
            assert_eq!(sample_categorical(&[0.16, 0.0, 0.0, 0.0], &mut rng).unwrap(), 0);
        }
    }

    #[test]
    fn fair_coin() {
        let mut rng = RandomStream::new(2, 0);
        let n = 100_000;
        let ones = (0..n)
            .filter(|_| sample_categorical(&[1.0, 1.0], &mut rng).unwrap() == 1)
            .count();
        assert!((ones as f64 / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn degenerate_and_invalid() {
        let mut rng = RandomStream::new(3, 0);
        assert!(matches!(
            sample_categorical(&[0.0, 0.0], &mut rng),
            Err(Error::DegenerateWeights)
        ));
        assert!(sample_categorical(&[1.0, -0.5], &mut rng).is_err());
        assert!(sample_categorical(&[], &mut rng).is_err());
    }
}
