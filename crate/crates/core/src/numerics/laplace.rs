use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Zero-mean Laplace distribution with scale `λ`.
///
/// Draws use the inverse CDF `x = −λ·sgn(u)·ln(1 − 2|u|)` with `u = r − ½` and
/// `r` a 53-bit uniform from `rng.random::<f64>()` on `(0, 1)`; a zero draw of
/// `r` is rejected and redrawn so the logarithm stays finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Laplace {
    scale: f64,
}

impl Laplace {
    pub fn new(scale: f64) -> Result<Self> {
        if scale.is_nan() || scale < 0.0 {
            return Err(Error::invalid("scale", format!("must be >= 0, got {scale}")));
        }
        Ok(Self { scale })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.scale == 0.0 {
            return 0.0;
        }
        let r = loop {
            let r: f64 = rng.random();
            if r > 0.0 {
                break r;
            }
        };
        let u = r - 0.5;
        -self.scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
    }
}

/// One draw from `Lap(λ)`; `λ = 0` returns exactly zero without consuming randomness.
pub fn sample_laplace<T: Scalar, R: Rng + ?Sized>(rng: &mut R, scale: T) -> Result<T> {
    let lap = Laplace::new(scale.as_f64())?;
    Ok(T::lit(lap.sample(rng)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_scale_is_exactly_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sample_laplace(&mut rng, 0.0f64).unwrap(), 0.0);
    }

    #[test]
    fn negative_scale_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_laplace(&mut rng, -1.0f64).is_err());
    }

    #[test]
    fn reproducible_bit_for_bit() {
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..100).map(|_| sample_laplace(&mut rng, 1.5f64).unwrap().to_bits()).collect::<Vec<_>>()
        };
        assert_eq!(draw(42), draw(42));
        assert_ne!(draw(42), draw(43));
    }

    #[test]
    fn monte_carlo_mean_abs_and_tail() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let lap = Laplace::new(2.0).unwrap();
        let draws: Vec<f64> = (0..n).map(|_| lap.sample(&mut rng)).collect();
        let mean_abs = draws.iter().map(|x| x.abs()).sum::<f64>() / n as f64;
        assert!((1.98..=2.02).contains(&mean_abs), "{mean_abs}");

        let unit = Laplace::new(1.0).unwrap();
        let draws: Vec<f64> = (0..n).map(|_| unit.sample(&mut rng)).collect();
        for t in [0.5, 1.0, 2.0] {
            let p = draws.iter().filter(|x| x.abs() > t).count() as f64 / n as f64;
            assert!((p - (-t).exp()).abs() < 0.01, "t={t} p={p}");
        }
    }
}
