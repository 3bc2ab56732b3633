use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::SensorStream;
use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;
use crate::scalar::{dot, norm2, Scalar};

/// Parameters of the synthetic sensor generator.
///
/// Each window (in the stacked coordinates of [`crate::dataset::window`]) is
///
/// ```text
/// dev   = Σ_k amplitude_k · z_k · basis_k  +  sensitive_amplitude · ζ · s
/// clean = offsets (per sensor, repeated over the window) + dev
/// x     = clean + noise_sigma · ε
/// ```
///
/// with `z_k, ζ, ε` i.i.d. standard normal. Labels are read off the clean
/// deviation: `y^U = sign(u·dev)` (0 maps to +1) and `y^S ∈ {1..classes}` by
/// cutting `s·dev` at the population quantiles `j/classes` of its normal law.
/// Every timestamp of a window carries that window's labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub window_size: usize,
    /// Per-sensor constant baseline.
    pub offsets: Vec<f64>,
    /// Latent directions in window space.
    pub basis: Vec<Vec<f64>>,
    pub amplitudes: Vec<f64>,
    /// Unit direction `u` defining the useful label.
    pub useful_direction: Vec<f64>,
    /// Unit direction `s` defining the sensitive label.
    pub sensitive_direction: Vec<f64>,
    pub sensitive_amplitude: f64,
    pub sensitive_classes: usize,
    pub noise_sigma: f64,
    pub rate_hz: f64,
}

fn dct_atom(k: usize, n: usize) -> Vec<f64> {
    let v: Vec<f64> =
        (0..n).map(|tau| (std::f64::consts::PI * k as f64 * (tau as f64 + 0.5) / n as f64).cos()).collect();
    let norm = norm2(&v);
    v.into_iter().map(|x| x / norm).collect()
}

fn embed(atom: &[f64], sensor: usize, n_sensors: usize) -> Vec<f64> {
    let mut v = vec![0.0; atom.len() * n_sensors];
    for (tau, &a) in atom.iter().enumerate() {
        v[tau * n_sensors + sensor] = a;
    }
    v
}

impl SynthSpec {
    /// Default recipe for `n_sensors` sensors and windows of `window_size` samples.
    ///
    /// The latent basis holds the three lowest cosine atoms of every sensor
    /// (amplitudes 1.0, 0.6, 0.4). `u` contrasts the mean level of sensors 1
    /// and 2. `s` is the highest-frequency atom of sensor 1, orthogonal to the
    /// latent basis and small in amplitude.
    pub fn standard(n_sensors: usize, window_size: usize) -> Result<Self> {
        if n_sensors == 0 {
            return Err(Error::invalid("n_sensors", "must be >= 1"));
        }
        if window_size < 2 {
            return Err(Error::invalid("window_size", "standard recipe needs >= 2 samples per window"));
        }
        let freqs = 3.min(window_size - 1);
        let base_amp = [1.0, 0.6, 0.4];
        let mut basis = Vec::new();
        let mut amplitudes = Vec::new();
        for s in 0..n_sensors {
            for (k, &amp) in base_amp.iter().enumerate().take(freqs) {
                basis.push(embed(&dct_atom(k, window_size), s, n_sensors));
                amplitudes.push(amp);
            }
        }
        let dc0 = embed(&dct_atom(0, window_size), 0, n_sensors);
        let useful_direction = if n_sensors >= 2 {
            let dc1 = embed(&dct_atom(0, window_size), 1, n_sensors);
            let v: Vec<f64> = dc0.iter().zip(&dc1).map(|(a, b)| a - b).collect();
            let n = norm2(&v);
            v.into_iter().map(|x| x / n).collect()
        } else {
            dc0
        };
        let sensitive_direction = embed(&dct_atom(window_size - 1, window_size), 0, n_sensors);
        let mut offsets = vec![0.0; n_sensors];
        if n_sensors >= 3 {
            offsets[2] = 9.81;
        }
        Ok(Self {
            window_size,
            offsets,
            basis,
            amplitudes,
            useful_direction,
            sensitive_direction,
            sensitive_amplitude: 0.02,
            sensitive_classes: 3,
            noise_sigma: 0.002,
            rate_hz: 10.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.offsets.len() * self.window_size
    }

    pub fn validate(&self, n_sensors: usize) -> Result<()> {
        if self.noise_sigma.is_nan() || self.noise_sigma < 0.0 {
            return Err(Error::invalid("noise_sigma", format!("must be >= 0, got {}", self.noise_sigma)));
        }
        if self.sensitive_amplitude.is_nan() || self.sensitive_amplitude < 0.0 {
            return Err(Error::invalid("sensitive_amplitude", "must be >= 0"));
        }
        if self.offsets.len() != n_sensors {
            return Err(Error::DimensionMismatch { expected: n_sensors, found: self.offsets.len() });
        }
        if self.window_size == 0 {
            return Err(Error::invalid("window_size", "must be >= 1"));
        }
        if self.sensitive_classes < 2 {
            return Err(Error::invalid("sensitive_classes", "must be >= 2"));
        }
        if self.basis.len() != self.amplitudes.len() {
            return Err(Error::DimensionMismatch { expected: self.basis.len(), found: self.amplitudes.len() });
        }
        let dim = self.dim();
        for v in self.basis.iter().chain([&self.useful_direction, &self.sensitive_direction]) {
            if v.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: v.len() });
            }
        }
        for (name, v) in
            [("useful_direction", &self.useful_direction), ("sensitive_direction", &self.sensitive_direction)]
        {
            if (norm2(v) - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(name, "must have unit L2 norm"));
            }
        }
        if !(self.rate_hz > 0.0) {
            return Err(Error::invalid("rate_hz", "must be positive"));
        }
        Ok(())
    }

    /// Standard deviation of `s·dev` under the generator.
    fn sensitive_score_sd(&self) -> f64 {
        let mut var = self.sensitive_amplitude.powi(2);
        for (b, &a) in self.basis.iter().zip(&self.amplitudes) {
            var += (a * dot(&self.sensitive_direction, b)).powi(2);
        }
        var.sqrt()
    }

    /// Cut points of `s·dev` separating the sensitive classes.
    pub fn sensitive_thresholds(&self) -> Vec<f64> {
        let sd = self.sensitive_score_sd();
        (1..self.sensitive_classes).map(|j| sd * inverse_normal_cdf(j as f64 / self.sensitive_classes as f64)).collect()
    }

    pub fn useful_label(&self, dev: &[f64]) -> f64 {
        if dot(&self.useful_direction, dev) >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn sensitive_label(&self, dev: &[f64], thresholds: &[f64]) -> f64 {
        let score = dot(&self.sensitive_direction, dev);
        (1 + thresholds.iter().filter(|&&q| score >= q).count()) as f64
    }

    /// Offsets repeated over a window, in stacked coordinates.
    pub fn window_offsets(&self) -> Vec<f64> {
        (0..self.window_size).flat_map(|_| self.offsets.iter().copied()).collect()
    }
}

/// Generates a labeled stream of `t` samples from `n_s` sensors.
///
/// Deterministic in `seed`. Whole windows are generated and the stream is cut
/// to `t` samples, so a trailing partial window carries the labels of the
/// window it was cut from.
pub fn synthesize<T: Scalar>(seed: u64, n_s: usize, t: usize, spec: &SynthSpec) -> Result<SensorStream<T>> {
    spec.validate(n_s)?;
    if t == 0 {
        return Err(Error::EmptyInput);
    }
    let nw = spec.window_size;
    let dim = spec.dim();
    let offsets = spec.window_offsets();
    let thresholds = spec.sensitive_thresholds();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_windows = t.div_ceil(nw);

    let mut samples = DenseMatrix::<T>::zeros(n_s, t);
    let mut y_useful = Vec::with_capacity(t);
    let mut y_sensitive = Vec::with_capacity(t);
    let mut dev = vec![0.0; dim];
    for w in 0..n_windows {
        dev.iter_mut().for_each(|d| *d = 0.0);
        for (b, &a) in spec.basis.iter().zip(&spec.amplitudes) {
            let z: f64 = StandardNormal.sample(&mut rng);
            for (d, &bi) in dev.iter_mut().zip(b) {
                *d += a * z * bi;
            }
        }
        let zeta: f64 = StandardNormal.sample(&mut rng);
        for (d, &si) in dev.iter_mut().zip(&spec.sensitive_direction) {
            *d += spec.sensitive_amplitude * zeta * si;
        }
        let yu = spec.useful_label(&dev);
        let ys = spec.sensitive_label(&dev, &thresholds);
        for tau in 0..nw {
            let col = w * nw + tau;
            for s in 0..n_s {
                let i = tau * n_s + s;
                let e: f64 = StandardNormal.sample(&mut rng);
                if col < t {
                    samples[(s, col)] = T::lit(offsets[i] + dev[i] + spec.noise_sigma * e);
                }
            }
            if col < t {
                y_useful.push(yu);
                y_sensitive.push(ys);
            }
        }
    }
    SensorStream::new(samples, spec.rate_hz)?.with_useful_labels(y_useful)?.with_sensitive_labels(y_sensitive)
}

/// Standard normal quantile function (Acklam's rational approximation,
/// relative error below 1.2e-9).
pub fn inverse_normal_cdf(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.38357751867269e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00, 3.754408661907416e+00];
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let lower = 0.02425;
    if p < lower {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - lower {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -inverse_normal_cdf(1.0 - p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::window;

    #[test]
    fn deterministic_per_seed() {
        let spec = SynthSpec::standard(3, 10).unwrap();
        let a = synthesize::<f64>(1, 3, 500, &spec).unwrap();
        let b = synthesize::<f64>(1, 3, 500, &spec).unwrap();
        let c = synthesize::<f64>(2, 3, 500, &spec).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.samples(), c.samples());
    }

    #[test]
    fn noise_free_labels_are_recoverable() {
        let mut spec = SynthSpec::standard(3, 10).unwrap();
        spec.noise_sigma = 0.0;
        let stream = synthesize::<f64>(5, 3, 2000, &spec).unwrap();
        let ds = window(&stream, 10).unwrap();
        let offsets = spec.window_offsets();
        let thresholds = spec.sensitive_thresholds();
        for (t, x) in ds.windows().iter().enumerate() {
            let dev: Vec<f64> = x.iter().zip(&offsets).map(|(a, b)| a - b).collect();
            assert_eq!(spec.useful_label(&dev), ds.labels_useful().unwrap()[t]);
            assert_eq!(spec.sensitive_label(&dev, &thresholds), ds.labels_sensitive().unwrap()[t]);
        }
    }

    #[test]
    fn useful_class_balance() {
        let spec = SynthSpec::standard(3, 10).unwrap();
        let stream = synthesize::<f64>(1, 3, 10_000, &spec).unwrap();
        let ds = window(&stream, 10).unwrap();
        let labels = ds.labels_useful().unwrap();
        let pos = labels.iter().filter(|&&y| y > 0.0).count() as f64 / labels.len() as f64;
        assert!((0.45..=0.55).contains(&pos), "{pos}");
    }

    #[test]
    fn sensitive_direction_orthogonal_to_latents() {
        let spec = SynthSpec::standard(3, 10).unwrap();
        for b in &spec.basis {
            assert!(dot(b, &spec.sensitive_direction).abs() < 1e-12);
        }
    }

    #[test]
    fn negative_sigma_rejected() {
        let mut spec = SynthSpec::standard(3, 10).unwrap();
        spec.noise_sigma = -0.1;
        assert!(synthesize::<f64>(1, 3, 100, &spec).is_err());
    }

    #[test]
    fn probit_matches_known_quantiles() {
        assert!((inverse_normal_cdf(0.5)).abs() < 1e-12);
        assert!((inverse_normal_cdf(2.0 / 3.0) - 0.430_727_299_295_457_5).abs() < 1e-8);
        assert!((inverse_normal_cdf(0.975) - 1.959_963_984_540_054).abs() < 1e-8);
        assert!((inverse_normal_cdf(0.01) + 2.326_347_874_040_841).abs() < 1e-8);
    }
}
