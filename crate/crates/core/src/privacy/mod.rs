//! Laplace perturbation mechanisms, sensitivity estimation and budget accounting.
//!
//! Every mechanism is a pure function of its inputs and a caller-owned RNG.
//! Sensitivities are *local*: they are estimated from the dataset being
//! released rather than from a worst case over all possible inputs.
//!
//! Mode 1 and mode 2 release `decode(encode(x) + noise)`. The noise and
//! decoding act on the features only ([`release_features`]); any further
//! processing of the released data keeps the same guarantee.

mod ledger;
mod sensitivity;

pub use ledger::{ledger_epsilon, BudgetLedger, LedgerEntry};
pub use sensitivity::{estimate_sensitivity, relaxed_sensitivity, RelaxedSensitivity};

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autoencoder::{AutoencoderStack, FeatureMap};
use crate::dataset::WindowedDataset;
use crate::error::{ensure_dim, Error, Result};
use crate::inference::RidgeClassifier;
use crate::numerics::sample_laplace;
use crate::scalar::Scalar;

/// Caveat attached to every release report.
pub const LOCAL_SENSITIVITY_NOTE: &str =
    "sensitivity is local: estimated from the released dataset itself, not a worst case over all inputs";

/// Which mechanism produced a release.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Laplace noise on every raw coordinate.
    Baseline,
    /// Noise on autoencoder features, full sensitivity.
    Mode1,
    /// Noise on autoencoder features, relaxed sensitivity.
    Mode2,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Baseline, Mode::Mode1, Mode::Mode2];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::Mode1 => "mode1",
            Mode::Mode2 => "mode2",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Mode::Baseline),
            "mode1" => Ok(Mode::Mode1),
            "mode2" => Ok(Mode::Mode2),
            other => Err(Error::invalid("mode", format!("expected baseline, mode1 or mode2, got {other:?}"))),
        }
    }
}

/// Parameters of one release and the Laplace scale they imply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacySpec {
    pub epsilon: f64,
    pub mode: Mode,
    pub delta_q: f64,
    pub delta_q_relax: Option<f64>,
    pub dim_x: usize,
    pub dim_f: Option<usize>,
    pub lambda: f64,
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0) {
        return Err(Error::invalid("epsilon", format!("must be > 0, got {epsilon}")));
    }
    Ok(())
}

fn check_sensitivity(name: &'static str, v: f64) -> Result<()> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::invalid(name, format!("must be finite and >= 0, got {v}")));
    }
    Ok(())
}

fn check_dim(name: &'static str, d: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::invalid(name, "must be >= 1"));
    }
    Ok(())
}

impl PrivacySpec {
    /// `λ = dim_x·ΔQ/ε`.
    pub fn baseline(epsilon: f64, delta_q: f64, dim_x: usize) -> Result<Self> {
        check_epsilon(epsilon)?;
        check_sensitivity("delta_q", delta_q)?;
        check_dim("dim_x", dim_x)?;
        let lambda = dim_x as f64 * delta_q / epsilon;
        Ok(Self { epsilon, mode: Mode::Baseline, delta_q, delta_q_relax: None, dim_x, dim_f: None, lambda })
    }

    /// `λ = √dim_f·dim_x·ΔQ/ε`.
    pub fn mode1(epsilon: f64, delta_q: f64, dim_x: usize, dim_f: usize) -> Result<Self> {
        check_epsilon(epsilon)?;
        check_sensitivity("delta_q", delta_q)?;
        check_dim("dim_x", dim_x)?;
        check_dim("dim_f", dim_f)?;
        let lambda = (dim_f as f64).sqrt() * dim_x as f64 * delta_q / epsilon;
        Ok(Self { epsilon, mode: Mode::Mode1, delta_q, delta_q_relax: None, dim_x, dim_f: Some(dim_f), lambda })
    }

    /// `λ = √dim_f·dim_x·ΔQ_relax/ε` with `ΔQ_relax ≤ ΔQ`.
    pub fn mode2(epsilon: f64, delta_q: f64, delta_q_relax: f64, dim_x: usize, dim_f: usize) -> Result<Self> {
        check_epsilon(epsilon)?;
        check_sensitivity("delta_q", delta_q)?;
        check_sensitivity("delta_q_relax", delta_q_relax)?;
        check_dim("dim_x", dim_x)?;
        check_dim("dim_f", dim_f)?;
        if delta_q_relax > delta_q {
            return Err(Error::invalid("delta_q_relax", format!("{delta_q_relax} exceeds delta_q {delta_q}")));
        }
        let lambda = (dim_f as f64).sqrt() * dim_x as f64 * delta_q_relax / epsilon;
        Ok(Self {
            epsilon,
            mode: Mode::Mode2,
            delta_q,
            delta_q_relax: Some(delta_q_relax),
            dim_x,
            dim_f: Some(dim_f),
            lambda,
        })
    }

    /// Rebuilds the spec from its inputs and checks that `λ` agrees.
    pub fn validate(&self) -> Result<()> {
        let rebuilt = match (self.mode, self.dim_f, self.delta_q_relax) {
            (Mode::Baseline, None, None) => Self::baseline(self.epsilon, self.delta_q, self.dim_x)?,
            (Mode::Mode1, Some(f), None) => Self::mode1(self.epsilon, self.delta_q, self.dim_x, f)?,
            (Mode::Mode2, Some(f), Some(r)) => Self::mode2(self.epsilon, self.delta_q, r, self.dim_x, f)?,
            _ => return Err(Error::invalid("mode", "fields inconsistent with mode")),
        };
        if rebuilt.lambda.to_bits() != self.lambda.to_bits() {
            return Err(Error::invalid("lambda", format!("{} does not match {}", self.lambda, rebuilt.lambda)));
        }
        Ok(())
    }
}

/// Output of a mechanism together with the parameters used.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbed<T> {
    pub data: WindowedDataset<T>,
    pub spec: PrivacySpec,
    pub relaxed: Option<RelaxedSensitivity>,
}

/// Adds i.i.d. `Lap(spec.lambda)` to every coordinate of every window.
pub fn perturb_baseline_with<T: Scalar, R: Rng + ?Sized>(
    data: &WindowedDataset<T>,
    spec: &PrivacySpec,
    rng: &mut R,
) -> Result<WindowedDataset<T>> {
    spec.validate()?;
    if spec.mode != Mode::Baseline {
        return Err(Error::invalid("mode", "baseline mechanism needs a baseline spec"));
    }
    ensure_dim(spec.dim_x, data.dim())?;
    let lambda = T::lit(spec.lambda);
    let windows = data
        .windows()
        .iter()
        .map(|w| w.iter().map(|&v| Ok(v + sample_laplace(rng, lambda)?)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    data.replace_windows(windows)
}

/// Baseline mechanism with `ΔQ` estimated from `data`.
pub fn perturb_baseline<T: Scalar, R: Rng + ?Sized>(
    data: &WindowedDataset<T>,
    epsilon: f64,
    rng: &mut R,
) -> Result<Perturbed<T>> {
    check_epsilon(epsilon)?;
    let delta_q = estimate_sensitivity(data)?.as_f64();
    let spec = PrivacySpec::baseline(epsilon, delta_q, data.dim())?;
    let out = perturb_baseline_with(data, &spec, rng)?;
    Ok(Perturbed { data: out, spec, relaxed: None })
}

/// Adds i.i.d. `Lap(lambda)` to every feature and decodes.
///
/// Only the features and the decoder are visible here.
pub fn release_features<T, M, R>(features: &[Vec<T>], map: &M, lambda: f64, rng: &mut R) -> Result<Vec<Vec<T>>>
where
    T: Scalar,
    M: FeatureMap<T> + ?Sized,
    R: Rng + ?Sized,
{
    let scale = T::lit(lambda);
    features
        .iter()
        .map(|f| {
            ensure_dim(map.feature_dim(), f.len())?;
            let noisy = f.iter().map(|&v| Ok(v + sample_laplace(rng, scale)?)).collect::<Result<Vec<_>>>()?;
            map.decode(&noisy)
        })
        .collect()
}

/// Encodes every window, then hands only the features to [`release_features`].
pub fn perturb_features_with<T, M, R>(
    data: &WindowedDataset<T>,
    map: &M,
    spec: &PrivacySpec,
    rng: &mut R,
) -> Result<WindowedDataset<T>>
where
    T: Scalar,
    M: FeatureMap<T> + ?Sized,
    R: Rng + ?Sized,
{
    spec.validate()?;
    if spec.mode == Mode::Baseline {
        return Err(Error::invalid("mode", "feature mechanism needs a mode1 or mode2 spec"));
    }
    ensure_dim(map.input_dim(), data.dim())?;
    ensure_dim(spec.dim_x, data.dim())?;
    ensure_dim(map.feature_dim(), spec.dim_f.unwrap_or(0))?;
    let features = data.windows().iter().map(|x| map.encode(x)).collect::<Result<Vec<_>>>()?;
    let released = release_features(&features, map, spec.lambda, rng)?;
    data.replace_windows(released)
}

/// Usage mode 1: features perturbed at full sensitivity.
pub fn perturb_mode1<T, M, R>(data: &WindowedDataset<T>, map: &M, epsilon: f64, rng: &mut R) -> Result<Perturbed<T>>
where
    T: Scalar,
    M: FeatureMap<T> + ?Sized,
    R: Rng + ?Sized,
{
    check_epsilon(epsilon)?;
    let delta_q = estimate_sensitivity(data)?.as_f64();
    let spec = PrivacySpec::mode1(epsilon, delta_q, data.dim(), map.feature_dim())?;
    let out = perturb_features_with(data, map, &spec, rng)?;
    Ok(Perturbed { data: out, spec, relaxed: None })
}

/// Usage mode 2: features perturbed at the sensitivity relaxed with respect
/// to `sensitive`, a classifier on the same space as `data`.
pub fn perturb_mode2<T, M, R>(
    data: &WindowedDataset<T>,
    map: &M,
    sensitive: &RidgeClassifier<T>,
    epsilon: f64,
    rng: &mut R,
) -> Result<Perturbed<T>>
where
    T: Scalar,
    M: FeatureMap<T> + ?Sized,
    R: Rng + ?Sized,
{
    check_epsilon(epsilon)?;
    let delta_q = estimate_sensitivity(data)?.as_f64();
    let relaxed = relaxed_sensitivity(sensitive, data, delta_q)?;
    let spec = PrivacySpec::mode2(epsilon, delta_q, relaxed.delta_q_relax, data.dim(), map.feature_dim())?;
    let out = perturb_features_with(data, map, &spec, rng)?;
    Ok(Perturbed { data: out, spec, relaxed: Some(relaxed) })
}

/// Dispatches to the mechanism for `mode`; `sensitive` is required by mode 2
/// and ignored otherwise.
pub fn perturb<T, M, R>(
    data: &WindowedDataset<T>,
    map: &M,
    mode: Mode,
    epsilon: f64,
    sensitive: Option<&RidgeClassifier<T>>,
    rng: &mut R,
) -> Result<Perturbed<T>>
where
    T: Scalar,
    M: FeatureMap<T> + ?Sized,
    R: Rng + ?Sized,
{
    match mode {
        Mode::Baseline => perturb_baseline(data, epsilon, rng),
        Mode::Mode1 => perturb_mode1(data, map, epsilon, rng),
        Mode::Mode2 => {
            let clf = sensitive.ok_or_else(|| Error::invalid("sensitive", "mode2 needs a sensitive classifier"))?;
            perturb_mode2(data, map, clf, epsilon, rng)
        }
    }
}

/// A release of raw sensor windows through a trained stack.
#[derive(Debug, Clone, PartialEq)]
pub struct Protected<T> {
    /// Released windows in sensor units.
    pub data: WindowedDataset<T>,
    /// Released windows in the stack's scaled coordinates.
    pub scaled: WindowedDataset<T>,
    pub spec: PrivacySpec,
    pub relaxed: Option<RelaxedSensitivity>,
}

/// Runs `mode` on raw windows: scale with the stack's scaler, perturb in
/// scaled coordinates, unscale. Baseline also runs in scaled coordinates so
/// all modes share one sensitivity scale. `sensitive` (mode 2 only) must be
/// trained on scaled windows.
pub fn protect<T: Scalar, R: Rng + ?Sized>(
    raw: &WindowedDataset<T>,
    stack: &AutoencoderStack<T>,
    mode: Mode,
    epsilon: f64,
    sensitive: Option<&RidgeClassifier<T>>,
    rng: &mut R,
) -> Result<Protected<T>> {
    let scaler = stack.scaler()?;
    let scaled_in = scaler.scale_dataset(raw)?;
    let released = perturb(&scaled_in, stack, mode, epsilon, sensitive, rng)?;
    let data = scaler.unscale_dataset(&released.data)?;
    Ok(Protected { data, scaled: released.data, spec: released.spec, relaxed: released.relaxed })
}

/// JSON sidecar written next to a perturbed CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReleaseSidecar {
    pub epsilon: f64,
    pub mode: Mode,
    pub lambda: f64,
    pub delta_q: f64,
    pub delta_q_relax: Option<f64>,
    pub gamma_max: Option<f64>,
    pub dim_x: usize,
    pub dim_f: Option<usize>,
    pub seed: u64,
    pub windows: usize,
    pub dropped_samples: usize,
    pub sensitivity: String,
}

impl ReleaseSidecar {
    pub fn new(
        spec: &PrivacySpec,
        relaxed: Option<&RelaxedSensitivity>,
        seed: u64,
        windows: usize,
        dropped: usize,
    ) -> Self {
        Self {
            epsilon: spec.epsilon,
            mode: spec.mode,
            lambda: spec.lambda,
            delta_q: spec.delta_q,
            delta_q_relax: spec.delta_q_relax,
            gamma_max: relaxed.map(|r| r.gamma_max),
            dim_x: spec.dim_x,
            dim_f: spec.dim_f,
            seed,
            windows,
            dropped_samples: dropped,
            sensitivity: LOCAL_SENSITIVITY_NOTE.to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoencoder::{HyperParams, LayerParams};
    use crate::inference::LabelCodec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn data(n: usize, d: usize, seed: u64) -> WindowedDataset<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
        WindowedDataset::from_windows(1, d, w).unwrap()
    }

    fn stack(d: usize, h: usize) -> AutoencoderStack<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let layer = LayerParams::random(d, h, &mut rng);
        AutoencoderStack::from_layers(vec![layer], vec![0.0; d], HyperParams::default()).unwrap()
    }

    #[test]
    fn lambda_formulas() {
        assert_eq!(PrivacySpec::baseline(5.0, 1.0, 30).unwrap().lambda, 6.0);
        let m1 = PrivacySpec::mode1(5.0, 0.5, 30, 7).unwrap();
        assert!((m1.lambda - 3.0 * 7f64.sqrt()).abs() < 1e-12);
        let m2 = PrivacySpec::mode2(5.0, 0.5, 0.25, 30, 7).unwrap();
        assert!((m2.lambda - 1.5 * 7f64.sqrt()).abs() < 1e-12);
        assert_eq!(PrivacySpec::baseline(f64::INFINITY, 1.0, 30).unwrap().lambda, 0.0);
    }

    #[test]
    fn spec_rejects_bad_inputs() {
        assert!(PrivacySpec::baseline(0.0, 1.0, 3).is_err());
        assert!(PrivacySpec::baseline(-1.0, 1.0, 3).is_err());
        assert!(PrivacySpec::baseline(f64::NAN, 1.0, 3).is_err());
        assert!(PrivacySpec::baseline(1.0, -1.0, 3).is_err());
        assert!(PrivacySpec::mode1(1.0, 1.0, 3, 0).is_err());
        assert!(PrivacySpec::mode2(1.0, 1.0, 1.5, 3, 2).is_err());
        let mut s = PrivacySpec::baseline(1.0, 1.0, 3).unwrap();
        s.lambda = 2.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn mode_parsing() {
        for m in Mode::ALL {
            assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
        }
        assert!("mode3".parse::<Mode>().is_err());
        assert_eq!(serde_json::to_string(&Mode::Mode2).unwrap(), "\"mode2\"");
    }

    #[test]
    fn baseline_infinite_epsilon_is_identity() {
        let d = data(20, 6, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let out = perturb_baseline(&d, f64::INFINITY, &mut rng).unwrap();
        for (a, b) in d.windows().iter().zip(out.data.windows()) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn baseline_preserves_shape_and_labels() {
        let d = data(15, 4, 3).with_useful_labels(vec![1.0; 15]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let out = perturb_baseline(&d, 1.0, &mut rng).unwrap();
        assert_eq!(out.data.len(), 15);
        assert_eq!(out.data.dim(), 4);
        assert_eq!(out.data.labels_useful(), d.labels_useful());
    }

    #[test]
    fn baseline_mean_abs_noise_matches_lambda() {
        let windows = (0..2000).map(|i| vec![(i % 2) as f64; 30]).collect();
        let d_big = WindowedDataset::from_windows(1, 30, windows).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let out = perturb_baseline(&d_big, 5.0, &mut rng).unwrap();
        assert_eq!(out.spec.lambda, 6.0);
        let mut sum = 0.0;
        for (a, b) in d_big.windows().iter().zip(out.data.windows()) {
            for (x, y) in a.iter().zip(b) {
                sum += (x - y).abs();
            }
        }
        let mean = sum / 60_000.0;
        assert!((mean - 6.0).abs() < 0.15, "{mean}");
    }

    #[test]
    fn mode1_infinite_epsilon_is_reconstruction() {
        let d = data(10, 6, 6);
        let s = stack(6, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let out = perturb_mode1(&d, &s, f64::INFINITY, &mut rng).unwrap();
        for (x, y) in d.windows().iter().zip(out.data.windows()) {
            assert_eq!(&s.reconstruct(x).unwrap(), y);
        }
    }

    #[test]
    fn mechanisms_deterministic() {
        let d = data(10, 6, 8);
        let s = stack(6, 3);
        let run = |seed| perturb_mode1(&d, &s, 1.0, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap().data;
        assert_eq!(run(1), run(1));
        assert_ne!(run(1), run(2));
    }

    #[test]
    fn mode2_at_full_sensitivity_equals_mode1() {
        let d = data(12, 6, 9);
        let s = stack(6, 3);
        let dq = estimate_sensitivity(&d).unwrap();
        let m1 = PrivacySpec::mode1(2.0, dq, 6, 3).unwrap();
        let m2 = PrivacySpec::mode2(2.0, dq, dq, 6, 3).unwrap();
        let a = perturb_features_with(&d, &s, &m1, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = perturb_features_with(&d, &s, &m2, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mode2_uses_smaller_scale() {
        let d = data(12, 6, 10);
        let s = stack(6, 3);
        let mut c = vec![0.0; 6];
        c[0] = 1.0;
        let clf = RidgeClassifier::new(c, 0.0, LabelCodec::binary()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m2 = perturb_mode2(&d, &s, &clf, 2.0, &mut rng).unwrap();
        let m1 = perturb_mode1(&d, &s, 2.0, &mut rng).unwrap();
        assert!(m2.spec.lambda < m1.spec.lambda);
        assert!(m2.relaxed.unwrap().delta_q_relax < m2.spec.delta_q);
    }

    #[test]
    fn mismatched_stack_rejected() {
        let d = data(5, 6, 11);
        let s = stack(5, 2);
        assert!(perturb_mode1(&d, &s, 1.0, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn protect_needs_scaler_and_sensitive_classifier() {
        let d = data(8, 4, 12);
        let mut s = stack(4, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(protect(&d, &s, Mode::Mode1, 1.0, None, &mut rng).is_err());
        s.scaler = Some(crate::dataset::MinMaxScaler::fit(&d));
        assert!(protect(&d, &s, Mode::Mode1, 1.0, None, &mut rng).is_ok());
        assert!(protect(&d, &s, Mode::Mode2, 1.0, None, &mut rng).is_err());
    }
}
