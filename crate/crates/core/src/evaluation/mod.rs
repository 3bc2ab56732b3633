//! Utility and privacy metrics for released data.
//!
//! Classifiers are fitted once on clean data and applied unchanged to every
//! release. The useful classifier for the feature mechanisms is fitted on the
//! clean reconstructions, since those mechanisms release decoder outputs; the
//! baseline is scored by the classifier fitted on the clean windows. The
//! sensitive classifier is always the one fitted on the clean windows.

mod metrics;

pub use metrics::{advantage_factor, expected_error, informativeness};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autoencoder::AutoencoderStack;
use crate::dataset::WindowedDataset;
use crate::error::{ensure_dim, Error, Result};
use crate::inference::{accuracy, RidgeClassifier};
use crate::privacy::{perturb, Mode, PrivacySpec};
use crate::scalar::{norm2, Scalar};

/// Bins used for informativeness in reports.
pub const INFORMATIVENESS_BINS: usize = 10;

/// The fixed classifiers used to score releases, all on scaled coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ClassifierSet<T> {
    /// Useful inference fitted on clean windows.
    pub useful: RidgeClassifier<T>,
    /// Useful inference fitted on clean reconstructions.
    pub useful_reconstruction: RidgeClassifier<T>,
    /// Sensitive inference fitted on clean windows.
    pub sensitive: RidgeClassifier<T>,
}

impl<T: Scalar> ClassifierSet<T> {
    /// Fits all three classifiers on `scaled` windows carrying both label kinds.
    pub fn fit(
        scaled: &WindowedDataset<T>,
        stack: &AutoencoderStack<T>,
        useful_beta: f64,
        sensitive_beta: f64,
    ) -> Result<Self> {
        let useful_pairs = scaled.useful_pairs()?;
        let sensitive_pairs = scaled.sensitive_pairs()?;
        let useful = RidgeClassifier::fit(&useful_pairs, useful_beta)?;
        let recon_pairs =
            useful_pairs.iter().map(|(x, y)| Ok((stack.reconstruct(x)?, *y))).collect::<Result<Vec<_>>>()?;
        let useful_reconstruction = RidgeClassifier::fit_with_codec(&recon_pairs, useful_beta, useful.codec.clone())?;
        let sensitive = RidgeClassifier::fit(&sensitive_pairs, sensitive_beta)?;
        Ok(Self { useful, useful_reconstruction, sensitive })
    }

    /// The useful classifier that scores releases of `mode`.
    pub fn useful_for(&self, mode: Mode) -> &RidgeClassifier<T> {
        match mode {
            Mode::Baseline => &self.useful,
            Mode::Mode1 | Mode::Mode2 => &self.useful_reconstruction,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        ensure_dim(dim, self.useful.dim())?;
        ensure_dim(dim, self.useful_reconstruction.dim())?;
        ensure_dim(dim, self.sensitive.dim())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Metrics of one release.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub epsilon: f64,
    pub mode: Mode,
    pub useful_accuracy: f64,
    pub sensitive_accuracy: f64,
    /// Mean per-coordinate L1 error in scaled coordinates.
    pub mean_l1_error: f64,
    /// `None` when undefined (zero relaxed sensitivity).
    pub advantage_factor_predicted: Option<f64>,
    /// Expected baseline error `dim_x·ΔQ/ε` over `mean_l1_error`; `None` when that error is zero.
    pub advantage_factor_measured: Option<f64>,
    pub informativeness: Vec<f64>,
    pub useful_accuracy_noise_free: f64,
    pub sensitive_accuracy_noise_free: f64,
    pub useful_chance_level: f64,
    pub sensitive_chance_level: f64,
    pub lambda: f64,
    pub delta_q: f64,
    pub delta_q_relax: Option<f64>,
    pub windows: usize,
    pub seed: Option<u64>,
}

/// Scores `released` against `original`; both in scaled coordinates, with
/// labels taken from `original`.
pub fn evaluate<T: Scalar>(
    original: &WindowedDataset<T>,
    released: &WindowedDataset<T>,
    stack: &AutoencoderStack<T>,
    classifiers: &ClassifierSet<T>,
    spec: &PrivacySpec,
) -> Result<EvalReport> {
    spec.validate()?;
    classifiers.validate(original.dim())?;
    ensure_dim(stack.input_dim, original.dim())?;
    let useful_labels = original.labels_useful().ok_or(Error::MissingLabels("useful"))?;
    let sensitive_labels = original.labels_sensitive().ok_or(Error::MissingLabels("sensitive"))?;
    let mean_l1_error = expected_error(original, released)?;

    let useful = classifiers.useful_for(spec.mode);
    let score = |clf: &RidgeClassifier<T>, windows: &[Vec<T>], labels: &[f64]| {
        accuracy(clf, windows.iter().map(Vec::as_slice).zip(labels.iter().copied()))
    };
    let useful_accuracy = score(useful, released.windows(), useful_labels)?;
    let sensitive_accuracy = score(&classifiers.sensitive, released.windows(), sensitive_labels)?;

    let noise_free: Vec<Vec<T>> = match spec.mode {
        Mode::Baseline => original.windows().to_vec(),
        Mode::Mode1 | Mode::Mode2 => original.windows().iter().map(|x| stack.reconstruct(x)).collect::<Result<_>>()?,
    };
    let useful_accuracy_noise_free = score(useful, &noise_free, useful_labels)?;
    let sensitive_accuracy_noise_free = score(&classifiers.sensitive, &noise_free, sensitive_labels)?;

    let features = released.windows().iter().map(|x| stack.encode(x)).collect::<Result<Vec<_>>>()?;
    let informativeness = informativeness(&features, useful_labels, INFORMATIVENESS_BINS)?;

    let baseline = PrivacySpec::baseline(spec.epsilon, spec.delta_q, spec.dim_x)?;
    let advantage_factor_predicted = match advantage_factor(&baseline, spec) {
        Ok(f) => Some(f),
        Err(Error::InvalidParameter { name: "delta_q_relax", .. }) => None,
        Err(e) => return Err(e),
    };
    let advantage_factor_measured = (mean_l1_error > 0.0).then(|| baseline.lambda / mean_l1_error);

    Ok(EvalReport {
        epsilon: spec.epsilon,
        mode: spec.mode,
        useful_accuracy,
        sensitive_accuracy,
        mean_l1_error,
        advantage_factor_predicted,
        advantage_factor_measured,
        informativeness,
        useful_accuracy_noise_free,
        sensitive_accuracy_noise_free,
        useful_chance_level: useful.codec.chance_level(),
        sensitive_chance_level: classifiers.sensitive.codec.chance_level(),
        lambda: spec.lambda,
        delta_q: spec.delta_q,
        delta_q_relax: spec.delta_q_relax,
        windows: original.len(),
        seed: None,
    })
}

/// RNG for one sweep point, derived from the sweep seed, `ε` and the mode.
pub fn sweep_rng(seed: u64, epsilon: f64, mode: Mode) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&epsilon.to_bits().to_le_bytes());
    key[16] = mode as u8;
    ChaCha8Rng::from_seed(key)
}

/// Releases and scores `scaled` for every `(ε, mode)` pair, ε-major order.
/// Points run in parallel; each owns the RNG from [`sweep_rng`], so the
/// result does not depend on scheduling.
pub fn tradeoff_sweep<T: Scalar>(
    scaled: &WindowedDataset<T>,
    stack: &AutoencoderStack<T>,
    classifiers: &ClassifierSet<T>,
    epsilons: &[f64],
    modes: &[Mode],
    seed: u64,
) -> Result<Vec<EvalReport>> {
    if epsilons.is_empty() || modes.is_empty() {
        return Err(Error::EmptyInput);
    }
    let grid: Vec<(f64, Mode)> = epsilons.iter().flat_map(|&e| modes.iter().map(move |&m| (e, m))).collect();
    grid.par_iter()
        .map(|&(epsilon, mode)| {
            let mut rng = sweep_rng(seed, epsilon, mode);
            let released = perturb(scaled, stack, mode, epsilon, Some(&classifiers.sensitive), &mut rng)?;
            let mut report = evaluate(scaled, &released.data, stack, classifiers, &released.spec)?;
            report.seed = Some(seed);
            Ok(report)
        })
        .collect()
}

/// Largest observed `‖E(x) − E(x′)‖₂ / ‖x − x′‖₂` over `pairs` random window pairs.
pub fn encoder_lipschitz<T: Scalar, R: Rng + ?Sized>(
    stack: &AutoencoderStack<T>,
    scaled: &WindowedDataset<T>,
    pairs: usize,
    rng: &mut R,
) -> Result<f64> {
    if scaled.len() < 2 {
        return Err(Error::invalid("dataset", "needs at least 2 windows"));
    }
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let i = rng.random_range(0..scaled.len());
        let j = rng.random_range(0..scaled.len());
        let (a, b) = (scaled.window(i), scaled.window(j));
        let dx: Vec<T> = a.iter().zip(b).map(|(&p, &q)| p - q).collect();
        let nx = norm2(&dx).as_f64();
        if nx == 0.0 {
            continue;
        }
        let fa = stack.encode(a)?;
        let fb = stack.encode(b)?;
        let df: Vec<T> = fa.iter().zip(&fb).map(|(&p, &q)| p - q).collect();
        worst = worst.max(norm2(&df).as_f64() / nx);
    }
    Ok(worst)
}
