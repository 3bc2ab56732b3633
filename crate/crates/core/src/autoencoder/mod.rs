//! Supervised autoencoder with orthonormal tied weights.
//!
//! Each layer encodes `h = σ(W·x + b_e)` and decodes `x̃ = σ(Wᵀ·h + b_d)`;
//! a stack applies the encoders in order and the decoders in reverse. All
//! inputs are expected in the `[0, 1]` coordinates produced by the stack's
//! [`MinMaxScaler`].

mod objective;
mod train;

pub use objective::{objective_gradient, objective_terms, Gradients, ObjectiveTerms, Penalties};
pub use train::{train, train_dataset, train_monitored, Stage, TrainEvent};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{MinMaxScaler, WindowedDataset};
use crate::error::{ensure_dim, Error, Result};
use crate::numerics::DenseMatrix;
use crate::scalar::{dot, Scalar};

#[inline]
pub(crate) fn sigmoid<T: Scalar>(z: T) -> T {
    T::one() / (T::one() + (-z).exp())
}

/// Encoder/decoder pair used by the perturbation mechanisms.
pub trait FeatureMap<T: Scalar> {
    fn input_dim(&self) -> usize;
    fn feature_dim(&self) -> usize;
    fn encode(&self, x: &[T]) -> Result<Vec<T>>;
    fn decode(&self, f: &[T]) -> Result<Vec<T>>;
}

/// Parameters of one layer; the decoder weight is `Wᵀ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LayerParams<T> {
    /// `hidden × input`.
    pub weights: DenseMatrix<T>,
    pub enc_bias: Vec<T>,
    pub dec_bias: Vec<T>,
}

impl<T: Scalar> LayerParams<T> {
    /// Every entry uniform in `[−0.05, 0.05]`.
    pub fn random<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let mut draw = || T::lit(rng.random_range(-0.05..=0.05));
        let weights = DenseMatrix::from_fn(hidden, input, |_, _| draw());
        let enc_bias = (0..hidden).map(|_| draw()).collect();
        let dec_bias = (0..input).map(|_| draw()).collect();
        Self { weights, enc_bias, dec_bias }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn encode(&self, x: &[T]) -> Result<Vec<T>> {
        ensure_dim(self.input_dim(), x.len())?;
        Ok((0..self.hidden_dim()).map(|i| sigmoid(dot(self.weights.row(i), x) + self.enc_bias[i])).collect())
    }

    pub fn decode(&self, h: &[T]) -> Result<Vec<T>> {
        let mut z = self.weights.tr_mul_vec(h)?;
        for (zi, &b) in z.iter_mut().zip(&self.dec_bias) {
            *zi = sigmoid(*zi + b);
        }
        Ok(z)
    }

    /// `max |W·Wᵀ − I|`.
    pub fn orthogonality_error(&self) -> T {
        self.weights.gram_rows().max_abs_from_identity()
    }

    fn validate(&self) -> Result<()> {
        ensure_dim(self.hidden_dim(), self.enc_bias.len())?;
        ensure_dim(self.input_dim(), self.dec_bias.len())?;
        let finite = self.weights.is_finite() && self.enc_bias.iter().chain(&self.dec_bias).all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("layer parameters".into()));
        }
        Ok(())
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperParams {
    /// Weight `μ` of the utility (ridge) terms.
    pub mu: f64,
    /// Ridge regularizer `β`.
    pub beta: f64,
    /// Learning rate `α`.
    pub alpha: f64,
    /// Coefficient of `Σ W²`.
    pub weight_decay: f64,
    /// Coefficient `δ` of the KL sparsity penalty.
    pub sparsity_weight: f64,
    /// Target mean activation `ρ`.
    pub sparsity_target: f64,
    /// Iterations per greedily trained layer.
    pub iters: usize,
    /// Share of `iters` spent fine-tuning the full stack afterwards.
    pub fine_tune_fraction: f64,
    /// `None` picks full batch up to 1000 samples and 32 above.
    pub batch_size: Option<usize>,
    pub seed: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            mu: 1.0,
            beta: 0.1,
            alpha: 0.1,
            weight_decay: 1e-4,
            sparsity_weight: 0.0,
            sparsity_target: 0.05,
            iters: 500,
            fine_tune_fraction: 0.2,
            batch_size: None,
            seed: 0,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let non_negative = [
            ("mu", self.mu),
            ("beta", self.beta),
            ("weight_decay", self.weight_decay),
            ("sparsity_weight", self.sparsity_weight),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::invalid("alpha", format!("must be > 0, got {}", self.alpha)));
        }
        if !(self.sparsity_target > 0.0 && self.sparsity_target < 1.0) {
            return Err(Error::invalid("sparsity_target", "must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.fine_tune_fraction) {
            return Err(Error::invalid("fine_tune_fraction", "must lie in [0, 1]"));
        }
        if self.batch_size == Some(0) {
            return Err(Error::invalid("batch_size", "must be >= 1"));
        }
        Ok(())
    }

    pub fn penalties(&self) -> Penalties {
        Penalties {
            mu: self.mu,
            beta: self.beta,
            weight_decay: self.weight_decay,
            sparsity_weight: self.sparsity_weight,
            sparsity_target: self.sparsity_target,
        }
    }

    pub fn fine_tune_iters(&self) -> usize {
        (self.fine_tune_fraction * self.iters as f64).ceil() as usize
    }

    pub(crate) fn effective_batch(&self, n: usize) -> usize {
        match self.batch_size {
            Some(b) => b.min(n),
            None if n > 1000 => 32,
            None => n,
        }
    }
}

/// Window geometry the stack was trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowShape {
    pub n_sensors: usize,
    pub window_size: usize,
}

/// Trained stack: layers, the embedded utility classifier on reconstruction
/// space, hyperparameters and the input scaler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct AutoencoderStack<T> {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub layers: Vec<LayerParams<T>>,
    pub classifier: Vec<T>,
    pub hyper: HyperParams,
    pub scaler: Option<MinMaxScaler<T>>,
    pub window: Option<WindowShape>,
}

impl<T: Scalar> AutoencoderStack<T> {
    pub fn from_layers(layers: Vec<LayerParams<T>>, classifier: Vec<T>, hyper: HyperParams) -> Result<Self> {
        let first = layers.first().ok_or(Error::EmptyInput)?;
        let stack = Self {
            input_dim: first.input_dim(),
            hidden_dims: layers.iter().map(LayerParams::hidden_dim).collect(),
            layers,
            classifier,
            hyper,
            scaler: None,
            window: None,
        };
        stack.validate()?;
        Ok(stack)
    }

    /// Checks that layer shapes compose and agree with the recorded dimensions.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::EmptyInput);
        }
        ensure_dim(self.hidden_dims.len(), self.layers.len())?;
        let mut dim = self.input_dim;
        for (layer, &h) in self.layers.iter().zip(&self.hidden_dims) {
            ensure_dim(dim, layer.input_dim())?;
            ensure_dim(h, layer.hidden_dim())?;
            layer.validate()?;
            dim = h;
        }
        ensure_dim(self.input_dim, self.classifier.len())?;
        if let Some(s) = &self.scaler {
            ensure_dim(self.input_dim, s.dim())?;
        }
        if let Some(w) = self.window {
            ensure_dim(self.input_dim, w.n_sensors * w.window_size)?;
        }
        Ok(())
    }

    pub fn feature_dim(&self) -> usize {
        *self.hidden_dims.last().expect("validated stack has layers")
    }

    /// `f = E_nc(x)` through every layer; `x` in scaled coordinates.
    pub fn encode(&self, x: &[T]) -> Result<Vec<T>> {
        let mut h = x.to_vec();
        for layer in &self.layers {
            h = layer.encode(&h)?;
        }
        Ok(h)
    }

    /// `x̃ = D_ec(f)` through every layer in reverse.
    pub fn decode(&self, f: &[T]) -> Result<Vec<T>> {
        ensure_dim(self.feature_dim(), f.len())?;
        let mut g = f.to_vec();
        for layer in self.layers.iter().rev() {
            g = layer.decode(&g)?;
        }
        Ok(g)
    }

    pub fn reconstruct(&self, x: &[T]) -> Result<Vec<T>> {
        self.decode(&self.encode(x)?)
    }

    /// Eq.-4 style objective of the full stack on scaled, useful-labeled windows.
    pub fn objective(&self, data: &WindowedDataset<T>) -> Result<T> {
        let labels = data.labels_useful().ok_or(Error::MissingLabels("useful"))?;
        let inputs: Vec<&[T]> = data.windows().iter().map(Vec::as_slice).collect();
        Ok(objective_terms(&self.layers, Some(&self.classifier), &self.hyper.penalties(), &inputs, labels)?.total())
    }

    /// Mean per-coordinate L1 distance between windows and their reconstructions.
    pub fn reconstruction_l1(&self, inputs: &[Vec<T>]) -> Result<T> {
        if inputs.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut sum = T::zero();
        for x in inputs {
            let r = self.reconstruct(x)?;
            sum += x.iter().zip(&r).fold(T::zero(), |a, (&p, &q)| a + (p - q).abs());
        }
        Ok(sum / T::lit((inputs.len() * self.input_dim) as f64))
    }

    /// The embedded utility classifier's score `cᵀx̃`.
    pub fn utility_score(&self, reconstruction: &[T]) -> Result<T> {
        ensure_dim(self.input_dim, reconstruction.len())?;
        Ok(dot(&self.classifier, reconstruction))
    }

    pub fn scaler(&self) -> Result<&MinMaxScaler<T>> {
        self.scaler.as_ref().ok_or_else(|| Error::Schema("stack carries no input scaler".into()))
    }

    pub fn max_orthogonality_error(&self) -> T {
        self.layers.iter().map(LayerParams::orthogonality_error).fold(T::zero(), T::max)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let stack: Self = serde_json::from_str(text)?;
        stack.validate()?;
        Ok(stack)
    }
}

impl<T: Scalar> FeatureMap<T> for AutoencoderStack<T> {
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn feature_dim(&self) -> usize {
        AutoencoderStack::feature_dim(self)
    }

    fn encode(&self, x: &[T]) -> Result<Vec<T>> {
        AutoencoderStack::encode(self, x)
    }

    fn decode(&self, f: &[T]) -> Result<Vec<T>> {
        AutoencoderStack::decode(self, f)
    }
}
