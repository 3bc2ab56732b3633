use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{objective_gradient, AutoencoderStack, HyperParams, LayerParams, Penalties, WindowShape};
use crate::dataset::{MinMaxScaler, WindowedDataset};
use crate::error::{ensure_dim, Error, Result};
use crate::inference::RidgeClassifier;
use crate::numerics::orthonormalize_rows;
use crate::scalar::Scalar;

/// Phase of training an event belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Greedy training of layer `i` (zero-based).
    Layer(usize),
    /// Joint training of the whole stack.
    FineTune,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage::Layer(i) => write!(f, "layer {}", i + 1),
            Stage::FineTune => f.write_str("fine-tune"),
        }
    }
}

/// Emitted after every gradient step.
#[derive(Debug, Clone, Copy)]
pub struct TrainEvent<'a, T> {
    pub stage: Stage,
    pub iteration: usize,
    /// Objective on the batch before the step.
    pub objective: T,
    /// Mean per-coordinate L1 reconstruction error on the batch before the step.
    pub reconstruction_l1: T,
    /// `max |W·Wᵀ − I|` over the updated layers after projection.
    pub orthogonality_error: T,
    /// The layers being updated in this stage, after the step.
    pub layers: &'a [LayerParams<T>],
    pub batch_size: usize,
}

/// Trains a stack on scaled inputs with useful labels; see [`train_monitored`].
pub fn train<T: Scalar>(
    inputs: &[Vec<T>],
    labels: &[f64],
    hidden: &[usize],
    hyper: &HyperParams,
) -> Result<AutoencoderStack<T>> {
    train_monitored(inputs, labels, hidden, hyper, &mut |_| {})
}

/// Fits a scaler on `data`, trains on the scaled windows and attaches the
/// scaler and window geometry to the returned stack.
pub fn train_dataset<T: Scalar>(
    data: &WindowedDataset<T>,
    hidden: &[usize],
    hyper: &HyperParams,
) -> Result<AutoencoderStack<T>> {
    let labels = data.labels_useful().ok_or(Error::MissingLabels("useful"))?;
    let scaler = MinMaxScaler::fit(data);
    let scaled = scaler.scale_dataset(data)?;
    let mut stack = train(scaled.windows(), labels, hidden, hyper)?;
    stack.scaler = Some(scaler);
    stack.window = Some(WindowShape { n_sensors: data.n_sensors(), window_size: data.window_size() });
    Ok(stack)
}

/// Greedy layer-wise training followed by fine-tuning of the whole stack.
///
/// Layer `i` is trained to reconstruct the features of the already trained
/// layers below it. Only the top layer carries the utility terms, with its
/// classifier acting on that layer's input space. Fine-tuning then runs
/// `ceil(fine_tune_fraction · iters)` steps on the full objective, with the
/// classifier on the stack's reconstruction space, warm-started at the ridge
/// solution for the current reconstructions. Each step moves by
/// `α / batch` times the batch gradient and re-projects every weight matrix
/// onto the orthonormal rows `W ← (W·Wᵀ)^(−1/2) W`.
pub fn train_monitored<T: Scalar>(
    inputs: &[Vec<T>],
    labels: &[f64],
    hidden: &[usize],
    hyper: &HyperParams,
    monitor: &mut dyn FnMut(&TrainEvent<'_, T>),
) -> Result<AutoencoderStack<T>> {
    hyper.validate()?;
    let first = inputs.first().ok_or(Error::EmptyInput)?;
    let input_dim = first.len();
    for x in inputs {
        ensure_dim(input_dim, x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("training input".into()));
        }
    }
    if labels.is_empty() {
        return Err(Error::MissingLabels("useful"));
    }
    ensure_dim(inputs.len(), labels.len())?;
    if hidden.is_empty() {
        return Err(Error::invalid("hidden", "at least one hidden layer is required"));
    }
    let mut prev = input_dim;
    for &h in hidden {
        if h == 0 || h > prev {
            return Err(Error::invalid(
                "hidden",
                format!("layer sizes must be non-increasing and positive, got {h} after {prev}"),
            ));
        }
        prev = h;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let pen = hyper.penalties();
    let no_utility = Penalties { mu: 0.0, ..pen };
    let top = hidden.len() - 1;

    let mut layers: Vec<LayerParams<T>> = Vec::with_capacity(hidden.len());
    let mut features: Vec<Vec<T>> = inputs.to_vec();
    let mut top_classifier = vec![T::zero(); input_dim];
    for (i, &h) in hidden.iter().enumerate() {
        let stage = Stage::Layer(i);
        let d = features[0].len();
        let mut layer = LayerParams::random(d, h, &mut rng);
        layer.weights = orthonormalize_rows(&layer.weights).map_err(|e| wrap(stage, 0, e))?;
        let mut current = vec![layer];
        let feature_refs: Vec<&[T]> = features.iter().map(Vec::as_slice).collect();
        if i == top {
            let mut c = vec![T::zero(); d];
            optimize(&mut current, Some(&mut c), &pen, &feature_refs, labels, hyper, stage, &mut rng, monitor)?;
            if i == 0 {
                top_classifier = c;
            }
        } else {
            optimize(&mut current, None, &no_utility, &feature_refs, labels, hyper, stage, &mut rng, monitor)?;
        }
        let layer = current.pop().expect("one layer");
        features = features.iter().map(|x| layer.encode(x)).collect::<Result<_>>()?;
        layers.push(layer);
    }

    let mut stack = AutoencoderStack::from_layers(layers, top_classifier, hyper.clone())?;
    if let Some(c) = ridge_on_reconstructions(&stack, inputs, labels, hyper.beta)? {
        stack.classifier = c;
    }
    let refs: Vec<&[T]> = inputs.iter().map(Vec::as_slice).collect();
    let fine_iters = hyper.fine_tune_iters();
    let tune = HyperParams { iters: fine_iters, ..hyper.clone() };
    let mut c = std::mem::take(&mut stack.classifier);
    optimize(&mut stack.layers, Some(&mut c), &pen, &refs, labels, &tune, Stage::FineTune, &mut rng, monitor)?;
    stack.classifier = c;
    stack.validate()?;
    Ok(stack)
}

fn wrap(stage: Stage, iteration: usize, source: Error) -> Error {
    Error::Training { stage: stage.to_string(), iteration, source: Box::new(source) }
}

fn ridge_on_reconstructions<T: Scalar>(
    stack: &AutoencoderStack<T>,
    inputs: &[Vec<T>],
    labels: &[f64],
    beta: f64,
) -> Result<Option<Vec<T>>> {
    let data = inputs.iter().zip(labels).map(|(x, &y)| Ok((stack.reconstruct(x)?, y))).collect::<Result<Vec<_>>>()?;
    match RidgeClassifier::fit(&data, beta) {
        Ok(clf) => Ok(Some(clf.coefficients)),
        Err(Error::Singular) => Ok(None),
        Err(e) => Err(e),
    }
}

#[allow(clippy::too_many_arguments)]
fn optimize<T: Scalar>(
    layers: &mut [LayerParams<T>],
    mut classifier: Option<&mut Vec<T>>,
    pen: &Penalties,
    inputs: &[&[T]],
    labels: &[f64],
    hyper: &HyperParams,
    stage: Stage,
    rng: &mut ChaCha8Rng,
    monitor: &mut dyn FnMut(&TrainEvent<'_, T>),
) -> Result<()> {
    let n = inputs.len();
    let batch = hyper.effective_batch(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut cursor = n;
    let mut batch_inputs: Vec<&[T]> = Vec::with_capacity(batch);
    let mut batch_labels: Vec<f64> = Vec::with_capacity(batch);

    for iteration in 0..hyper.iters {
        let (xs, ys): (&[&[T]], &[f64]) = if batch == n {
            (inputs, labels)
        } else {
            if cursor + batch > n {
                order.shuffle(rng);
                cursor = 0;
            }
            batch_inputs.clear();
            batch_labels.clear();
            for &k in &order[cursor..cursor + batch] {
                batch_inputs.push(inputs[k]);
                batch_labels.push(labels[k]);
            }
            cursor += batch;
            (&batch_inputs, &batch_labels)
        };

        let c_view = classifier.as_deref().map(Vec::as_slice);
        let (terms, grads) = objective_gradient(layers, c_view, pen, xs, ys).map_err(|e| wrap(stage, iteration, e))?;
        let objective = terms.total();
        if !objective.is_finite() {
            return Err(wrap(stage, iteration, Error::NonFinite("objective".into())));
        }
        let reconstruction_l1 = batch_l1(layers, xs).map_err(|e| wrap(stage, iteration, e))?;

        let step = -T::lit(hyper.alpha / xs.len() as f64);
        for (layer, g) in layers.iter_mut().zip(&grads.layers) {
            layer.weights.axpy(step, &g.weights)?;
            for (b, &d) in layer.enc_bias.iter_mut().zip(&g.enc_bias) {
                *b += step * d;
            }
            for (b, &d) in layer.dec_bias.iter_mut().zip(&g.dec_bias) {
                *b += step * d;
            }
            layer.weights = orthonormalize_rows(&layer.weights).map_err(|e| wrap(stage, iteration, e))?;
        }
        if let (Some(c), Some(gc)) = (classifier.as_deref_mut(), grads.classifier.as_ref()) {
            for (ck, &g) in c.iter_mut().zip(gc) {
                *ck += step * g;
            }
        }

        let orthogonality_error = layers.iter().map(LayerParams::orthogonality_error).fold(T::zero(), T::max);
        monitor(&TrainEvent {
            stage,
            iteration,
            objective,
            reconstruction_l1,
            orthogonality_error,
            layers,
            batch_size: xs.len(),
        });
    }
    Ok(())
}

fn batch_l1<T: Scalar>(layers: &[LayerParams<T>], xs: &[&[T]]) -> Result<T> {
    let mut sum = T::zero();
    let mut count = 0usize;
    for x in xs {
        let mut h = x.to_vec();
        for l in layers.iter() {
            h = l.encode(&h)?;
        }
        for l in layers.iter().rev() {
            h = l.decode(&h)?;
        }
        sum += x.iter().zip(&h).fold(T::zero(), |a, (&p, &q)| a + (p - q).abs());
        count += x.len();
    }
    Ok(sum / T::lit(count as f64))
}
