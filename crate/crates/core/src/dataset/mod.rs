//! Sensor streams, windowing, synthetic generation and CSV exchange.

mod csv_io;
mod scaler;
mod synth;

pub use csv_io::{load_csv, save_csv, write_csv};
pub use scaler::MinMaxScaler;
pub use synth::{inverse_normal_cdf, synthesize, SynthSpec};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::numerics::DenseMatrix;
use crate::scalar::Scalar;

/// `N_s × T` matrix of readings with per-timestamp metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorStream<T> {
    samples: DenseMatrix<T>,
    timestamps: Vec<f64>,
    rate_hz: f64,
    labels_useful: Option<Vec<f64>>,
    labels_sensitive: Option<Vec<f64>>,
}

impl<T: Scalar> SensorStream<T> {
    /// Builds a stream from an `N_s × T` sample matrix with timestamps `i / rate_hz`.
    pub fn new(samples: DenseMatrix<T>, rate_hz: f64) -> Result<Self> {
        if !(rate_hz > 0.0) || !rate_hz.is_finite() {
            return Err(Error::invalid("rate_hz", format!("must be positive, got {rate_hz}")));
        }
        let timestamps = (0..samples.cols()).map(|i| i as f64 / rate_hz).collect();
        Self::with_timestamps(samples, timestamps, rate_hz)
    }

    pub fn with_timestamps(samples: DenseMatrix<T>, timestamps: Vec<f64>, rate_hz: f64) -> Result<Self> {
        if samples.rows() == 0 || samples.cols() == 0 {
            return Err(Error::EmptyInput);
        }
        ensure_dim(samples.cols(), timestamps.len())?;
        for i in 0..samples.rows() {
            if let Some(t) = samples.row(i).iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("sensor {} sample {t}", i + 1)));
            }
        }
        Ok(Self { samples, timestamps, rate_hz, labels_useful: None, labels_sensitive: None })
    }

    pub fn with_useful_labels(mut self, labels: Vec<f64>) -> Result<Self> {
        ensure_dim(self.len(), labels.len())?;
        self.labels_useful = Some(labels);
        Ok(self)
    }

    pub fn with_sensitive_labels(mut self, labels: Vec<f64>) -> Result<Self> {
        ensure_dim(self.len(), labels.len())?;
        self.labels_sensitive = Some(labels);
        Ok(self)
    }

    pub fn n_sensors(&self) -> usize {
        self.samples.rows()
    }

    /// Number of timestamps `T`.
    pub fn len(&self) -> usize {
        self.samples.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn samples(&self) -> &DenseMatrix<T> {
        &self.samples
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn labels_useful(&self) -> Option<&[f64]> {
        self.labels_useful.as_deref()
    }

    pub fn labels_sensitive(&self) -> Option<&[f64]> {
        self.labels_sensitive.as_deref()
    }
}

/// Windows `x_t ∈ ℝ^(N_s·N_w)` cut from a stream, with optional per-window labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct WindowedDataset<T> {
    n_sensors: usize,
    window_size: usize,
    windows: Vec<Vec<T>>,
    labels_useful: Option<Vec<f64>>,
    labels_sensitive: Option<Vec<f64>>,
    range_lo: Vec<T>,
    range_hi: Vec<T>,
}

impl<T: Scalar> WindowedDataset<T> {
    /// Wraps pre-built windows; every window must have dimension `n_sensors·window_size`.
    pub fn from_windows(n_sensors: usize, window_size: usize, windows: Vec<Vec<T>>) -> Result<Self> {
        if windows.is_empty() || n_sensors == 0 || window_size == 0 {
            return Err(Error::EmptyInput);
        }
        let dim = n_sensors * window_size;
        for (t, w) in windows.iter().enumerate() {
            ensure_dim(dim, w.len())?;
            if let Some(i) = w.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("window {t} coordinate {i}")));
            }
        }
        let (range_lo, range_hi) = coordinate_ranges(&windows, dim);
        Ok(Self { n_sensors, window_size, windows, labels_useful: None, labels_sensitive: None, range_lo, range_hi })
    }

    pub fn with_useful_labels(mut self, labels: Vec<f64>) -> Result<Self> {
        ensure_dim(self.len(), labels.len())?;
        self.labels_useful = Some(labels);
        Ok(self)
    }

    pub fn with_sensitive_labels(mut self, labels: Vec<f64>) -> Result<Self> {
        ensure_dim(self.len(), labels.len())?;
        self.labels_sensitive = Some(labels);
        Ok(self)
    }

    /// Same shape and labels, new window contents (ranges recomputed).
    pub fn replace_windows(&self, windows: Vec<Vec<T>>) -> Result<Self> {
        ensure_dim(self.len(), windows.len())?;
        let mut out = Self::from_windows(self.n_sensors, self.window_size, windows)?;
        out.labels_useful = self.labels_useful.clone();
        out.labels_sensitive = self.labels_sensitive.clone();
        Ok(out)
    }

    pub fn n_sensors(&self) -> usize {
        self.n_sensors
    }

    pub fn window_size(&self) -> usize {
        self.window_size
    }

    /// `dim(x_t) = N_s·N_w`.
    pub fn dim(&self) -> usize {
        self.n_sensors * self.window_size
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn windows(&self) -> &[Vec<T>] {
        &self.windows
    }

    pub fn window(&self, t: usize) -> &[T] {
        &self.windows[t]
    }

    pub fn labels_useful(&self) -> Option<&[f64]> {
        self.labels_useful.as_deref()
    }

    pub fn labels_sensitive(&self) -> Option<&[f64]> {
        self.labels_sensitive.as_deref()
    }

    pub fn range_lo(&self) -> &[T] {
        &self.range_lo
    }

    pub fn range_hi(&self) -> &[T] {
        &self.range_hi
    }

    pub fn useful_pairs(&self) -> Result<Vec<(Vec<T>, f64)>> {
        let labels = self.labels_useful().ok_or(Error::MissingLabels("useful"))?;
        Ok(self.windows.iter().cloned().zip(labels.iter().copied()).collect())
    }

    pub fn sensitive_pairs(&self) -> Result<Vec<(Vec<T>, f64)>> {
        let labels = self.labels_sensitive().ok_or(Error::MissingLabels("sensitive"))?;
        Ok(self.windows.iter().cloned().zip(labels.iter().copied()).collect())
    }

    /// Un-stacks the windows back into an `N_s × (N_w·len)` stream.
    ///
    /// Window labels are broadcast to every timestamp of their window.
    pub fn to_stream(&self, rate_hz: f64) -> Result<SensorStream<T>> {
        let (ns, nw) = (self.n_sensors, self.window_size);
        let total = nw * self.len();
        let mut samples = DenseMatrix::zeros(ns, total);
        for (w, x) in self.windows.iter().enumerate() {
            for tau in 0..nw {
                for s in 0..ns {
                    samples[(s, w * nw + tau)] = x[tau * ns + s];
                }
            }
        }
        let broadcast =
            |labels: &Vec<f64>| -> Vec<f64> { labels.iter().flat_map(|&l| std::iter::repeat_n(l, nw)).collect() };
        let mut stream = SensorStream::new(samples, rate_hz)?;
        if let Some(l) = &self.labels_useful {
            stream = stream.with_useful_labels(broadcast(l))?;
        }
        if let Some(l) = &self.labels_sensitive {
            stream = stream.with_sensitive_labels(broadcast(l))?;
        }
        Ok(stream)
    }
}

fn coordinate_ranges<T: Scalar>(windows: &[Vec<T>], dim: usize) -> (Vec<T>, Vec<T>) {
    let mut lo = vec![T::infinity(); dim];
    let mut hi = vec![T::neg_infinity(); dim];
    for w in windows {
        for ((l, h), &v) in lo.iter_mut().zip(hi.iter_mut()).zip(w) {
            *l = l.min(v);
            *h = h.max(v);
        }
    }
    (lo, hi)
}

/// Most frequent value; ties go to the smaller value.
pub fn majority_label(values: &[f64]) -> Option<f64> {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best: Option<(f64, usize)> = None;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let count = j - i;
        if best.is_none_or(|(_, c)| count > c) {
            best = Some((sorted[i], count));
        }
        i = j;
    }
    best.map(|(v, _)| v)
}

/// Cuts `stream` into `floor(T / n_w)` windows.
///
/// Each window stacks its `n_w` columns in time order, so coordinate
/// `τ·N_s + s` holds sensor `s` at offset `τ`. The trailing partial window is
/// dropped. Per-timestamp labels become per-window labels by majority vote.
pub fn window<T: Scalar>(stream: &SensorStream<T>, n_w: usize) -> Result<WindowedDataset<T>> {
    if stream.is_empty() {
        return Err(Error::EmptyInput);
    }
    if n_w == 0 {
        return Err(Error::invalid("window_size", "must be >= 1"));
    }
    let total = stream.len();
    if n_w > total {
        return Err(Error::WindowTooLarge { window: n_w, samples: total });
    }
    let ns = stream.n_sensors();
    let count = total / n_w;
    let samples = stream.samples();
    let windows: Vec<Vec<T>> = (0..count)
        .map(|w| {
            let mut x = Vec::with_capacity(ns * n_w);
            for tau in 0..n_w {
                for s in 0..ns {
                    x.push(samples[(s, w * n_w + tau)]);
                }
            }
            x
        })
        .collect();
    let per_window = |labels: &[f64]| -> Vec<f64> {
        (0..count).map(|w| majority_label(&labels[w * n_w..(w + 1) * n_w]).expect("non-empty window")).collect()
    };
    let mut ds = WindowedDataset::from_windows(ns, n_w, windows)?;
    if let Some(l) = stream.labels_useful() {
        ds = ds.with_useful_labels(per_window(l))?;
    }
    if let Some(l) = stream.labels_sensitive() {
        ds = ds.with_sensitive_labels(per_window(l))?;
    }
    Ok(ds)
}
