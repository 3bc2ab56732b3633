use serde::{Deserialize, Serialize};

use crate::dataset::WindowedDataset;
use crate::error::{ensure_dim, Result};
use crate::scalar::Scalar;

/// Coordinate-wise min-max map onto `[0, 1]`.
///
/// A constant coordinate (`hi == lo`) scales to 0 and unscales to `lo`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MinMaxScaler<T> {
    pub lo: Vec<T>,
    pub hi: Vec<T>,
}

impl<T: Scalar> MinMaxScaler<T> {
    pub fn fit(ds: &WindowedDataset<T>) -> Self {
        Self { lo: ds.range_lo().to_vec(), hi: ds.range_hi().to_vec() }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn scale(&self, x: &[T]) -> Result<Vec<T>> {
        ensure_dim(self.dim(), x.len())?;
        Ok(x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&v, (&lo, &hi))| {
                let r = hi - lo;
                if r > T::zero() {
                    (v - lo) / r
                } else {
                    T::zero()
                }
            })
            .collect())
    }

    pub fn unscale(&self, x: &[T]) -> Result<Vec<T>> {
        ensure_dim(self.dim(), x.len())?;
        Ok(x.iter().zip(self.lo.iter().zip(&self.hi)).map(|(&v, (&lo, &hi))| lo + v * (hi - lo)).collect())
    }

    pub fn scale_dataset(&self, ds: &WindowedDataset<T>) -> Result<WindowedDataset<T>> {
        let windows = ds.windows().iter().map(|w| self.scale(w)).collect::<Result<_>>()?;
        ds.replace_windows(windows)
    }

    pub fn unscale_dataset(&self, ds: &WindowedDataset<T>) -> Result<WindowedDataset<T>> {
        let windows = ds.windows().iter().map(|w| self.unscale(w)).collect::<Result<_>>()?;
        ds.replace_windows(windows)
    }
}
