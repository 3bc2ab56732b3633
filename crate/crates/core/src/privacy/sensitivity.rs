use serde::{Deserialize, Serialize};

use crate::dataset::WindowedDataset;
use crate::error::{ensure_dim, Error, Result};
use crate::inference::RidgeClassifier;
use crate::numerics::gram_schmidt_complete;
use crate::scalar::{dot, norm1, Scalar};

/// Local (data-derived) per-tuple sensitivity: the largest coordinate range
/// over the windows of `data`.
pub fn estimate_sensitivity<T: Scalar>(data: &WindowedDataset<T>) -> Result<T> {
    if data.len() < 2 {
        return Err(Error::invalid("dataset", "sensitivity needs at least 2 windows"));
    }
    Ok(data.range_lo().iter().zip(data.range_hi()).map(|(&lo, &hi)| hi - lo).fold(T::zero(), T::max))
}

/// The pieces of the relaxed sensitivity computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxedSensitivity {
    pub delta_q_relax: f64,
    /// Empirical range of the normalized sensitive score over the data.
    pub gamma_max: f64,
    /// `‖u‖₁` for `u` the first column of `S⁻¹`.
    pub u_l1: f64,
}

/// Sensitivity restricted to neighbors that agree on every direction
/// orthogonal to the sensitive classifier.
///
/// `S` is completed from the sensitive coefficient vector by Gram-Schmidt,
/// so its first row is `ĉ = c/‖c‖` and `u = Sᵀe₁ = ĉ`. With `γ_max` the range
/// of `ĉᵀx` over the windows of `data`,
/// `ΔQ_relax = min(γ_max·‖u‖₁, dim_x·ΔQ) / dim_x`, which never exceeds `ΔQ`.
pub fn relaxed_sensitivity<T: Scalar>(
    sensitive: &RidgeClassifier<T>,
    data: &WindowedDataset<T>,
    delta_q: f64,
) -> Result<RelaxedSensitivity> {
    ensure_dim(data.dim(), sensitive.dim())?;
    if data.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(delta_q >= 0.0) {
        return Err(Error::invalid("delta_q", format!("must be >= 0, got {delta_q}")));
    }
    let s = gram_schmidt_complete(&sensitive.coefficients)?;
    let u: Vec<T> = s.inverse().column(0);
    let first = s.row(0);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for w in data.windows() {
        let g = dot(first, w).as_f64();
        lo = lo.min(g);
        hi = hi.max(g);
    }
    let gamma_max = hi - lo;
    let u_l1 = norm1(&u).as_f64();
    let dim_x = data.dim() as f64;
    let delta_q_relax = ((gamma_max * u_l1).min(dim_x * delta_q) / dim_x).min(delta_q);
    Ok(RelaxedSensitivity { delta_q_relax, gamma_max, u_l1 })
}
