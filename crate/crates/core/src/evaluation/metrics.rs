use crate::dataset::WindowedDataset;
use crate::error::{ensure_dim, Error, Result};
use crate::numerics::{conditional_entropy, discrete_entropy};
use crate::privacy::{Mode, PrivacySpec};
use crate::scalar::Scalar;

/// Relative mutual information `1 − H(y|f_i)/H(y)` of every feature with the
/// labels, each feature quantized into `bins` equal-width bins over its
/// observed range.
pub fn informativeness<T: Scalar>(features: &[Vec<T>], labels: &[f64], bins: usize) -> Result<Vec<f64>> {
    let first = features.first().ok_or(Error::EmptyInput)?;
    ensure_dim(features.len(), labels.len())?;
    if bins == 0 {
        return Err(Error::invalid("bins", "must be >= 1"));
    }
    let mut codes: Vec<f64> = labels.to_vec();
    if codes.iter().any(|y| !y.is_finite()) {
        return Err(Error::NonFinite("label".into()));
    }
    codes.sort_by(f64::total_cmp);
    codes.dedup();
    if codes.len() < 2 {
        return Err(Error::invalid("labels", "informativeness needs at least 2 distinct labels"));
    }
    let label_index: Vec<usize> =
        labels.iter().map(|y| codes.binary_search_by(|c| c.total_cmp(y)).expect("label in code list")).collect();
    let mut label_counts = vec![0u64; codes.len()];
    for &k in &label_index {
        label_counts[k] += 1;
    }
    let h_y = discrete_entropy(&label_counts)?;

    (0..first.len())
        .map(|i| {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for f in features {
                ensure_dim(first.len(), f.len())?;
                let v = f[i].as_f64();
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("feature {i}")));
                }
                lo = lo.min(v);
                hi = hi.max(v);
            }
            let width = (hi - lo) / bins as f64;
            let mut joint = vec![vec![0u64; codes.len()]; bins];
            for (f, &k) in features.iter().zip(&label_index) {
                let b = if width > 0.0 { (((f[i].as_f64() - lo) / width) as usize).min(bins - 1) } else { 0 };
                joint[b][k] += 1;
            }
            let h_cond = conditional_entropy(&joint)?;
            Ok((1.0 - h_cond / h_y).clamp(0.0, 1.0))
        })
        .collect()
}

/// Mean over windows of `‖x′ − x‖₁ / dim_x`.
pub fn expected_error<T: Scalar>(original: &WindowedDataset<T>, perturbed: &WindowedDataset<T>) -> Result<f64> {
    ensure_dim(original.len(), perturbed.len())?;
    ensure_dim(original.dim(), perturbed.dim())?;
    let total: f64 = original
        .windows()
        .iter()
        .zip(perturbed.windows())
        .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| (x - y).abs().as_f64()).sum::<f64>())
        .sum();
    Ok(total / (original.len() * original.dim()) as f64)
}

/// Predicted error ratio of the baseline over a feature-space mechanism:
/// `dim_x/dim_f` for mode 1 and `(dim_x/dim_f)·(ΔQ/ΔQ_relax)` for mode 2.
/// A baseline spec compared with itself gives 1.
pub fn advantage_factor(baseline: &PrivacySpec, deeprotect: &PrivacySpec) -> Result<f64> {
    if baseline.mode != Mode::Baseline {
        return Err(Error::invalid("baseline", "first spec must use the baseline mode"));
    }
    ensure_dim(baseline.dim_x, deeprotect.dim_x)?;
    let dims = |spec: &PrivacySpec| -> Result<f64> {
        let f = spec.dim_f.ok_or_else(|| Error::invalid("dim_f", "feature mechanism spec without dim_f"))?;
        if f == 0 {
            return Err(Error::invalid("dim_f", "must be >= 1"));
        }
        Ok(spec.dim_x as f64 / f as f64)
    };
    match deeprotect.mode {
        Mode::Baseline => Ok(1.0),
        Mode::Mode1 => dims(deeprotect),
        Mode::Mode2 => {
            let relax = deeprotect
                .delta_q_relax
                .ok_or_else(|| Error::invalid("delta_q_relax", "mode2 spec without relaxed sensitivity"))?;
            if relax == 0.0 {
                return Err(Error::invalid("delta_q_relax", "zero relaxed sensitivity leaves the factor undefined"));
            }
            Ok(dims(deeprotect)? * deeprotect.delta_q / relax)
        }
    }
}
