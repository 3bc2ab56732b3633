//! Ridge-regression classifiers for useful and sensitive inferences.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::numerics::{cholesky_solve, DenseMatrix};
use crate::scalar::{dot, Scalar};

/// Sorted set of numeric class codes. Regression outputs decode to the nearest
/// code, ties going to the smaller one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelCodec {
    codes: Vec<f64>,
}

impl LabelCodec {
    pub fn new(mut codes: Vec<f64>) -> Result<Self> {
        if codes.is_empty() {
            return Err(Error::EmptyInput);
        }
        if codes.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("label code".into()));
        }
        codes.sort_by(f64::total_cmp);
        codes.dedup();
        Ok(Self { codes })
    }

    /// The `{−1, 1}` codec used for binary inferences.
    pub fn binary() -> Self {
        Self { codes: vec![-1.0, 1.0] }
    }

    pub fn from_labels(labels: impl IntoIterator<Item = f64>) -> Result<Self> {
        Self::new(labels.into_iter().collect())
    }

    pub fn codes(&self) -> &[f64] {
        &self.codes
    }

    /// Probability of a uniform random guess being right.
    pub fn chance_level(&self) -> f64 {
        1.0 / self.codes.len() as f64
    }

    pub fn decode(&self, score: f64) -> f64 {
        let mut best = self.codes[0];
        let mut best_dist = (score - best).abs();
        for &c in &self.codes[1..] {
            let d = (score - c).abs();
            // strict comparison keeps the smaller code on ties
            if d < best_dist {
                best = c;
                best_dist = d;
            }
        }
        best
    }
}

/// Linear scorer `x ↦ cᵀx` fitted by ridge regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RidgeClassifier<T> {
    pub coefficients: Vec<T>,
    pub beta: f64,
    pub codec: LabelCodec,
}

impl<T: Scalar> RidgeClassifier<T> {
    pub fn new(coefficients: Vec<T>, beta: f64, codec: LabelCodec) -> Result<Self> {
        check_beta(beta)?;
        Ok(Self { coefficients, beta, codec })
    }

    /// Closed-form minimizer of `β‖c‖² + Σ_t (cᵀx_t − y_t)²`, i.e. the solution of
    /// `(XᵀX + βI) c = Xᵀy`. The codec is the set of distinct labels.
    pub fn fit(data: &[(Vec<T>, f64)], beta: f64) -> Result<Self> {
        let codec = LabelCodec::from_labels(data.iter().map(|(_, y)| *y))?;
        Self::fit_with_codec(data, beta, codec)
    }

    pub fn fit_with_codec(data: &[(Vec<T>, f64)], beta: f64, codec: LabelCodec) -> Result<Self> {
        check_beta(beta)?;
        let (first, _) = data.first().ok_or(Error::EmptyInput)?;
        let d = first.len();
        let mut gram = DenseMatrix::<T>::zeros(d, d);
        let mut rhs = vec![T::zero(); d];
        for (x, y) in data {
            ensure_dim(d, x.len())?;
            if !y.is_finite() {
                return Err(Error::NonFinite("label".into()));
            }
            let y = T::lit(*y);
            for i in 0..d {
                rhs[i] += x[i] * y;
                let xi = x[i];
                for (g, &xj) in gram.row_mut(i)[i..].iter_mut().zip(&x[i..]) {
                    *g += xi * xj;
                }
            }
        }
        let b = T::lit(beta);
        for i in 0..d {
            gram[(i, i)] += b;
            for j in 0..i {
                gram[(i, j)] = gram[(j, i)];
            }
        }
        let coefficients = cholesky_solve(&gram, &rhs)?;
        Ok(Self { coefficients, beta, codec })
    }

    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    /// `cᵀx`.
    pub fn predict(&self, x: &[T]) -> Result<T> {
        ensure_dim(self.dim(), x.len())?;
        Ok(dot(&self.coefficients, x))
    }

    pub fn classify(&self, x: &[T]) -> Result<f64> {
        Ok(self.codec.decode(self.predict(x)?.as_f64()))
    }

    /// Fraction of samples whose decoded prediction equals the label.
    pub fn accuracy(&self, data: &[(Vec<T>, f64)]) -> Result<f64> {
        accuracy(self, data.iter().map(|(x, y)| (x.as_slice(), *y)))
    }

    /// The ridge cost `β‖c‖² + Σ(cᵀx − y)²` at the current coefficients.
    pub fn cost(&self, data: &[(Vec<T>, f64)]) -> Result<T> {
        let mut sum = T::lit(self.beta) * dot(&self.coefficients, &self.coefficients);
        for (x, y) in data {
            let r = self.predict(x)? - T::lit(*y);
            sum += r * r;
        }
        Ok(sum)
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta.is_nan() || beta < 0.0 {
        return Err(Error::invalid("beta", format!("must be >= 0, got {beta}")));
    }
    Ok(())
}

/// Accuracy over borrowed `(x, y)` pairs; empty input is an error.
pub fn accuracy<'a, T: Scalar>(
    clf: &RidgeClassifier<T>,
    data: impl IntoIterator<Item = (&'a [T], f64)>,
) -> Result<f64> {
    let mut n = 0usize;
    let mut correct = 0usize;
    for (x, y) in data {
        n += 1;
        if clf.classify(x)? == y {
            correct += 1;
        }
    }
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(correct as f64 / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_data(seed: u64, n: usize, d: usize) -> Vec<(Vec<f64>, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
                let y = if rng.random::<bool>() { 1.0 } else { -1.0 };
                (x, y)
            })
            .collect()
    }

    /// Plain gradient descent on the ridge cost, independent of the normal equations.
    fn gradient_descent_oracle(data: &[(Vec<f64>, f64)], beta: f64) -> Vec<f64> {
        let d = data[0].0.len();
        let trace: f64 = data.iter().map(|(x, _)| x.iter().map(|v| v * v).sum::<f64>()).sum();
        let step = 1.0 / (2.0 * (trace + beta));
        let mut c = vec![0.0; d];
        for _ in 0..200_000 {
            let mut g: Vec<f64> = c.iter().map(|ci| 2.0 * beta * ci).collect();
            for (x, y) in data {
                let r: f64 = x.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>() - y;
                for (gi, xi) in g.iter_mut().zip(x) {
                    *gi += 2.0 * r * xi;
                }
            }
            let gn: f64 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            for (ci, gi) in c.iter_mut().zip(&g) {
                *ci -= step * gi;
            }
            if gn < 1e-13 {
                break;
            }
        }
        c
    }

    #[test]
    fn exact_interpolation_1d() {
        let data: Vec<(Vec<f64>, f64)> = vec![(vec![1.0], 1.0), (vec![-1.0], -1.0)];
        let clf = RidgeClassifier::fit(&data, 0.0).unwrap();
        assert!((clf.coefficients[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn infinite_shrinkage_limit() {
        let data = random_data(3, 40, 4);
        let free = RidgeClassifier::fit(&data, 0.0).unwrap();
        let shrunk = RidgeClassifier::fit(&data, 1e12).unwrap();
        let norm = |c: &[f64]| c.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm(&shrunk.coefficients) <= 1e-6 * norm(&free.coefficients));
    }

    #[test]
    fn matches_gradient_descent_oracle() {
        let data = random_data(9, 50, 5);
        let clf = RidgeClassifier::fit(&data, 0.1).unwrap();
        let oracle = gradient_descent_oracle(&data, 0.1);
        for (a, b) in clf.coefficients.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-6 * b.abs().max(1e-3), "{a} vs {b}");
        }
    }

    #[test]
    fn predict_and_decode() {
        let clf = RidgeClassifier::new(vec![1.0, 0.0], 0.0, LabelCodec::binary()).unwrap();
        assert_eq!(clf.predict(&[3.0, 7.0]).unwrap(), 3.0);
        assert_eq!(LabelCodec::binary().decode(0.2), 1.0);
        assert_eq!(LabelCodec::binary().decode(0.0), -1.0);
        let three = LabelCodec::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(three.decode(2.4), 2.0);
        assert_eq!(three.decode(2.5), 2.0);
        assert_eq!(three.decode(-7.0), 1.0);
        assert_eq!(three.decode(9.0), 3.0);
    }

    #[test]
    fn errors() {
        let data = vec![(vec![1.0, 2.0], 1.0), (vec![1.0], -1.0)];
        assert!(matches!(RidgeClassifier::fit(&data, 0.1), Err(Error::DimensionMismatch { .. })));
        assert!(RidgeClassifier::fit(&data[..1], -1.0).is_err());
        let clf = RidgeClassifier::new(vec![1.0], 0.0, LabelCodec::binary()).unwrap();
        assert!(clf.predict(&[1.0, 2.0]).is_err());
        assert!(clf.accuracy(&[]).is_err());
    }

    #[test]
    fn memorizes_single_point() {
        let data = vec![(vec![0.5, -2.0], 1.0)];
        let clf = RidgeClassifier::fit_with_codec(&data, 0.0001, LabelCodec::binary()).unwrap();
        assert_eq!(clf.accuracy(&data).unwrap(), 1.0);
    }

    #[test]
    fn random_labels_near_chance() {
        let train = random_data(1, 2000, 5);
        let test = random_data(2, 20_000, 5);
        let clf = RidgeClassifier::fit(&train, 0.1).unwrap();
        let acc = clf.accuracy(&test).unwrap();
        assert!((acc - 0.5).abs() <= 0.05, "{acc}");
    }

    proptest! {
        #[test]
        fn accuracy_bounded_and_order_invariant(seed in 0u64..500, shift in 0usize..30) {
            let data = random_data(seed, 30, 3);
            let clf = RidgeClassifier::fit(&data, 0.5).unwrap();
            let acc = clf.accuracy(&data).unwrap();
            prop_assert!((0.0..=1.0).contains(&acc));
            let mut rotated = data.clone();
            rotated.rotate_left(shift);
            prop_assert_eq!(clf.accuracy(&rotated).unwrap(), acc);
        }
    }
}
