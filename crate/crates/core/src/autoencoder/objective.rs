use serde::{Deserialize, Serialize};

use super::LayerParams;
use crate::error::{ensure_dim, Error, Result};
use crate::numerics::DenseMatrix;
use crate::scalar::{dot, Scalar};

/// Weights of the non-reconstruction terms of the objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Penalties {
    pub mu: f64,
    pub beta: f64,
    pub weight_decay: f64,
    pub sparsity_weight: f64,
    pub sparsity_target: f64,
}

/// The objective split into its additive terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveTerms<T> {
    /// `Σ ‖x − x̃‖²`.
    pub reconstruction: T,
    /// `wd · Σ W²`.
    pub weight_decay: T,
    /// `δ · Σ KL(ρ ‖ ρ̂)` over every hidden unit.
    pub sparsity: T,
    /// `μ β ‖c‖²`.
    pub ridge: T,
    /// `μ Σ (cᵀx̃ − y)²`.
    pub utility: T,
}

impl<T: Scalar> ObjectiveTerms<T> {
    pub fn total(&self) -> T {
        self.reconstruction + self.weight_decay + self.sparsity + self.ridge + self.utility
    }
}

/// Gradient of the objective with the same layout as the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<LayerParams<T>>,
    pub classifier: Option<Vec<T>>,
}

struct Trace<T> {
    /// `enc[0] = x`, `enc[l]` is the output of encoder `l`.
    enc: Vec<Vec<T>>,
    /// `dec[L] = enc[L]`, `dec[0] = x̃`.
    dec: Vec<Vec<T>>,
}

fn trace<T: Scalar>(layers: &[LayerParams<T>], x: &[T]) -> Result<Trace<T>> {
    let mut enc = Vec::with_capacity(layers.len() + 1);
    enc.push(x.to_vec());
    for layer in layers {
        let h = layer.encode(enc.last().expect("non-empty"))?;
        enc.push(h);
    }
    let mut dec = vec![Vec::new(); layers.len() + 1];
    dec[layers.len()] = enc[layers.len()].clone();
    for (i, layer) in layers.iter().enumerate().rev() {
        dec[i] = layer.decode(&dec[i + 1])?;
    }
    Ok(Trace { enc, dec })
}

struct Checked<'a, T> {
    utility: Option<(&'a [T], T)>,
}

fn check<'a, T: Scalar>(
    layers: &[LayerParams<T>],
    classifier: Option<&'a [T]>,
    pen: &Penalties,
    inputs: &[&[T]],
    labels: &[f64],
) -> Result<Checked<'a, T>> {
    let first = layers.first().ok_or(Error::EmptyInput)?;
    if inputs.is_empty() {
        return Err(Error::EmptyInput);
    }
    for x in inputs {
        ensure_dim(first.input_dim(), x.len())?;
    }
    let utility = match classifier {
        Some(c) if pen.mu > 0.0 => {
            ensure_dim(first.input_dim(), c.len())?;
            if labels.is_empty() {
                return Err(Error::MissingLabels("useful"));
            }
            ensure_dim(inputs.len(), labels.len())?;
            Some((c, T::lit(pen.mu)))
        }
        _ => None,
    };
    Ok(Checked { utility })
}

fn kl<T: Scalar>(rho: T, rho_hat: T) -> T {
    let one = T::one();
    rho * (rho / rho_hat).ln() + (one - rho) * ((one - rho) / (one - rho_hat)).ln()
}

/// Mean activation of every hidden unit of every layer over the batch.
fn mean_activations<T: Scalar>(traces: &[Trace<T>], n_layers: usize) -> Vec<Vec<T>> {
    let n = T::lit(traces.len() as f64);
    (1..=n_layers)
        .map(|l| {
            let mut acc = vec![T::zero(); traces[0].enc[l].len()];
            for t in traces {
                for (a, &h) in acc.iter_mut().zip(&t.enc[l]) {
                    *a += h;
                }
            }
            acc.into_iter().map(|a| a / n).collect()
        })
        .collect()
}

fn penalty_terms<T: Scalar>(
    layers: &[LayerParams<T>],
    pen: &Penalties,
    utility: Option<(&[T], T)>,
    rho_hat: &[Vec<T>],
) -> (T, T, T) {
    let wd = T::lit(pen.weight_decay) * layers.iter().map(|l| l.weights.frobenius_sq()).sum::<T>();
    let sparsity = if pen.sparsity_weight > 0.0 {
        let rho = T::lit(pen.sparsity_target);
        T::lit(pen.sparsity_weight) * rho_hat.iter().flatten().map(|&r| kl(rho, r)).sum::<T>()
    } else {
        T::zero()
    };
    let ridge = match utility {
        Some((c, mu)) => mu * T::lit(pen.beta) * dot(c, c),
        None => T::zero(),
    };
    (wd, sparsity, ridge)
}

/// Evaluates every term of the objective on a batch.
///
/// `labels` may be empty when `classifier` is `None` or `mu` is zero.
pub fn objective_terms<T: Scalar>(
    layers: &[LayerParams<T>],
    classifier: Option<&[T]>,
    pen: &Penalties,
    inputs: &[&[T]],
    labels: &[f64],
) -> Result<ObjectiveTerms<T>> {
    let checked = check(layers, classifier, pen, inputs, labels)?;
    let traces = inputs.iter().map(|x| trace(layers, x)).collect::<Result<Vec<_>>>()?;
    let rho_hat = if pen.sparsity_weight > 0.0 { mean_activations(&traces, layers.len()) } else { Vec::new() };
    let (weight_decay, sparsity, ridge) = penalty_terms(layers, pen, checked.utility, &rho_hat);
    let mut reconstruction = T::zero();
    let mut utility = T::zero();
    for (i, (x, t)) in inputs.iter().zip(&traces).enumerate() {
        reconstruction += x.iter().zip(&t.dec[0]).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>();
        if let Some((c, mu)) = checked.utility {
            let r = dot(c, &t.dec[0]) - T::lit(labels[i]);
            utility += mu * r * r;
        }
    }
    Ok(ObjectiveTerms { reconstruction, weight_decay, sparsity, ridge, utility })
}

/// Evaluates the objective and its analytic gradient on a batch.
pub fn objective_gradient<T: Scalar>(
    layers: &[LayerParams<T>],
    classifier: Option<&[T]>,
    pen: &Penalties,
    inputs: &[&[T]],
    labels: &[f64],
) -> Result<(ObjectiveTerms<T>, Gradients<T>)> {
    let checked = check(layers, classifier, pen, inputs, labels)?;
    let traces = inputs.iter().map(|x| trace(layers, x)).collect::<Result<Vec<_>>>()?;
    let two = T::lit(2.0);
    let one = T::one();
    let n_layers = layers.len();

    let sparse = pen.sparsity_weight > 0.0;
    let rho_hat = if sparse { mean_activations(&traces, n_layers) } else { Vec::new() };
    let (weight_decay, sparsity, ridge) = penalty_terms(layers, pen, checked.utility, &rho_hat);
    let sparse_grad: Vec<Vec<T>> = if sparse {
        let rho = T::lit(pen.sparsity_target);
        let scale = T::lit(pen.sparsity_weight / inputs.len() as f64);
        rho_hat
            .iter()
            .map(|layer| layer.iter().map(|&r| scale * (-rho / r + (one - rho) / (one - r))).collect())
            .collect()
    } else {
        Vec::new()
    };

    let mut grads: Vec<LayerParams<T>> = layers
        .iter()
        .map(|l| LayerParams {
            weights: DenseMatrix::zeros(l.hidden_dim(), l.input_dim()),
            enc_bias: vec![T::zero(); l.hidden_dim()],
            dec_bias: vec![T::zero(); l.input_dim()],
        })
        .collect();
    let mut grad_c = checked.utility.map(|(c, _)| vec![T::zero(); c.len()]);

    let mut reconstruction = T::zero();
    let mut utility = T::zero();
    for (i, (x, t)) in inputs.iter().zip(&traces).enumerate() {
        let xt = &t.dec[0];
        let mut dg: Vec<T> = x.iter().zip(xt).map(|(&a, &b)| two * (b - a)).collect();
        reconstruction += x.iter().zip(xt).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>();
        if let (Some((c, mu)), Some(gc)) = (checked.utility, grad_c.as_mut()) {
            let r = dot(c, xt) - T::lit(labels[i]);
            utility += mu * r * r;
            for k in 0..dg.len() {
                dg[k] += two * mu * r * c[k];
                gc[k] += two * mu * r * xt[k];
            }
        }

        for (l, layer) in layers.iter().enumerate() {
            let out = &t.dec[l];
            let inp = &t.dec[l + 1];
            let da: Vec<T> = dg.iter().zip(out).map(|(&d, &g)| d * g * (one - g)).collect();
            let g = &mut grads[l];
            for (b, &d) in g.dec_bias.iter_mut().zip(&da) {
                *b += d;
            }
            for (j, &h) in inp.iter().enumerate() {
                for (w, &d) in g.weights.row_mut(j).iter_mut().zip(&da) {
                    *w += h * d;
                }
            }
            dg = layer.weights.mul_vec(&da)?;
        }

        let mut dh = dg;
        for l in (0..n_layers).rev() {
            if sparse {
                for (d, &s) in dh.iter_mut().zip(&sparse_grad[l]) {
                    *d += s;
                }
            }
            let h = &t.enc[l + 1];
            let below = &t.enc[l];
            let dz: Vec<T> = dh.iter().zip(h).map(|(&d, &a)| d * a * (one - a)).collect();
            let g = &mut grads[l];
            for (b, &d) in g.enc_bias.iter_mut().zip(&dz) {
                *b += d;
            }
            for (j, &d) in dz.iter().enumerate() {
                for (w, &v) in g.weights.row_mut(j).iter_mut().zip(below) {
                    *w += d * v;
                }
            }
            if l > 0 {
                dh = layers[l].weights.tr_mul_vec(&dz)?;
            }
        }
    }

    let wd = T::lit(2.0 * pen.weight_decay);
    for (g, layer) in grads.iter_mut().zip(layers) {
        g.weights.axpy(wd, &layer.weights)?;
    }
    if let (Some((c, mu)), Some(gc)) = (checked.utility, grad_c.as_mut()) {
        let coef = two * mu * T::lit(pen.beta);
        for (g, &ck) in gc.iter_mut().zip(c) {
            *g += coef * ck;
        }
    }

    let terms = ObjectiveTerms { reconstruction, weight_decay, sparsity, ridge, utility };
    Ok((terms, Gradients { layers: grads, classifier: grad_c }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type Setup = (Vec<LayerParams<f64>>, Vec<f64>, Vec<Vec<f64>>, Vec<f64>);

    fn setup(seed: u64, dims: &[usize], n: usize) -> Setup {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut d = dims[0];
        let mut layers = Vec::new();
        for &h in &dims[1..] {
            let mut l = LayerParams::random(d, h, &mut rng);
            l.weights = l.weights.map(|w| w * 20.0);
            layers.push(l);
            d = h;
        }
        let c = (0..dims[0]).map(|_| rng.random_range(-0.5..0.5)).collect();
        let xs = (0..n).map(|_| (0..dims[0]).map(|_| rng.random::<f64>()).collect()).collect();
        let ys = (0..n).map(|i| (i % 2) as f64).collect();
        (layers, c, xs, ys)
    }

    fn pen() -> Penalties {
        Penalties { mu: 0.7, beta: 0.3, weight_decay: 0.05, sparsity_weight: 0.4, sparsity_target: 0.1 }
    }

    fn total(layers: &[LayerParams<f64>], c: &[f64], xs: &[Vec<f64>], ys: &[f64], p: &Penalties) -> f64 {
        let inputs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        objective_terms(layers, Some(c), p, &inputs, ys).unwrap().total()
    }

    /// Central finite differences on every parameter.
    fn check_gradient(seed: u64, dims: &[usize], p: Penalties) {
        let (layers, c, xs, ys) = setup(seed, dims, 5);
        let inputs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let (terms, grads) = objective_gradient(&layers, Some(&c), &p, &inputs, &ys).unwrap();
        assert!((terms.total() - total(&layers, &c, &xs, &ys, &p)).abs() < 1e-10);
        let h = 1e-6;
        let close = |analytic: f64, numeric: f64| {
            assert!(
                (analytic - numeric).abs() <= 1e-5 * (1.0 + numeric.abs()),
                "analytic {analytic} numeric {numeric}"
            );
        };
        for l in 0..layers.len() {
            for idx in 0..layers[l].weights.as_slice().len() {
                let mut plus = layers.clone();
                plus[l].weights.as_mut_slice()[idx] += h;
                let mut minus = layers.clone();
                minus[l].weights.as_mut_slice()[idx] -= h;
                let num = (total(&plus, &c, &xs, &ys, &p) - total(&minus, &c, &xs, &ys, &p)) / (2.0 * h);
                close(grads.layers[l].weights.as_slice()[idx], num);
            }
            for which in 0..2 {
                let len = if which == 0 { layers[l].enc_bias.len() } else { layers[l].dec_bias.len() };
                for idx in 0..len {
                    let bump = |delta: f64| {
                        let mut m = layers.clone();
                        let v = if which == 0 { &mut m[l].enc_bias } else { &mut m[l].dec_bias };
                        v[idx] += delta;
                        total(&m, &c, &xs, &ys, &p)
                    };
                    let num = (bump(h) - bump(-h)) / (2.0 * h);
                    let g = if which == 0 { &grads.layers[l].enc_bias } else { &grads.layers[l].dec_bias };
                    close(g[idx], num);
                }
            }
        }
        let gc = grads.classifier.unwrap();
        for k in 0..c.len() {
            let mut plus = c.clone();
            plus[k] += h;
            let mut minus = c.clone();
            minus[k] -= h;
            let num = (total(&layers, &plus, &xs, &ys, &p) - total(&layers, &minus, &xs, &ys, &p)) / (2.0 * h);
            close(gc[k], num);
        }
    }

    #[test]
    fn gradient_matches_finite_differences_single_layer() {
        check_gradient(1, &[6, 3], pen());
    }

    #[test]
    fn gradient_matches_finite_differences_stack() {
        check_gradient(2, &[8, 5, 2], pen());
    }

    #[test]
    fn gradient_without_sparsity_or_decay() {
        check_gradient(3, &[7, 4, 3], Penalties { sparsity_weight: 0.0, weight_decay: 0.0, ..pen() });
    }

    #[test]
    fn terms_by_hand() {
        let layer = LayerParams {
            weights: DenseMatrix::from_row_major(1, 2, vec![1.0, 0.0]).unwrap(),
            enc_bias: vec![0.0],
            dec_bias: vec![0.0, 0.0],
        };
        let x = [0.0, 1.0];
        let h: f64 = 0.5;
        let xt = [1.0 / (1.0 + (-h).exp()), 0.5];
        let c = [2.0, -1.0];
        let y = 1.0;
        let p = Penalties { mu: 0.5, beta: 0.1, weight_decay: 0.2, sparsity_weight: 0.3, sparsity_target: 0.2 };
        let t = objective_terms(&[layer], Some(&c), &p, &[&x], &[y]).unwrap();
        let rec = (x[0] - xt[0]).powi(2) + (x[1] - xt[1]).powi(2);
        assert!((t.reconstruction - rec).abs() < 1e-14);
        assert!((t.weight_decay - 0.2).abs() < 1e-14);
        let kl_expected = 0.2 * (0.2f64 / 0.5).ln() + 0.8 * (0.8f64 / 0.5).ln();
        assert!((t.sparsity - 0.3 * kl_expected).abs() < 1e-14);
        assert!((t.ridge - 0.5 * 0.1 * 5.0).abs() < 1e-14);
        let r = c[0] * xt[0] + c[1] * xt[1] - y;
        assert!((t.utility - 0.5 * r * r).abs() < 1e-14);
    }

    #[test]
    fn utility_needs_labels() {
        let (layers, c, xs, _) = setup(4, &[4, 2], 3);
        let inputs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let err = objective_terms(&layers, Some(&c), &pen(), &inputs, &[]).unwrap_err();
        assert!(matches!(err, Error::MissingLabels(_)));
        let zero_mu = Penalties { mu: 0.0, ..pen() };
        assert!(objective_terms(&layers, Some(&c), &zero_mu, &inputs, &[]).is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn gradient_oracle_random_shapes(seed in 0u64..1000, d in 2usize..7, h in 1usize..4) {
            check_gradient(seed, &[d, h.min(d)], pen());
        }
    }
}
