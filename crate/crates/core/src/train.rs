//! Full-batch training loops: Adam with cosine-decayed learning rate for
//! classification, plain gradient descent for regression.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::ImageDataset;
use crate::error::{Error, Result};
use crate::nn::CompiledNetwork;
use crate::tensor::{ParamVector, Tensor};

/// Loss above which a run is declared divergent.
pub const DIVERGENCE_LOSS: f64 = 1e6;
/// Samples per gradient chunk; fixed so the summation order never depends on the thread pool.
const CHUNK: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainBudget {
    pub steps: usize,
    pub lr: f64,
}

impl Default for TrainBudget {
    fn default() -> Self {
        TrainBudget { steps: 2000, lr: 0.01 }
    }
}

/// `lr · (1 + cos(π t / T)) / 2`.
pub fn cosine_lr(base: f64, step: usize, total: usize) -> f64 {
    if total == 0 {
        return base;
    }
    base * 0.5 * (1.0 + (std::f64::consts::PI * step as f64 / total as f64).cos())
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ParamVector,
    pub final_loss: f64,
    /// Set when the loss left the finite range or exceeded [`DIVERGENCE_LOSS`].
    pub diverged: bool,
}

/// Numerically stable softmax cross-entropy and its gradient w.r.t. the logits.
pub fn cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = sum.ln() + m - logits[label];
    let mut grad: Vec<f64> = exps.iter().map(|e| e / sum).collect();
    grad[label] -= 1.0;
    (loss, grad)
}

/// Mean loss and mean gradient over all samples, chunked deterministically.
fn batch_gradient<'a, I, L>(
    net: &CompiledNetwork,
    params: &ParamVector,
    n: usize,
    input: I,
    loss: L,
) -> Result<(f64, Vec<f64>)>
where
    I: Fn(usize) -> &'a [f64] + Sync,
    L: Fn(usize, &[f64]) -> (f64, Vec<f64>) + Sync,
{
    let plen = params.len();
    let classes = net.classes();
    let chunks: Vec<(usize, usize)> = (0..n).step_by(CHUNK).map(|s| (s, (s + CHUNK).min(n))).collect();
    let parts: Vec<Result<(f64, Vec<f64>)>> = chunks
        .par_iter()
        .map(|&(lo, hi)| {
            let mut g = vec![0.0; plen];
            let xs: Vec<f64> = (lo..hi).flat_map(|i| input(i).iter().copied()).collect();
            let total = net.vjp_with(params, &xs, hi - lo, &mut g, |y| {
                let mut total = 0.0;
                let mut dy = Vec::with_capacity(y.len());
                for (k, yk) in y.chunks_exact(classes).enumerate() {
                    let (l, d) = loss(lo + k, yk);
                    total += l;
                    dy.extend_from_slice(&d);
                }
                (total, dy)
            })?;
            Ok((total, g))
        })
        .collect();
    let mut grad = vec![0.0; plen];
    let mut total = 0.0;
    for part in parts {
        let (l, g) = part?;
        total += l;
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    let inv = 1.0 / n as f64;
    grad.iter_mut().for_each(|v| *v *= inv);
    Ok((total * inv, grad))
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * grad[i];
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * grad[i] * grad[i];
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

/// Trains a classifier with full-batch Adam and cosine lr decay on cross-entropy.
///
/// Non-finite activations or a loss above [`DIVERGENCE_LOSS`] stop training and
/// return the last parameters with `diverged` set.
pub fn train_classifier(
    net: &CompiledNetwork,
    init: ParamVector,
    data: &ImageDataset,
    budget: TrainBudget,
) -> Result<TrainOutcome> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    let mut params = init;
    let mut adam = Adam::new(params.len());
    let mut last = f64::NAN;
    for step in 0..budget.steps {
        let res = batch_gradient(
            net,
            &params,
            data.len(),
            |i| &data.images[i],
            |i, y| cross_entropy(y, data.labels[i]),
        );
        let (loss, grad) = match res {
            Ok(v) => v,
            Err(e) if e.is_numeric() => {
                return Ok(TrainOutcome {
                    params,
                    final_loss: f64::NAN,
                    diverged: true,
                })
            }
            Err(e) => return Err(e),
        };
        if !loss.is_finite() || loss > DIVERGENCE_LOSS {
            return Ok(TrainOutcome {
                params,
                final_loss: loss,
                diverged: true,
            });
        }
        last = loss;
        adam.step(params.data_mut(), &grad, cosine_lr(budget.lr, step, budget.steps));
    }
    if budget.steps == 0 {
        last = batch_gradient(
            net,
            &params,
            data.len(),
            |i| &data.images[i],
            |i, y| cross_entropy(y, data.labels[i]),
        )?
        .0;
    }
    Ok(TrainOutcome {
        params,
        final_loss: last,
        diverged: false,
    })
}

/// Fraction of samples whose arg-max logit equals the label (first maximum wins ties).
pub fn accuracy(net: &CompiledNetwork, params: &ParamVector, data: &ImageDataset) -> Result<f64> {
    let chunks: Vec<(usize, usize)> = (0..data.len())
        .step_by(CHUNK)
        .map(|s| (s, (s + CHUNK).min(data.len())))
        .collect();
    let hits: Vec<Result<usize>> = chunks
        .par_iter()
        .map(|&(lo, hi)| {
            let xs: Vec<f64> = data.images[lo..hi].iter().flatten().copied().collect();
            let y = net.forward_batch(params, &xs, hi - lo)?;
            Ok(y.chunks_exact(net.classes())
                .zip(&data.labels[lo..hi])
                .filter(|(yk, &label)| argmax(yk) == label)
                .count())
        })
        .collect();
    let mut correct = 0usize;
    for h in hits {
        correct += h?;
    }
    Ok(correct as f64 / data.len() as f64)
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (k, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = k;
        }
    }
    best
}

/// Full-batch gradient descent on mean squared error for scalar-output regression.
///
/// Returns the trained parameters and the loss before every step (plus the final loss).
pub fn train_regression(
    net: &CompiledNetwork,
    init: ParamVector,
    inputs: &[Tensor],
    targets: &[f64],
    steps: usize,
    lr: f64,
    offset: Option<&[f64]>,
) -> Result<(ParamVector, Vec<f64>)> {
    if inputs.len() != targets.len() || inputs.is_empty() {
        return Err(Error::InvalidArgument(
            "inputs and targets must be non-empty and aligned".into(),
        ));
    }
    let mut params = init;
    let mut losses = Vec::with_capacity(steps + 1);
    let residual = |i: usize, y: &[f64]| -> (f64, Vec<f64>) {
        let pred = y[0] - offset.map_or(0.0, |o| o[i]);
        let r = pred - targets[i];
        // ½ r² per sample so the gradient is the plain residual
        (0.5 * r * r, vec![r])
    };
    for step in 0..=steps {
        let (loss, grad) = batch_gradient(net, &params, inputs.len(), |i| inputs[i].data(), residual)?;
        losses.push(2.0 * loss);
        if !loss.is_finite() || 2.0 * loss > DIVERGENCE_LOSS {
            return Err(Error::Divergence { step, loss: 2.0 * loss });
        }
        if step == steps {
            break;
        }
        crate::tensor::axpy(-lr, &grad, params.data_mut());
    }
    Ok((params, losses))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_entropy_matches_definition() {
        let (l, g) = cross_entropy(&[1.0, 2.0, 0.5], 1);
        let z: f64 = [1.0f64, 2.0, 0.5].iter().map(|v| v.exp()).sum();
        assert!((l - (z.ln() - 2.0)).abs() < 1e-14);
        assert!((g.iter().sum::<f64>()).abs() < 1e-14);
        assert!(g[1] < 0.0 && g[0] > 0.0);
    }

    #[test]
    fn cosine_schedule_endpoints() {
        assert_eq!(cosine_lr(0.1, 0, 100), 0.1);
        assert!((cosine_lr(0.1, 50, 100) - 0.05).abs() < 1e-15);
        assert!(cosine_lr(0.1, 100, 100).abs() < 1e-15);
    }
}
