//! Reference computations shared by the integration tests. None of them call the
//! library routine they are used to check.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use vintk::nn::{CompiledNetwork, OutputReduction};
use vintk::tensor::{ParamVector, Tensor};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vec(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest `|a - b| / max(|b|, floor)`.
pub fn max_rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs().max(floor))
        .fold(0.0, f64::max)
}

fn reduced(net: &CompiledNetwork, p: &ParamVector, x: &Tensor, reduction: OutputReduction) -> f64 {
    let out = net.forward(p, x).expect("forward");
    match reduction {
        OutputReduction::SumLogits => out.data().iter().sum(),
        OutputReduction::Logit(k) => out.data()[k],
    }
}

/// Fourth-order central differences of the reduced output.
pub fn fd_gradient(
    net: &CompiledNetwork,
    params: &ParamVector,
    x: &Tensor,
    reduction: OutputReduction,
    h: f64,
) -> Vec<f64> {
    let mut p = params.clone();
    (0..params.len())
        .map(|i| {
            let orig = p.data()[i];
            let mut at = |d: f64| {
                p.data_mut()[i] = orig + d;
                let v = reduced(net, &p, x, reduction);
                p.data_mut()[i] = orig;
                v
            };
            (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h)
        })
        .collect()
}

/// `2 E_w[relu(w·x) relu(w·y)]` with `w ~ N(0, I)`, estimated from `samples` draws.
///
/// Returns the full `n x n` estimate for the given points, row-major.
pub fn mc_relu_kernel(points: &[Vec<f64>], samples: usize, seed: u64) -> Vec<f64> {
    let n = points.len();
    let d = points[0].len();
    let mut rng = rng(seed);
    let mut acc = vec![0.0; n * n];
    let mut act = vec![0.0; n];
    for _ in 0..samples {
        let w = gaussian_vec(d, &mut rng);
        for (a, x) in act.iter_mut().zip(points) {
            *a = dot(&w, x).max(0.0);
        }
        for i in 0..n {
            if act[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                acc[i * n + j] += act[i] * act[j];
            }
        }
    }
    acc.iter().map(|v| 2.0 * v / samples as f64).collect()
}

/// Kernel gradient descent on the residual, `r <- r - (η/m) G r`, with `m` sub-steps
/// per unit of time. Returns the residual at each requested (integer) time.
pub fn kernel_gd_residuals(
    g: &[f64],
    n: usize,
    y: &[f64],
    eta: f64,
    substeps: usize,
    times: &[usize],
) -> Vec<Vec<f64>> {
    let h = eta / substeps as f64;
    let mut r = y.to_vec();
    let mut now = 0;
    let mut out = Vec::new();
    for &t in times {
        while now < t * substeps {
            let gr: Vec<f64> = (0..n).map(|i| dot(&g[i * n..(i + 1) * n], &r)).collect();
            for (ri, gi) in r.iter_mut().zip(&gr) {
                *ri -= h * gi;
            }
            now += 1;
        }
        out.push(r.clone());
    }
    out
}

/// Exhaustive tau-b by explicit pair enumeration.
pub fn tau_b_by_pairs(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let (mut s, mut tx, mut ty, mut pairs) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            pairs += 1;
            let a = (x[i] - x[j]).signum() as i64 * ((x[i] != x[j]) as i64);
            let b = (y[i] - y[j]).signum() as i64 * ((y[i] != y[j]) as i64);
            s += a * b;
            tx += (a == 0) as i64;
            ty += (b == 0) as i64;
        }
    }
    s as f64 / (((pairs - tx) * (pairs - ty)) as f64).sqrt()
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut cur: Vec<usize> = (0..n).collect();
    let mut out = vec![cur.clone()];
    loop {
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| cur[i] < cur[i + 1]) else {
            return out;
        };
        let j = (i + 1..n).rev().find(|&j| cur[j] > cur[i]).expect("successor exists");
        cur.swap(i, j);
        cur[i + 1..].reverse();
        out.push(cur.clone());
    }
}

/// Two-sided permutation p-value of the concordance statistic, by full enumeration.
pub fn permutation_p_value(x: &[f64], y: &[f64]) -> f64 {
    let observed = tau_b_by_pairs(x, y).abs();
    let perms = permutations(y.len());
    let hits = perms
        .iter()
        .filter(|p| {
            let yp: Vec<f64> = p.iter().map(|&k| y[k]).collect();
            tau_b_by_pairs(x, &yp).abs() >= observed - 1e-12
        })
        .count();
    hits as f64 / perms.len() as f64
}
