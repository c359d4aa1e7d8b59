//! Kernel-regime experiments: eigenmode residual decay, spiked covariates, kernel
//! ridge regression and the network-versus-kernel prediction gap.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::spd_solve;
use crate::metrics::{gram_from_features, GramKind, GramMatrix};
use crate::nn::{Activation, CompiledNetwork, InputSig, Layer, NetworkSpec, OutputReduction, Parameterization};
use crate::tensor::{dot, ParamVector, Tensor};
use crate::train::train_regression;

/// Amplitude of the added cosine in the high-frequency regime.
pub const HIGH_FREQ_AMPLITUDE: f64 = 0.5;
/// Frequency multiplier `k` in `cos(2π k vᵀx)`.
pub const HIGH_FREQ_K: f64 = 4.0;
/// Default kernel ridge, relative to `trace / D`.
pub const RELATIVE_RIDGE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpikedConfig {
    pub d: usize,
    pub d0: usize,
    pub r1: f64,
    pub r2: f64,
    /// Training samples.
    pub n: usize,
    /// Held-out samples used for both risks.
    pub n_test: usize,
    pub noise_std: f64,
    pub activation: Activation,
    pub seed: u64,
}

impl Default for SpikedConfig {
    fn default() -> Self {
        SpikedConfig {
            d: 64,
            d0: 4,
            r1: 1.0,
            r2: 0.25,
            n: 256,
            n_test: 256,
            noise_std: 0.0,
            activation: Activation::Relu,
            seed: 0,
        }
    }
}

impl SpikedConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.d0 == 0 || self.d0 > self.d {
            return bad(format!("need 1 <= d0 <= d, got d0 = {}, d = {}", self.d0, self.d));
        }
        if !(self.r2 > 0.0) || !(self.r1 >= self.r2) || !self.r1.is_finite() {
            return bad(format!("need r1 >= r2 > 0, got r1 = {}, r2 = {}", self.r1, self.r2));
        }
        if self.n < 4 {
            return bad(format!("need n >= 4 samples, got {}", self.n));
        }
        if !(self.noise_std >= 0.0) || !self.noise_std.is_finite() {
            return bad(format!("noise std {} must be finite and non-negative", self.noise_std));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// `f*(x) = σ(uᵀx)` with `u` in the signal subspace.
    Low,
    /// Low target plus `0.5 · cos(2π · 4 · vᵀx)` with `v` in the complement.
    High,
    /// `f* = 0`.
    Null,
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::Low => "low",
            Regime::High => "high",
            Regime::Null => "null",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "low" => Ok(Regime::Low),
            "high" => Ok(Regime::High),
            "null" => Ok(Regime::Null),
            _ => Err(Error::InvalidArgument(format!(
                "unknown regime {s:?} (expected low, high or null)"
            ))),
        }
    }
}

/// Samples `x = U z₁ + U⊥ z₂` with `z₁`, `z₂` uniform on spheres of radius
/// `r₁√d₀` and `r₂√(d−d₀)`. The first `n` samples are for training.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikedDataset {
    pub config: SpikedConfig,
    pub regime: Regime,
    /// `d x d0`, row-major.
    pub u: Vec<f64>,
    /// `d x (d - d0)`, row-major.
    pub u_perp: Vec<f64>,
    /// Unit target direction inside span(U).
    pub signal_dir: Vec<f64>,
    /// Unit direction inside span(U⊥) for the high-frequency term; empty when `d0 = d`.
    pub high_dir: Vec<f64>,
    pub z1: Vec<Vec<f64>>,
    pub z2: Vec<Vec<f64>>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl SpikedDataset {
    pub fn train_x(&self) -> &[Vec<f64>] {
        &self.x[..self.config.n]
    }

    pub fn test_x(&self) -> &[Vec<f64>] {
        &self.x[self.config.n..]
    }

    pub fn train_y(&self) -> &[f64] {
        &self.y[..self.config.n]
    }

    pub fn test_y(&self) -> &[f64] {
        &self.y[self.config.n..]
    }

    pub fn regression_data(&self) -> RegressionData {
        let t = |xs: &[Vec<f64>]| xs.iter().map(|v| Tensor::vector(v.clone())).collect();
        RegressionData {
            train_x: t(self.train_x()),
            train_y: self.train_y().to_vec(),
            test_x: t(self.test_x()),
            test_y: self.test_y().to_vec(),
        }
    }
}

fn sphere(rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> Vec<f64> {
    if dim == 0 {
        return Vec::new();
    }
    loop {
        let g: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = dot(&g, &g).sqrt();
        if norm > 1e-12 {
            return g.iter().map(|v| v * radius / norm).collect();
        }
    }
}

/// `m (rows x cols, row-major) · v`.
fn mat_vec(m: &[f64], rows: usize, cols: usize, v: &[f64]) -> Vec<f64> {
    (0..rows).map(|i| dot(&m[i * cols..(i + 1) * cols], v)).collect()
}

pub fn generate_spiked(cfg: &SpikedConfig, regime: Regime) -> Result<SpikedDataset> {
    cfg.validate()?;
    let (d, d0) = (cfg.d, cfg.d0);
    let dp = d - d0;
    if regime == Regime::High && dp == 0 {
        return Err(Error::InvalidArgument(
            "high-frequency regime needs a complement subspace (d0 < d)".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let g: Vec<f64> = (0..d * d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let q = DMatrix::from_row_slice(d, d, &g).qr().q();
    let mut u = Vec::with_capacity(d * d0);
    let mut u_perp = Vec::with_capacity(d * dp);
    for i in 0..d {
        for j in 0..d {
            if j < d0 {
                u.push(q[(i, j)]);
            } else {
                u_perp.push(q[(i, j)]);
            }
        }
    }
    let signal_dir = mat_vec(&u, d, d0, &sphere(&mut rng, d0, 1.0));
    let high_dir = mat_vec(&u_perp, d, dp, &sphere(&mut rng, dp, 1.0));

    let total = cfg.n + cfg.n_test;
    let noise = Normal::new(0.0, cfg.noise_std).expect("validated noise std");
    let (mut z1s, mut z2s, mut xs, mut ys) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for _ in 0..total {
        let z1 = sphere(&mut rng, d0, cfg.r1 * (d0 as f64).sqrt());
        let z2 = sphere(&mut rng, dp, cfg.r2 * (dp as f64).sqrt());
        let mut x = mat_vec(&u, d, d0, &z1);
        if dp > 0 {
            for (xi, v) in x.iter_mut().zip(mat_vec(&u_perp, d, dp, &z2)) {
                *xi += v;
            }
        }
        let mut y = match regime {
            Regime::Null => 0.0,
            Regime::Low | Regime::High => cfg.activation.apply(dot(&signal_dir, &x)),
        };
        if regime == Regime::High {
            y += HIGH_FREQ_AMPLITUDE * (2.0 * PI * HIGH_FREQ_K * dot(&high_dir, &x)).cos();
        }
        if cfg.noise_std > 0.0 {
            y += noise.sample(&mut rng);
        }
        z1s.push(z1);
        z2s.push(z2);
        xs.push(x);
        ys.push(y);
    }
    Ok(SpikedDataset {
        config: *cfg,
        regime,
        u,
        u_perp,
        signal_dir,
        high_dir,
        z1: z1s,
        z2: z2s,
        x: xs,
        y: ys,
    })
}

/// Per-eigenmode residuals `r_i(t) = exp(-η λ_i t) (Qᵀy)_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualTrace {
    pub eigenvalues: Vec<f64>,
    pub initial: Vec<f64>,
    pub eta: f64,
    pub times: Vec<f64>,
    /// One row per time, one column per mode (eigenvalues ascending).
    pub residuals: Vec<Vec<f64>>,
}

impl ResidualTrace {
    /// Time for mode `i` to decay to half its initial size; infinite for `λ_i = 0`.
    pub fn half_life(&self, i: usize) -> f64 {
        let rate = self.eta * self.eigenvalues[i];
        if rate > 0.0 {
            std::f64::consts::LN_2 / rate
        } else {
            f64::INFINITY
        }
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((0..self.eigenvalues.len()).map(|i| format!("r_{i}")));
        out.write_record(&header)?;
        for (t, row) in self.times.iter().zip(&self.residuals) {
            let mut rec = vec![t.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn simulate_residual_dynamics(g: &GramMatrix, y: &[f64], eta: f64, t_grid: &[f64]) -> Result<ResidualTrace> {
    if y.len() != g.dim() {
        return Err(Error::Shape(format!(
            "{} labels for a {}x{} Gram",
            y.len(),
            g.dim(),
            g.dim()
        )));
    }
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::InvalidArgument(format!("learning rate {eta} must be positive")));
    }
    if let Some(t) = t_grid.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "time {t} must be finite and non-negative"
        )));
    }
    let e = g.check_psd()?;
    // eigenvalues within the PSD tolerance below zero are treated as zero
    let eigenvalues: Vec<f64> = e.values.iter().map(|l| l.max(0.0)).collect();
    let initial = e.project(y);
    let residuals = t_grid
        .iter()
        .map(|&t| {
            eigenvalues
                .iter()
                .zip(&initial)
                .map(|(l, c)| (-eta * l * t).exp() * c)
                .collect()
        })
        .collect();
    Ok(ResidualTrace {
        eigenvalues,
        initial,
        eta,
        times: t_grid.to_vec(),
        residuals,
    })
}

/// `1e-6 · trace / D`.
pub fn default_ridge(g: &GramMatrix) -> f64 {
    RELATIVE_RIDGE * g.trace() / g.dim() as f64
}

/// Dual weights `α = (K + ridge·I)⁻¹ y`.
pub fn kernel_ridge_fit(gram_train: &GramMatrix, y_train: &[f64], ridge: f64) -> Result<Vec<f64>> {
    let n = gram_train.dim();
    if y_train.len() != n {
        return Err(Error::Shape(format!("{} labels for a {n}x{n} Gram", y_train.len())));
    }
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "ridge {ridge} must be finite and non-negative"
        )));
    }
    spd_solve(gram_train.data(), n, ridge, y_train, 1)
}

/// `gram_cross · (gram_train + ridge·I)⁻¹ · y_train`; `gram_cross` is `m x n` row-major.
pub fn kernel_ridge_predict(
    gram_train: &GramMatrix,
    gram_cross: &[f64],
    y_train: &[f64],
    ridge: f64,
) -> Result<Vec<f64>> {
    let n = gram_train.dim();
    if gram_cross.len() % n != 0 {
        return Err(Error::Shape(format!(
            "cross Gram of {} entries is not a multiple of {n} columns",
            gram_cross.len()
        )));
    }
    let alpha = kernel_ridge_fit(gram_train, y_train, ridge)?;
    Ok(gram_cross.chunks_exact(n).map(|row| dot(row, &alpha)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionData {
    pub train_x: Vec<Tensor>,
    pub train_y: Vec<f64>,
    pub test_x: Vec<Tensor>,
    pub test_y: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct NnFit {
    pub init: ParamVector,
    pub params: ParamVector,
    /// Held-out mean squared error of the centered predictor.
    pub risk: f64,
    /// Training mean squared error before each step, then after the last.
    pub losses: Vec<f64>,
}

fn outputs(net: &CompiledNetwork, params: &ParamVector, xs: &[Tensor]) -> Result<Vec<f64>> {
    xs.par_iter().map(|x| Ok(net.forward(params, x)?.data()[0])).collect()
}

pub fn mean_squared_error(pred: &[f64], target: &[f64]) -> f64 {
    pred.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / pred.len().max(1) as f64
}

/// Full-batch gradient descent on squared loss for a scalar-output network.
///
/// The predictor is centered, `f(θ, x) - f(θ₀, x)`, so it starts from zero and a
/// zero target is fitted exactly at initialization.
pub fn train_nn(net: &CompiledNetwork, data: &RegressionData, steps: usize, lr: f64, seed: u64) -> Result<NnFit> {
    if steps == 0 {
        return Err(Error::InvalidArgument("train_nn needs at least one step".into()));
    }
    if net.classes() != 1 {
        return Err(Error::InvalidArgument(format!(
            "regression needs a scalar-output network, got {} outputs",
            net.classes()
        )));
    }
    if data.test_x.len() != data.test_y.len() || data.test_x.is_empty() {
        return Err(Error::InvalidArgument(
            "test inputs and targets must be non-empty and aligned".into(),
        ));
    }
    let init = net.init_params(seed);
    let offset = outputs(net, &init, &data.train_x)?;
    let (params, losses) = train_regression(
        net,
        init.clone(),
        &data.train_x,
        &data.train_y,
        steps,
        lr,
        Some(&offset),
    )?;
    let before = outputs(net, &init, &data.test_x)?;
    let after = outputs(net, &params, &data.test_x)?;
    let pred: Vec<f64> = after.iter().zip(&before).map(|(a, b)| a - b).collect();
    Ok(NnFit {
        init,
        params,
        risk: mean_squared_error(&pred, &data.test_y),
        losses,
    })
}

/// `d → width → 1` ReLU network in NTK parameterization.
pub fn two_layer_relu(d: usize, width: usize) -> NetworkSpec {
    NetworkSpec {
        input: InputSig::flat(d),
        classes: 1,
        layers: vec![
            Layer::Linear { out: width, bias: true },
            Layer::Activation(Activation::Relu),
            Layer::Linear { out: 1, bias: true },
        ],
        parameterization: Parameterization::Ntk,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapConfig {
    pub width: usize,
    pub steps: usize,
    pub lr: f64,
}

impl Default for GapConfig {
    fn default() -> Self {
        GapConfig {
            width: 256,
            steps: 2000,
            lr: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskPair {
    pub r_nn: f64,
    pub r_ntk: f64,
    pub gap: f64,
    pub ridge: f64,
}

/// Trains the network and fits the kernel predictor built from its NTK at initialization
/// on the same spiked sample, then compares held-out risks.
pub fn approximation_gap(cfg: &SpikedConfig, regime: Regime, gap: &GapConfig) -> Result<RiskPair> {
    let ds = generate_spiked(cfg, regime)?;
    let data = ds.regression_data();
    let net = CompiledNetwork::compile(&two_layer_relu(cfg.d, gap.width))?;
    let fit = train_nn(&net, &data, gap.steps, gap.lr, cfg.seed)?;

    let grads = |xs: &[Tensor]| -> Result<Vec<Vec<f64>>> {
        xs.par_iter()
            .map(|x| {
                Ok(net
                    .param_gradient(&fit.init, x, OutputReduction::SumLogits)?
                    .into_data())
            })
            .collect()
    };
    let train_g = grads(&data.train_x)?;
    let test_g = grads(&data.test_x)?;
    let k = gram_from_features(&train_g, GramKind::EmpiricalNtk)?;
    let cross: Vec<f64> = test_g
        .par_iter()
        .flat_map_iter(|t| train_g.iter().map(move |s| dot(t, s)))
        .collect();
    let ridge = default_ridge(&k);
    let pred = kernel_ridge_predict(&k, &cross, &data.train_y, ridge)?;
    let r_ntk = mean_squared_error(&pred, &data.test_y);
    Ok(RiskPair {
        r_nn: fit.risk,
        r_ntk,
        gap: (fit.risk - r_ntk).abs(),
        ridge,
    })
}

/// One line of the spiked-experiment CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikedRow {
    pub seed: u64,
    pub d: usize,
    pub d0: usize,
    pub r1: f64,
    pub r2: f64,
    pub regime: Regime,
    #[serde(rename = "R_NN")]
    pub r_nn: f64,
    #[serde(rename = "R_NTK")]
    pub r_ntk: f64,
    pub gap: f64,
}

pub const SPIKED_CSV_HEADER: [&str; 9] = ["seed", "d", "d0", "r1", "r2", "regime", "R_NN", "R_NTK", "gap"];

/// Runs every (seed, regime) pair; rows come back sorted by seed, then regime order as given.
pub fn spiked_experiment(
    base: &SpikedConfig,
    seeds: &[u64],
    regimes: &[Regime],
    gap: &GapConfig,
) -> Result<Vec<SpikedRow>> {
    let mut seeds = seeds.to_vec();
    seeds.sort_unstable();
    seeds.dedup();
    let jobs: Vec<(u64, Regime)> = seeds
        .iter()
        .flat_map(|&s| regimes.iter().map(move |&r| (s, r)))
        .collect();
    jobs.par_iter()
        .map(|&(seed, regime)| {
            let cfg = SpikedConfig { seed, ..*base };
            let risk = approximation_gap(&cfg, regime, gap)?;
            Ok(SpikedRow {
                seed,
                d: cfg.d,
                d0: cfg.d0,
                r1: cfg.r1,
                r2: cfg.r2,
                regime,
                r_nn: risk.r_nn,
                r_ntk: risk.r_ntk,
                gap: risk.gap,
            })
        })
        .collect()
}

pub fn write_spiked_csv<W: std::io::Write>(rows: &[SpikedRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    if rows.is_empty() {
        out.write_record(SPIKED_CSV_HEADER)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SpikedConfig {
        SpikedConfig {
            d: 8,
            d0: 2,
            n: 16,
            n_test: 16,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn sphere_norms_and_orthogonality() {
        let cfg = SpikedConfig {
            r1: 2.0,
            r2: 0.5,
            ..small(3)
        };
        let ds = generate_spiked(&cfg, Regime::High).unwrap();
        for (z1, z2) in ds.z1.iter().zip(&ds.z2) {
            assert!((dot(z1, z1).sqrt() - 2.0 * 2f64.sqrt()).abs() < 1e-10);
            assert!((dot(z2, z2).sqrt() - 0.5 * 6f64.sqrt()).abs() < 1e-10);
        }
        let d = 8;
        let col = |j: usize| -> Vec<f64> {
            (0..d)
                .map(|i| {
                    if j < 2 {
                        ds.u[i * 2 + j]
                    } else {
                        ds.u_perp[i * 6 + j - 2]
                    }
                })
                .collect()
        };
        for a in 0..d {
            for b in 0..d {
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((dot(&col(a), &col(b)) - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn full_signal_dimension_has_no_complement() {
        let cfg = SpikedConfig {
            d: 4,
            d0: 4,
            ..small(1)
        };
        let ds = generate_spiked(&cfg, Regime::Low).unwrap();
        assert!(ds.u_perp.is_empty());
        for x in &ds.x {
            assert!((dot(x, x).sqrt() - 2.0).abs() < 1e-10);
        }
        assert!(generate_spiked(&cfg, Regime::High).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SpikedConfig { d0: 0, ..small(0) }.validate().is_err());
        assert!(SpikedConfig { d0: 9, ..small(0) }.validate().is_err());
        assert!(SpikedConfig {
            r1: 0.1,
            r2: 0.2,
            ..small(0)
        }
        .validate()
        .is_err());
        assert!(SpikedConfig { n: 3, ..small(0) }.validate().is_err());
    }

    #[test]
    fn residual_trace_basics() {
        let g = GramMatrix::new(2, vec![2.0, 0.0, 0.0, 0.0], GramKind::Custom).unwrap();
        let tr = simulate_residual_dynamics(&g, &[1.0, 3.0], 0.5, &[0.0, 1.0, 4.0]).unwrap();
        // eigenvalues ascending: λ = 0 mode is e2, λ = 2 mode is e1 (up to sign)
        assert_eq!(tr.eigenvalues, vec![0.0, 2.0]);
        assert!((tr.residuals[0][0].abs() - 3.0).abs() < 1e-15);
        assert!((tr.residuals[0][1].abs() - 1.0).abs() < 1e-15);
        for row in &tr.residuals {
            assert_eq!(row[0], tr.initial[0]);
        }
        assert!((tr.residuals[1][1].abs() - (-1.0f64).exp()).abs() < 1e-15);
        assert!(tr.half_life(0).is_infinite());
        assert!(simulate_residual_dynamics(&g, &[1.0], 0.5, &[0.0]).is_err());
        assert!(simulate_residual_dynamics(&g, &[1.0, 2.0], 0.0, &[0.0]).is_err());
        let neg = GramMatrix::new(2, vec![1.0, 0.0, 0.0, -1.0], GramKind::Custom).unwrap();
        assert!(matches!(
            simulate_residual_dynamics(&neg, &[1.0, 1.0], 0.1, &[0.0]),
            Err(Error::NegativeEigenvalue { .. })
        ));
    }

    #[test]
    fn ridge_identity_and_interpolation() {
        let i3 = GramMatrix::identity(3);
        let cross = [1.0, 2.0, 3.0, 0.5, 0.0, -1.0];
        let p = kernel_ridge_predict(&i3, &cross, &[1.0, 1.0, 2.0], 0.0).unwrap();
        assert_eq!(p, vec![9.0, -1.5]);
        let k = GramMatrix::new(2, vec![2.0, 1.0, 1.0, 2.0], GramKind::Custom).unwrap();
        let p = kernel_ridge_predict(&k, &[2.0, 1.0], &[5.0, -1.0], 0.0).unwrap();
        assert!((p[0] - 5.0).abs() < 1e-12);
        let ones = GramMatrix::new(2, vec![1.0; 4], GramKind::Custom).unwrap();
        assert!(matches!(
            kernel_ridge_fit(&ones, &[1.0, 2.0], 0.0),
            Err(Error::Singular(_))
        ));
        assert!(kernel_ridge_fit(&ones, &[1.0, 2.0], 1e-3).is_ok());
    }

    #[test]
    fn hand_solved_three_point_system() {
        // [[4,1,0],[1,3,1],[0,1,2]] has inverse (1/18)[[5,-2,1],[-2,8,-4],[1,-4,11]]
        let k = GramMatrix::new(3, vec![4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0], GramKind::Custom).unwrap();
        let alpha = kernel_ridge_fit(&k, &[1.0, 2.0, 3.0], 0.0).unwrap();
        let expect = [4.0 / 18.0, 2.0 / 18.0, 26.0 / 18.0];
        for (a, e) in alpha.iter().zip(expect) {
            assert!((a - e).abs() < 1e-10);
        }
    }

    #[test]
    fn null_target_has_no_gap() {
        let cfg = small(2);
        let gap = GapConfig {
            width: 16,
            steps: 20,
            lr: 0.5,
        };
        let r = approximation_gap(&cfg, Regime::Null, &gap).unwrap();
        assert!(r.r_nn < 1e-12 && r.r_ntk < 1e-12 && r.gap < 1e-6);
    }

    #[test]
    fn zero_lr_keeps_initial_risk() {
        let ds = generate_spiked(&small(4), Regime::Low).unwrap();
        let data = ds.regression_data();
        let net = CompiledNetwork::compile(&two_layer_relu(8, 16)).unwrap();
        let fit = train_nn(&net, &data, 5, 0.0, 0).unwrap();
        assert_eq!(fit.params.data(), fit.init.data());
        assert!((fit.risk - mean_squared_error(&vec![0.0; 16], &data.test_y)).abs() < 1e-15);
        assert!(train_nn(&net, &data, 0, 0.1, 0).is_err());
    }

    #[test]
    fn regime_names_round_trip() {
        for r in [Regime::Low, Regime::High, Regime::Null] {
            assert_eq!(r.name().parse::<Regime>().unwrap(), r);
        }
        assert!("mid".parse::<Regime>().is_err());
    }
}
