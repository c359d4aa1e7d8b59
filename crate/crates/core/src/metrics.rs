//! Kernel Gram matrices over a probe batch and the scalar proxy scores built on them.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{max_asymmetry, sym_eigendecompose, symmetrize, SymEigen, SYMMETRY_TOLERANCE};
use crate::nn::{CompiledNetwork, OutputReduction};
use crate::tensor::{dot, ParamVector, Tensor};

/// Relative eigenvalue floor (times the trace) accepted for positive semi-definite Grams.
pub const PSD_TOLERANCE: f64 = 1e-8;
/// NCN floors `λ_min` at this fraction of the trace.
pub const NCN_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GramKind {
    EmpiricalNtk,
    ReluNtk { depth: usize },
    Fourier,
    Vintk,
    Custom,
}

/// Symmetric `D x D` kernel matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    n: usize,
    data: Vec<f64>,
    kind: GramKind,
}

impl GramMatrix {
    /// Validates shape, finiteness and symmetry (within 1e-9 of the largest entry), then symmetrizes.
    pub fn new(n: usize, mut data: Vec<f64>, kind: GramKind) -> Result<Self> {
        if n == 0 || data.len() != n * n {
            return Err(Error::Shape(format!("Gram needs {n}x{n} entries, got {}", data.len())));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                layer: format!("gram entry ({}, {})", i / n, i % n),
                kind: "gram",
            });
        }
        let scale = data.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let (i, j, diff) = max_asymmetry(&data, n);
        if diff > SYMMETRY_TOLERANCE * scale {
            return Err(Error::NotSymmetric { i, j, diff });
        }
        symmetrize(&mut data, n);
        Ok(GramMatrix { n, data, kind })
    }

    pub fn from_fn(n: usize, kind: GramKind, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let data = (0..n * n).map(|k| f(k / n, k % n)).collect();
        GramMatrix::new(n, data, kind)
    }

    pub fn identity(n: usize) -> Self {
        GramMatrix::from_fn(n, GramKind::Custom, |i, j| if i == j { 1.0 } else { 0.0 }).expect("identity")
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn kind(&self) -> GramKind {
        self.kind
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn eigen(&self) -> Result<SymEigen> {
        sym_eigendecompose(&self.data, self.n)
    }

    /// Simultaneous row/column permutation: entry `(i, j)` becomes `(perm[i], perm[j])` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::Shape("permutation length differs from Gram size".into()));
        }
        GramMatrix::from_fn(self.n, self.kind, |i, j| self.get(perm[i], perm[j]))
    }

    /// Entrywise product; both Grams must index the same probes in the same order.
    pub fn hadamard(&self, other: &GramMatrix) -> Result<GramMatrix> {
        if self.n != other.n {
            return Err(Error::Shape(format!(
                "Hadamard product of {}x{} and {}x{} Grams",
                self.n, self.n, other.n, other.n
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect();
        GramMatrix::new(self.n, data, GramKind::Vintk)
    }

    /// Errors when an eigenvalue falls below `-PSD_TOLERANCE · max(trace, 0)`.
    pub fn check_psd(&self) -> Result<SymEigen> {
        let e = self.eigen()?;
        let tol = PSD_TOLERANCE * self.trace().max(0.0);
        if e.values[0] < -tol {
            return Err(Error::NegativeEigenvalue {
                value: e.values[0],
                tolerance: tol,
            });
        }
        Ok(e)
    }
}

/// Probe inputs shared by every candidate that is scored against them.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeBatch {
    inputs: Vec<Tensor>,
    labels: Option<Vec<f64>>,
}

impl ProbeBatch {
    /// At least two inputs of identical shape, pairwise distinct.
    pub fn new(inputs: Vec<Tensor>, labels: Option<Vec<f64>>) -> Result<Self> {
        if inputs.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "probe batch needs at least 2 inputs, got {}",
                inputs.len()
            )));
        }
        let shape = inputs[0].shape().to_vec();
        if let Some(k) = inputs.iter().position(|t| t.shape() != shape.as_slice()) {
            return Err(Error::Shape(format!(
                "probe {k} has shape {:?}, expected {shape:?}",
                inputs[k].shape()
            )));
        }
        for i in 0..inputs.len() {
            for j in (i + 1)..inputs.len() {
                if inputs[i].data() == inputs[j].data() {
                    return Err(Error::InvalidArgument(format!("probes {i} and {j} are identical")));
                }
            }
        }
        if let Some(l) = &labels {
            if l.len() != inputs.len() {
                return Err(Error::Shape("label count differs from probe count".into()));
            }
        }
        Ok(ProbeBatch { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[Tensor] {
        &self.inputs
    }

    pub fn labels(&self) -> Option<&[f64]> {
        self.labels.as_deref()
    }

    /// Min-max map of each component into `[0, 1]` over the batch, with the constants used.
    ///
    /// A component that is constant across the batch maps to 0.
    pub fn min_max_normalized(&self) -> (ProbeBatch, MinMax) {
        let dims = self.inputs[0].numel();
        let mut mm = MinMax {
            min: vec![f64::INFINITY; dims],
            max: vec![f64::NEG_INFINITY; dims],
        };
        for t in &self.inputs {
            for (k, &v) in t.data().iter().enumerate() {
                mm.min[k] = mm.min[k].min(v);
                mm.max[k] = mm.max[k].max(v);
            }
        }
        let inputs = self
            .inputs
            .iter()
            .map(|t| Tensor::new(t.shape().to_vec(), mm.apply(t.data())).expect("shape"))
            .collect();
        (
            ProbeBatch {
                inputs,
                labels: self.labels.clone(),
            },
            mm,
        )
    }
}

/// Per-component normalization constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMax {
    /// Maps `x` component-wise, clamping values outside the recorded range.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&v, (&lo, &hi))| {
                if hi > lo {
                    ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// `Θ(x_i, x_j) = ⟨∇θ f(x_i), ∇θ f(x_j)⟩` over the probe batch.
///
/// Per-probe gradients and Gram rows are computed in parallel; every entry is a
/// single dot product, so the result does not depend on the thread count.
pub fn empirical_ntk_gram(
    net: &CompiledNetwork,
    params: &ParamVector,
    batch: &ProbeBatch,
    reduction: OutputReduction,
) -> Result<GramMatrix> {
    let grads: Vec<Vec<f64>> = batch
        .inputs
        .par_iter()
        .map(|x| net.param_gradient(params, x, reduction).map(|g| g.into_data()))
        .collect::<Result<_>>()?;
    gram_from_features(&grads, GramKind::EmpiricalNtk)
}

/// Gram of explicit feature vectors, `G_ij = φ_i · φ_j`.
pub fn gram_from_features(features: &[Vec<f64>], kind: GramKind) -> Result<GramMatrix> {
    let n = features.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (0..n).map(|j| dot(&features[i], &features[j])).collect())
        .collect();
    GramMatrix::new(n, rows.concat(), kind)
}

/// Eigen-diagnostics attached to every score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub trace: f64,
    #[serde(rename = "D")]
    pub d: usize,
    /// `λ_min` fell below the NCN floor.
    pub degenerate: bool,
}

impl Diagnostics {
    pub fn of(g: &GramMatrix) -> Result<Self> {
        let e = g.eigen()?;
        let trace = g.trace();
        let lambda_min = e.values[0];
        Ok(Diagnostics {
            lambda_min,
            lambda_max: *e.values.last().expect("non-empty"),
            trace,
            d: g.dim(),
            degenerate: lambda_min < NCN_EPSILON * trace.abs(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Fnorm,
    Mean,
    Ncn,
    Relu,
    Vintk,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::Fnorm, Metric::Mean, Metric::Ncn, Metric::Relu, Metric::Vintk];

    pub fn name(&self) -> &'static str {
        match self {
            Metric::Fnorm => "fnorm",
            Metric::Mean => "mean",
            Metric::Ncn => "ncn",
            Metric::Relu => "relu",
            Metric::Vintk => "vintk",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownMetric(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricScore {
    pub metric: String,
    pub value: f64,
    pub diagnostics: Diagnostics,
}

fn score(metric: Metric, value: f64, g: &GramMatrix) -> Result<MetricScore> {
    if !value.is_finite() {
        return Err(Error::NonFinite {
            layer: format!("{metric} score"),
            kind: "metric",
        });
    }
    Ok(MetricScore {
        metric: metric.name().to_string(),
        value,
        diagnostics: Diagnostics::of(g)?,
    })
}

pub fn fnorm_score(g: &GramMatrix) -> Result<MetricScore> {
    score(Metric::Fnorm, g.data.iter().map(|v| v * v).sum::<f64>().sqrt(), g)
}

pub fn mean_score(g: &GramMatrix) -> Result<MetricScore> {
    score(Metric::Mean, g.data.iter().sum::<f64>() / g.data.len() as f64, g)
}

/// `-λ_max / max(λ_min, ε)` with `ε = 1e-12 · trace`; degenerate spectra are flagged.
pub fn ncn_score(g: &GramMatrix) -> Result<MetricScore> {
    let d = Diagnostics::of(g)?;
    let eps = NCN_EPSILON * d.trace.abs();
    let floor = d.lambda_min.max(eps);
    if floor <= 0.0 {
        return Err(Error::Singular(format!(
            "NCN undefined: λ_min = {:e} and trace = {:e}",
            d.lambda_min, d.trace
        )));
    }
    Ok(MetricScore {
        metric: Metric::Ncn.name().to_string(),
        value: -d.lambda_max / floor,
        diagnostics: d,
    })
}

/// Signed mean of the ViNTK Gram (the Hadamard product of NTK and Fourier Grams).
pub fn vintk_score(g: &GramMatrix) -> Result<MetricScore> {
    let mut s = mean_score(g)?;
    s.metric = Metric::Vintk.name().to_string();
    Ok(s)
}

/// Mean of the depth-conditioned arc-cosine Gram.
pub fn relu_score(g: &GramMatrix) -> Result<MetricScore> {
    let mut s = mean_score(g)?;
    s.metric = Metric::Relu.name().to_string();
    Ok(s)
}

pub fn vintk_gram(ntk: &GramMatrix, fourier: &GramMatrix) -> Result<GramMatrix> {
    ntk.hadamard(fourier)
}

/// Degree-1 arc-cosine kernel from squared norms and the inner product.
pub fn arc_cosine(nx2: f64, ny2: f64, xy: f64) -> f64 {
    let norms = (nx2 * ny2).sqrt();
    if norms == 0.0 {
        return 0.0;
    }
    let cos = (xy / norms).clamp(-1.0, 1.0);
    let theta = cos.acos();
    norms / PI * (theta.sin() + (PI - theta) * cos)
}

/// `depth`-fold composition of the degree-1 arc-cosine kernel on the flattened probes.
///
/// Each level feeds the previous level's kernel values back in as squared norms
/// (diagonal) and inner products (off-diagonal).
pub fn relu_ntk_gram(batch: &ProbeBatch, depth: usize) -> Result<GramMatrix> {
    if depth == 0 {
        return Err(Error::InvalidArgument("relu kernel depth must be at least 1".into()));
    }
    let feats: Vec<Vec<f64>> = batch.inputs.iter().map(|t| t.data().to_vec()).collect();
    let mut k = gram_from_features(&feats, GramKind::Custom)?.data;
    let n = batch.len();
    for _ in 0..depth {
        let prev = k.clone();
        for i in 0..n {
            for j in 0..n {
                k[i * n + j] = arc_cosine(prev[i * n + i], prev[j * n + j], prev[i * n + j]);
            }
        }
    }
    GramMatrix::new(n, k, GramKind::ReluNtk { depth })
}

/// Sinusoid amplitudes `α_j = j^{-p}` at integer frequencies `j = 1..=n_freq`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FourierConfig {
    pub n_freq: usize,
    pub p: f64,
}

impl Default for FourierConfig {
    fn default() -> Self {
        FourierConfig { n_freq: 8, p: 2.0 }
    }
}

impl FourierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_freq == 0 || !(self.p > 0.0) || !self.p.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "Fourier config needs n_freq >= 1 and p > 0, got n_freq = {}, p = {}",
                self.n_freq, self.p
            )));
        }
        Ok(())
    }

    pub fn amplitude(&self, j: usize) -> f64 {
        (j as f64).powf(-self.p)
    }

    /// Kernel value at zero lag, `Σ_j α_j²`.
    pub fn lag_zero(&self) -> f64 {
        (1..=self.n_freq).map(|j| self.amplitude(j).powi(2)).sum()
    }
}

/// Feature map `γ(x)`: for every coordinate and frequency, `α_j cos(2πj x_d)` and `α_j sin(2πj x_d)`,
/// scaled by `1/sqrt(dims)` so that `γ(x)·γ(x')` averages the per-coordinate kernel.
pub fn fourier_features(x: &[f64], cfg: &FourierConfig) -> Vec<f64> {
    let scale = 1.0 / (x.len() as f64).sqrt();
    let mut out = Vec::with_capacity(2 * cfg.n_freq * x.len());
    for &v in x {
        for j in 1..=cfg.n_freq {
            let a = scale * cfg.amplitude(j);
            let phase = 2.0 * PI * j as f64 * v;
            out.push(a * phase.cos());
            out.push(a * phase.sin());
        }
    }
    out
}

/// `(1/dims) Σ_d Σ_j α_j² cos(2πj (x_d - x'_d))` over a batch already normalized to `[0, 1]`.
pub fn fourier_gram(batch: &ProbeBatch, cfg: &FourierConfig) -> Result<GramMatrix> {
    cfg.validate()?;
    for (i, t) in batch.inputs.iter().enumerate() {
        if let Some(&v) = t.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::OutOfUnitRange { index: i, value: v });
        }
    }
    let feats: Vec<Vec<f64>> = batch
        .inputs
        .par_iter()
        .map(|t| fourier_features(t.data(), cfg))
        .collect();
    let mut g = gram_from_features(&feats, GramKind::Fourier)?;
    g.kind = GramKind::Fourier;
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, InputSig, Layer, NetworkSpec, Parameterization};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gram(n: usize, v: &[f64]) -> GramMatrix {
        GramMatrix::new(n, v.to_vec(), GramKind::Custom).unwrap()
    }

    fn probes(vs: &[&[f64]]) -> ProbeBatch {
        ProbeBatch::new(vs.iter().map(|v| Tensor::vector(v.to_vec())).collect(), None).unwrap()
    }

    fn linear_net(d: usize) -> CompiledNetwork {
        CompiledNetwork::compile(&NetworkSpec {
            input: InputSig::flat(d),
            classes: 1,
            layers: vec![Layer::Linear { out: 1, bias: false }],
            parameterization: Parameterization::Standard,
        })
        .unwrap()
    }

    #[test]
    fn gram_validation() {
        assert!(GramMatrix::new(2, vec![1.0, 2.0, 2.1, 1.0], GramKind::Custom).is_err());
        assert!(GramMatrix::new(2, vec![1.0; 3], GramKind::Custom).is_err());
        assert!(GramMatrix::new(1, vec![f64::NAN], GramKind::Custom).is_err());
        let g = gram(2, &[1.0, 2.0, 2.0 + 1e-12, 1.0]);
        assert_eq!(g.get(0, 1), g.get(1, 0));
    }

    #[test]
    fn linear_ntk_on_basis_is_identity() {
        let net = linear_net(2);
        let p = net.init_params(0);
        let g = empirical_ntk_gram(
            &net,
            &p,
            &probes(&[&[1.0, 0.0], &[0.0, 1.0]]),
            OutputReduction::SumLogits,
        )
        .unwrap();
        assert_eq!(g.data(), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn linear_gram_mean_is_eight_ninths() {
        let net = linear_net(2);
        let p = net.init_params(3);
        let b = probes(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        let g = empirical_ntk_gram(&net, &p, &b, OutputReduction::SumLogits).unwrap();
        assert_eq!(g.data(), &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 2.0]);
        assert!((mean_score(&g).unwrap().value - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn duplicated_probe_gives_equal_rows() {
        let spec = NetworkSpec {
            input: InputSig::flat(3),
            classes: 2,
            layers: vec![
                Layer::Linear { out: 5, bias: true },
                Layer::Activation(Activation::Tanh),
                Layer::Linear { out: 2, bias: true },
            ],
            parameterization: Parameterization::Standard,
        };
        let net = CompiledNetwork::compile(&spec).unwrap();
        let p = net.init_params(1);
        let x = [0.3, -0.2, 0.9];
        let grads: Vec<Vec<f64>> = [x.to_vec(), vec![1.0, 0.5, -1.0], x.to_vec()]
            .iter()
            .map(|v| {
                net.param_gradient(&p, &Tensor::vector(v.clone()), OutputReduction::SumLogits)
                    .unwrap()
                    .into_data()
            })
            .collect();
        let g = gram_from_features(&grads, GramKind::EmpiricalNtk).unwrap();
        for j in 0..3 {
            assert_eq!(g.get(0, j), g.get(2, j));
        }
    }

    #[test]
    fn probe_batch_rules() {
        assert!(ProbeBatch::new(vec![Tensor::vector(vec![1.0])], None).is_err());
        assert!(ProbeBatch::new(vec![Tensor::vector(vec![1.0]), Tensor::vector(vec![1.0])], None).is_err());
        assert!(ProbeBatch::new(vec![Tensor::vector(vec![1.0]), Tensor::vector(vec![1.0, 2.0])], None).is_err());
    }

    #[test]
    fn fnorm_examples() {
        let i4 = GramMatrix::identity(4);
        assert_eq!(fnorm_score(&i4).unwrap().value, 2.0);
        assert_eq!(fnorm_score(&gram(2, &[0.0; 4])).unwrap().value, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let feats: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let g = gram_from_features(&feats, GramKind::Custom).unwrap();
        let mut direct = 0.0;
        for i in 0..8 {
            for j in 0..8 {
                direct += g.get(i, j) * g.get(i, j);
            }
        }
        assert!((fnorm_score(&g).unwrap().value - direct.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn mean_examples() {
        assert_eq!(mean_score(&GramMatrix::identity(2)).unwrap().value, 0.5);
        assert_eq!(mean_score(&gram(3, &[2.5; 9])).unwrap().value, 2.5);
    }

    #[test]
    fn ncn_examples() {
        assert_eq!(ncn_score(&GramMatrix::identity(3)).unwrap().value, -1.0);
        let s = ncn_score(&gram(2, &[4.0, 0.0, 0.0, 1.0])).unwrap();
        assert_eq!(s.value, -4.0);
        assert!(!s.diagnostics.degenerate);
        let ones = ncn_score(&gram(3, &[1.0; 9])).unwrap();
        assert!(ones.value.is_finite());
        assert!(ones.diagnostics.degenerate);
        assert!((ones.diagnostics.lambda_max - 3.0).abs() < 1e-12);
        // λ_min floored at 1e-12 · trace = 3e-12
        assert!((ones.value + 3.0 / 3e-12).abs() / (3.0 / 3e-12) < 1e-3);
    }

    #[test]
    fn arc_cosine_examples() {
        let b = probes(&[&[3.0, 4.0], &[-4.0, 3.0]]);
        let g = relu_ntk_gram(&b, 1).unwrap();
        assert!((g.get(0, 0) - 25.0).abs() < 1e-12);
        // orthogonal: (1/π)·‖x‖‖x'‖·sin(π/2)
        assert!((g.get(0, 1) - 25.0 / PI).abs() < 1e-12);
        let unit = relu_ntk_gram(&probes(&[&[1.0, 0.0], &[0.0, 1.0]]), 1).unwrap();
        assert!((unit.get(0, 1) - 1.0 / PI).abs() < 1e-15);
        assert!(relu_ntk_gram(&b, 0).is_err());
    }

    #[test]
    fn fourier_examples() {
        let cfg = FourierConfig { n_freq: 2, p: 2.0 };
        let g = fourier_gram(&probes(&[&[0.25], &[0.75]]), &cfg).unwrap();
        assert!((g.get(0, 0) - 1.0625).abs() < 1e-15);
        assert!((g.get(0, 1) + 0.9375).abs() < 1e-15);
        let err = fourier_gram(&probes(&[&[0.25], &[1.5]]), &cfg).unwrap_err();
        assert!(matches!(err, Error::OutOfUnitRange { index: 1, .. }));
        assert!(FourierConfig { n_freq: 0, p: 2.0 }.validate().is_err());
        assert!(FourierConfig { n_freq: 3, p: 0.0 }.validate().is_err());
    }

    #[test]
    fn fourier_is_stationary() {
        let cfg = FourierConfig::default();
        let a = fourier_gram(&probes(&[&[0.1, 0.2], &[0.4, 0.3], &[0.0, 0.5]]), &cfg).unwrap();
        let b = fourier_gram(&probes(&[&[0.3, 0.4], &[0.6, 0.5], &[0.2, 0.7]]), &cfg).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn hadamard_examples() {
        let a = GramMatrix::new(2, vec![1.0, 2.0, 2.0, 4.0], GramKind::Custom).unwrap();
        let ones = gram(2, &[1.0; 4]);
        assert_eq!(vintk_gram(&a, &ones).unwrap().data(), a.data());
        let f = gram(2, &[2.0, 0.5, 0.5, 3.0]);
        let v = vintk_gram(&GramMatrix::identity(2), &f).unwrap();
        assert_eq!(v.data(), &[2.0, 0.0, 0.0, 3.0]);
        assert!(vintk_gram(&a, &GramMatrix::identity(3)).is_err());
    }

    #[test]
    fn asymmetric_hand_matrices_multiply_entrywise() {
        // the product itself is not symmetric, so check the raw entrywise rule
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [2.0, 0.0, 1.0, 3.0];
        let p: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        assert_eq!(p, vec![2.0, 0.0, 3.0, 12.0]);
        assert_eq!(p.iter().sum::<f64>() / 4.0, 4.25);
    }

    #[test]
    fn metric_names_round_trip() {
        for m in Metric::ALL {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
        }
        assert!(matches!("bogus".parse::<Metric>(), Err(Error::UnknownMetric(_))));
    }

    #[test]
    fn min_max_normalization() {
        let b = probes(&[&[-1.0, 3.0], &[1.0, 0.0]]);
        let (n, mm) = b.min_max_normalized();
        assert_eq!(
            mm,
            MinMax {
                min: vec![-1.0, 0.0],
                max: vec![1.0, 3.0]
            }
        );
        assert_eq!(n.inputs()[0].data(), &[0.0, 1.0]);
        assert_eq!(n.inputs()[1].data(), &[1.0, 0.0]);
        let flat = probes(&[&[2.0, 5.0], &[2.0, 1.0]]).min_max_normalized().0;
        assert_eq!(flat.inputs()[0].data(), &[0.0, 1.0]);
    }
}
