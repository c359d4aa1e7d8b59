//! Discrete search spaces, genotypes, and the genotype → network builder.
//!
//! Two families are shipped, each with an MSA-only restriction:
//!
//! * `pure-vit`: four-stage transformer. A patch embedding opens stage 1 and a
//!   strided downsample opens every later stage; each stage holds one
//!   attention + feed-forward block.
//! * `hybrid`: two convolutional stages (depthwise conv, optional
//!   squeeze-excitation) followed by two transformer stages of two blocks each,
//!   with a downsample in front of every stage.
//!
//! Downsampling halves the token grid until it reaches 2x2 and then degrades
//! to a 1x1 channel projection, so attention always sees at least four tokens.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, CompiledNetwork, InputSig, Layer, NetworkSpec, Parameterization};

/// Default input: 16x16 RGB.
pub const DEFAULT_INPUT: InputSig = InputSig {
    channels: 3,
    height: 16,
    width: 16,
};
pub const DEFAULT_CLASSES: usize = 4;
pub const DEFAULT_ENUMERATION_CAP: u128 = 100_000;

const PURE_VIT_WIDTHS: [usize; 4] = [8, 16, 16, 24];
const HYBRID_WIDTHS: [usize; 4] = [8, 12, 12, 12];
const HYBRID_TRANSFORMER_DEPTH: usize = 2;
const SE_REDUCTION: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpaceFamily {
    PureVit,
    Hybrid,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dimension {
    pub name: String,
    pub choices: Vec<usize>,
    /// Index used when the dimension is pinned.
    pub default: usize,
    pub searchable: bool,
}

impl Dimension {
    fn new(name: &str, choices: &[usize], default: usize) -> Self {
        Dimension {
            name: name.to_string(),
            choices: choices.to_vec(),
            default,
            searchable: true,
        }
    }

    /// Number of values this dimension can take inside its space.
    pub fn effective_cardinality(&self) -> usize {
        if self.searchable {
            self.choices.len()
        } else {
            1
        }
    }

    pub fn is_msa_heads(&self) -> bool {
        self.name.starts_with("msa_heads")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchSpaceDef {
    pub id: String,
    pub family: SpaceFamily,
    pub dimensions: Vec<Dimension>,
}

/// Names accepted by [`builtin_space`].
pub const BUILTIN_SPACES: [&str; 4] = ["pure-vit", "hybrid", "pure-vit-msa-only", "hybrid-msa-only"];

fn middle(n: usize) -> usize {
    (n - 1) / 2
}

fn pure_vit_dims() -> Vec<Dimension> {
    vec![
        Dimension::new("patch_kernel", &[4, 8], middle(2)),
        Dimension::new("ffn_expansion", &[1, 2, 4], 2),
        Dimension::new("msa_heads_s12", &[1, 2, 4, 8], 0),
        Dimension::new("msa_heads_s34", &[1, 2, 4, 8], 0),
    ]
}

fn hybrid_dims() -> Vec<Dimension> {
    let mut dims = vec![
        Dimension::new("cnn_kernel", &[3, 5], middle(2)),
        Dimension::new("se_enabled", &[0, 1], 0),
        Dimension::new("ffn_expansion", &[1, 2, 4], 2),
    ];
    for stage in 3..=4 {
        for block in 0..HYBRID_TRANSFORMER_DEPTH {
            dims.push(Dimension::new(&format!("msa_heads_s{stage}b{block}"), &[1, 2, 4], 0));
        }
    }
    dims
}

fn msa_only(mut dims: Vec<Dimension>) -> Vec<Dimension> {
    for d in &mut dims {
        d.searchable = d.is_msa_heads();
    }
    dims
}

/// Looks up one of the shipped search spaces.
pub fn builtin_space(name: &str) -> Result<SearchSpaceDef> {
    let (family, dims) = match name {
        "pure-vit" => (SpaceFamily::PureVit, pure_vit_dims()),
        "pure-vit-msa-only" => (SpaceFamily::PureVit, msa_only(pure_vit_dims())),
        "hybrid" => (SpaceFamily::Hybrid, hybrid_dims()),
        "hybrid-msa-only" => (SpaceFamily::Hybrid, msa_only(hybrid_dims())),
        _ => return Err(Error::UnknownSpace(name.to_string())),
    };
    Ok(SearchSpaceDef {
        id: name.to_string(),
        family,
        dimensions: dims,
    })
}

impl SearchSpaceDef {
    pub fn cardinality(&self) -> u128 {
        self.dimensions
            .iter()
            .map(|d| d.effective_cardinality() as u128)
            .product()
    }

    pub fn searchable_dimensions(&self) -> impl Iterator<Item = &Dimension> {
        self.dimensions.iter().filter(|d| d.searchable)
    }

    /// The MSA-only restriction of this space, if it has one.
    pub fn msa_only_variant(&self) -> Option<SearchSpaceDef> {
        let base = self.id.trim_end_matches("-msa-only");
        builtin_space(&format!("{base}-msa-only")).ok()
    }

    pub fn default_genotype(&self) -> Genotype {
        Genotype {
            space_id: self.id.clone(),
            choices: self.dimensions.iter().map(|d| d.default).collect(),
        }
    }

    /// Checks membership: right space, right arity, indices in range, pins respected.
    pub fn validate(&self, g: &Genotype) -> Result<()> {
        if g.space_id != self.id {
            return Err(Error::Genotype(format!(
                "genotype belongs to space '{}', not '{}'",
                g.space_id, self.id
            )));
        }
        for (dim, &idx) in self.dimensions.iter().zip(&g.choices) {
            if idx >= dim.choices.len() {
                return Err(Error::Genotype(format!(
                    "dimension '{}' index {idx} out of range ({} choices)",
                    dim.name,
                    dim.choices.len()
                )));
            }
            if !dim.searchable && idx != dim.default {
                return Err(Error::Genotype(format!(
                    "dimension '{}' is pinned to index {} in space '{}', got {idx}",
                    dim.name, dim.default, self.id
                )));
            }
        }
        if g.choices.len() != self.dimensions.len() {
            let missing = self
                .dimensions
                .get(g.choices.len())
                .map_or("<extra>", |d| d.name.as_str());
            return Err(Error::Genotype(format!(
                "space '{}' has {} dimensions, got {} (first offending dimension '{missing}')",
                self.id,
                self.dimensions.len(),
                g.choices.len()
            )));
        }
        Ok(())
    }

    pub fn parse_genotype(&self, text: &str) -> Result<Genotype> {
        let g: Genotype = text.parse()?;
        self.validate(&g)?;
        Ok(g)
    }

    pub fn sample_with(&self, rng: &mut impl Rng) -> Genotype {
        let choices = self
            .dimensions
            .iter()
            .map(|d| {
                if d.searchable {
                    rng.random_range(0..d.choices.len())
                } else {
                    d.default
                }
            })
            .collect();
        Genotype {
            space_id: self.id.clone(),
            choices,
        }
    }

    /// Every genotype, lexicographic with the first dimension most significant.
    pub fn enumerate(&self, cap: u128) -> Result<Vec<Genotype>> {
        let cardinality = self.cardinality();
        if cardinality > cap {
            return Err(Error::EnumerationCap { cardinality, cap });
        }
        let mut out = Vec::with_capacity(cardinality as usize);
        let mut current = self.default_genotype().choices;
        for (i, d) in self.dimensions.iter().enumerate() {
            if d.searchable {
                current[i] = 0;
            }
        }
        loop {
            out.push(Genotype {
                space_id: self.id.clone(),
                choices: current.clone(),
            });
            // odometer increment from the least significant searchable dimension
            let mut pos = self.dimensions.len();
            loop {
                if pos == 0 {
                    return Ok(out);
                }
                pos -= 1;
                let d = &self.dimensions[pos];
                if !d.searchable {
                    continue;
                }
                current[pos] += 1;
                if current[pos] < d.choices.len() {
                    break;
                }
                current[pos] = 0;
            }
        }
    }
}

/// A point of a search space: one choice index per dimension.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Genotype {
    pub space_id: String,
    pub choices: Vec<usize>,
}

impl fmt::Display for Genotype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.space_id)?;
        for (i, c) in self.choices.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl FromStr for Genotype {
    type Err = Error;

    /// Syntactic parse of `space_id:v0.v1...`; membership is checked by [`SearchSpaceDef::validate`].
    fn from_str(s: &str) -> Result<Self> {
        let (space, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::Genotype(format!("'{s}' lacks the 'space_id:' prefix")))?;
        if space.is_empty() || rest.is_empty() {
            return Err(Error::Genotype(format!("'{s}' has an empty space id or choice list")));
        }
        let choices = rest
            .split('.')
            .enumerate()
            .map(|(i, v)| {
                // reject signs and whitespace that usize::from_str would otherwise accept or choke on
                if v.is_empty() || !v.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(Error::Genotype(format!(
                        "choice {i} ('{v}') is not a non-negative integer"
                    )));
                }
                v.parse::<usize>()
                    .map_err(|_| Error::Genotype(format!("choice {i} ('{v}') is too large")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Genotype {
            space_id: space.to_string(),
            choices,
        })
    }
}

impl Serialize for Genotype {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Genotype {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Resolves `space_id:...` against the builtin spaces.
pub fn resolve_genotype(text: &str) -> Result<(SearchSpaceDef, Genotype)> {
    let g: Genotype = text.parse()?;
    let space = builtin_space(&g.space_id)?;
    space.validate(&g)?;
    Ok((space, g))
}

pub fn sample_genotype(space: &SearchSpaceDef, seed: u64) -> Genotype {
    space.sample_with(&mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn enumerate_space(space: &SearchSpaceDef) -> Result<Vec<Genotype>> {
    space.enumerate(DEFAULT_ENUMERATION_CAP)
}

/// Changes exactly one searchable dimension (with at least two choices) to a different value.
pub fn mutate_with(space: &SearchSpaceDef, g: &Genotype, rng: &mut impl Rng) -> Genotype {
    let movable: Vec<usize> = space
        .dimensions
        .iter()
        .enumerate()
        .filter(|(_, d)| d.searchable && d.choices.len() > 1)
        .map(|(i, _)| i)
        .collect();
    let mut out = g.clone();
    if movable.is_empty() {
        return out;
    }
    let dim = movable[rng.random_range(0..movable.len())];
    let n = space.dimensions[dim].choices.len();
    let shift = rng.random_range(1..n);
    out.choices[dim] = (g.choices[dim] + shift) % n;
    out
}

pub fn mutate(space: &SearchSpaceDef, g: &Genotype, seed: u64) -> Genotype {
    mutate_with(space, g, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Uniform crossover: every dimension is copied from `a` or `b`.
pub fn crossover_with(a: &Genotype, b: &Genotype, rng: &mut impl Rng) -> Genotype {
    let choices = a
        .choices
        .iter()
        .zip(&b.choices)
        .map(|(&x, &y)| if rng.random_bool(0.5) { x } else { y })
        .collect();
    Genotype {
        space_id: a.space_id.clone(),
        choices,
    }
}

pub fn crossover(a: &Genotype, b: &Genotype, seed: u64) -> Genotype {
    crossover_with(a, b, &mut ChaCha8Rng::seed_from_u64(seed))
}

struct Choices<'a> {
    space: &'a SearchSpaceDef,
    g: &'a Genotype,
}

impl Choices<'_> {
    fn value(&self, name: &str) -> usize {
        let i = self
            .space
            .dimensions
            .iter()
            .position(|d| d.name == name)
            .unwrap_or_else(|| panic!("space '{}' lacks dimension '{name}'", self.space.id));
        self.space.dimensions[i].choices[self.g.choices[i]]
    }
}

fn downsample(out: usize, spatial: usize) -> (Layer, usize) {
    if spatial >= 4 {
        (
            Layer::Conv {
                out,
                kernel: 2,
                stride: 2,
                padding: 0,
            },
            spatial / 2,
        )
    } else {
        (
            Layer::Conv {
                out,
                kernel: 1,
                stride: 1,
                padding: 0,
            },
            spatial,
        )
    }
}

fn attention_block(name: String, heads: usize) -> Layer {
    Layer::Block {
        name,
        layers: vec![Layer::LayerNorm, Layer::Attention { heads }],
        residual: true,
    }
}

fn ffn_block(name: String, width: usize, expansion: usize) -> Layer {
    Layer::Block {
        name,
        layers: vec![
            Layer::LayerNorm,
            Layer::Linear {
                out: width * expansion,
                bias: true,
            },
            Layer::Activation(Activation::Gelu),
            Layer::Linear { out: width, bias: true },
        ],
        residual: true,
    }
}

fn conv_block(name: String, width: usize, kernel: usize, se: bool) -> Layer {
    let mut layers = vec![
        Layer::LayerNorm,
        Layer::DepthwiseConv { kernel },
        Layer::Activation(Activation::Gelu),
    ];
    if se {
        layers.push(Layer::SqueezeExcite {
            reduction: SE_REDUCTION,
        });
    }
    layers.push(Layer::Linear { out: width, bias: true });
    Layer::Block {
        name,
        layers,
        residual: true,
    }
}

fn head(classes: usize) -> Vec<Layer> {
    vec![
        Layer::LayerNorm,
        Layer::GlobalAvgPool,
        Layer::Linear {
            out: classes,
            bias: true,
        },
    ]
}

/// Builds the network for `g` under the standard parameterization.
pub fn build_network(g: &Genotype, classes: usize, input: InputSig) -> Result<NetworkSpec> {
    build_network_with(g, classes, input, Parameterization::Standard)
}

pub fn build_network_with(
    g: &Genotype,
    classes: usize,
    input: InputSig,
    parameterization: Parameterization,
) -> Result<NetworkSpec> {
    let space = builtin_space(&g.space_id)?;
    space.validate(g)?;
    if input.height != input.width {
        return Err(Error::Shape(format!(
            "square inputs required, got {}x{}",
            input.height, input.width
        )));
    }
    let ch = Choices { space: &space, g };
    let mut layers = Vec::new();
    let mut spatial = input.height;
    match space.family {
        SpaceFamily::PureVit => {
            let patch = ch.value("patch_kernel");
            let expansion = ch.value("ffn_expansion");
            if spatial % patch != 0 || spatial / patch < 2 {
                return Err(Error::Shape(format!(
                    "patch kernel {patch} does not tile a {spatial}x{spatial} input into at least 2x2 tokens"
                )));
            }
            for (s, &width) in PURE_VIT_WIDTHS.iter().enumerate() {
                let stage = s + 1;
                if stage == 1 {
                    layers.push(Layer::Conv {
                        out: width,
                        kernel: patch,
                        stride: patch,
                        padding: 0,
                    });
                    spatial /= patch;
                    layers.push(Layer::PositionEmbedding);
                } else {
                    let (ds, next) = downsample(width, spatial);
                    layers.push(ds);
                    spatial = next;
                }
                let heads = ch.value(if stage <= 2 { "msa_heads_s12" } else { "msa_heads_s34" });
                layers.push(attention_block(format!("s{stage}.attn"), heads));
                layers.push(ffn_block(format!("s{stage}.ffn"), width, expansion));
            }
        }
        SpaceFamily::Hybrid => {
            let kernel = ch.value("cnn_kernel");
            let se = ch.value("se_enabled") == 1;
            let expansion = ch.value("ffn_expansion");
            for (s, &width) in HYBRID_WIDTHS.iter().enumerate() {
                let stage = s + 1;
                let (ds, next) = downsample(width, spatial);
                layers.push(ds);
                spatial = next;
                if stage <= 2 {
                    layers.push(conv_block(format!("s{stage}.conv"), width, kernel, se));
                } else {
                    if stage == 3 {
                        layers.push(Layer::PositionEmbedding);
                    }
                    for b in 0..HYBRID_TRANSFORMER_DEPTH {
                        let heads = ch.value(&format!("msa_heads_s{stage}b{b}"));
                        layers.push(attention_block(format!("s{stage}b{b}.attn"), heads));
                        layers.push(ffn_block(format!("s{stage}b{b}.ffn"), width, expansion));
                    }
                }
            }
        }
    }
    layers.extend(head(classes));
    let spec = NetworkSpec {
        input,
        classes,
        layers,
        parameterization,
    };
    // shape composition is part of the contract
    CompiledNetwork::compile(&spec)?;
    Ok(spec)
}

/// Parameter and multiply-accumulate counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    pub param_count: u64,
    pub mac_count: u64,
}

/// Closed-form cost of a network, walking its layers with shape inference.
///
/// MAC convention: linear maps, convolutions, the two attention products and the
/// squeeze-excitation channel rescale count; norms, activations and pooling are free.
pub fn network_cost(spec: &NetworkSpec) -> Result<CostReport> {
    fn walk(layers: &[Layer], shape: &mut [usize; 3], cost: &mut CostReport) -> Result<()> {
        for layer in layers {
            let [h, w, c] = *shape;
            let t = (h * w) as u64;
            let cu = c as u64;
            match *layer {
                Layer::Linear { out, bias } => {
                    let o = out as u64;
                    cost.param_count += cu * o + if bias { o } else { 0 };
                    cost.mac_count += t * cu * o;
                    shape[2] = out;
                }
                Layer::Conv {
                    out,
                    kernel,
                    stride,
                    padding,
                } => {
                    let ho = (h + 2 * padding - kernel) / stride + 1;
                    let wo = (w + 2 * padding - kernel) / stride + 1;
                    let k2 = (kernel * kernel) as u64;
                    cost.param_count += out as u64 * k2 * cu + out as u64;
                    cost.mac_count += (ho * wo) as u64 * out as u64 * k2 * cu;
                    *shape = [ho, wo, out];
                }
                Layer::DepthwiseConv { kernel } => {
                    let k2 = (kernel * kernel) as u64;
                    cost.param_count += k2 * cu + cu;
                    cost.mac_count += t * cu * k2;
                }
                Layer::Activation(_) | Layer::GlobalAvgPool => {
                    if let Layer::GlobalAvgPool = layer {
                        *shape = [1, 1, c];
                    }
                }
                Layer::LayerNorm => cost.param_count += 2 * cu,
                Layer::PositionEmbedding => cost.param_count += t * cu,
                Layer::Attention { .. } => {
                    cost.param_count += 3 * cu * cu + 3 * cu + cu * cu + cu;
                    cost.mac_count += t * cu * 3 * cu + 2 * t * t * cu + t * cu * cu;
                }
                Layer::SqueezeExcite { reduction } => {
                    let r = (c / reduction).max(1) as u64;
                    cost.param_count += r * cu + r + cu * r + cu;
                    cost.mac_count += cu * r + r * cu + t * cu;
                }
                Layer::Block { ref layers, .. } => walk(layers, shape, cost)?,
            }
        }
        Ok(())
    }
    let mut shape = [spec.input.height, spec.input.width, spec.input.channels];
    let mut cost = CostReport {
        param_count: 0,
        mac_count: 0,
    };
    walk(&spec.layers, &mut shape, &mut cost)?;
    Ok(cost)
}

/// Cost of `g` at the default input and class count.
pub fn count_cost(g: &Genotype) -> Result<CostReport> {
    network_cost(&build_network(g, DEFAULT_CLASSES, DEFAULT_INPUT)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cardinalities() {
        let pv = builtin_space("pure-vit").unwrap();
        let expected: u128 = pv.dimensions.iter().map(|d| d.choices.len() as u128).product();
        assert_eq!(pv.cardinality(), expected);
        assert!(pv.cardinality() >= 60);
        assert_eq!(builtin_space("hybrid-msa-only").unwrap().cardinality(), 81);
        assert!(matches!(builtin_space("nope"), Err(Error::UnknownSpace(_))));
    }

    #[test]
    fn msa_only_searches_heads_only() {
        for name in ["pure-vit-msa-only", "hybrid-msa-only"] {
            let s = builtin_space(name).unwrap();
            for d in &s.dimensions {
                assert_eq!(d.searchable, d.is_msa_heads(), "{name}/{}", d.name);
            }
        }
    }

    #[test]
    fn hybrid_has_cnn_dimensions() {
        let s = builtin_space("hybrid").unwrap();
        let names: Vec<_> = s.dimensions.iter().map(|d| d.name.as_str()).collect();
        assert!(names.contains(&"se_enabled"));
        assert!(names.contains(&"cnn_kernel"));
        assert!(names.contains(&"ffn_expansion"));
    }

    #[test]
    fn msa_only_pins_documented_defaults() {
        let s = builtin_space("hybrid-msa-only").unwrap();
        let g = s.default_genotype();
        let ch = Choices { space: &s, g: &g };
        assert_eq!(ch.value("cnn_kernel"), 3);
        assert_eq!(ch.value("se_enabled"), 0);
        assert_eq!(ch.value("ffn_expansion"), 4);
        let p = builtin_space("pure-vit-msa-only").unwrap();
        let g = p.default_genotype();
        let ch = Choices { space: &p, g: &g };
        assert_eq!(ch.value("patch_kernel"), 4);
        assert_eq!(ch.value("ffn_expansion"), 4);
    }

    #[test]
    fn sampling_is_deterministic_and_respects_pins() {
        let s = builtin_space("hybrid-msa-only").unwrap();
        assert_eq!(sample_genotype(&s, 5), sample_genotype(&s, 5));
        let defaults = s.default_genotype();
        for seed in 0..200 {
            let g = sample_genotype(&s, seed);
            for (i, d) in s.dimensions.iter().enumerate() {
                if !d.searchable {
                    assert_eq!(g.choices[i], defaults.choices[i]);
                }
            }
        }
    }

    #[test]
    fn binary_dimension_is_uniform() {
        let s = builtin_space("hybrid").unwrap();
        let idx = s.dimensions.iter().position(|d| d.name == "se_enabled").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let ones = (0..10_000)
            .filter(|_| s.sample_with(&mut rng).choices[idx] == 1)
            .count();
        let freq = ones as f64 / 10_000.0;
        // 4 standard deviations of a fair binomial is 0.02
        assert!((freq - 0.5).abs() < 0.02, "frequency {freq}");
    }

    #[test]
    fn enumeration_is_lexicographic_and_complete() {
        let s = builtin_space("pure-vit").unwrap();
        let all = enumerate_space(&s).unwrap();
        assert_eq!(all.len() as u128, s.cardinality());
        assert!(all[0].choices.iter().all(|&c| c == 0));
        assert!(all.windows(2).all(|w| w[0].choices < w[1].choices));
        for seed in 0..50 {
            assert!(all.contains(&sample_genotype(&s, seed)));
        }
        assert!(matches!(s.enumerate(10), Err(Error::EnumerationCap { .. })));
    }

    #[test]
    fn small_enumeration() {
        let s = SearchSpaceDef {
            id: "toy".into(),
            family: SpaceFamily::PureVit,
            dimensions: vec![Dimension::new("a", &[1, 2], 0), Dimension::new("b", &[1, 2, 3], 0)],
        };
        let all = s.enumerate(100).unwrap();
        assert_eq!(all.len(), 6);
        assert_eq!(all[1].choices, vec![0, 1]);
        assert_eq!(all[3].choices, vec![1, 0]);
    }

    #[test]
    fn encoding_round_trip_and_errors() {
        for name in BUILTIN_SPACES {
            let s = builtin_space(name).unwrap();
            for g in s.enumerate(DEFAULT_ENUMERATION_CAP).unwrap() {
                assert_eq!(s.parse_genotype(&g.to_string()).unwrap(), g);
            }
        }
        let err = resolve_genotype("pure-vit:9.9").unwrap_err().to_string();
        assert!(err.contains("patch_kernel"), "{err}");
        let err = resolve_genotype("pure-vit:0.0").unwrap_err().to_string();
        assert!(err.contains("msa_heads_s12"), "{err}");
        assert!(resolve_genotype("pure-vit:0.-1.0.0").is_err());
        assert!(resolve_genotype("pure-vit").is_err());
        let err = resolve_genotype("hybrid-msa-only:1.0.2.0.0.0.0")
            .unwrap_err()
            .to_string();
        assert!(err.contains("pinned"), "{err}");
    }

    #[test]
    fn every_builtin_genotype_composes() {
        for name in BUILTIN_SPACES {
            let s = builtin_space(name).unwrap();
            for g in s.enumerate(DEFAULT_ENUMERATION_CAP).unwrap() {
                let spec = build_network(&g, DEFAULT_CLASSES, DEFAULT_INPUT).unwrap();
                let compiled = CompiledNetwork::compile(&spec).unwrap();
                let cost = network_cost(&spec).unwrap();
                assert_eq!(cost.param_count, compiled.param_count() as u64, "{g}");
                assert!(cost.mac_count > 0);
            }
        }
    }

    #[test]
    fn expansion_sets_ffn_width() {
        let s = builtin_space("pure-vit").unwrap();
        let g = s.parse_genotype("pure-vit:0.2.0.0").unwrap();
        let spec = build_network(&g, 4, DEFAULT_INPUT).unwrap();
        let ffn = spec
            .layers
            .iter()
            .find_map(|l| match l {
                Layer::Block { name, layers, .. } if name == "s1.ffn" => Some(layers.clone()),
                _ => None,
            })
            .unwrap();
        assert_eq!(
            ffn[1],
            Layer::Linear {
                out: 4 * PURE_VIT_WIDTHS[0],
                bias: true
            }
        );
    }

    #[test]
    fn se_flag_adds_squeeze_excitation() {
        fn has_se(layers: &[Layer]) -> bool {
            layers.iter().any(|l| match l {
                Layer::SqueezeExcite { .. } => true,
                Layer::Block { layers, .. } => has_se(layers),
                _ => false,
            })
        }
        let on = resolve_genotype("hybrid:0.1.0.0.0.0.0").unwrap().1;
        let off = resolve_genotype("hybrid:0.0.0.0.0.0.0").unwrap().1;
        assert!(has_se(&build_network(&on, 4, DEFAULT_INPUT).unwrap().layers));
        assert!(!has_se(&build_network(&off, 4, DEFAULT_INPUT).unwrap().layers));
    }

    #[test]
    fn linear_cost_closed_form() {
        let spec = NetworkSpec {
            input: InputSig::flat(8),
            classes: 4,
            layers: vec![Layer::Linear { out: 4, bias: true }],
            parameterization: Parameterization::Standard,
        };
        assert_eq!(
            network_cost(&spec).unwrap(),
            CostReport {
                param_count: 36,
                mac_count: 32
            }
        );
    }

    #[test]
    fn cost_is_monotone_in_expansion() {
        for (small, large) in [
            ("pure-vit:0.0.1.2", "pure-vit:0.1.1.2"),
            ("pure-vit:1.1.0.0", "pure-vit:1.2.0.0"),
            ("hybrid:1.1.0.2.1.0.0", "hybrid:1.1.1.2.1.0.0"),
        ] {
            let a = count_cost(&resolve_genotype(small).unwrap().1).unwrap();
            let b = count_cost(&resolve_genotype(large).unwrap().1).unwrap();
            assert!(b.mac_count > a.mac_count && b.param_count > a.param_count);
        }
        // head count reshapes attention but not its cost
        let a = count_cost(&resolve_genotype("pure-vit:0.1.0.0").unwrap().1).unwrap();
        let b = count_cost(&resolve_genotype("pure-vit:0.1.3.2").unwrap().1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mutate_and_crossover() {
        let s = builtin_space("hybrid-msa-only").unwrap();
        let g = sample_genotype(&s, 3);
        for seed in 0..100 {
            let m = mutate(&s, &g, seed);
            let changed: Vec<usize> = (0..g.choices.len()).filter(|&i| m.choices[i] != g.choices[i]).collect();
            assert_eq!(changed.len(), 1);
            assert!(s.dimensions[changed[0]].searchable);
            s.validate(&m).unwrap();
        }
        assert_eq!(crossover(&g, &g, 9), g);
        let h = sample_genotype(&s, 4);
        let x = crossover(&g, &h, 1);
        for i in 0..g.choices.len() {
            assert!(x.choices[i] == g.choices[i] || x.choices[i] == h.choices[i]);
        }
        let one = SearchSpaceDef {
            id: "one".into(),
            family: SpaceFamily::PureVit,
            dimensions: vec![Dimension::new("a", &[1, 2], 0)],
        };
        let g0 = Genotype {
            space_id: "one".into(),
            choices: vec![0],
        };
        assert_eq!(mutate(&one, &g0, 77).choices, vec![1]);
    }
}
