//! Tiny network engine: a fixed layer vocabulary compiled once per [`NetworkSpec`]
//! into a static graph with a stable parameter layout, evaluated forward and
//! differentiated in reverse mode.

mod kernels;

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{GradVector, ParamLayout, ParamVector, Tensor};

pub use kernels::LAYER_NORM_EPS;

/// Initial scale of position embeddings, independent of the parameterization.
pub const POSITION_EMBEDDING_STD: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Relu,
    Gelu,
    Sigmoid,
    Tanh,
    Square,
    Identity,
}

impl Activation {
    pub fn apply(&self, v: f64) -> f64 {
        kernels::activate(*self, v)
    }
}

/// One entry of the layer vocabulary. Input widths are inferred when compiling.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    /// Per-token affine map over channels.
    Linear {
        out: usize,
        bias: bool,
    },
    /// Dense convolution; patch embedding and downsampling use `kernel == stride`.
    Conv {
        out: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    /// Per-channel convolution, stride 1, same padding (odd kernel).
    DepthwiseConv {
        kernel: usize,
    },
    Activation(Activation),
    LayerNorm,
    /// QKV projection, scaled dot-product softmax attention, output projection.
    Attention {
        heads: usize,
    },
    /// Channel gating: pool, bottleneck (channels / reduction), ReLU, expand, sigmoid.
    SqueezeExcite {
        reduction: usize,
    },
    /// Learned additive embedding, one vector per token position.
    PositionEmbedding,
    /// Mean over tokens, producing a single token.
    GlobalAvgPool,
    /// Named group of layers, optionally wrapped in an identity skip connection.
    Block {
        name: String,
        layers: Vec<Layer>,
        residual: bool,
    },
}

impl Layer {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Linear { .. } => "linear",
            Layer::Conv { .. } => "conv",
            Layer::DepthwiseConv { .. } => "depthwise-conv",
            Layer::Activation(_) => "activation",
            Layer::LayerNorm => "layer-norm",
            Layer::Attention { .. } => "attention",
            Layer::SqueezeExcite { .. } => "squeeze-excite",
            Layer::PositionEmbedding => "position-embedding",
            Layer::GlobalAvgPool => "global-avg-pool",
            Layer::Block { .. } => "block",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InputSig {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl InputSig {
    pub fn flat(n: usize) -> Self {
        InputSig {
            channels: n,
            height: 1,
            width: 1,
        }
    }

    pub fn numel(&self) -> usize {
        self.channels * self.height * self.width
    }
}

/// Weight scaling convention.
///
/// `Standard`: weights `N(0, 1/fan_in)`, unit forward multiplier.
/// `Ntk`: weights `N(0, 1)`, forward multiplier `1/sqrt(fan_in)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Parameterization {
    #[default]
    Standard,
    Ntk,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub input: InputSig,
    pub classes: usize,
    pub layers: Vec<Layer>,
    pub parameterization: Parameterization,
}

/// Scalar extracted from the network output before differentiation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputReduction {
    #[default]
    SumLogits,
    Logit(usize),
}

impl OutputReduction {
    fn seed(&self, classes: usize) -> Result<Vec<f64>> {
        match *self {
            OutputReduction::SumLogits => Ok(vec![1.0; classes]),
            OutputReduction::Logit(k) if k < classes => {
                let mut v = vec![0.0; classes];
                v[k] = 1.0;
                Ok(v)
            }
            OutputReduction::Logit(k) => Err(Error::InvalidArgument(format!(
                "logit {k} out of range for {classes} outputs"
            ))),
        }
    }

    pub fn apply(&self, output: &[f64]) -> f64 {
        match *self {
            OutputReduction::SumLogits => output.iter().sum(),
            OutputReduction::Logit(k) => output[k],
        }
    }
}

type Shape3 = [usize; 3];

#[derive(Debug, Clone, Copy)]
enum Init {
    Gaussian(f64),
    Constant(f64),
}

#[derive(Debug, Clone)]
enum Op {
    Linear {
        in_dim: usize,
        out_dim: usize,
        bias: bool,
        scale: f64,
    },
    Conv {
        geom: kernels::ConvGeom,
        scale: f64,
    },
    Depthwise {
        kernel: usize,
        scale: f64,
    },
    Act(Activation),
    LayerNorm,
    Attention {
        heads: usize,
        scale: f64,
    },
    SqueezeExcite {
        reduced: usize,
        scale_in: f64,
        scale_out: f64,
    },
    PosEmbed,
    Pool,
    Block {
        children: Vec<Node>,
        residual: bool,
    },
}

#[derive(Debug, Clone)]
struct Node {
    name: String,
    kind: &'static str,
    op: Op,
    in_shape: Shape3,
    out_shape: Shape3,
    offset: usize,
    len: usize,
}

enum Cache {
    Input(Vec<f64>),
    LayerNorm {
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Attention {
        x: Vec<f64>,
        qkv: Vec<f64>,
        probs: Vec<f64>,
        concat: Vec<f64>,
    },
    SqueezeExcite {
        x: Vec<f64>,
        mean: Vec<f64>,
        hidden_pre: Vec<f64>,
        hidden: Vec<f64>,
        gate: Vec<f64>,
    },
    None,
    Block(Vec<Cache>),
}

/// A [`NetworkSpec`] compiled into a static graph with a fixed parameter layout.
#[derive(Debug, Clone)]
pub struct CompiledNetwork {
    spec: NetworkSpec,
    nodes: Vec<Node>,
    layout: Arc<ParamLayout>,
    inits: Vec<Init>,
}

struct Builder {
    layout: ParamLayout,
    inits: Vec<Init>,
    param: Parameterization,
}

impl Builder {
    fn weight(&mut self, name: String, shape: Vec<usize>, fan_in: usize) -> f64 {
        let (std, scale) = match self.param {
            Parameterization::Standard => (1.0 / (fan_in as f64).sqrt(), 1.0),
            Parameterization::Ntk => (1.0, 1.0 / (fan_in as f64).sqrt()),
        };
        self.layout.push(name, shape);
        self.inits.push(Init::Gaussian(std));
        scale
    }

    fn constant(&mut self, name: String, shape: Vec<usize>, value: f64) {
        self.layout.push(name, shape);
        self.inits.push(Init::Constant(value));
    }

    fn compile_layers(&mut self, layers: &[Layer], prefix: &str, mut shape: Shape3) -> Result<Vec<Node>> {
        let mut nodes = Vec::with_capacity(layers.len());
        for (i, layer) in layers.iter().enumerate() {
            let name = match layer {
                Layer::Block { name, .. } if prefix.is_empty() => name.clone(),
                Layer::Block { name, .. } => format!("{prefix}.{name}"),
                _ if prefix.is_empty() => format!("{i}"),
                _ => format!("{prefix}.{i}"),
            };
            let node = self.compile_layer(layer, name, shape)?;
            shape = node.out_shape;
            nodes.push(node);
        }
        Ok(nodes)
    }

    fn compile_layer(&mut self, layer: &Layer, name: String, in_shape: Shape3) -> Result<Node> {
        let [h, w, c] = in_shape;
        let offset = self.layout.len();
        let bad = |msg: String| Error::Shape(format!("layer {name} ({}): {msg}", layer.kind()));
        let (op, out_shape) = match layer {
            &Layer::Linear { out, bias } => {
                if out == 0 {
                    return Err(bad("zero output width".into()));
                }
                let scale = self.weight(format!("{name}.weight"), vec![out, c], c);
                if bias {
                    self.constant(format!("{name}.bias"), vec![out], 0.0);
                }
                (
                    Op::Linear {
                        in_dim: c,
                        out_dim: out,
                        bias,
                        scale,
                    },
                    [h, w, out],
                )
            }
            &Layer::Conv {
                out,
                kernel,
                stride,
                padding,
            } => {
                let geom = kernels::ConvGeom {
                    h,
                    w,
                    cin: c,
                    cout: out,
                    kernel,
                    stride,
                    pad: padding,
                };
                let (ho, wo) = geom
                    .out_hw()
                    .filter(|_| kernel > 0 && out > 0)
                    .ok_or_else(|| bad(format!("kernel {kernel} stride {stride} does not fit {h}x{w}")))?;
                let fan_in = kernel * kernel * c;
                let scale = self.weight(format!("{name}.weight"), vec![out, kernel, kernel, c], fan_in);
                self.constant(format!("{name}.bias"), vec![out], 0.0);
                (Op::Conv { geom, scale }, [ho, wo, out])
            }
            &Layer::DepthwiseConv { kernel } => {
                if kernel % 2 == 0 {
                    return Err(bad(format!("depthwise kernel {kernel} must be odd")));
                }
                let scale = self.weight(format!("{name}.weight"), vec![kernel, kernel, c], kernel * kernel);
                self.constant(format!("{name}.bias"), vec![c], 0.0);
                (Op::Depthwise { kernel, scale }, in_shape)
            }
            &Layer::Activation(a) => (Op::Act(a), in_shape),
            Layer::LayerNorm => {
                self.constant(format!("{name}.gamma"), vec![c], 1.0);
                self.constant(format!("{name}.beta"), vec![c], 0.0);
                (Op::LayerNorm, in_shape)
            }
            &Layer::Attention { heads } => {
                if heads == 0 || c % heads != 0 {
                    return Err(bad(format!("width {c} not divisible by {heads} heads")));
                }
                let scale = self.weight(format!("{name}.qkv.weight"), vec![3 * c, c], c);
                self.constant(format!("{name}.qkv.bias"), vec![3 * c], 0.0);
                self.weight(format!("{name}.proj.weight"), vec![c, c], c);
                self.constant(format!("{name}.proj.bias"), vec![c], 0.0);
                (Op::Attention { heads, scale }, in_shape)
            }
            &Layer::SqueezeExcite { reduction } => {
                if reduction == 0 {
                    return Err(bad("zero reduction".into()));
                }
                let reduced = (c / reduction).max(1);
                let scale_in = self.weight(format!("{name}.reduce.weight"), vec![reduced, c], c);
                self.constant(format!("{name}.reduce.bias"), vec![reduced], 0.0);
                let scale_out = self.weight(format!("{name}.expand.weight"), vec![c, reduced], reduced);
                self.constant(format!("{name}.expand.bias"), vec![c], 0.0);
                (
                    Op::SqueezeExcite {
                        reduced,
                        scale_in,
                        scale_out,
                    },
                    in_shape,
                )
            }
            Layer::PositionEmbedding => {
                self.layout.push(format!("{name}.embedding"), vec![h, w, c]);
                self.inits.push(Init::Gaussian(POSITION_EMBEDDING_STD));
                (Op::PosEmbed, in_shape)
            }
            Layer::GlobalAvgPool => (Op::Pool, [1, 1, c]),
            Layer::Block { layers, residual, .. } => {
                let children = self.compile_layers(layers, &name, in_shape)?;
                let out = children.last().map_or(in_shape, |n| n.out_shape);
                if *residual && out != in_shape {
                    return Err(bad(format!("residual body maps {in_shape:?} to {out:?}")));
                }
                (
                    Op::Block {
                        children,
                        residual: *residual,
                    },
                    out,
                )
            }
        };
        Ok(Node {
            kind: layer.kind(),
            name,
            op,
            in_shape,
            out_shape,
            offset,
            len: self.layout.len() - offset,
        })
    }
}

fn check_finite(node: &Node, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            layer: node.name.clone(),
            kind: node.kind,
        })
    }
}

impl CompiledNetwork {
    pub fn compile(spec: &NetworkSpec) -> Result<Self> {
        if spec.input.numel() == 0 || spec.classes == 0 {
            return Err(Error::Shape("empty input signature or zero classes".into()));
        }
        let mut b = Builder {
            layout: ParamLayout::new(),
            inits: Vec::new(),
            param: spec.parameterization,
        };
        let input = [spec.input.height, spec.input.width, spec.input.channels];
        let nodes = b.compile_layers(&spec.layers, "", input)?;
        let out = nodes.last().map_or(input, |n| n.out_shape);
        if out != [1, 1, spec.classes] {
            return Err(Error::Shape(format!(
                "network output {out:?} does not match [1, 1, {}]",
                spec.classes
            )));
        }
        Ok(CompiledNetwork {
            spec: spec.clone(),
            nodes,
            layout: Arc::new(b.layout),
            inits: b.inits,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn layout(&self) -> &Arc<ParamLayout> {
        &self.layout
    }

    pub fn param_count(&self) -> usize {
        self.layout.len()
    }

    pub fn classes(&self) -> usize {
        self.spec.classes
    }

    /// Seeded initialization following the spec's parameterization.
    pub fn init_params(&self, seed: u64) -> ParamVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = Vec::with_capacity(self.layout.len());
        for (seg, init) in self.layout.segments().iter().zip(&self.inits) {
            match *init {
                Init::Gaussian(std) => {
                    for _ in 0..seg.len() {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        data.push(std * z);
                    }
                }
                Init::Constant(v) => data.extend(std::iter::repeat_n(v, seg.len())),
            }
        }
        ParamVector::new(self.layout.clone(), data).expect("layout length")
    }

    fn check_params(&self, params: &ParamVector) -> Result<()> {
        if params.layout().as_ref() != self.layout.as_ref() {
            return Err(Error::Shape(format!(
                "parameter layout ({} values) does not match network ({} values)",
                params.len(),
                self.layout.len()
            )));
        }
        Ok(())
    }

    fn check_input<'a>(&self, input: &'a Tensor) -> Result<&'a [f64]> {
        let sig = self.spec.input;
        let hwc = [sig.height, sig.width, sig.channels];
        let ok = input.shape() == hwc || (sig.height == 1 && sig.width == 1 && input.shape() == [sig.channels]);
        if !ok {
            return Err(Error::Shape(format!(
                "input shape {:?} does not match signature [h={}, w={}, c={}]",
                input.shape(),
                sig.height,
                sig.width,
                sig.channels
            )));
        }
        Ok(input.data())
    }

    pub fn forward(&self, params: &ParamVector, input: &Tensor) -> Result<Tensor> {
        self.check_params(params)?;
        let x = self.check_input(input)?;
        let (y, _) = forward_nodes(&self.nodes, params.data(), x.to_vec(), 1, false)?;
        Ok(Tensor::vector(y))
    }

    /// Runs forward, then accumulates `Jᵀ grad_output` into `grad`. Returns the output.
    pub fn vjp_into(
        &self,
        params: &ParamVector,
        input: &Tensor,
        grad_output: &[f64],
        grad: &mut [f64],
    ) -> Result<Vec<f64>> {
        self.check_params(params)?;
        let x = self.check_input(input)?;
        if grad_output.len() != self.spec.classes || grad.len() != self.layout.len() {
            return Err(Error::Shape("vjp buffer sizes do not match network".into()));
        }
        let (y, caches) = forward_nodes(&self.nodes, params.data(), x.to_vec(), 1, true)?;
        backward_nodes(&self.nodes, params.data(), &caches, grad_output.to_vec(), 1, grad)?;
        Ok(y)
    }

    fn check_batch(&self, inputs: &[f64], batch: usize) -> Result<()> {
        if batch == 0 || inputs.len() != batch * self.spec.input.numel() {
            return Err(Error::Shape(format!(
                "batch of {batch} needs {} input values, got {}",
                batch * self.spec.input.numel(),
                inputs.len()
            )));
        }
        Ok(())
    }

    /// Evaluates `batch` samples stored back to back (each in HWC order); returns `[batch, classes]`.
    pub fn forward_batch(&self, params: &ParamVector, inputs: &[f64], batch: usize) -> Result<Vec<f64>> {
        self.check_params(params)?;
        self.check_batch(inputs, batch)?;
        Ok(forward_nodes(&self.nodes, params.data(), inputs.to_vec(), batch, false)?.0)
    }

    /// Batched forward pass, then backpropagates the output gradient chosen by `loss`.
    ///
    /// `loss` receives the `[batch, classes]` outputs and returns `(value, d value / d outputs)`;
    /// parameter gradients (summed over the batch) accumulate into `grad`.
    pub fn vjp_with<F>(
        &self,
        params: &ParamVector,
        inputs: &[f64],
        batch: usize,
        grad: &mut [f64],
        loss: F,
    ) -> Result<f64>
    where
        F: FnOnce(&[f64]) -> (f64, Vec<f64>),
    {
        self.check_params(params)?;
        self.check_batch(inputs, batch)?;
        if grad.len() != self.layout.len() {
            return Err(Error::Shape("gradient buffer does not match network".into()));
        }
        let (y, caches) = forward_nodes(&self.nodes, params.data(), inputs.to_vec(), batch, true)?;
        let (value, dy) = loss(&y);
        if dy.len() != y.len() {
            return Err(Error::Shape("loss gradient does not match network output".into()));
        }
        backward_nodes(&self.nodes, params.data(), &caches, dy, batch, grad)?;
        Ok(value)
    }

    pub fn param_gradient(
        &self,
        params: &ParamVector,
        input: &Tensor,
        reduction: OutputReduction,
    ) -> Result<GradVector> {
        let seed = reduction.seed(self.spec.classes)?;
        let mut grad = vec![0.0; self.layout.len()];
        self.vjp_into(params, input, &seed, &mut grad)?;
        Ok(GradVector::new(grad))
    }

    /// Central-difference gradient of the reduced output, one parameter at a time.
    pub fn finite_diff_gradient(
        &self,
        params: &ParamVector,
        input: &Tensor,
        reduction: OutputReduction,
        h: f64,
    ) -> Result<GradVector> {
        if !(h > 0.0) {
            return Err(Error::InvalidArgument(format!("step h = {h} must be positive")));
        }
        reduction.seed(self.spec.classes)?;
        let mut p = params.clone();
        let mut grad = Vec::with_capacity(params.len());
        for i in 0..params.len() {
            let orig = p.data()[i];
            p.data_mut()[i] = orig + h;
            let plus = reduction.apply(self.forward(&p, input)?.data());
            p.data_mut()[i] = orig - h;
            let minus = reduction.apply(self.forward(&p, input)?.data());
            p.data_mut()[i] = orig;
            grad.push((plus - minus) / (2.0 * h));
        }
        Ok(GradVector::new(grad))
    }
}

/// Compiles `net` and evaluates it.
pub fn forward(net: &NetworkSpec, params: &ParamVector, input: &Tensor) -> Result<Tensor> {
    CompiledNetwork::compile(net)?.forward(params, input)
}

pub fn param_gradient(
    net: &NetworkSpec,
    params: &ParamVector,
    input: &Tensor,
    reduction: OutputReduction,
) -> Result<GradVector> {
    CompiledNetwork::compile(net)?.param_gradient(params, input, reduction)
}

pub fn finite_diff_gradient(
    net: &NetworkSpec,
    params: &ParamVector,
    input: &Tensor,
    reduction: OutputReduction,
    h: f64,
) -> Result<GradVector> {
    CompiledNetwork::compile(net)?.finite_diff_gradient(params, input, reduction, h)
}

fn forward_nodes(
    nodes: &[Node],
    params: &[f64],
    mut x: Vec<f64>,
    batch: usize,
    keep: bool,
) -> Result<(Vec<f64>, Vec<Cache>)> {
    let mut caches = Vec::with_capacity(if keep { nodes.len() } else { 0 });
    for node in nodes {
        let (y, cache) = forward_node(node, params, x, batch, keep)?;
        check_finite(node, &y)?;
        if keep {
            caches.push(cache);
        }
        x = y;
    }
    Ok((x, caches))
}

fn forward_node(node: &Node, params: &[f64], x: Vec<f64>, batch: usize, keep: bool) -> Result<(Vec<f64>, Cache)> {
    let p = &params[node.offset..node.offset + node.len];
    let [h, w, c] = node.in_shape;
    let per_sample = h * w;
    let tokens = batch * per_sample;
    let keep_input = |x: Vec<f64>| if keep { Cache::Input(x) } else { Cache::None };
    Ok(match &node.op {
        &Op::Linear {
            in_dim,
            out_dim,
            bias,
            scale,
        } => {
            let (wt, b) = p.split_at(in_dim * out_dim);
            let y = kernels::linear_forward(&x, tokens, in_dim, out_dim, wt, bias.then_some(b), scale);
            (y, keep_input(x))
        }
        Op::Conv { geom, scale } => {
            let plen = geom.kernel * geom.kernel * geom.cin;
            let (wt, b) = p.split_at(plen * geom.cout);
            let (y, cols) = kernels::conv_forward(&x, batch, geom, wt, b, *scale);
            (y, keep_input(cols))
        }
        &Op::Depthwise { kernel, scale } => {
            let (wt, b) = p.split_at(kernel * kernel * c);
            (
                kernels::depthwise_forward(&x, batch, h, w, c, kernel, wt, b, scale),
                keep_input(x),
            )
        }
        &Op::Act(a) => {
            if keep {
                // keep the local derivative instead of the input
                let (y, d): (Vec<f64>, Vec<f64>) = x.iter().map(|&v| kernels::activate_with_grad(a, v)).unzip();
                (y, Cache::Input(d))
            } else {
                (x.iter().map(|&v| kernels::activate(a, v)).collect(), Cache::None)
            }
        }
        Op::LayerNorm => {
            let (gamma, beta) = p.split_at(c);
            let out = kernels::layer_norm_forward(&x, tokens, c, gamma, beta);
            let cache = if keep {
                Cache::LayerNorm {
                    xhat: out.xhat,
                    inv_std: out.inv_std,
                }
            } else {
                Cache::None
            };
            (out.y, cache)
        }
        &Op::Attention { heads, scale } => {
            let (wqkv, rest) = p.split_at(3 * c * c);
            let (bqkv, rest) = rest.split_at(3 * c);
            let (wo, bo) = rest.split_at(c * c);
            let qkv = kernels::linear_forward(&x, tokens, c, 3 * c, wqkv, Some(bqkv), scale);
            let (concat, probs) = kernels::attention_batch_forward(&qkv, batch, per_sample, c, heads);
            let y = kernels::linear_forward(&concat, tokens, c, c, wo, Some(bo), scale);
            let cache = if keep {
                Cache::Attention { x, qkv, probs, concat }
            } else {
                Cache::None
            };
            (y, cache)
        }
        &Op::SqueezeExcite {
            reduced,
            scale_in,
            scale_out,
        } => {
            let (w1, rest) = p.split_at(reduced * c);
            let (b1, rest) = rest.split_at(reduced);
            let (w2, b2) = rest.split_at(c * reduced);
            let mean = token_mean(&x, batch, per_sample, c);
            let hidden_pre = kernels::linear_forward(&mean, batch, c, reduced, w1, Some(b1), scale_in);
            let hidden: Vec<f64> = hidden_pre.iter().map(|&v| v.max(0.0)).collect();
            let logits = kernels::linear_forward(&hidden, batch, reduced, c, w2, Some(b2), scale_out);
            let gate: Vec<f64> = logits.iter().map(|&v| kernels::sigmoid(v)).collect();
            let mut y = x.clone();
            for (t, yt) in y.chunks_exact_mut(c).enumerate() {
                let g = &gate[(t / per_sample) * c..][..c];
                yt.iter_mut().zip(g).for_each(|(v, g)| *v *= g);
            }
            let cache = if keep {
                Cache::SqueezeExcite {
                    x,
                    mean,
                    hidden_pre,
                    hidden,
                    gate,
                }
            } else {
                Cache::None
            };
            (y, cache)
        }
        Op::PosEmbed => {
            let mut y = x;
            for yb in y.chunks_exact_mut(p.len()) {
                crate::tensor::axpy(1.0, p, yb);
            }
            (y, Cache::None)
        }
        Op::Pool => (token_mean(&x, batch, per_sample, c), Cache::None),
        Op::Block { children, residual } => {
            let skip = if *residual { Some(x.clone()) } else { None };
            let (mut y, caches) = forward_nodes(children, params, x, batch, keep)?;
            if let Some(s) = skip {
                for (yi, si) in y.iter_mut().zip(&s) {
                    *yi += si;
                }
            }
            (y, if keep { Cache::Block(caches) } else { Cache::None })
        }
    })
}

#[allow(clippy::too_many_arguments)]
fn backward_nodes(
    nodes: &[Node],
    params: &[f64],
    caches: &[Cache],
    mut dy: Vec<f64>,
    batch: usize,
    grad: &mut [f64],
) -> Result<Vec<f64>> {
    for (node, cache) in nodes.iter().zip(caches).rev() {
        dy = backward_node(node, params, cache, dy, batch, grad)?;
        check_finite(node, &dy)?;
    }
    Ok(dy)
}

fn backward_node(
    node: &Node,
    params: &[f64],
    cache: &Cache,
    dy: Vec<f64>,
    batch: usize,
    grad: &mut [f64],
) -> Result<Vec<f64>> {
    let range = node.offset..node.offset + node.len;
    let p = &params[range.clone()];
    let g = &mut grad[range];
    let [h, w, c] = node.in_shape;
    let per_sample = h * w;
    let tokens = batch * per_sample;
    let input = || match cache {
        Cache::Input(x) => x,
        _ => unreachable!("cache kind mismatch for {}", node.name),
    };
    Ok(match &node.op {
        &Op::Linear {
            in_dim,
            out_dim,
            bias,
            scale,
        } => {
            let (wt, _) = p.split_at(in_dim * out_dim);
            let (gw, gb) = g.split_at_mut(in_dim * out_dim);
            kernels::linear_backward(input(), &dy, tokens, in_dim, out_dim, wt, scale, gw, bias.then_some(gb))
        }
        Op::Conv { geom, scale } => {
            let plen = geom.kernel * geom.kernel * geom.cin;
            let (wt, _) = p.split_at(plen * geom.cout);
            let (gw, gb) = g.split_at_mut(plen * geom.cout);
            kernels::conv_backward(input(), &dy, batch, geom, wt, *scale, gw, gb)
        }
        &Op::Depthwise { kernel, scale } => {
            let (wt, _) = p.split_at(kernel * kernel * c);
            let (gw, gb) = g.split_at_mut(kernel * kernel * c);
            kernels::depthwise_backward(input(), &dy, batch, h, w, c, kernel, wt, scale, gw, gb)
        }
        Op::Act(_) => input().iter().zip(&dy).map(|(&d, &g)| d * g).collect(),
        Op::LayerNorm => {
            let Cache::LayerNorm { xhat, inv_std } = cache else {
                unreachable!()
            };
            let (gamma, _) = p.split_at(c);
            let (dgamma, dbeta) = g.split_at_mut(c);
            kernels::layer_norm_backward(&dy, xhat, inv_std, tokens, c, gamma, dgamma, dbeta)
        }
        &Op::Attention { heads, scale } => {
            let Cache::Attention { x, qkv, probs, concat } = cache else {
                unreachable!()
            };
            let (wqkv, rest) = p.split_at(3 * c * c);
            let (_, rest) = rest.split_at(3 * c);
            let (wo, _) = rest.split_at(c * c);
            let (gqkv_w, grest) = g.split_at_mut(3 * c * c);
            let (gqkv_b, grest) = grest.split_at_mut(3 * c);
            let (go_w, go_b) = grest.split_at_mut(c * c);
            let dconcat = kernels::linear_backward(concat, &dy, tokens, c, c, wo, scale, go_w, Some(go_b));
            let dqkv = kernels::attention_batch_backward(qkv, probs, &dconcat, batch, per_sample, c, heads);
            kernels::linear_backward(x, &dqkv, tokens, c, 3 * c, wqkv, scale, gqkv_w, Some(gqkv_b))
        }
        &Op::SqueezeExcite {
            reduced,
            scale_in,
            scale_out,
        } => {
            let Cache::SqueezeExcite {
                x,
                mean,
                hidden_pre,
                hidden,
                gate,
            } = cache
            else {
                unreachable!()
            };
            let (w1, rest) = p.split_at(reduced * c);
            let (_, rest) = rest.split_at(reduced);
            let (w2, _) = rest.split_at(c * reduced);
            let (gw1, grest) = g.split_at_mut(reduced * c);
            let (gb1, grest) = grest.split_at_mut(reduced);
            let (gw2, gb2) = grest.split_at_mut(c * reduced);
            let mut dx = vec![0.0; tokens * c];
            let mut dgate = vec![0.0; batch * c];
            for t in 0..tokens {
                let s = t / per_sample;
                for ch in 0..c {
                    let d = dy[t * c + ch];
                    dx[t * c + ch] = d * gate[s * c + ch];
                    dgate[s * c + ch] += d * x[t * c + ch];
                }
            }
            let dlogits: Vec<f64> = dgate.iter().zip(gate).map(|(d, s)| d * s * (1.0 - s)).collect();
            let dhidden = kernels::linear_backward(hidden, &dlogits, batch, reduced, c, w2, scale_out, gw2, Some(gb2));
            let dpre: Vec<f64> = dhidden
                .iter()
                .zip(hidden_pre)
                .map(|(d, &z)| if z > 0.0 { *d } else { 0.0 })
                .collect();
            let dmean = kernels::linear_backward(mean, &dpre, batch, c, reduced, w1, scale_in, gw1, Some(gb1));
            for t in 0..tokens {
                let s = t / per_sample;
                for ch in 0..c {
                    dx[t * c + ch] += dmean[s * c + ch] / per_sample as f64;
                }
            }
            dx
        }
        Op::PosEmbed => {
            for dyb in dy.chunks_exact(g.len()) {
                crate::tensor::axpy(1.0, dyb, g);
            }
            dy
        }
        Op::Pool => {
            let mut dx = vec![0.0; tokens * c];
            for t in 0..tokens {
                let s = t / per_sample;
                for ch in 0..c {
                    dx[t * c + ch] = dy[s * c + ch] / per_sample as f64;
                }
            }
            dx
        }
        Op::Block { children, residual } => {
            let Cache::Block(caches) = cache else { unreachable!() };
            let skip = if *residual { Some(dy.clone()) } else { None };
            let mut dx = backward_nodes(children, params, caches, dy, batch, grad)?;
            if let Some(s) = skip {
                for (d, si) in dx.iter_mut().zip(&s) {
                    *d += si;
                }
            }
            dx
        }
    })
}

/// Per-sample mean over tokens: `[batch, tokens, c]` → `[batch, c]`.
fn token_mean(x: &[f64], batch: usize, per_sample: usize, c: usize) -> Vec<f64> {
    let mut y = vec![0.0; batch * c];
    for (t, xt) in x.chunks_exact(c).enumerate() {
        let yb = &mut y[(t / per_sample) * c..][..c];
        yb.iter_mut().zip(xt).for_each(|(a, b)| *a += b);
    }
    y.iter_mut().for_each(|v| *v /= per_sample as f64);
    y
}
