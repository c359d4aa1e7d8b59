//! Forward and vector-Jacobian kernels for each supported layer.
//!
//! Activations are laid out token-major, channel-last: `[h, w, c]` flattened so
//! token `t = y * w + x` occupies `data[t * c..(t + 1) * c]`.

use super::Activation;

pub const LAYER_NORM_EPS: f64 = 1e-5;

// ---------------------------------------------------------------------------
// linear (per token), via GEMM over all tokens of the batch

/// `y[t, o] = scale * W[o, :] · x[t, :] + b[o]`
pub(crate) fn linear_forward(
    x: &[f64],
    tokens: usize,
    in_dim: usize,
    out_dim: usize,
    w: &[f64],
    b: Option<&[f64]>,
    scale: f64,
) -> Vec<f64> {
    let mut y = vec![0.0; tokens * out_dim];
    if let Some(b) = b {
        for yt in y.chunks_exact_mut(out_dim) {
            yt.copy_from_slice(b);
        }
    }
    let beta = if b.is_some() { 1.0 } else { 0.0 };
    // Y (tokens x out) = scale * X (tokens x in) * Wᵀ (in x out) + beta * Y
    unsafe {
        matrixmultiply::dgemm(
            tokens,
            in_dim,
            out_dim,
            scale,
            x.as_ptr(),
            in_dim as isize,
            1,
            w.as_ptr(),
            1,
            in_dim as isize,
            beta,
            y.as_mut_ptr(),
            out_dim as isize,
            1,
        );
    }
    y
}

/// Accumulates `dW`, `db` and returns `dx`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn linear_backward(
    x: &[f64],
    dy: &[f64],
    tokens: usize,
    in_dim: usize,
    out_dim: usize,
    w: &[f64],
    scale: f64,
    dw: &mut [f64],
    db: Option<&mut [f64]>,
) -> Vec<f64> {
    debug_assert_eq!(x.len(), tokens * in_dim);
    debug_assert_eq!(dy.len(), tokens * out_dim);
    let mut dx = vec![0.0; tokens * in_dim];
    unsafe {
        // dX (tokens x in) = scale * dY (tokens x out) * W (out x in)
        matrixmultiply::dgemm(
            tokens,
            out_dim,
            in_dim,
            scale,
            dy.as_ptr(),
            out_dim as isize,
            1,
            w.as_ptr(),
            in_dim as isize,
            1,
            0.0,
            dx.as_mut_ptr(),
            in_dim as isize,
            1,
        );
        // dW (out x in) += scale * dYᵀ (out x tokens) * X (tokens x in)
        matrixmultiply::dgemm(
            out_dim,
            tokens,
            in_dim,
            scale,
            dy.as_ptr(),
            1,
            out_dim as isize,
            x.as_ptr(),
            in_dim as isize,
            1,
            1.0,
            dw.as_mut_ptr(),
            in_dim as isize,
            1,
        );
    }
    if let Some(db) = db {
        for dyt in dy.chunks_exact(out_dim) {
            for (d, g) in db.iter_mut().zip(dyt) {
                *d += g;
            }
        }
    }
    dx
}

// ---------------------------------------------------------------------------
// dense 2-d convolution, weight layout [cout][ky][kx][cin], lowered to im2col + GEMM

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub h: usize,
    pub w: usize,
    pub cin: usize,
    pub cout: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeom {
    pub fn out_hw(&self) -> Option<(usize, usize)> {
        let eff_h = self.h + 2 * self.pad;
        let eff_w = self.w + 2 * self.pad;
        if eff_h < self.kernel || eff_w < self.kernel || self.stride == 0 {
            return None;
        }
        Some((
            (eff_h - self.kernel) / self.stride + 1,
            (eff_w - self.kernel) / self.stride + 1,
        ))
    }

    pub fn patch_len(&self) -> usize {
        self.kernel * self.kernel * self.cin
    }

    fn in_len(&self) -> usize {
        self.h * self.w * self.cin
    }

    /// Source offset of patch slot `(ky, kx)` for output `(oy, ox)`, if inside the image.
    fn source(&self, oy: usize, ox: usize, ky: usize, kx: usize) -> Option<usize> {
        let iy = (oy * self.stride + ky) as isize - self.pad as isize;
        let ix = (ox * self.stride + kx) as isize - self.pad as isize;
        if iy < 0 || ix < 0 || iy >= self.h as isize || ix >= self.w as isize {
            None
        } else {
            Some((iy as usize * self.w + ix as usize) * self.cin)
        }
    }

    /// Patch matrix `[batch * ho * wo, patch_len]`.
    pub fn im2col(&self, x: &[f64], batch: usize) -> Vec<f64> {
        let (ho, wo) = self.out_hw().expect("validated at compile time");
        let (k, c, plen) = (self.kernel, self.cin, self.patch_len());
        let mut cols = vec![0.0; batch * ho * wo * plen];
        for b in 0..batch {
            let xb = &x[b * self.in_len()..(b + 1) * self.in_len()];
            for oy in 0..ho {
                for ox in 0..wo {
                    let row = ((b * ho + oy) * wo + ox) * plen;
                    for ky in 0..k {
                        for kx in 0..k {
                            if let Some(src) = self.source(oy, ox, ky, kx) {
                                let dst = row + (ky * k + kx) * c;
                                cols[dst..dst + c].copy_from_slice(&xb[src..src + c]);
                            }
                        }
                    }
                }
            }
        }
        cols
    }

    pub fn col2im(&self, dcols: &[f64], batch: usize) -> Vec<f64> {
        let (ho, wo) = self.out_hw().expect("validated at compile time");
        let (k, c, plen) = (self.kernel, self.cin, self.patch_len());
        let mut dx = vec![0.0; batch * self.in_len()];
        for b in 0..batch {
            let dxb = &mut dx[b * self.in_len()..(b + 1) * self.in_len()];
            for oy in 0..ho {
                for ox in 0..wo {
                    let row = ((b * ho + oy) * wo + ox) * plen;
                    for ky in 0..k {
                        for kx in 0..k {
                            if let Some(dst) = self.source(oy, ox, ky, kx) {
                                let src = &dcols[row + (ky * k + kx) * c..][..c];
                                for (d, s) in dxb[dst..dst + c].iter_mut().zip(src) {
                                    *d += s;
                                }
                            }
                        }
                    }
                }
            }
        }
        dx
    }
}

/// Returns the output and the patch matrix (kept for the backward pass).
pub(crate) fn conv_forward(
    x: &[f64],
    batch: usize,
    g: &ConvGeom,
    w: &[f64],
    b: &[f64],
    scale: f64,
) -> (Vec<f64>, Vec<f64>) {
    let (ho, wo) = g.out_hw().expect("validated at compile time");
    let cols = g.im2col(x, batch);
    let y = linear_forward(&cols, batch * ho * wo, g.patch_len(), g.cout, w, Some(b), scale);
    (y, cols)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_backward(
    cols: &[f64],
    dy: &[f64],
    batch: usize,
    g: &ConvGeom,
    w: &[f64],
    scale: f64,
    dw: &mut [f64],
    db: &mut [f64],
) -> Vec<f64> {
    let (ho, wo) = g.out_hw().expect("validated at compile time");
    let dcols = linear_backward(cols, dy, batch * ho * wo, g.patch_len(), g.cout, w, scale, dw, Some(db));
    g.col2im(&dcols, batch)
}

// ---------------------------------------------------------------------------
// depthwise convolution, stride 1, "same" padding, weight layout [ky][kx][c]

#[allow(clippy::too_many_arguments)]
pub(crate) fn depthwise_forward(
    x: &[f64],
    batch: usize,
    h: usize,
    w: usize,
    c: usize,
    k: usize,
    wt: &[f64],
    b: &[f64],
    scale: f64,
) -> Vec<f64> {
    let pad = (k / 2) as isize;
    let len = h * w * c;
    let mut y = vec![0.0; batch * len];
    for n in 0..batch {
        let xb = &x[n * len..(n + 1) * len];
        let yb = &mut y[n * len..(n + 1) * len];
        for oy in 0..h {
            for ox in 0..w {
                let yt = &mut yb[(oy * w + ox) * c..(oy * w + ox + 1) * c];
                yt.copy_from_slice(b);
                for ky in 0..k {
                    let iy = oy as isize + ky as isize - pad;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..k {
                        let ix = ox as isize + kx as isize - pad;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let xs = &xb[(iy as usize * w + ix as usize) * c..][..c];
                        let ws = &wt[(ky * k + kx) * c..][..c];
                        for ch in 0..c {
                            yt[ch] += scale * ws[ch] * xs[ch];
                        }
                    }
                }
            }
        }
    }
    y
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn depthwise_backward(
    x: &[f64],
    dy: &[f64],
    batch: usize,
    h: usize,
    w: usize,
    c: usize,
    k: usize,
    wt: &[f64],
    scale: f64,
    dw: &mut [f64],
    db: &mut [f64],
) -> Vec<f64> {
    let pad = (k / 2) as isize;
    let len = h * w * c;
    let mut dx = vec![0.0; batch * len];
    for n in 0..batch {
        let xb = &x[n * len..(n + 1) * len];
        let dyb = &dy[n * len..(n + 1) * len];
        let dxb = &mut dx[n * len..(n + 1) * len];
        for oy in 0..h {
            for ox in 0..w {
                let dyt = &dyb[(oy * w + ox) * c..(oy * w + ox + 1) * c];
                for ch in 0..c {
                    db[ch] += dyt[ch];
                }
                for ky in 0..k {
                    let iy = oy as isize + ky as isize - pad;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..k {
                        let ix = ox as isize + kx as isize - pad;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let base = (iy as usize * w + ix as usize) * c;
                        let wbase = (ky * k + kx) * c;
                        for ch in 0..c {
                            dw[wbase + ch] += scale * dyt[ch] * xb[base + ch];
                            dxb[base + ch] += scale * dyt[ch] * wt[wbase + ch];
                        }
                    }
                }
            }
        }
    }
    dx
}

// ---------------------------------------------------------------------------
// pointwise nonlinearities

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_A: f64 = 0.044_715;

// one exp instead of libm's expm1-based tanh; saturates cleanly at ±1
#[inline]
fn tanh_fast(u: f64) -> f64 {
    1.0 - 2.0 / ((2.0 * u).exp() + 1.0)
}

pub(crate) fn activate(act: Activation, v: f64) -> f64 {
    match act {
        Activation::Relu => v.max(0.0),
        Activation::Gelu => {
            let u = GELU_C * (v + GELU_A * v * v * v);
            0.5 * v * (1.0 + tanh_fast(u))
        }
        Activation::Sigmoid => sigmoid(v),
        Activation::Tanh => v.tanh(),
        Activation::Square => v * v,
        Activation::Identity => v,
    }
}

fn activate_grad(act: Activation, v: f64) -> f64 {
    match act {
        Activation::Relu => {
            if v > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        Activation::Gelu => activate_with_grad(act, v).1,
        Activation::Sigmoid => {
            let s = sigmoid(v);
            s * (1.0 - s)
        }
        Activation::Tanh => 1.0 - v.tanh().powi(2),
        Activation::Square => 2.0 * v,
        Activation::Identity => 1.0,
    }
}

/// Value and derivative in one pass.
pub(crate) fn activate_with_grad(act: Activation, v: f64) -> (f64, f64) {
    match act {
        Activation::Gelu => {
            let u = GELU_C * (v + GELU_A * v * v * v);
            let th = tanh_fast(u);
            (
                0.5 * v * (1.0 + th),
                0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * GELU_C * (1.0 + 3.0 * GELU_A * v * v),
            )
        }
        _ => (activate(act, v), activate_grad(act, v)),
    }
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

// ---------------------------------------------------------------------------
// layer norm over channels of each token

pub(crate) struct LayerNormOut {
    pub y: Vec<f64>,
    pub xhat: Vec<f64>,
    pub inv_std: Vec<f64>,
}

pub(crate) fn layer_norm_forward(x: &[f64], tokens: usize, c: usize, gamma: &[f64], beta: &[f64]) -> LayerNormOut {
    let mut y = vec![0.0; tokens * c];
    let mut xhat = vec![0.0; tokens * c];
    let mut inv_std = vec![0.0; tokens];
    for t in 0..tokens {
        let xt = &x[t * c..(t + 1) * c];
        let mean = xt.iter().sum::<f64>() / c as f64;
        let var = xt.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
        let is = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        inv_std[t] = is;
        for ch in 0..c {
            let xh = (xt[ch] - mean) * is;
            xhat[t * c + ch] = xh;
            y[t * c + ch] = gamma[ch] * xh + beta[ch];
        }
    }
    LayerNormOut { y, xhat, inv_std }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn layer_norm_backward(
    dy: &[f64],
    xhat: &[f64],
    inv_std: &[f64],
    tokens: usize,
    c: usize,
    gamma: &[f64],
    dgamma: &mut [f64],
    dbeta: &mut [f64],
) -> Vec<f64> {
    let mut dx = vec![0.0; tokens * c];
    let n = c as f64;
    let mut dxhat = vec![0.0; c];
    for t in 0..tokens {
        let mut sum_d = 0.0;
        let mut sum_dx = 0.0;
        for ch in 0..c {
            let g = dy[t * c + ch];
            let xh = xhat[t * c + ch];
            dgamma[ch] += g * xh;
            dbeta[ch] += g;
            dxhat[ch] = g * gamma[ch];
            sum_d += dxhat[ch];
            sum_dx += dxhat[ch] * xh;
        }
        for ch in 0..c {
            dx[t * c + ch] = inv_std[t] / n * (n * dxhat[ch] - sum_d - xhat[t * c + ch] * sum_dx);
        }
    }
    dx
}

// ---------------------------------------------------------------------------
// multi-head scaled dot-product attention core (projections handled by caller)

/// Per-sample attention core over a batch; probs are laid out `[batch][heads][t][t]`.
pub(crate) fn attention_batch_forward(
    qkv: &[f64],
    batch: usize,
    tokens: usize,
    c: usize,
    heads: usize,
) -> (Vec<f64>, Vec<f64>) {
    let mut out = Vec::with_capacity(batch * tokens * c);
    let mut probs = Vec::with_capacity(batch * heads * tokens * tokens);
    for qkv_b in qkv.chunks_exact(tokens * 3 * c).take(batch) {
        let (o, p) = attention_core_forward(qkv_b, tokens, c, heads);
        out.extend_from_slice(&o);
        probs.extend_from_slice(&p);
    }
    (out, probs)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn attention_batch_backward(
    qkv: &[f64],
    probs: &[f64],
    dout: &[f64],
    batch: usize,
    tokens: usize,
    c: usize,
    heads: usize,
) -> Vec<f64> {
    let mut dqkv = Vec::with_capacity(batch * tokens * 3 * c);
    let (ql, pl, ol) = (tokens * 3 * c, heads * tokens * tokens, tokens * c);
    for b in 0..batch {
        dqkv.extend_from_slice(&attention_core_backward(
            &qkv[b * ql..(b + 1) * ql],
            &probs[b * pl..(b + 1) * pl],
            &dout[b * ol..(b + 1) * ol],
            tokens,
            c,
            heads,
        ));
    }
    dqkv
}

/// Returns the concatenated head outputs `[t, c]` and the softmax weights `[heads][t][t]`.
fn attention_core_forward(qkv: &[f64], tokens: usize, c: usize, heads: usize) -> (Vec<f64>, Vec<f64>) {
    let dh = c / heads;
    let inv = 1.0 / (dh as f64).sqrt();
    let stride = 3 * c;
    let mut probs = vec![0.0; heads * tokens * tokens];
    let mut out = vec![0.0; tokens * c];
    for h in 0..heads {
        let (qo, ko, vo) = (h * dh, c + h * dh, 2 * c + h * dh);
        let p = &mut probs[h * tokens * tokens..(h + 1) * tokens * tokens];
        for i in 0..tokens {
            let q = &qkv[i * stride + qo..][..dh];
            let row = &mut p[i * tokens..(i + 1) * tokens];
            let mut m = f64::NEG_INFINITY;
            for (j, r) in row.iter_mut().enumerate() {
                let k = &qkv[j * stride + ko..][..dh];
                let mut s = 0.0;
                for d in 0..dh {
                    s += q[d] * k[d];
                }
                *r = s * inv;
                m = m.max(*r);
            }
            let mut z = 0.0;
            for r in row.iter_mut() {
                *r = (*r - m).exp();
                z += *r;
            }
            let iz = 1.0 / z;
            let o = &mut out[i * c + qo..][..dh];
            for (j, r) in row.iter_mut().enumerate() {
                *r *= iz;
                let v = &qkv[j * stride + vo..][..dh];
                for d in 0..dh {
                    o[d] += *r * v[d];
                }
            }
        }
    }
    (out, probs)
}

/// Gradient of the attention core with respect to the packed `qkv` buffer.
fn attention_core_backward(
    qkv: &[f64],
    probs: &[f64],
    dout: &[f64],
    tokens: usize,
    c: usize,
    heads: usize,
) -> Vec<f64> {
    let dh = c / heads;
    let inv = 1.0 / (dh as f64).sqrt();
    let stride = 3 * c;
    let mut dqkv = vec![0.0; tokens * stride];
    let mut dp = vec![0.0; tokens];
    for h in 0..heads {
        let (qo, ko, vo) = (h * dh, c + h * dh, 2 * c + h * dh);
        let p = &probs[h * tokens * tokens..(h + 1) * tokens * tokens];
        for i in 0..tokens {
            let doi = &dout[i * c + qo..][..dh];
            let row = &p[i * tokens..(i + 1) * tokens];
            let mut acc = 0.0;
            for j in 0..tokens {
                let v = &qkv[j * stride + vo..][..dh];
                let mut s = 0.0;
                for d in 0..dh {
                    s += doi[d] * v[d];
                }
                dp[j] = s;
                acc += row[j] * s;
                // dV[j] += P[i][j] * dOut[i]
                let dv = &mut dqkv[j * stride + vo..][..dh];
                for d in 0..dh {
                    dv[d] += row[j] * doi[d];
                }
            }
            for j in 0..tokens {
                let ds = row[j] * (dp[j] - acc) * inv;
                // dQ[i] += dS[i][j] K[j];  dK[j] += dS[i][j] Q[i]
                for d in 0..dh {
                    let kjd = qkv[j * stride + ko + d];
                    let qid = qkv[i * stride + qo + d];
                    dqkv[i * stride + qo + d] += ds * kjd;
                    dqkv[j * stride + ko + d] += ds * qid;
                }
            }
        }
    }
    dqkv
}
