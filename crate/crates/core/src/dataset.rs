//! Seeded synthetic image task.
//!
//! Each image carries two independent binary signals: a smooth Gaussian blob in
//! the left or right half (low frequency) and a period-2 stripe texture that is
//! either vertical or horizontal with random sign (high frequency). The class
//! is `2 * blob_side + stripe_orientation`, so a classifier has to read both.
//! Gaussian pixel noise is added on top.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::InputSig;
use crate::tensor::Tensor;

pub const BLOB_TEXTURE_CLASSES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlobTextureConfig {
    pub size: usize,
    pub blob_amplitude: f64,
    pub texture_amplitude: f64,
    pub noise_std: f64,
}

impl Default for BlobTextureConfig {
    fn default() -> Self {
        BlobTextureConfig {
            size: 16,
            blob_amplitude: 1.0,
            texture_amplitude: 0.5,
            noise_std: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageDataset {
    pub input: InputSig,
    pub classes: usize,
    /// HWC images, each `input.numel()` long.
    pub images: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl ImageDataset {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn tensor(&self, i: usize) -> Tensor {
        let s = self.input;
        Tensor::new(vec![s.height, s.width, s.channels], self.images[i].clone()).expect("image shape")
    }

    /// The first `n` images.
    pub fn take(&self, n: usize) -> ImageDataset {
        ImageDataset {
            input: self.input,
            classes: self.classes,
            images: self.images[..n.min(self.len())].to_vec(),
            labels: self.labels[..n.min(self.len())].to_vec(),
        }
    }
}

const CHANNEL_TINT: [f64; 3] = [1.0, 0.7, 0.4];

/// `n` images with labels cycling through the classes (balanced).
pub fn blob_texture_dataset(cfg: &BlobTextureConfig, n: usize, seed: u64) -> Result<ImageDataset> {
    if cfg.size < 8 || cfg.size % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "image size {} must be even and at least 8",
            cfg.size
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise =
        Normal::new(0.0, cfg.noise_std.max(0.0)).map_err(|e| Error::InvalidArgument(format!("noise std: {e}")))?;
    let s = cfg.size;
    let sf = s as f64;
    let sigma = sf / 8.0;
    let mut images = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % BLOB_TEXTURE_CLASSES;
        let right = label / 2 == 1;
        let horizontal = label % 2 == 1;
        let cx = if right { 0.75 * sf } else { 0.25 * sf } + rng.random_range(-0.08..0.08) * sf - 0.5;
        let cy = rng.random_range(0.25..0.75) * sf - 0.5;
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let mut img = vec![0.0; s * s * 3];
        for y in 0..s {
            for x in 0..s {
                let d2 = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)) / (2.0 * sigma * sigma);
                let blob = cfg.blob_amplitude * (-d2).exp();
                let phase = if horizontal { y } else { x };
                let stripe = cfg.texture_amplitude * sign * if phase % 2 == 0 { 1.0 } else { -1.0 };
                for (ch, tint) in CHANNEL_TINT.iter().enumerate() {
                    let v = blob * tint + stripe + noise.sample(&mut rng);
                    img[(y * s + x) * 3 + ch] = v;
                }
            }
        }
        images.push(img);
        labels.push(label);
    }
    Ok(ImageDataset {
        input: InputSig {
            channels: 3,
            height: s,
            width: s,
        },
        classes: BLOB_TEXTURE_CLASSES,
        images,
        labels,
    })
}
