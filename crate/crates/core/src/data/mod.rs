//! RGB-D samples: VRGD files, min-max scaling, augmentation, manifests and
//! a procedural two-domain toy dataset.

mod augment;
mod manifest;
mod synth;
mod vrgd;

pub use augment::{augment, flip_lr, shift};
pub use manifest::{Dataset, DatasetManifest, Domain};
pub use synth::{synth_sample, synth_toy_dataset, SynthParams};
pub use vrgd::{load_sample, read_sample, save_sample, write_sample};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Depth value of background pixels.
pub const BACKGROUND_DEPTH: f32 = -1.0;

/// An unscaled sample: interleaved 8-bit RGB and centered depth in `[−1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RawSample {
    pub height: usize,
    pub width: usize,
    /// `h·w·3`, row-major, channels interleaved.
    pub rgb: Vec<u8>,
    /// `h·w`, row-major.
    pub depth: Vec<f32>,
}

impl RawSample {
    /// All-background sample.
    pub fn background(height: usize, width: usize) -> Self {
        RawSample {
            height,
            width,
            rgb: vec![0; height * width * 3],
            depth: vec![BACKGROUND_DEPTH; height * width],
        }
    }

    pub fn is_background(&self, i: usize) -> bool {
        self.depth[i] == BACKGROUND_DEPTH && self.rgb[3 * i..3 * i + 3] == [0, 0, 0]
    }

    /// Depth within `[−1, 1]`; background pixels have black RGB and depth −1.
    pub fn check(&self) -> Result<()> {
        let n = self.height * self.width;
        if self.rgb.len() != 3 * n || self.depth.len() != n {
            return Err(Error::InvalidArgument(format!(
                "sample buffers do not match {}x{}",
                self.height, self.width
            )));
        }
        for (i, &d) in self.depth.iter().enumerate() {
            if !(-1.0..=1.0).contains(&d) {
                return Err(Error::InvalidArgument(format!("depth {d} at pixel {i} outside [-1, 1]")));
            }
            if d == BACKGROUND_DEPTH && self.rgb[3 * i..3 * i + 3] != [0, 0, 0] {
                return Err(Error::InvalidArgument(format!("background pixel {i} has colour")));
            }
        }
        Ok(())
    }

    /// `[1, 4, h, w]` tensor with channels r, g, b, d, all in `[0, 1]`.
    pub fn to_tensor(&self) -> Result<Tensor<f32>> {
        let (h, w) = (self.height, self.width);
        let mut t = Tensor::zeros([1, 4, h, w]);
        let plane = h * w;
        let data = t.data_mut();
        for i in 0..plane {
            for c in 0..3 {
                data[c * plane + i] = scale_rgb(self.rgb[3 * i + c]);
            }
            data[3 * plane + i] = scale_depth(self.depth[i])?;
        }
        Ok(t)
    }

    /// Inverse of [`to_tensor`](Self::to_tensor) for one `[1, 4, h, w]`
    /// sample; values are clamped to `[0, 1]` first. Pixels whose depth
    /// maps to the background value get black RGB.
    pub fn from_tensor(t: &Tensor<f32>) -> Result<Self> {
        let s = t.shape();
        if s.n() != 1 || s.c() != 4 {
            return Err(Error::InvalidShape {
                op: "RawSample::from_tensor",
                detail: format!("expected [1, 4, h, w], got {s}"),
            });
        }
        let (h, w) = (s.h(), s.w());
        let plane = h * w;
        let d = t.data();
        let mut out = RawSample::background(h, w);
        for i in 0..plane {
            for c in 0..3 {
                out.rgb[3 * i + c] = unscale_rgb(d[c * plane + i]);
            }
            out.depth[i] = unscale_depth(d[3 * plane + i]);
            if out.depth[i] == BACKGROUND_DEPTH {
                out.rgb[3 * i..3 * i + 3].fill(0);
            }
        }
        Ok(out)
    }
}

/// `v / 255`.
pub fn scale_rgb(v: u8) -> f32 {
    v as f32 / 255.0
}

/// Nearest 8-bit value of a scaled channel.
pub fn unscale_rgb(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// `(d + 1) / 2` with the fixed depth range `[−1, 1]`.
pub fn scale_depth(d: f32) -> Result<f32> {
    if (-1.0..=1.0).contains(&d) {
        Ok((d + 1.0) / 2.0)
    } else {
        Err(Error::InvalidArgument(format!("depth {d} outside [-1, 1]")))
    }
}

pub fn unscale_depth(v: f32) -> f32 {
    v.clamp(0.0, 1.0) * 2.0 - 1.0
}

/// Deterministic disjoint split; the first `round(train_fraction·n)`
/// indices of a seeded shuffle form the training set. Both halves are sorted.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = ((n as f64) * train_fraction.clamp(0.0, 1.0)).round() as usize;
    let mut train = idx[..cut].to_vec();
    let mut test = idx[cut..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Splits `indices` into batches of `batch_size`, shuffled with `rng` when
/// `shuffle` is set. The final batch may be smaller.
pub fn batches(indices: &[usize], batch_size: usize, shuffle: bool, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut idx = indices.to_vec();
    if shuffle {
        idx.shuffle(rng);
    }
    idx.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect()
}
