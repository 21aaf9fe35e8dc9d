//! Geometric augmentation applied identically to all four channels.

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Mirrors every channel left to right.
pub fn flip_lr(x: &Tensor<f32>) -> Tensor<f32> {
    let s = x.shape();
    Tensor::from_fn(s, |n, c, i, j| x.at(n, c, i, s.w() - 1 - j))
}

/// Translates by `dx` columns and `dy` rows; vacated pixels become 0.
pub fn shift(x: &Tensor<f32>, dx: isize, dy: isize) -> Tensor<f32> {
    let s = x.shape();
    let (h, w) = (s.h() as isize, s.w() as isize);
    Tensor::from_fn(s, |n, c, i, j| {
        let (si, sj) = (i as isize - dy, j as isize - dx);
        if (0..h).contains(&si) && (0..w).contains(&sj) {
            x.at(n, c, si as usize, sj as usize)
        } else {
            0.0
        }
    })
}

/// Flip with probability ½, then a uniform integer shift in
/// `[−max_shift, max_shift]²`.
pub fn augment(x: &Tensor<f32>, rng: &mut impl Rng, max_shift: usize) -> Result<Tensor<f32>> {
    let s = x.shape();
    if max_shift >= s.h().min(s.w()) {
        return Err(Error::InvalidArgument(format!(
            "max_shift {max_shift} must be smaller than the image extent {}x{}",
            s.h(),
            s.w()
        )));
    }
    let flipped = rng.gen_bool(0.5);
    let m = max_shift as isize;
    let dx = rng.gen_range(-m..=m);
    let dy = rng.gen_range(-m..=m);
    let y = if flipped { flip_lr(x) } else { x.clone() };
    Ok(if dx == 0 && dy == 0 { y } else { shift(&y, dx, dy) })
}
