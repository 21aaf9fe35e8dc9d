use rand::Rng;

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::tensor::{Float, Shape, Tensor};

fn check_rate(rate: f64) -> Result<()> {
    if (0.0..1.0).contains(&rate) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("dropout rate {rate} outside [0, 1)")))
    }
}

fn apply_mask<T: Float>(g: &Graph<T>, x: Var, mask_shape: Shape, rate: f64, rng: &mut impl Rng) -> Result<Var> {
    let keep = T::lit(1.0 / (1.0 - rate));
    let mask = Tensor::from_fn(mask_shape, |_, _, _, _| if rng.gen::<f64>() < rate { T::zero() } else { keep });
    g.mul(x, g.constant(mask))
}

/// Zeroes whole `(sample, channel)` maps with probability `rate` and scales
/// the survivors by `1/(1−rate)`. Identity when not training.
pub fn spatial_dropout<T: Float>(g: &Graph<T>, x: Var, rate: f64, rng: &mut impl Rng, training: bool) -> Result<Var> {
    check_rate(rate)?;
    if !training || rate == 0.0 {
        return Ok(x);
    }
    let s = g.shape(x);
    apply_mask(g, x, Shape::new(s.n(), s.c(), 1, 1), rate, rng)
}

/// Element-wise dropout with the same scaling convention.
pub fn standard_dropout<T: Float>(g: &Graph<T>, x: Var, rate: f64, rng: &mut impl Rng, training: bool) -> Result<Var> {
    check_rate(rate)?;
    if !training || rate == 0.0 {
        return Ok(x);
    }
    let s = g.shape(x);
    apply_mask(g, x, s, rate, rng)
}
