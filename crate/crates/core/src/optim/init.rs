//! Uniform weight initializers.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::tensor::{Float, Shape, Tensor};

/// Which bound the uniform initializer uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitSpec {
    /// `±√(6 / (fan_in + fan_out))`
    #[default]
    GlorotUniform,
    /// `±√(6 / fan_in)`
    HeUniform,
}

impl InitSpec {
    pub fn bound(self, fan_in: usize, fan_out: usize) -> f64 {
        match self {
            InitSpec::GlorotUniform => (6.0 / (fan_in + fan_out) as f64).sqrt(),
            InitSpec::HeUniform => (6.0 / fan_in as f64).sqrt(),
        }
    }

    pub fn sample<T: Float>(self, shape: impl Into<Shape>, fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Tensor<T> {
        uniform_open(shape, self.bound(fan_in, fan_out), rng)
    }
}

/// I.i.d. samples from `U(−b, b)` with `b = √(6 / (fan_in + fan_out))`,
/// strictly inside the bounds.
pub fn init_uniform<T: Float>(shape: impl Into<Shape>, fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Tensor<T> {
    InitSpec::GlorotUniform.sample(shape, fan_in, fan_out, rng)
}

fn uniform_open<T: Float>(shape: impl Into<Shape>, bound: f64, rng: &mut impl Rng) -> Tensor<T> {
    Tensor::from_fn(shape, |_, _, _, _| loop {
        let v = T::lit(rng.gen_range(-bound..bound));
        if v.f64().abs() < bound {
            break v;
        }
    })
}

/// Fan-in and fan-out of a `[co, ci, kh, kw]` conv weight.
pub fn conv_fans(shape: Shape) -> (usize, usize) {
    let receptive = shape.h() * shape.w();
    (shape.c() * receptive, shape.n() * receptive)
}
