use crate::autodiff::{Graph, Var};
use crate::tensor::Float;

/// Default negative slope of the leaky rectifier.
pub const LEAKY_SLOPE: f64 = 0.2;

/// `x` for `x > 0`, else `slope·x`.
pub fn leaky_relu<T: Float>(g: &Graph<T>, x: Var, slope: f64) -> Var {
    g.leaky_relu_raw(x, slope)
}

/// `clip(0.2·x + 0.5, 0, 1)`; saturates at exactly 0 and 1.
pub fn hard_sigmoid<T: Float>(g: &Graph<T>, x: Var) -> Var {
    g.clip(g.add_scalar(g.scale(x, 0.2), 0.5), 0.0, 1.0)
}
