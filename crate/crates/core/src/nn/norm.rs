use super::params::Ctx;
use super::ParamStore;
use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::tensor::{Float, Tensor};

pub const IN_EPS: f64 = 1e-5;

/// Per-`(sample, channel)` standardization followed by a per-channel
/// affine map. `gain` and `bias` are `[1, c, 1, 1]`.
pub fn instance_norm<T: Float>(g: &Graph<T>, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
    let s = g.shape(x);
    if s.plane() < 2 {
        return Err(Error::InvalidShape {
            op: "instance_norm",
            detail: format!("needs at least two spatial positions, got {s}"),
        });
    }
    let centered = g.sub(x, g.mean_hw(x))?;
    let var = g.mean_hw(g.square(centered));
    let std = g.sqrt(g.add_scalar(var, eps));
    let normed = g.div(centered, std)?;
    g.add(g.mul(normed, gain)?, bias)
}

/// Instance norm with learnable `<name>.gain` and `<name>.bias`.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceNorm {
    pub name: String,
    pub channels: usize,
}

impl InstanceNorm {
    pub fn new(name: impl Into<String>, channels: usize) -> Self {
        InstanceNorm {
            name: name.into(),
            channels,
        }
    }

    pub fn register<T: Float>(&self, store: &mut ParamStore<T>) -> Result<()> {
        store.insert(format!("{}.gain", self.name), Tensor::ones([1, self.channels, 1, 1]), true)?;
        store.insert(format!("{}.bias", self.name), Tensor::zeros([1, self.channels, 1, 1]), true)
    }

    pub fn forward<T: Float>(&self, ctx: &Ctx<'_, '_, T>, x: Var) -> Result<Var> {
        let gain = ctx.param(&format!("{}.gain", self.name))?;
        let bias = ctx.param(&format!("{}.bias", self.name))?;
        instance_norm(ctx.g(), x, gain, bias, IN_EPS)
    }
}
