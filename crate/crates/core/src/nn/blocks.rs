use rand::Rng;

use super::activation::leaky_relu;
use super::norm::InstanceNorm;
use super::params::{Ctx, SN_U_SUFFIX};
use super::spectral::random_unit;
use super::ParamStore;
use crate::autodiff::{Padding, Var};
use crate::error::Result;
use crate::optim::init::{conv_fans, InitSpec};
use crate::tensor::{Float, Shape, Tensor};

/// A square-kernel convolution with `<name>.weight`, optional
/// `<name>.bias` and, when spectrally normalized, `<name>.sn_u`.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv {
    pub name: String,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: Padding,
    pub spectral: bool,
    pub bias: bool,
}

impl Conv {
    /// Plain 1×1 convolution with bias.
    pub fn pointwise(name: impl Into<String>, in_channels: usize, out_channels: usize) -> Self {
        Conv {
            name: name.into(),
            in_channels,
            out_channels,
            kernel: 1,
            stride: 1,
            padding: Padding::Valid,
            spectral: false,
            bias: true,
        }
    }

    /// Spectrally normalized conv with reflection padding `kernel / 2`.
    pub fn reflect_sn(name: impl Into<String>, in_channels: usize, out_channels: usize, kernel: usize, stride: usize) -> Self {
        Conv {
            name: name.into(),
            in_channels,
            out_channels,
            kernel,
            stride,
            padding: Padding::Reflect(kernel / 2),
            spectral: true,
            bias: true,
        }
    }

    pub fn weight_shape(&self) -> Shape {
        Shape::new(self.out_channels, self.in_channels, self.kernel, self.kernel)
    }

    pub fn register<T: Float>(&self, store: &mut ParamStore<T>, init: InitSpec, rng: &mut impl Rng) -> Result<()> {
        let shape = self.weight_shape();
        let (fan_in, fan_out) = conv_fans(shape);
        store.insert(format!("{}.weight", self.name), init.sample(shape, fan_in, fan_out, rng), true)?;
        if self.bias {
            store.insert(format!("{}.bias", self.name), Tensor::zeros([1, self.out_channels, 1, 1]), true)?;
        }
        if self.spectral {
            store.insert(format!("{}{SN_U_SUFFIX}", self.name), random_unit(self.out_channels, rng), false)?;
        }
        Ok(())
    }

    pub fn forward<T: Float>(&self, ctx: &Ctx<'_, '_, T>, x: Var) -> Result<Var> {
        let w = ctx.param(&format!("{}.weight", self.name))?;
        let b = if self.bias {
            Some(ctx.param(&format!("{}.bias", self.name))?)
        } else {
            None
        };
        ctx.g().conv2d(x, w, b, self.stride, self.padding)
    }
}

/// Reflection pad, SN conv, optional instance norm, leaky ReLU.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvNormAct {
    pub conv: Conv,
    pub norm: Option<InstanceNorm>,
    pub slope: f64,
}

impl ConvNormAct {
    pub fn new(name: &str, ci: usize, co: usize, kernel: usize, stride: usize, normalize: bool, slope: f64) -> Self {
        let mut conv = Conv::reflect_sn(format!("{name}.conv"), ci, co, kernel, stride);
        // instance norm cancels any per-channel offset
        conv.bias = !normalize;
        ConvNormAct {
            conv,
            norm: normalize.then(|| InstanceNorm::new(format!("{name}.norm"), co)),
            slope,
        }
    }

    pub fn register<T: Float>(&self, store: &mut ParamStore<T>, init: InitSpec, rng: &mut impl Rng) -> Result<()> {
        self.conv.register(store, init, rng)?;
        if let Some(n) = &self.norm {
            n.register(store)?;
        }
        Ok(())
    }

    pub fn forward<T: Float>(&self, ctx: &Ctx<'_, '_, T>, x: Var) -> Result<Var> {
        let mut y = self.conv.forward(ctx, x)?;
        if let Some(n) = &self.norm {
            y = n.forward(ctx, y)?;
        }
        Ok(leaky_relu(ctx.g(), y, self.slope))
    }
}

/// Stride-1 stack of [`ConvNormAct`] units: two for the generator, one
/// for the discriminator. Spatial size is preserved.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvBlock {
    pub units: Vec<ConvNormAct>,
}

impl ConvBlock {
    /// Generator block; `first_kernel` is 7 on the stem, 3 elsewhere.
    pub fn gen(name: &str, ci: usize, co: usize, first_kernel: usize, kernel: usize, slope: f64) -> Self {
        ConvBlock {
            units: vec![
                ConvNormAct::new(&format!("{name}.0"), ci, co, first_kernel, 1, true, slope),
                ConvNormAct::new(&format!("{name}.1"), co, co, kernel, 1, true, slope),
            ],
        }
    }

    pub fn disc(name: &str, ci: usize, co: usize, kernel: usize, slope: f64) -> Self {
        ConvBlock {
            units: vec![ConvNormAct::new(&format!("{name}.0"), ci, co, kernel, 1, true, slope)],
        }
    }

    pub fn out_channels(&self) -> usize {
        self.units.last().map_or(0, |u| u.conv.out_channels)
    }

    pub fn register<T: Float>(&self, store: &mut ParamStore<T>, init: InitSpec, rng: &mut impl Rng) -> Result<()> {
        self.units.iter().try_for_each(|u| u.register(store, init, rng))
    }

    pub fn forward<T: Float>(&self, ctx: &Ctx<'_, '_, T>, x: Var) -> Result<Var> {
        self.units.iter().try_fold(x, |y, u| u.forward(ctx, y))
    }
}
