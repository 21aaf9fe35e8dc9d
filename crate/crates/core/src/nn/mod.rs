//! Layers built from autodiff primitives.
//!
//! Layers are descriptors: they know their parameter names and shapes,
//! register initial values into a [`ParamStore`], and run against the vars
//! of a [`Bound`] store through a [`Ctx`].

pub mod activation;
pub mod attention;
pub mod blocks;
pub mod dropout;
pub mod norm;
pub mod params;
pub mod spectral;

pub use activation::{hard_sigmoid, leaky_relu, LEAKY_SLOPE};
pub use attention::{gated_self_attention, Attention};
pub use blocks::{Conv, ConvBlock, ConvNormAct};
pub use dropout::{spatial_dropout, standard_dropout};
pub use norm::{instance_norm, InstanceNorm, IN_EPS};
pub use params::{check_shape, Bound, Ctx, Param, ParamCount, ParamStore, SN_U_SUFFIX};
pub use spectral::{power_step, spectral_norm_apply, SpectralNormState};
