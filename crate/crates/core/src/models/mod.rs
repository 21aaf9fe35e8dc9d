//! U-Net generator and three-headed discriminator, built from configs.

mod discriminator;
mod generator;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use discriminator::{DiscOutputs, Discriminator, DiscriminatorConfig};
pub use generator::{Ablation, Generator, GeneratorConfig};

use crate::autodiff::Graph;
use crate::error::Result;
use crate::nn::{Ctx, ParamCount, ParamStore};
use crate::tensor::{Float, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Train,
    Eval,
}

impl Mode {
    pub fn training(self) -> bool {
        self == Mode::Train
    }
}

/// Total, trainable and spectral-norm (non-trainable) parameter counts.
pub fn count_parameters<T: Float>(params: &ParamStore<T>) -> ParamCount {
    params.count()
}

/// Converts every parameter to another float type.
pub fn cast_store<T: Float, U: Float>(store: &ParamStore<T>) -> ParamStore<U> {
    let mut out = ParamStore::new();
    for (name, p) in store.iter() {
        out.insert(name, p.value.cast(), p.trainable).expect("names are unique");
    }
    out
}

/// Runs a layer stack on a plain tensor without tracking gradients.
pub(crate) fn run_untracked<T: Float, R>(
    params: &ParamStore<T>,
    input: &Tensor<T>,
    mode: Mode,
    rng: &mut ChaCha8Rng,
    f: impl FnOnce(&mut Ctx<'_, '_, T>, crate::autodiff::Var) -> Result<R>,
    extract: impl FnOnce(&Graph<T>, R) -> Vec<Tensor<T>>,
) -> Result<Vec<Tensor<T>>> {
    let g = Graph::new();
    let bound = params.bind(&g, false)?;
    let mut ctx = Ctx {
        bound: &bound,
        training: mode.training(),
        rng,
    };
    let x = g.constant(input.clone());
    let out = f(&mut ctx, x)?;
    Ok(extract(&g, out))
}

/// `min(base·2^k, cap)`.
pub fn level_channels(base: usize, cap: usize, k: usize) -> usize {
    base.checked_shl(k as u32).map_or(cap, |c| c.min(cap))
}
