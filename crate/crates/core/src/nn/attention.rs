use rand::Rng;

use super::blocks::Conv;
use super::params::Ctx;
use super::ParamStore;
use crate::autodiff::{Graph, Padding, Var};
use crate::error::{Error, Result};
use crate::optim::init::InitSpec;
use crate::tensor::{Float, Tensor};

/// Vars of one gated self-attention layer. Each projection is a 1×1 conv
/// `(weight, bias)`; `gamma` is `[1, 1, 1, 1]`.
#[derive(Clone, Copy, Debug)]
pub struct AttentionWeights {
    pub query: (Var, Var),
    pub key: (Var, Var),
    pub value: (Var, Var),
    pub gamma: Var,
}

/// Output of [`gated_self_attention`].
#[derive(Clone, Copy, Debug)]
pub struct AttentionOutput {
    pub out: Var,
    /// `[n, 1, hw, hw]`; row `j` holds query `j`'s weights over all keys.
    pub attention: Var,
}

/// `γ·o + x`, where `o_j = Σ_i a_ji·v(x)_i` and `a_j = softmax_i(q(x)_j · k(x)_i)`.
///
/// Errors when `h·w` exceeds `max_positions`.
pub fn gated_self_attention<T: Float>(
    g: &Graph<T>,
    x: Var,
    w: &AttentionWeights,
    max_positions: usize,
) -> Result<AttentionOutput> {
    let s = g.shape(x);
    let hw = s.plane();
    if hw > max_positions {
        return Err(Error::InvalidShape {
            op: "gated_self_attention",
            detail: format!("{hw} positions in {s} exceed the cap of {max_positions}"),
        });
    }
    let project = |(wt, b): (Var, Var)| -> Result<Var> {
        let y = g.conv2d(x, wt, Some(b), 1, Padding::Valid)?;
        let c = g.shape(y).c();
        g.reshape(y, [s.n(), 1, c, hw])
    };
    let q = project(w.query)?;
    let k = project(w.key)?;
    let v = project(w.value)?;
    // scores[j, i] = q_j · k_i
    let scores = g.matmul_batched(q, k, true, false)?;
    let attention = g.softmax_rows(scores);
    let o = g.matmul_batched(v, attention, false, true)?;
    let o = g.reshape(o, s)?;
    let out = g.add(g.mul(o, w.gamma)?, x)?;
    Ok(AttentionOutput { out, attention })
}

/// Channels of the query and key projections.
pub fn reduced_channels(channels: usize) -> usize {
    (channels / 8).max(1)
}

/// Gated self-attention layer with parameters under `<name>.{query,key,value,gamma}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Attention {
    pub name: String,
    pub channels: usize,
    pub max_positions: usize,
}

impl Attention {
    pub fn new(name: impl Into<String>, channels: usize, max_positions: usize) -> Self {
        Attention {
            name: name.into(),
            channels,
            max_positions,
        }
    }

    fn convs(&self) -> [Conv; 3] {
        let r = reduced_channels(self.channels);
        [
            Conv::pointwise(format!("{}.query", self.name), self.channels, r),
            Conv::pointwise(format!("{}.key", self.name), self.channels, r),
            Conv::pointwise(format!("{}.value", self.name), self.channels, self.channels),
        ]
    }

    pub fn register<T: Float>(&self, store: &mut ParamStore<T>, init: InitSpec, rng: &mut impl Rng) -> Result<()> {
        for c in self.convs() {
            c.register(store, init, rng)?;
        }
        store.insert(format!("{}.gamma", self.name), Tensor::zeros([1, 1, 1, 1]), true)
    }

    pub fn weights<T: Float>(&self, ctx: &Ctx<'_, '_, T>) -> Result<AttentionWeights> {
        let pair = |c: &Conv| -> Result<(Var, Var)> {
            Ok((ctx.param(&format!("{}.weight", c.name))?, ctx.param(&format!("{}.bias", c.name))?))
        };
        let [q, k, v] = self.convs();
        Ok(AttentionWeights {
            query: pair(&q)?,
            key: pair(&k)?,
            value: pair(&v)?,
            gamma: ctx.param(&format!("{}.gamma", self.name))?,
        })
    }

    pub fn forward<T: Float>(&self, ctx: &Ctx<'_, '_, T>, x: Var) -> Result<Var> {
        Ok(gated_self_attention(ctx.g(), x, &self.weights(ctx)?, self.max_positions)?.out)
    }
}
