//! Registry of 64-bit finite-difference checks over every differentiable
//! op, layer, loss term and both (tiny) models.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{finite_diff_check, CheckReport, Graph, Padding, Var};
use crate::error::Result;
use crate::losses::{
    adv_loss_discriminator, adv_loss_generator, channelwise, pixel_loss, ssim_loss, total_discriminator_loss, total_generator_loss,
    GeneratorLossParts, LossWeights, SsimConstants, SsimExponents,
};
use crate::models::{Discriminator, DiscriminatorConfig, Generator, GeneratorConfig};
use crate::nn::{
    hard_sigmoid, instance_norm, leaky_relu, spatial_dropout, spectral, standard_dropout, Attention, ConvBlock, ConvNormAct, Ctx,
    ParamStore, LEAKY_SLOPE,
};
use crate::optim::InitSpec;
use crate::tensor::{Shape, Tensor};

pub const EPS: f64 = 1e-4;
pub const TOLERANCE: f64 = 1e-3;

/// One named check.
#[derive(Clone, Copy)]
pub struct GradCase {
    pub name: &'static str,
    pub run: fn() -> Result<CheckReport>,
}

/// Result of one case.
#[derive(Clone, Debug)]
pub struct CaseOutcome {
    pub name: &'static str,
    pub report: std::result::Result<CheckReport, String>,
}

impl CaseOutcome {
    pub fn passed(&self) -> bool {
        matches!(&self.report, Ok(r) if r.max_rel_error < TOLERANCE)
    }
}

fn rand_t(shape: [usize; 4], seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(shape, |_, _, _, _| rng.gen_range(-1.0..1.0))
}

/// Values in `[lo, hi]` at least `gap` away from every point in `kinks`.
fn kink_safe(shape: [usize; 4], seed: u64, lo: f64, hi: f64, kinks: &[f64], gap: f64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(shape, |_, _, _, _| loop {
        let v = rng.gen_range(lo..hi);
        if kinks.iter().all(|k| (v - k).abs() > gap) {
            break v;
        }
    })
}

fn positive(shape: [usize; 4], seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(shape, |_, _, _, _| rng.gen_range(0.05..1.0))
}

/// `Σ y ⊙ m` with a fixed random `m` of `y`'s shape.
fn project(g: &Graph<f64>, y: Var, seed: u64) -> Result<Var> {
    let m = rand_t(g.shape(y).0, seed);
    Ok(g.sum(g.mul(y, g.constant(m))?))
}

fn check(f: impl FnMut(&Graph<f64>, &[Var]) -> Result<Var>, params: &[Tensor<f64>]) -> Result<CheckReport> {
    finite_diff_check(f, params, EPS)
}

/// Checks every trainable entry of `store` plus the input `x`.
fn store_check(
    store: &ParamStore<f64>,
    x: Tensor<f64>,
    forward: impl Fn(&mut Ctx<'_, '_, f64>, Var) -> Result<Var>,
) -> Result<CheckReport> {
    let names: Vec<String> = store.iter().filter(|(_, p)| p.trainable).map(|(n, _)| n.to_string()).collect();
    let mut values: Vec<Tensor<f64>> = names.iter().map(|n| store.value(n).cloned()).collect::<Result<_>>()?;
    values.push(x);
    check(
        |g, p| {
            let bound = store.bind_with(g, names.iter().cloned().zip(p.iter().copied()).collect())?;
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let mut ctx = Ctx {
                bound: &bound,
                training: true,
                rng: &mut rng,
            };
            let y = forward(&mut ctx, p[names.len()])?;
            project(g, y, 99)
        },
        &values,
    )
}

fn registered(seed: u64, register: impl FnOnce(&mut ParamStore<f64>, &mut ChaCha8Rng) -> Result<()>) -> Result<ParamStore<f64>> {
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    register(&mut store, &mut rng)?;
    store.power_iterate(5)?;
    Ok(store)
}

fn conv_case(stride: usize, padding: Padding, bias: bool) -> Result<CheckReport> {
    let mut params = vec![rand_t([2, 3, 6, 5], 1), rand_t([4, 3, 3, 3], 2)];
    if bias {
        params.push(rand_t([1, 4, 1, 1], 3));
    }
    check(
        |g, p| {
            let y = g.conv2d(p[0], p[1], p.get(2).copied(), stride, padding)?;
            project(g, y, 4)
        },
        &params,
    )
}

/// Sets every attention gate to 0.5 so the attention path is exercised.
fn open_gates(store: &mut ParamStore<f64>) -> Result<()> {
    let gates: Vec<String> = store.iter().map(|(n, _)| n.to_string()).filter(|n| n.ends_with(".gamma")).collect();
    for name in gates {
        store.set(&name, Tensor::scalar(0.5))?;
    }
    Ok(())
}

fn gen_tiny() -> GeneratorConfig {
    GeneratorConfig {
        input_size: [8, 8],
        levels: 2,
        base_channels: 2,
        channel_cap: 4,
        stem_kernel: 3,
        attention_level: 4,
        dropout_stages: 2,
        ..GeneratorConfig::default()
    }
}

fn disc_tiny() -> DiscriminatorConfig {
    DiscriminatorConfig {
        input_size: [16, 16],
        encoder_stages: 2,
        base_channels: 2,
        channel_cap: 4,
        stem_kernel: 3,
        ..DiscriminatorConfig::default()
    }
}

fn weights() -> LossWeights {
    LossWeights::default()
}

macro_rules! case {
    ($name:literal, $body:expr) => {
        GradCase {
            name: $name,
            run: || $body,
        }
    };
}

/// Every registered check, in a stable order.
pub fn registry() -> Vec<GradCase> {
    vec![
        case!("op.conv2d_reflect", conv_case(1, Padding::Reflect(1), true)),
        case!("op.conv2d_reflect_stride2", conv_case(2, Padding::Reflect(1), true)),
        case!("op.conv2d_zeros", conv_case(1, Padding::Zeros(1), false)),
        case!("op.conv2d_valid_stride2", conv_case(2, Padding::Valid, true)),
        case!(
            "op.conv2d_pointwise",
            check(
                |g, p| {
                    let y = g.conv2d(p[0], p[1], Some(p[2]), 1, Padding::Valid)?;
                    project(g, y, 4)
                },
                &[rand_t([2, 3, 4, 4], 1), rand_t([5, 3, 1, 1], 2), rand_t([1, 5, 1, 1], 3)],
            )
        ),
        case!(
            "op.arithmetic",
            check(
                |g, p| {
                    let a = g.div(g.mul(p[0], p[1])?, g.add_scalar(g.square(p[1]), 1.0))?;
                    let b = g.sub(g.exp(g.scale(a, 0.5)), g.neg(p[0]))?;
                    let c = g.add(g.sqrt(g.add_scalar(g.square(b), 0.1)), g.powf(g.add_scalar(g.abs(p[1]), 0.5), 1.5))?;
                    project(g, c, 5)
                },
                &[rand_t([2, 2, 3, 3], 1), kink_safe([2, 2, 3, 3], 2, -1.0, 1.0, &[0.0], 0.05)],
            )
        ),
        case!(
            "op.clip",
            check(
                |g, p| project(g, g.clip(p[0], -0.5, 0.5), 3),
                &[kink_safe([1, 2, 4, 4], 1, -1.0, 1.0, &[-0.5, 0.5], 0.02)],
            )
        ),
        case!(
            "op.reductions",
            check(
                |g, p| {
                    let m = g.mean_hw(p[0]);
                    let s = g.softmax_rows(g.reshape(p[0], Shape::new(1, 1, 6, 4))?);
                    g.add(g.add(project(g, m, 2)?, project(g, s, 3)?)?, g.mean(p[0]))
                },
                &[rand_t([1, 2, 3, 4], 1)],
            )
        ),
        case!(
            "op.matmul_batched",
            check(
                |g, p| {
                    let ab = g.matmul_batched(p[0], p[1], false, false)?;
                    let atb = g.matmul_batched(p[0], p[2], true, true)?;
                    g.add(project(g, ab, 3)?, project(g, atb, 4)?)
                },
                &[rand_t([2, 1, 3, 4], 1), rand_t([2, 1, 4, 2], 2), rand_t([2, 1, 5, 3], 3)],
            )
        ),
        case!(
            "op.shape_ops",
            check(
                |g, p| {
                    let d = g.depth_to_space(p[0], 2)?;
                    let s = g.space_to_depth(g.reflection_pad(d, [1, 1, 2, 0])?, 2)?;
                    let c = g.concat_channels(&[s, g.slice_channels(s, 1, 3)?])?;
                    project(g, c, 7)
                },
                &[rand_t([2, 4, 3, 3], 1)],
            )
        ),
        case!(
            "layer.leaky_relu",
            check(|g, p| project(g, leaky_relu(g, p[0], LEAKY_SLOPE), 2), &[kink_safe([1, 3, 4, 4], 1, -2.0, 2.0, &[0.0], 0.01)])
        ),
        case!(
            "layer.hard_sigmoid",
            check(|g, p| project(g, hard_sigmoid(g, p[0]), 2), &[kink_safe([1, 3, 4, 4], 1, -4.0, 4.0, &[-2.5, 2.5], 0.01)])
        ),
        case!(
            "layer.instance_norm",
            check(
                |g, p| project(g, instance_norm(g, p[0], p[1], p[2], 1e-3)?, 4),
                &[rand_t([2, 3, 4, 5], 1), rand_t([1, 3, 1, 1], 2), rand_t([1, 3, 1, 1], 3)],
            )
        ),
        case!("layer.spectral_norm", {
            let u = spectral::random_unit::<f64>(4, &mut ChaCha8Rng::seed_from_u64(1));
            check(|g, p| project(g, spectral::normalize(g, p[0], &u)?, 3), &[rand_t([4, 3, 3, 3], 2)])
        }),
        case!(
            "layer.spatial_dropout",
            check(
                |g, p| project(g, spatial_dropout(g, p[0], 0.4, &mut ChaCha8Rng::seed_from_u64(5), true)?, 2),
                &[rand_t([2, 4, 3, 3], 1)],
            )
        ),
        case!(
            "layer.standard_dropout",
            check(
                |g, p| project(g, standard_dropout(g, p[0], 0.4, &mut ChaCha8Rng::seed_from_u64(5), true)?, 2),
                &[rand_t([2, 1, 4, 4], 1)],
            )
        ),
        case!("layer.gated_attention", {
            let layer = Attention::new("attn", 4, 64);
            let mut store = registered(1, |s, r| layer.register(s, InitSpec::GlorotUniform, r))?;
            store.set("attn.gamma", Tensor::scalar(0.6))?;
            store_check(&store, rand_t([2, 4, 3, 4], 2), |ctx, x| layer.forward(ctx, x))
        }),
        case!("layer.conv_norm_act_stride2", {
            let layer = ConvNormAct::new("down", 3, 4, 3, 2, true, LEAKY_SLOPE);
            let store = registered(2, |s, r| layer.register(s, InitSpec::GlorotUniform, r))?;
            store_check(&store, rand_t([1, 3, 6, 6], 11), |ctx, x| layer.forward(ctx, x))
        }),
        case!("layer.conv_act_bias", {
            let layer = ConvNormAct::new("up", 3, 4, 3, 1, false, LEAKY_SLOPE);
            let store = registered(3, |s, r| layer.register(s, InitSpec::GlorotUniform, r))?;
            store_check(&store, rand_t([1, 3, 5, 5], 12), |ctx, x| layer.forward(ctx, x))
        }),
        case!("layer.conv_block_generator", {
            let layer = ConvBlock::gen("b", 2, 3, 3, 3, LEAKY_SLOPE);
            let store = registered(3, |s, r| layer.register(s, InitSpec::GlorotUniform, r))?;
            store_check(&store, rand_t([1, 2, 5, 5], 104), |ctx, x| layer.forward(ctx, x))
        }),
        case!("layer.conv_block_discriminator", {
            let layer = ConvBlock::disc("b", 2, 3, 3, LEAKY_SLOPE);
            let store = registered(4, |s, r| layer.register(s, InitSpec::GlorotUniform, r))?;
            store_check(&store, rand_t([1, 2, 5, 5], 13), |ctx, x| layer.forward(ctx, x))
        }),
        case!(
            "loss.adversarial_discriminator",
            check(|g, p| adv_loss_discriminator(g, p[0], p[1]), &[rand_t([2, 1, 4, 4], 1), rand_t([2, 1, 4, 4], 2)])
        ),
        case!("loss.adversarial_generator", check(|g, p| Ok(adv_loss_generator(g, p[0])), &[rand_t([2, 1, 4, 4], 1)])),
        case!(
            "loss.pixel_l1",
            check(|g, p| pixel_loss(g, p[0], p[1], p[2], p[3], 3, 10), &(1..=4).map(|s| rand_t([1, 4, 3, 3], s)).collect::<Vec<_>>())
        ),
        case!(
            "loss.pixel_l2",
            check(|g, p| pixel_loss(g, p[0], p[1], p[2], p[3], 11, 10), &(1..=4).map(|s| rand_t([1, 4, 3, 3], s)).collect::<Vec<_>>())
        ),
        case!(
            "loss.ssim",
            check(
                |g, p| ssim_loss(g, p[0], p[1], p[2], p[3], SsimConstants::default(), SsimExponents::default()),
                &(1..=4).map(|s| positive([2, 4, 4, 4], s)).collect::<Vec<_>>(),
            )
        ),
        case!(
            "loss.channelwise",
            check(
                |g, p| Ok(channelwise(g, p, [0.5, 1.0, 1.5, 2.0], |v| pixel_loss(g, v[0], v[1], v[2], v[3], 20, 10))?.total),
                &(1..=4).map(|s| rand_t([1, 4, 3, 3], s)).collect::<Vec<_>>(),
            )
        ),
        case!(
            "loss.total_generator",
            check(
                |g, p| {
                    let w = weights();
                    let pix = |v: &[Var]| pixel_loss(g, v[0], v[1], v[2], v[3], 20, w.epoch_sw);
                    let cyc = channelwise(g, &p[1..5], w.lambda_channel, pix)?;
                    let ide = channelwise(g, &[p[2], p[1], p[4], p[3]], w.lambda_channel, pix)?;
                    let ssim = channelwise(g, &p[1..5], w.lambda_channel, |v| {
                        ssim_loss(g, v[0], v[1], v[2], v[3], w.ssim_constants, w.ssim_exponents)
                    })?;
                    let parts = GeneratorLossParts {
                        adv: Some(adv_loss_generator(g, p[0])),
                        cyc: Some(cyc),
                        ide: Some(ide),
                        ssim: Some(ssim),
                    };
                    Ok(total_generator_loss(g, &parts, &w)?.total)
                },
                &std::iter::once(rand_t([2, 1, 2, 2], 9)).chain((1..=4).map(|s| positive([2, 4, 3, 3], s))).collect::<Vec<_>>(),
            )
        ),
        case!(
            "loss.total_discriminator",
            check(
                |g, p| {
                    let heads: Vec<Var> = (0..3).map(|i| adv_loss_discriminator(g, p[2 * i], p[2 * i + 1])).collect::<Result<_>>()?;
                    total_discriminator_loss(g, heads[0], heads[1], heads[2])
                },
                &[[2, 1, 4, 4], [2, 1, 4, 4], [2, 1, 2, 2], [2, 1, 2, 2], [2, 1, 1, 1], [2, 1, 1, 1]]
                    .iter()
                    .enumerate()
                    .map(|(i, &s)| rand_t(s, i as u64 + 1))
                    .collect::<Vec<_>>(),
            )
        ),
        case!("model.generator", generator_case(GEN_SEED)),
        case!("model.discriminator", discriminator_case(DISC_SEED)),
    ]
}

// fixtures whose pre-activations sit clear of the rectifier kink and
// whose smallest gradients stay above central-difference round-off
const GEN_SEED: u64 = 20;
const DISC_SEED: u64 = 3;

fn generator_case(seed: u64) -> Result<CheckReport> {
    let model = Generator::<f64>::build(gen_tiny(), InitSpec::GlorotUniform, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let mut store = model.params.clone();
    store.power_iterate(5)?;
    open_gates(&mut store)?;
    store_check(&store, positive([1, 4, 8, 8], seed + 1), |ctx, x| model.forward_graph(ctx, x))
}

fn discriminator_case(seed: u64) -> Result<CheckReport> {
    let model = Discriminator::<f64>::build(disc_tiny(), InitSpec::GlorotUniform, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let mut store = model.params.clone();
    store.power_iterate(5)?;
    open_gates(&mut store)?;
    store_check(&store, positive([1, 4, 16, 16], seed + 1), |ctx, x| {
        let o = model.forward_graph(ctx, x)?;
        let g = ctx.g();
        let heads = [project(g, o.lowlevel, 1)?, project(g, o.layout, 2)?, project(g, o.content, 3)?];
        total_discriminator_loss(g, heads[0], heads[1], heads[2])
    })
}

/// Runs the cases whose name contains `filter` (all when `None`).
pub fn run_registry(filter: Option<&str>) -> Vec<CaseOutcome> {
    registry()
        .into_iter()
        .filter(|c| filter.is_none_or(|f| c.name.contains(f)))
        .map(|c| CaseOutcome {
            name: c.name,
            report: (c.run)().map_err(|e| e.to_string()),
        })
        .collect()
}
