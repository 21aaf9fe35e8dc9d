use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{level_channels, run_untracked, Mode};
use crate::autodiff::Var;
use crate::error::{Error, Result};
use crate::nn::{hard_sigmoid, leaky_relu, spatial_dropout, Attention, Conv, ConvBlock, ConvNormAct, Ctx, ParamStore, LEAKY_SLOPE};
use crate::optim::InitSpec;
use crate::tensor::{Float, Shape, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    /// `[height, width]`.
    pub input_size: [usize; 2],
    pub in_channels: usize,
    pub levels: usize,
    pub base_channels: usize,
    pub channel_cap: usize,
    pub stem_kernel: usize,
    pub body_kernel: usize,
    /// Decoder width at which gated self-attention runs.
    pub attention_level: usize,
    /// Largest `h·w` the attention layer accepts.
    pub attention_cap: usize,
    /// Number of leading decoder stages followed by spatial dropout.
    pub dropout_stages: usize,
    pub dropout_rate: f64,
    pub upsample_block_size: usize,
    pub leaky_slope: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            input_size: [512, 512],
            in_channels: 4,
            levels: 6,
            base_channels: 16,
            channel_cap: 512,
            stem_kernel: 7,
            body_kernel: 3,
            attention_level: 32,
            attention_cap: 32 * 32,
            dropout_stages: 3,
            dropout_rate: 0.2,
            upsample_block_size: 2,
            leaky_slope: LEAKY_SLOPE,
        }
    }
}

impl GeneratorConfig {
    /// 64×64, four levels, eight base channels.
    pub fn toy() -> Self {
        GeneratorConfig {
            input_size: [64, 64],
            levels: 4,
            base_channels: 8,
            attention_level: 16,
            ..Self::default()
        }
    }

    /// Channels of encoder level `k`; `k == levels` is the bottleneck.
    pub fn channels(&self, k: usize) -> usize {
        level_channels(self.base_channels, self.channel_cap, k)
    }

    /// Spatial extent after `k` downsamplings.
    pub fn extent(&self, k: usize) -> [usize; 2] {
        self.input_size.map(|d| d >> k)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("generator: {m}")));
        if self.levels == 0 || self.base_channels == 0 || self.channel_cap == 0 || self.in_channels == 0 {
            return bad("levels, channel counts and cap must be positive".into());
        }
        if self.upsample_block_size != 2 {
            return bad(format!(
                "upsample_block_size must be 2 to mirror the stride-2 downsampling, got {}",
                self.upsample_block_size
            ));
        }
        let step = 1usize << self.levels;
        for d in self.input_size {
            if d % step != 0 || d / step < 2 {
                return bad(format!(
                    "input size {:?} must be divisible by 2^levels = {step} with a bottleneck of at least 2",
                    self.input_size
                ));
            }
        }
        for k in [self.stem_kernel, self.body_kernel] {
            if k % 2 == 0 || k / 2 >= self.input_size[0].min(self.input_size[1]) {
                return bad(format!("kernel {k} must be odd and smaller than the input"));
            }
        }
        if self.body_kernel / 2 >= self.extent(self.levels)[0].min(self.extent(self.levels)[1]) {
            return bad(format!("body kernel {} too large for the bottleneck", self.body_kernel));
        }
        if !(0..self.levels).any(|k| self.extent(k)[1] == self.attention_level) {
            let widths: Vec<usize> = (0..self.levels).map(|k| self.extent(k)[1]).collect();
            return bad(format!(
                "attention_level {} is not a decoder width (decoder widths: {widths:?})",
                self.attention_level
            ));
        }
        let k = self.attention_stage();
        let [h, w] = self.extent(k);
        if h * w > self.attention_cap {
            return bad(format!("attention at {h}×{w} exceeds attention_cap {}", self.attention_cap));
        }
        if self.dropout_stages > self.levels {
            return bad(format!("dropout_stages {} exceeds levels {}", self.dropout_stages, self.levels));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout_rate {} outside [0, 1)", self.dropout_rate));
        }
        Ok(())
    }

    /// Level index whose decoder stage carries the attention layer.
    fn attention_stage(&self) -> usize {
        (0..self.levels).find(|&k| self.extent(k)[1] == self.attention_level).unwrap_or(0)
    }
}

/// Decoder inputs to zero in [`Generator::forward_ablated`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Ablation {
    /// Level whose upsampled (non-skip) input is zeroed.
    pub zero_upsampled: Option<usize>,
    /// Zero every skip connection.
    pub zero_skips: bool,
}

/// Layer descriptors of one generator.
#[derive(Clone, Debug, PartialEq)]
struct Layers {
    encoder: Vec<ConvBlock>,
    down: Vec<ConvNormAct>,
    bottleneck: ConvBlock,
    /// Indexed by level.
    up: Vec<Conv>,
    decoder: Vec<ConvBlock>,
    attention_level: usize,
    attention: Attention,
    head: Conv,
}

impl Layers {
    fn new(cfg: &GeneratorConfig) -> Self {
        let (l, s) = (cfg.levels, cfg.leaky_slope);
        let mut encoder = Vec::with_capacity(l);
        let mut down = Vec::with_capacity(l);
        for k in 0..l {
            let ci = if k == 0 { cfg.in_channels } else { cfg.channels(k - 1) };
            let first = if k == 0 { cfg.stem_kernel } else { cfg.body_kernel };
            let co = cfg.channels(k);
            encoder.push(ConvBlock::gen(&format!("enc{k}"), ci, co, first, cfg.body_kernel, s));
            down.push(ConvNormAct::new(&format!("down{k}"), co, co, cfg.body_kernel, 2, true, s));
        }
        let bottleneck = ConvBlock::gen("bottleneck", cfg.channels(l - 1), cfg.channels(l), cfg.body_kernel, cfg.body_kernel, s);
        let r2 = cfg.upsample_block_size * cfg.upsample_block_size;
        let mut up = Vec::with_capacity(l);
        let mut decoder = Vec::with_capacity(l);
        for k in 0..l {
            let ci = cfg.channels(k + 1);
            let co = cfg.channels(k);
            let mut conv = Conv::reflect_sn(format!("up{k}.conv"), ci, co * r2, cfg.body_kernel, 1);
            conv.bias = true;
            up.push(conv);
            decoder.push(ConvBlock::gen(&format!("dec{k}"), 2 * co, co, cfg.body_kernel, cfg.body_kernel, s));
        }
        let attention_level = cfg.attention_stage();
        let attention = Attention::new(format!("attn{attention_level}"), cfg.channels(attention_level), cfg.attention_cap);
        let head = Conv::pointwise("head", cfg.channels(0), cfg.in_channels);
        Layers {
            encoder,
            down,
            bottleneck,
            up,
            decoder,
            attention_level,
            attention,
            head,
        }
    }

    fn register<T: Float>(&self, store: &mut ParamStore<T>, init: InitSpec, rng: &mut impl Rng) -> Result<()> {
        for (b, d) in self.encoder.iter().zip(&self.down) {
            b.register(store, init, rng)?;
            d.register(store, init, rng)?;
        }
        self.bottleneck.register(store, init, rng)?;
        for k in (0..self.up.len()).rev() {
            self.up[k].register(store, init, rng)?;
            self.decoder[k].register(store, init, rng)?;
            if k == self.attention_level {
                self.attention.register(store, init, rng)?;
            }
        }
        self.head.register(store, init, rng)
    }
}

/// U-Net generator: strided-conv encoder, depth-to-space decoder, skip
/// concatenations, gated self-attention and a hard-sigmoid head.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator<T: Float = f32> {
    pub cfg: GeneratorConfig,
    pub params: ParamStore<T>,
    layers: Layers,
}

impl<T: Float> Generator<T> {
    pub fn build(cfg: GeneratorConfig, init: InitSpec, rng: &mut impl Rng) -> Result<Self> {
        cfg.validate()?;
        let layers = Layers::new(&cfg);
        let mut params = ParamStore::new();
        layers.register(&mut params, init, rng)?;
        Ok(Generator { cfg, params, layers })
    }

    /// Same architecture with the given parameters (checkpoint loading,
    /// precision changes). Names and shapes must match.
    pub fn with_params<U: Float>(&self, params: ParamStore<U>) -> Result<Generator<U>> {
        let g = Generator {
            cfg: self.cfg.clone(),
            params,
            layers: self.layers.clone(),
        };
        g.check_params(&self.params)?;
        Ok(g)
    }

    fn check_params<U: Float>(&self, reference: &ParamStore<U>) -> Result<()> {
        let ours: Vec<(&str, Shape)> = self.params.iter().map(|(n, p)| (n, p.value.shape())).collect();
        let theirs: Vec<(&str, Shape)> = reference.iter().map(|(n, p)| (n, p.value.shape())).collect();
        if ours == theirs {
            Ok(())
        } else {
            Err(Error::Checkpoint("parameter names or shapes do not match the generator config".into()))
        }
    }

    pub fn expected_input(&self, n: usize) -> Shape {
        Shape::new(n, self.cfg.in_channels, self.cfg.input_size[0], self.cfg.input_size[1])
    }

    /// Forward pass on a bound copy of this generator's parameters.
    pub fn forward_graph(&self, ctx: &mut Ctx<'_, '_, T>, x: Var) -> Result<Var> {
        self.forward_ablated(ctx, x, Ablation::default())
    }

    /// Forward pass with parts of the decoder inputs zeroed, for probing
    /// information flow.
    pub fn forward_ablated(&self, ctx: &mut Ctx<'_, '_, T>, x: Var, ablation: Ablation) -> Result<Var> {
        let g = ctx.g();
        let s = g.shape(x);
        if s != self.expected_input(s.n()) {
            return Err(Error::ShapeMismatch {
                op: "generator input",
                lhs: self.expected_input(s.n()),
                rhs: s,
            });
        }
        let ly = &self.layers;
        let mut skips = Vec::with_capacity(ly.encoder.len());
        let mut y = x;
        for (block, down) in ly.encoder.iter().zip(&ly.down) {
            y = block.forward(ctx, y)?;
            skips.push(y);
            y = down.forward(ctx, y)?;
        }
        y = ly.bottleneck.forward(ctx, y)?;
        for (stage, k) in (0..ly.encoder.len()).rev().enumerate() {
            let u = ly.up[k].forward(ctx, y)?;
            let u = g.depth_to_space(u, self.cfg.upsample_block_size)?;
            let mut u = leaky_relu(g, u, self.cfg.leaky_slope);
            if ablation.zero_upsampled == Some(k) {
                u = g.scale(u, 0.0);
            }
            let skip = if ablation.zero_skips { g.scale(skips[k], 0.0) } else { skips[k] };
            y = g.concat_channels(&[u, skip])?;
            y = ly.decoder[k].forward(ctx, y)?;
            if stage < self.cfg.dropout_stages {
                y = spatial_dropout(g, y, self.cfg.dropout_rate, &mut *ctx.rng, ctx.training)?;
            }
            if k == ly.attention_level {
                y = ly.attention.forward(ctx, y)?;
            }
        }
        let out = ly.head.forward(ctx, y)?;
        Ok(hard_sigmoid(g, out))
    }

    /// Untracked forward pass on a batch.
    pub fn forward(&self, input: &Tensor<T>, mode: Mode, rng: &mut ChaCha8Rng) -> Result<Tensor<T>> {
        let mut out = run_untracked(
            &self.params,
            input,
            mode,
            rng,
            |ctx, x| self.forward_graph(ctx, x),
            |g, v| vec![(*g.value(v)).clone()],
        )?;
        Ok(out.remove(0))
    }
}
