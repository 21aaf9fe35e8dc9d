use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{level_channels, run_untracked, Mode};
use crate::autodiff::Var;
use crate::error::{Error, Result};
use crate::nn::{spatial_dropout, standard_dropout, Attention, Conv, ConvBlock, ConvNormAct, Ctx, ParamStore, LEAKY_SLOPE};
use crate::optim::InitSpec;
use crate::tensor::{Float, Shape, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscriminatorConfig {
    /// `[height, width]`.
    pub input_size: [usize; 2],
    pub in_channels: usize,
    pub encoder_stages: usize,
    pub base_channels: usize,
    pub channel_cap: usize,
    pub stem_kernel: usize,
    pub kernel: usize,
    /// Extra downsampling stages of the layout branch.
    pub layout_depth: usize,
    /// Downsampling stages of the content branch; `None` runs until 1×1.
    pub content_depth: Option<usize>,
    pub dropout_rate: f64,
    pub attention: bool,
    /// Largest `h·w` the attention layer accepts.
    pub attention_cap: usize,
    pub leaky_slope: f64,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        DiscriminatorConfig {
            input_size: [512, 512],
            in_channels: 4,
            encoder_stages: 3,
            base_channels: 48,
            channel_cap: 512,
            stem_kernel: 7,
            kernel: 3,
            layout_depth: 1,
            content_depth: None,
            dropout_rate: 0.2,
            attention: true,
            attention_cap: 64 * 64,
            leaky_slope: LEAKY_SLOPE,
        }
    }
}

/// Extent after one reflect-padded stride-2 conv.
fn halve(d: usize) -> usize {
    d.div_ceil(2)
}

impl DiscriminatorConfig {
    /// 64×64 input, eight base channels.
    pub fn toy() -> Self {
        DiscriminatorConfig {
            input_size: [64, 64],
            base_channels: 8,
            ..Self::default()
        }
    }

    /// Channels after encoder stage `k` (`k = 0` is the stem).
    pub fn channels(&self, k: usize) -> usize {
        level_channels(self.base_channels, self.channel_cap, k)
    }

    /// Spatial extent of the encoder output.
    pub fn encoder_extent(&self) -> [usize; 2] {
        self.input_size.map(|d| d >> self.encoder_stages)
    }

    pub fn layout_extent(&self) -> [usize; 2] {
        self.encoder_extent().map(|d| (0..self.layout_depth).fold(d, |d, _| halve(d)))
    }

    /// Number of content-branch downsampling stages.
    pub fn content_stages(&self) -> usize {
        self.content_depth.unwrap_or_else(|| {
            let mut e = self.encoder_extent();
            let mut n = 0;
            while e[0] > 1 || e[1] > 1 {
                e = e.map(halve);
                n += 1;
            }
            n
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("discriminator: {m}")));
        if self.encoder_stages == 0 || self.base_channels == 0 || self.channel_cap == 0 || self.in_channels == 0 {
            return bad("stages, channel counts and cap must be positive".into());
        }
        let step = 1usize << self.encoder_stages;
        for d in self.input_size {
            if d % step != 0 || d / step < 2 {
                return bad(format!(
                    "input size {:?} must be divisible by 2^encoder_stages = {step} with an encoder output of at least 2",
                    self.input_size
                ));
            }
        }
        let [eh, ew] = self.encoder_extent();
        if self.stem_kernel.is_multiple_of(2) || self.stem_kernel / 2 >= self.input_size[0].min(self.input_size[1]) {
            return bad(format!("stem kernel {} must be odd and smaller than the input", self.stem_kernel));
        }
        if self.kernel.is_multiple_of(2) || self.kernel / 2 >= eh.min(ew) {
            return bad(format!("kernel {} must be odd and smaller than the encoder output", self.kernel));
        }
        let [lh, lw] = self.layout_extent();
        if lh * lw < 2 {
            return bad(format!("layout_depth {} leaves fewer than two positions", self.layout_depth));
        }
        let mut e = self.encoder_extent();
        for _ in 0..self.content_stages() {
            if e[0] < 2 || e[1] < 2 {
                return bad("content_depth downsamples past 1×1".into());
            }
            e = e.map(halve);
        }
        if self.attention && eh * ew > self.attention_cap {
            return bad(format!("attention at {eh}×{ew} exceeds attention_cap {}", self.attention_cap));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout_rate {} outside [0, 1)", self.dropout_rate));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Layers {
    stem: ConvNormAct,
    blocks: Vec<ConvBlock>,
    down: Vec<ConvNormAct>,
    attention: Option<Attention>,
    lowlevel_head: Conv,
    layout_in: Conv,
    layout_down: Vec<ConvNormAct>,
    layout_head: Conv,
    content_down: Vec<ConvNormAct>,
    content_head: Conv,
}

impl Layers {
    fn new(cfg: &DiscriminatorConfig) -> Self {
        let s = cfg.leaky_slope;
        let stem = ConvNormAct::new("stem", cfg.in_channels, cfg.channels(0), cfg.stem_kernel, 1, true, s);
        let mut blocks = Vec::new();
        let mut down = Vec::new();
        for k in 0..cfg.encoder_stages {
            let (ci, co) = (cfg.channels(k), cfg.channels(k + 1));
            blocks.push(ConvBlock::disc(&format!("enc{k}"), ci, co, cfg.kernel, s));
            down.push(ConvNormAct::new(&format!("down{k}"), co, co, cfg.kernel, 2, true, s));
        }
        let c = cfg.channels(cfg.encoder_stages);
        let [eh, ew] = cfg.encoder_extent();
        let attention = cfg.attention.then(|| Attention::new("attn", c, cfg.attention_cap.max(eh * ew)));
        let layout_down = (0..cfg.layout_depth)
            .map(|i| ConvNormAct::new(&format!("layout.down{i}"), 1, 1, cfg.kernel, 2, true, s))
            .collect();
        let content_down = (0..cfg.content_stages())
            .map(|i| ConvNormAct::new(&format!("content.down{i}"), c, c, cfg.kernel, 2, false, s))
            .collect();
        Layers {
            stem,
            blocks,
            down,
            attention,
            lowlevel_head: Conv::pointwise("lowlevel.head", c, 1),
            layout_in: Conv::pointwise("layout.in", c, 1),
            layout_down,
            layout_head: Conv::pointwise("layout.head", 1, 1),
            content_down,
            content_head: Conv::pointwise("content.head", c, 1),
        }
    }

    fn register<T: Float>(&self, store: &mut ParamStore<T>, init: InitSpec, rng: &mut impl Rng) -> Result<()> {
        self.stem.register(store, init, rng)?;
        for (b, d) in self.blocks.iter().zip(&self.down) {
            b.register(store, init, rng)?;
            d.register(store, init, rng)?;
        }
        if let Some(a) = &self.attention {
            a.register(store, init, rng)?;
        }
        self.lowlevel_head.register(store, init, rng)?;
        self.layout_in.register(store, init, rng)?;
        for l in &self.layout_down {
            l.register(store, init, rng)?;
        }
        self.layout_head.register(store, init, rng)?;
        for l in &self.content_down {
            l.register(store, init, rng)?;
        }
        self.content_head.register(store, init, rng)
    }
}

/// The three discriminator heads.
#[derive(Clone, Copy, Debug)]
pub struct DiscOutputs {
    /// `[n, 1, h/8, w/8]` map from the encoder output.
    pub lowlevel: Var,
    /// Single-channel spatial map of the layout branch.
    pub layout: Var,
    /// `[n, 1, 1, 1]` score of the content branch.
    pub content: Var,
}

/// Encoder with gated self-attention, then low-level, layout and content heads.
#[derive(Clone, Debug, PartialEq)]
pub struct Discriminator<T: Float = f32> {
    pub cfg: DiscriminatorConfig,
    pub params: ParamStore<T>,
    layers: Layers,
}

impl<T: Float> Discriminator<T> {
    pub fn build(cfg: DiscriminatorConfig, init: InitSpec, rng: &mut impl Rng) -> Result<Self> {
        cfg.validate()?;
        let layers = Layers::new(&cfg);
        let mut params = ParamStore::new();
        layers.register(&mut params, init, rng)?;
        Ok(Discriminator { cfg, params, layers })
    }

    /// Same architecture with the given parameters. Names and shapes must match.
    pub fn with_params<U: Float>(&self, params: ParamStore<U>) -> Result<Discriminator<U>> {
        let ours: Vec<(&str, Shape)> = self.params.iter().map(|(n, p)| (n, p.value.shape())).collect();
        let theirs: Vec<(&str, Shape)> = params.iter().map(|(n, p)| (n, p.value.shape())).collect();
        if ours != theirs {
            return Err(Error::Checkpoint("parameter names or shapes do not match the discriminator config".into()));
        }
        Ok(Discriminator {
            cfg: self.cfg.clone(),
            params,
            layers: self.layers.clone(),
        })
    }

    pub fn expected_input(&self, n: usize) -> Shape {
        Shape::new(n, self.cfg.in_channels, self.cfg.input_size[0], self.cfg.input_size[1])
    }

    pub fn forward_graph(&self, ctx: &mut Ctx<'_, '_, T>, x: Var) -> Result<DiscOutputs> {
        let g = ctx.g();
        let s = g.shape(x);
        if s != self.expected_input(s.n()) {
            return Err(Error::ShapeMismatch {
                op: "discriminator input",
                lhs: self.expected_input(s.n()),
                rhs: s,
            });
        }
        let ly = &self.layers;
        let mut y = ly.stem.forward(ctx, x)?;
        for (b, d) in ly.blocks.iter().zip(&ly.down) {
            y = b.forward(ctx, y)?;
            y = d.forward(ctx, y)?;
        }
        if let Some(a) = &ly.attention {
            y = a.forward(ctx, y)?;
        }
        let lowlevel = ly.lowlevel_head.forward(ctx, y)?;

        // single-channel branch: element-wise dropout
        let mut l = ly.layout_in.forward(ctx, y)?;
        l = standard_dropout(g, l, self.cfg.dropout_rate, &mut *ctx.rng, ctx.training)?;
        for d in &ly.layout_down {
            l = d.forward(ctx, l)?;
        }
        let layout = ly.layout_head.forward(ctx, l)?;

        // multi-channel branch: whole-channel dropout
        let mut c = spatial_dropout(g, y, self.cfg.dropout_rate, &mut *ctx.rng, ctx.training)?;
        for d in &ly.content_down {
            c = d.forward(ctx, c)?;
        }
        let content = ly.content_head.forward(ctx, g.mean_hw(c))?;
        Ok(DiscOutputs { lowlevel, layout, content })
    }

    /// Untracked forward pass; returns `[lowlevel, layout, content]`.
    pub fn forward(&self, input: &Tensor<T>, mode: Mode, rng: &mut ChaCha8Rng) -> Result<[Tensor<T>; 3]> {
        let out = run_untracked(&self.params, input, mode, rng, |ctx, x| self.forward_graph(ctx, x), |g, o| {
            [o.lowlevel, o.layout, o.content].iter().map(|&v| (*g.value(v)).clone()).collect()
        })?;
        Ok(out.try_into().expect("three heads"))
    }
}
