//! Parameter counts from plain shape arithmetic, independent of the layer
//! descriptors.

use vologan_core::models::{DiscriminatorConfig, GeneratorConfig};

#[derive(Default, Debug, PartialEq, Eq, Clone, Copy)]
pub struct Counts {
    pub trainable: usize,
    pub non_trainable: usize,
}

impl Counts {
    pub fn total(&self) -> usize {
        self.trainable + self.non_trainable
    }

    fn conv(&mut self, ci: usize, co: usize, k: usize, bias: bool, sn: bool) {
        self.trainable += co * ci * k * k + if bias { co } else { 0 };
        if sn {
            self.non_trainable += co;
        }
    }

    /// SN conv without bias, then instance norm gain and bias.
    fn conv_in(&mut self, ci: usize, co: usize, k: usize) {
        self.conv(ci, co, k, false, true);
        self.trainable += 2 * co;
    }

    fn attention(&mut self, c: usize) {
        let r = (c / 8).max(1);
        self.conv(c, r, 1, true, false);
        self.conv(c, r, 1, true, false);
        self.conv(c, c, 1, true, false);
        self.trainable += 1;
    }
}

fn ch(base: usize, cap: usize, k: usize) -> usize {
    (base << k).min(cap)
}

pub fn generator(cfg: &GeneratorConfig) -> Counts {
    let mut n = Counts::default();
    let c = |k| ch(cfg.base_channels, cfg.channel_cap, k);
    let levels = cfg.levels;
    for k in 0..levels {
        let ci = if k == 0 { cfg.in_channels } else { c(k - 1) };
        let k0 = if k == 0 { cfg.stem_kernel } else { cfg.body_kernel };
        n.conv_in(ci, c(k), k0);
        n.conv_in(c(k), c(k), cfg.body_kernel);
        n.conv_in(c(k), c(k), cfg.body_kernel);
    }
    n.conv_in(c(levels - 1), c(levels), cfg.body_kernel);
    n.conv_in(c(levels), c(levels), cfg.body_kernel);
    let r2 = cfg.upsample_block_size.pow(2);
    for k in 0..levels {
        n.conv(c(k + 1), c(k) * r2, cfg.body_kernel, true, true);
        n.conv_in(2 * c(k), c(k), cfg.body_kernel);
        n.conv_in(c(k), c(k), cfg.body_kernel);
        if cfg.input_size[1] >> k == cfg.attention_level {
            n.attention(c(k));
        }
    }
    n.conv(c(0), cfg.in_channels, 1, true, false);
    n
}

pub fn discriminator(cfg: &DiscriminatorConfig) -> Counts {
    let mut n = Counts::default();
    let c = |k| ch(cfg.base_channels, cfg.channel_cap, k);
    let s = cfg.encoder_stages;
    n.conv_in(cfg.in_channels, c(0), cfg.stem_kernel);
    for k in 0..s {
        n.conv_in(c(k), c(k + 1), cfg.kernel);
        n.conv_in(c(k + 1), c(k + 1), cfg.kernel);
    }
    let top = c(s);
    if cfg.attention {
        n.attention(top);
    }
    n.conv(top, 1, 1, true, false);
    n.conv(top, 1, 1, true, false);
    for _ in 0..cfg.layout_depth {
        n.conv_in(1, 1, cfg.kernel);
    }
    n.conv(1, 1, 1, true, false);
    let mut e = cfg.input_size.map(|d| d >> s);
    let mut stages = 0;
    while cfg.content_depth.map_or(e[0] > 1 || e[1] > 1, |d| stages < d) {
        n.conv(top, top, cfg.kernel, true, true);
        e = e.map(|d| d.div_ceil(2));
        stages += 1;
    }
    n.conv(top, 1, 1, true, false);
    n
}
