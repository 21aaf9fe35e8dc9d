//! Least-squares adversarial losses, the switching pixel loss, whole-image
//! SSIM, channel-wise weighting and the generator/discriminator totals.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::tensor::Float;

/// SSIM stabilizers `(C1, C2, C3)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SsimConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl Default for SsimConstants {
    fn default() -> Self {
        let c2 = 0.03f64 * 0.03;
        SsimConstants {
            c1: 0.01 * 0.01,
            c2,
            c3: c2 / 2.0,
        }
    }
}

/// SSIM exponents `(α, β, γ)` of the luminance, contrast and structure terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SsimExponents {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for SsimExponents {
    fn default() -> Self {
        SsimExponents {
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub lambda_cyc: f64,
    pub lambda_ide: f64,
    pub lambda_ssim: f64,
    /// Per-channel weights in `r, g, b, d` order.
    pub lambda_channel: [f64; 4],
    /// Last 0-based epoch that still uses the absolute-error pixel loss.
    pub epoch_sw: usize,
    pub ssim_constants: SsimConstants,
    pub ssim_exponents: SsimExponents,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_cyc: 10.0,
            lambda_ide: 0.5,
            lambda_ssim: 1.0,
            lambda_channel: [1.0, 1.0, 1.0, 3.0],
            epoch_sw: 40,
            ssim_constants: SsimConstants::default(),
            ssim_exponents: SsimExponents::default(),
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let lambdas = [self.lambda_cyc, self.lambda_ide, self.lambda_ssim]
            .into_iter()
            .chain(self.lambda_channel);
        for l in lambdas {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::Config(format!("loss weights must be finite and ≥ 0, got {l}")));
            }
        }
        let c = self.ssim_constants;
        if !(c.c1 > 0.0 && c.c2 > 0.0 && c.c3 > 0.0) {
            return Err(Error::Config("SSIM constants must be positive".into()));
        }
        Ok(())
    }
}

fn same_shape<T: Float>(g: &Graph<T>, op: &'static str, a: Var, b: Var) -> Result<()> {
    let (sa, sb) = (g.shape(a), g.shape(b));
    if sa == sb {
        Ok(())
    } else {
        Err(Error::ShapeMismatch { op, lhs: sa, rhs: sb })
    }
}

/// `mean((d_real − 1)²) + mean(d_fake²)`.
pub fn adv_loss_discriminator<T: Float>(g: &Graph<T>, d_real: Var, d_fake: Var) -> Result<Var> {
    same_shape(g, "adv_loss_discriminator", d_real, d_fake)?;
    let real = g.mean(g.square(g.add_scalar(d_real, -1.0)));
    let fake = g.mean(g.square(d_fake));
    g.add(real, fake)
}

/// `mean((d_fake − 1)²)`.
pub fn adv_loss_generator<T: Float>(g: &Graph<T>, d_fake: Var) -> Var {
    g.mean(g.square(g.add_scalar(d_fake, -1.0)))
}

/// Mean absolute error up to and including `epoch_sw`, mean squared error
/// afterwards, summed over both pairs.
pub fn pixel_loss<T: Float>(g: &Graph<T>, xp: Var, yp: Var, x: Var, y: Var, epoch: usize, epoch_sw: usize) -> Result<Var> {
    same_shape(g, "pixel_loss", xp, x)?;
    same_shape(g, "pixel_loss", yp, y)?;
    let term = |p: Var, r: Var| -> Result<Var> {
        let d = g.sub(p, r)?;
        Ok(if epoch <= epoch_sw { g.mean(g.abs(d)) } else { g.mean(g.square(d)) })
    };
    g.add(term(xp, x)?, term(yp, y)?)
}

/// Per-`(sample, channel)` SSIM from whole-image statistics, shape `[n, c, 1, 1]`.
pub fn ssim_map<T: Float>(g: &Graph<T>, x: Var, y: Var, c: SsimConstants, e: SsimExponents) -> Result<Var> {
    same_shape(g, "ssim", x, y)?;
    let (mx, my) = (g.mean_hw(x), g.mean_hw(y));
    let (dx, dy) = (g.sub(x, mx)?, g.sub(y, my)?);
    let vx = g.mean_hw(g.square(dx));
    let vy = g.mean_hw(g.square(dy));
    let cov = g.mean_hw(g.mul(dx, dy)?);
    let (sx, sy) = (g.sqrt(vx), g.sqrt(vy));
    let sxy = g.mul(sx, sy)?;

    let ratio = |num: Var, den: Var, k: f64| -> Result<Var> { g.div(g.add_scalar(num, k), g.add_scalar(den, k)) };
    let luminance = ratio(g.scale(g.mul(mx, my)?, 2.0), g.add(g.square(mx), g.square(my))?, c.c1)?;
    let contrast = ratio(g.scale(sxy, 2.0), g.add(vx, vy)?, c.c2)?;
    let structure = ratio(cov, sxy, c.c3)?;
    let pow = |v: Var, p: f64| if p == 1.0 { v } else { g.powf(v, p) };
    g.mul(g.mul(pow(luminance, e.alpha), pow(contrast, e.beta))?, pow(structure, e.gamma))
}

/// Batch mean of [`ssim_map`].
pub fn ssim<T: Float>(g: &Graph<T>, x: Var, y: Var, c: SsimConstants, e: SsimExponents) -> Result<Var> {
    Ok(g.mean(ssim_map(g, x, y, c, e)?))
}

/// `[1 − SSIM(s, cyc_s)] + [1 − SSIM(t, cyc_t)]`.
pub fn ssim_loss<T: Float>(
    g: &Graph<T>,
    s: Var,
    t: Var,
    cyc_s: Var,
    cyc_t: Var,
    c: SsimConstants,
    e: SsimExponents,
) -> Result<Var> {
    let a = g.add_scalar(g.neg(ssim(g, s, cyc_s, c, e)?), 1.0);
    let b = g.add_scalar(g.neg(ssim(g, t, cyc_t, c, e)?), 1.0);
    g.add(a, b)
}

/// A channel-wise loss: the weighted total and the unweighted per-channel terms.
#[derive(Clone, Copy, Debug)]
pub struct Channelwise {
    pub total: Var,
    pub per_channel: [Var; 4],
}

/// `Σ_i λ_i · loss(inputs sliced to channel i)` over the four RGB-D channels.
pub fn channelwise<T: Float>(
    g: &Graph<T>,
    inputs: &[Var],
    lambda: [f64; 4],
    mut loss: impl FnMut(&[Var]) -> Result<Var>,
) -> Result<Channelwise> {
    for &v in inputs {
        let s = g.shape(v);
        if s.c() != 4 {
            return Err(Error::InvalidShape {
                op: "channelwise",
                detail: format!("expected 4 channels, got {s}"),
            });
        }
    }
    let mut per_channel = Vec::with_capacity(4);
    let mut total: Option<Var> = None;
    for (i, &l) in lambda.iter().enumerate() {
        let slices = inputs.iter().map(|&v| g.slice_channels(v, i, 1)).collect::<Result<Vec<_>>>()?;
        let li = loss(&slices)?;
        per_channel.push(li);
        let weighted = g.scale(li, l);
        total = Some(match total {
            None => weighted,
            Some(acc) => g.add(acc, weighted)?,
        });
    }
    Ok(Channelwise {
        total: total.expect("four channels"),
        per_channel: per_channel.try_into().expect("four channels"),
    })
}

/// Scalar values of the generator objective and its parts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub adv: f64,
    pub cyc: f64,
    pub ide: f64,
    pub ssim: f64,
    pub total: f64,
    pub cyc_channels: [f64; 4],
    pub ide_channels: [f64; 4],
    pub ssim_channels: [f64; 4],
}

impl LossReport {
    /// `adv + λ_cyc·cyc + λ_ide·ide + λ_ssim·ssim`.
    pub fn compose(adv: f64, cyc: f64, ide: f64, ssim: f64, w: &LossWeights) -> f64 {
        adv + w.lambda_cyc * cyc + w.lambda_ide * ide + w.lambda_ssim * ssim
    }
}

/// Inputs of the generator objective. `cyc`, `ide` and `ssim` are
/// channel-wise (already λ_channel weighted).
#[derive(Clone, Copy, Debug, Default)]
pub struct GeneratorLossParts {
    pub adv: Option<Var>,
    pub cyc: Option<Channelwise>,
    pub ide: Option<Channelwise>,
    pub ssim: Option<Channelwise>,
}

/// The differentiable total and its report.
#[derive(Clone, Copy, Debug)]
pub struct GeneratorLoss {
    pub total: Var,
    pub report: LossReport,
}

pub fn total_generator_loss<T: Float>(g: &Graph<T>, parts: &GeneratorLossParts, w: &LossWeights) -> Result<GeneratorLoss> {
    let missing = |name: &str| Error::InvalidArgument(format!("generator loss part {name} is missing"));
    let adv = parts.adv.ok_or_else(|| missing("adv"))?;
    let cyc = parts.cyc.ok_or_else(|| missing("cyc"))?;
    let ide = parts.ide.ok_or_else(|| missing("ide"))?;
    let ssim = parts.ssim.ok_or_else(|| missing("ssim"))?;
    let total = g.add(
        g.add(adv, g.scale(cyc.total, w.lambda_cyc))?,
        g.add(g.scale(ide.total, w.lambda_ide), g.scale(ssim.total, w.lambda_ssim))?,
    )?;
    let val = |v: Var| g.item(v).f64();
    let chans = |c: &Channelwise| c.per_channel.map(val);
    let (a, c, i, s) = (val(adv), val(cyc.total), val(ide.total), val(ssim.total));
    Ok(GeneratorLoss {
        total,
        report: LossReport {
            adv: a,
            cyc: c,
            ide: i,
            ssim: s,
            total: val(total),
            cyc_channels: chans(&cyc),
            ide_channels: chans(&ide),
            ssim_channels: chans(&ssim),
        },
    })
}

/// Head weighting of the three-headed discriminator: `2·low + layout + content`.
pub fn total_discriminator_loss<T: Float>(g: &Graph<T>, lowlevel: Var, layout: Var, content: Var) -> Result<Var> {
    g.add(g.add(g.scale(lowlevel, 2.0), layout)?, content)
}
