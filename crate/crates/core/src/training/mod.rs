//! CycleGAN training: two generators, two discriminators, one combined
//! generator objective, checkpoints and metrics.

mod checkpoint;
mod metrics;

pub use checkpoint::{checkpoint_dir_name, latest_checkpoint};
pub use metrics::{append_metrics, header, read_metrics, truncate_metrics, LossValues, Phase, StepMetrics};

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::autodiff::{Graph, Var};
use crate::config::RunConfig;
use crate::data::{augment, batches, split_indices, Dataset};
use crate::error::{Error, Result};
use crate::losses::{
    adv_loss_discriminator, adv_loss_generator, channelwise, Channelwise, pixel_loss, ssim_loss, total_discriminator_loss,
    total_generator_loss, GeneratorLossParts,
};
use crate::models::{DiscOutputs, Discriminator, Generator, Mode};
use crate::nn::{Bound, Ctx};
use crate::optim::{lr_at, OptimizerState};
use crate::tensor::Tensor;

/// Order in which the two players are updated within one step.
pub const UPDATE_ORDER: &str = "generators_then_discriminators";

/// Everything needed to continue a run.
#[derive(Clone, Debug)]
pub struct TrainState {
    pub config: RunConfig,
    /// Synthetic → target.
    pub g_st: Generator,
    /// Target → synthetic.
    pub g_ts: Generator,
    /// Judges the synthetic domain.
    pub d_s: Discriminator,
    /// Judges the target domain.
    pub d_t: Discriminator,
    pub opt_g_st: OptimizerState<f32>,
    pub opt_g_ts: OptimizerState<f32>,
    pub opt_d_s: OptimizerState<f32>,
    pub opt_d_t: OptimizerState<f32>,
    /// Completed epochs.
    pub epoch: usize,
    pub global_step: u64,
}

/// RNG stream of the 0-based `epoch`; stream 0 is model initialization.
pub fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(epoch as u64 + 1);
    r
}

impl TrainState {
    /// Fresh models from the config's seed.
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let g_st = Generator::build(config.generator.clone(), config.init, &mut rng)?;
        let g_ts = Generator::build(config.generator.clone(), config.init, &mut rng)?;
        let d_s = Discriminator::build(config.discriminator.clone(), config.init, &mut rng)?;
        let d_t = Discriminator::build(config.discriminator.clone(), config.init, &mut rng)?;
        Ok(TrainState {
            opt_g_st: OptimizerState::new(config.gen_optimizer),
            opt_g_ts: OptimizerState::new(config.gen_optimizer),
            opt_d_s: OptimizerState::new(config.disc_optimizer),
            opt_d_t: OptimizerState::new(config.disc_optimizer),
            config,
            g_st,
            g_ts,
            d_s,
            d_t,
            epoch: 0,
            global_step: 0,
        })
    }

    /// Learning rates `(generator, discriminator)` of the 0-based epoch.
    pub fn learning_rates(&self, epoch: usize) -> Result<(f64, f64)> {
        Ok((lr_at(&self.config.gen_schedule, epoch)?, lr_at(&self.config.disc_schedule, epoch)?))
    }
}

/// `2·low + layout + content` of per-head losses.
fn weighted_heads(g: &Graph<f32>, o: &DiscOutputs, per_head: impl Fn(Var) -> Result<Var>) -> Result<[Var; 4]> {
    let (l, y, c) = (per_head(o.lowlevel)?, per_head(o.layout)?, per_head(o.content)?);
    Ok([total_discriminator_loss(g, l, y, c)?, l, y, c])
}

struct GeneratorPass {
    losses: LossValues,
    total: Var,
    fake_t: Var,
    fake_s: Var,
}

/// Builds the combined generator objective on `g`.
#[allow(clippy::too_many_arguments)]
fn generator_pass(
    state: &TrainState,
    g: &Graph<f32>,
    bound: [&Bound<'_, f32>; 4],
    s: Var,
    t: Var,
    training: bool,
    epoch: usize,
    rng: &mut ChaCha8Rng,
) -> Result<GeneratorPass> {
    let [b_st, b_ts, b_s, b_t] = bound;
    let mut gen = |model: &Generator, b: &Bound<'_, f32>, x: Var| {
        let mut ctx = Ctx { bound: b, training, rng: &mut *rng };
        model.forward_graph(&mut ctx, x)
    };
    let fake_t = gen(&state.g_st, b_st, s)?;
    let fake_s = gen(&state.g_ts, b_ts, t)?;
    let cyc_s = gen(&state.g_ts, b_ts, fake_t)?;
    let cyc_t = gen(&state.g_st, b_st, fake_s)?;
    let id_t = gen(&state.g_st, b_st, t)?;
    let id_s = gen(&state.g_ts, b_ts, s)?;

    let mut disc = |model: &Discriminator, b: &Bound<'_, f32>, x: Var| {
        let mut ctx = Ctx { bound: b, training, rng: &mut *rng };
        model.forward_graph(&mut ctx, x)
    };
    let on_t = disc(&state.d_t, b_t, fake_t)?;
    let on_s = disc(&state.d_s, b_s, fake_s)?;
    let adv_st = weighted_heads(g, &on_t, |v| Ok(adv_loss_generator(g, v)))?[0];
    let adv_ts = weighted_heads(g, &on_s, |v| Ok(adv_loss_generator(g, v)))?[0];

    let w = &state.config.loss;
    // a term with zero weight is reported as 0 and not built
    let term = |lambda: f64, inputs: [Var; 4], loss: &dyn Fn(&[Var]) -> Result<Var>| -> Result<Channelwise> {
        if lambda == 0.0 {
            let zero = g.constant(Tensor::scalar(0.0));
            Ok(Channelwise {
                total: zero,
                per_channel: [zero; 4],
            })
        } else {
            channelwise(g, &inputs, w.lambda_channel, loss)
        }
    };
    let cyc = term(w.lambda_cyc, [cyc_s, cyc_t, s, t], &|v| pixel_loss(g, v[0], v[1], v[2], v[3], epoch, w.epoch_sw))?;
    let ide = term(w.lambda_ide, [id_s, id_t, s, t], &|v| pixel_loss(g, v[0], v[1], v[2], v[3], epoch, w.epoch_sw))?;
    let ssim = term(w.lambda_ssim, [s, t, cyc_s, cyc_t], &|v| {
        ssim_loss(g, v[0], v[1], v[2], v[3], w.ssim_constants, w.ssim_exponents)
    })?;
    let parts = GeneratorLossParts {
        adv: Some(g.add(adv_st, adv_ts)?),
        cyc: Some(cyc),
        ide: Some(ide),
        ssim: Some(ssim),
    };
    let total = total_generator_loss(g, &parts, w)?;
    let r = total.report;
    let val = |v: Var| g.item(v) as f64;
    let losses = LossValues {
        adv_g: r.adv,
        cyc: r.cyc,
        ide: r.ide,
        ssim: r.ssim,
        total_g: r.total,
        adv_g_st: val(adv_st),
        adv_g_ts: val(adv_ts),
        cyc_r: r.cyc_channels[0],
        cyc_g: r.cyc_channels[1],
        cyc_b: r.cyc_channels[2],
        cyc_d: r.cyc_channels[3],
        ide_r: r.ide_channels[0],
        ide_g: r.ide_channels[1],
        ide_b: r.ide_channels[2],
        ide_d: r.ide_channels[3],
        ssim_r: r.ssim_channels[0],
        ssim_g: r.ssim_channels[1],
        ssim_b: r.ssim_channels[2],
        ssim_d: r.ssim_channels[3],
        ..LossValues::default()
    };
    Ok(GeneratorPass {
        losses,
        total: total.total,
        fake_t,
        fake_s,
    })
}

/// Least-squares discriminator objective of both domains on fixed fakes;
/// returns the summed total and `[total, low, layout, content]` summed
/// over domains.
#[allow(clippy::too_many_arguments)]
fn discriminator_pass(
    state: &TrainState,
    g: &Graph<f32>,
    bound: [&Bound<'_, f32>; 2],
    reals: [Var; 2],
    fakes: [Var; 2],
    training: bool,
    rng: &mut ChaCha8Rng,
) -> Result<(Var, [f64; 4])> {
    let mut total: Option<Var> = None;
    let mut parts = [0.0; 4];
    for ((model, b), (real, fake)) in [&state.d_s, &state.d_t].into_iter().zip(bound).zip(reals.into_iter().zip(fakes)) {
        let mut run = |x: Var| {
            let mut ctx = Ctx { bound: b, training, rng: &mut *rng };
            model.forward_graph(&mut ctx, x)
        };
        let on_real = run(real)?;
        let on_fake = run(fake)?;
        let heads = [
            adv_loss_discriminator(g, on_real.lowlevel, on_fake.lowlevel)?,
            adv_loss_discriminator(g, on_real.layout, on_fake.layout)?,
            adv_loss_discriminator(g, on_real.content, on_fake.content)?,
        ];
        let t = total_discriminator_loss(g, heads[0], heads[1], heads[2])?;
        parts[0] += g.item(t) as f64;
        for i in 0..3 {
            parts[i + 1] += g.item(heads[i]) as f64;
        }
        total = Some(match total {
            None => t,
            Some(acc) => g.add(acc, t)?,
        });
    }
    Ok((total.expect("two domains"), parts))
}

fn check_finite(losses: &LossValues, what: &str) -> Result<()> {
    match losses.first_non_finite() {
        Some(term) => Err(Error::NonFinite(format!("{what} loss term {term}"))),
        None => Ok(()),
    }
}

fn fill_disc(losses: &mut LossValues, d: [f64; 4]) {
    losses.total_d = d[0];
    losses.d_lowlevel = d[1];
    losses.d_layout = d[2];
    losses.d_content = d[3];
}

/// Output of [`generator_phase`]: losses and the pre-update fakes.
pub struct GeneratorPhase {
    pub losses: LossValues,
    /// `G_TS(t)`.
    pub fake_s: Tensor<f32>,
    /// `G_ST(s)`.
    pub fake_t: Tensor<f32>,
}

fn check_batches(batch_s: &Tensor<f32>, batch_t: &Tensor<f32>) -> Result<()> {
    if batch_s.shape() == batch_t.shape() {
        Ok(())
    } else {
        Err(Error::ShapeMismatch {
            op: "train_step batches",
            lhs: batch_s.shape(),
            rhs: batch_t.shape(),
        })
    }
}

/// One update of both generators on the combined objective; the
/// discriminators are read only. `epoch` is 0-based.
pub fn generator_phase(
    state: &mut TrainState,
    batch_s: &Tensor<f32>,
    batch_t: &Tensor<f32>,
    epoch: usize,
    rng: &mut ChaCha8Rng,
) -> Result<GeneratorPhase> {
    check_batches(batch_s, batch_t)?;
    let (lr_g, _) = state.learning_rates(epoch)?;
    state.g_st.params.power_iterate(1)?;
    state.g_ts.params.power_iterate(1)?;
    let (phase, grads_st, grads_ts) = {
        let g = Graph::new();
        let b_st = state.g_st.params.bind(&g, true)?;
        let b_ts = state.g_ts.params.bind(&g, true)?;
        let b_s = state.d_s.params.bind(&g, false)?;
        let b_t = state.d_t.params.bind(&g, false)?;
        let (s, t) = (g.constant(batch_s.clone()), g.constant(batch_t.clone()));
        let pass = generator_pass(state, &g, [&b_st, &b_ts, &b_s, &b_t], s, t, true, epoch, rng)?;
        check_finite(&pass.losses, "generator")?;
        let grads = g.backward(pass.total)?;
        let phase = GeneratorPhase {
            losses: pass.losses,
            fake_s: (*g.value(pass.fake_s)).clone(),
            fake_t: (*g.value(pass.fake_t)).clone(),
        };
        (phase, b_st.gradients(&grads), b_ts.gradients(&grads))
    };
    state.opt_g_st.step(&mut state.g_st.params, &grads_st, lr_g)?;
    state.opt_g_ts.step(&mut state.g_ts.params, &grads_ts, lr_g)?;
    Ok(phase)
}

/// One update of each discriminator on real batches and fixed fakes;
/// returns `[total, lowlevel, layout, content]` summed over both domains.
pub fn discriminator_phase(
    state: &mut TrainState,
    batch_s: &Tensor<f32>,
    batch_t: &Tensor<f32>,
    fake_s: &Tensor<f32>,
    fake_t: &Tensor<f32>,
    epoch: usize,
    rng: &mut ChaCha8Rng,
) -> Result<[f64; 4]> {
    check_batches(batch_s, batch_t)?;
    let (_, lr_d) = state.learning_rates(epoch)?;
    state.d_s.params.power_iterate(1)?;
    state.d_t.params.power_iterate(1)?;
    let (parts, grads_s, grads_t) = {
        let g = Graph::new();
        let b_s = state.d_s.params.bind(&g, true)?;
        let b_t = state.d_t.params.bind(&g, true)?;
        let reals = [g.constant(batch_s.clone()), g.constant(batch_t.clone())];
        let fakes = [g.constant(fake_s.clone()), g.constant(fake_t.clone())];
        let (total, parts) = discriminator_pass(state, &g, [&b_s, &b_t], reals, fakes, true, rng)?;
        let mut check = LossValues::default();
        fill_disc(&mut check, parts);
        check_finite(&check, "discriminator")?;
        let grads = g.backward(total)?;
        (parts, b_s.gradients(&grads), b_t.gradients(&grads))
    };
    state.opt_d_s.step(&mut state.d_s.params, &grads_s, lr_d)?;
    state.opt_d_t.step(&mut state.d_t.params, &grads_t, lr_d)?;
    Ok(parts)
}

/// One generator update (both generators, combined objective) followed by
/// one update of each discriminator on the pre-update fakes. `epoch` is
/// 0-based.
pub fn train_step(state: &mut TrainState, batch_s: &Tensor<f32>, batch_t: &Tensor<f32>, epoch: usize, rng: &mut ChaCha8Rng) -> Result<StepMetrics> {
    let (lr_g, lr_d) = state.learning_rates(epoch)?;
    let gen = generator_phase(state, batch_s, batch_t, epoch, rng)?;
    let parts = discriminator_phase(state, batch_s, batch_t, &gen.fake_s, &gen.fake_t, epoch, rng)?;
    let mut losses = gen.losses;
    fill_disc(&mut losses, parts);
    state.global_step += 1;
    Ok(StepMetrics {
        phase: Phase::Train,
        epoch: epoch + 1,
        step: state.global_step,
        losses,
        lr_g,
        lr_d,
    })
}

/// Every loss term on one batch in eval mode, without updates.
pub fn evaluate_batch(state: &TrainState, batch_s: &Tensor<f32>, batch_t: &Tensor<f32>, epoch: usize) -> Result<LossValues> {
    // eval mode draws nothing from the rng
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let g = Graph::new();
    let bound = [&state.g_st, &state.g_ts]
        .map(|m| m.params.bind(&g, false))
        .into_iter()
        .chain([&state.d_s, &state.d_t].map(|m| m.params.bind(&g, false)))
        .collect::<Result<Vec<_>>>()?;
    let (s, t) = (g.constant(batch_s.clone()), g.constant(batch_t.clone()));
    let pass = generator_pass(state, &g, [&bound[0], &bound[1], &bound[2], &bound[3]], s, t, false, epoch, &mut rng)?;
    let mut losses = pass.losses;
    let fakes = [g.detach(pass.fake_s), g.detach(pass.fake_t)];
    let (_, parts) = discriminator_pass(state, &g, [&bound[2], &bound[3]], [s, t], fakes, false, &mut rng)?;
    fill_disc(&mut losses, parts);
    Ok(losses)
}

/// Output locations of a run.
#[derive(Clone, Debug)]
pub struct RunPaths {
    pub root: PathBuf,
}

impl RunPaths {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunPaths { root: root.into() }
    }
    pub fn metrics(&self) -> PathBuf {
        self.root.join("metrics.csv")
    }
    pub fn checkpoints(&self) -> PathBuf {
        self.root.join("checkpoints")
    }
    pub fn config(&self) -> PathBuf {
        self.root.join("config.json")
    }
    pub fn manifest(&self) -> PathBuf {
        self.root.join("run.json")
    }
}

/// Summary handed to the progress callback after each epoch.
#[derive(Clone, Debug)]
pub struct EpochSummary {
    /// 1-based.
    pub epoch: usize,
    pub train: LossValues,
    pub test: Option<LossValues>,
    pub seconds: f64,
    pub checkpoint: Option<PathBuf>,
}

/// Paired batches of the two domains; the longer index list is cut to
/// the shorter one.
fn paired_batches(s: &[usize], t: &[usize], batch: usize, shuffle: bool, rng: &mut ChaCha8Rng) -> Vec<(Vec<usize>, Vec<usize>)> {
    let n = s.len().min(t.len());
    let bs = batches(s, batch, shuffle, rng);
    let bt = batches(t, batch, shuffle, rng);
    let (bs, bt): (Vec<usize>, Vec<usize>) = (bs.concat()[..n].to_vec(), bt.concat()[..n].to_vec());
    bs.chunks(batch).zip(bt.chunks(batch)).map(|(a, b)| (a.to_vec(), b.to_vec())).collect()
}

fn load_batch(ds: &Dataset, idx: &[usize], aug: Option<(usize, &mut ChaCha8Rng)>) -> Result<Tensor<f32>> {
    match aug {
        None => ds.stack(idx),
        Some((max_shift, rng)) => {
            let items = idx.iter().map(|&i| augment(&ds.samples[i], rng, max_shift)).collect::<Result<Vec<_>>>()?;
            Tensor::stack(&items)
        }
    }
}

/// Train/test index split of both domains.
pub fn splits(config: &RunConfig, synthetic: &Dataset, target: &Dataset) -> [(Vec<usize>, Vec<usize>); 2] {
    let f = config.data.train_fraction;
    [
        split_indices(synthetic.len(), f, config.seed),
        split_indices(target.len(), f, config.seed.wrapping_add(1)),
    ]
}

/// Mean losses over the test split in eval mode.
pub fn evaluate(state: &TrainState, synthetic: &Dataset, target: &Dataset, epoch: usize) -> Result<LossValues> {
    let [(_, test_s), (_, test_t)] = splits(&state.config, synthetic, target);
    let mut unused = ChaCha8Rng::seed_from_u64(0);
    let mut all = Vec::new();
    for (a, b) in paired_batches(&test_s, &test_t, state.config.batch_size, false, &mut unused) {
        all.push(evaluate_batch(state, &synthetic.stack(&a)?, &target.stack(&b)?, epoch)?);
    }
    let mean = LossValues::mean(&all);
    check_finite(&mean, "test")?;
    Ok(mean)
}

fn check_datasets(config: &RunConfig, synthetic: &Dataset, target: &Dataset) -> Result<()> {
    for ds in [synthetic, target] {
        if ds.manifest.size != config.generator.input_size {
            return Err(Error::Config(format!(
                "dataset {} is {:?}, the models expect {:?}",
                ds.manifest.domain, ds.manifest.size, config.generator.input_size
            )));
        }
    }
    let [(train_s, test_s), (train_t, test_t)] = splits(config, synthetic, target);
    if train_s.is_empty() || train_t.is_empty() || test_s.is_empty() || test_t.is_empty() {
        return Err(Error::Config("each domain needs at least one training and one test sample".into()));
    }
    Ok(())
}

/// Runs epochs `state.epoch + 1 ..= config.epochs`, appending metrics and
/// writing checkpoints under `paths`. A resumed run first drops metric rows
/// of epochs after the checkpoint.
pub fn train(
    state: &mut TrainState,
    synthetic: &Dataset,
    target: &Dataset,
    paths: &RunPaths,
    mut on_epoch: impl FnMut(&EpochSummary),
) -> Result<()> {
    let cfg = state.config.clone();
    check_datasets(&cfg, synthetic, target)?;
    fs::create_dir_all(&paths.root).map_err(|e| Error::io(format!("creating {}", paths.root.display()), e))?;
    cfg.save(&paths.config())?;
    let manifest = json!({
        "update_order": UPDATE_ORDER,
        "epoch_numbering": "metrics rows use 1-based epochs; schedules use the 0-based epoch index",
        "pca_fit": "union",
        "resumed_from_epoch": state.epoch,
    });
    fs::write(paths.manifest(), serde_json::to_string_pretty(&manifest).expect("json") + "\n")
        .map_err(|e| Error::io(format!("writing {}", paths.manifest().display()), e))?;
    if state.epoch == 0 {
        if paths.metrics().exists() {
            fs::remove_file(paths.metrics()).map_err(|e| Error::io(format!("removing {}", paths.metrics().display()), e))?;
        }
    } else {
        truncate_metrics(&paths.metrics(), state.epoch)?;
    }
    if state.epoch >= cfg.epochs {
        state.save_checkpoint(&paths.checkpoints())?;
        return Ok(());
    }
    let [(train_s, _), (train_t, _)] = splits(&cfg, synthetic, target);
    let max_shift = cfg.data.max_shift_for(cfg.generator.input_size[1]);
    while state.epoch < cfg.epochs {
        let started = Instant::now();
        let e = state.epoch;
        let mut rng = epoch_rng(cfg.seed, e);
        let mut rows = Vec::new();
        for (a, b) in paired_batches(&train_s, &train_t, cfg.batch_size, true, &mut rng) {
            let (xs, xt) = if cfg.data.augment {
                (load_batch(synthetic, &a, Some((max_shift, &mut rng)))?, load_batch(target, &b, Some((max_shift, &mut rng)))?)
            } else {
                (synthetic.stack(&a)?, target.stack(&b)?)
            };
            rows.push(train_step(state, &xs, &xt, e, &mut rng)?);
        }
        state.epoch += 1;
        let train_mean = LossValues::mean(&rows.iter().map(|r| r.losses).collect::<Vec<_>>());
        let test = if state.epoch.is_multiple_of(cfg.test_every) {
            let losses = evaluate(state, synthetic, target, e)?;
            let (lr_g, lr_d) = state.learning_rates(e)?;
            rows.push(StepMetrics {
                phase: Phase::Test,
                epoch: state.epoch,
                step: state.global_step,
                losses,
                lr_g,
                lr_d,
            });
            Some(losses)
        } else {
            None
        };
        append_metrics(&paths.metrics(), &rows)?;
        let checkpoint = if state.epoch.is_multiple_of(cfg.checkpoint_every) || state.epoch == cfg.epochs {
            Some(state.save_checkpoint(&paths.checkpoints())?)
        } else {
            None
        };
        on_epoch(&EpochSummary {
            epoch: state.epoch,
            train: train_mean,
            test,
            seconds: started.elapsed().as_secs_f64(),
            checkpoint,
        });
    }
    Ok(())
}

/// Eval-mode inference in batches of `batch_size`.
pub fn translate(generator: &Generator, samples: &Tensor<f32>, batch_size: usize) -> Result<Tensor<f32>> {
    let expected = generator.expected_input(samples.shape().n());
    if samples.shape() != expected {
        return Err(Error::ShapeMismatch {
            op: "translate",
            lhs: expected,
            rhs: samples.shape(),
        });
    }
    let items = samples.unstack();
    let mut out = Vec::with_capacity(items.len());
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for chunk in items.chunks(batch_size.max(1)) {
        let y = generator.forward(&Tensor::stack(chunk)?, Mode::Eval, &mut rng)?;
        out.extend(y.unstack());
    }
    Tensor::stack(&out)
}

/// Parameter gradients of the discriminator objective with respect to the
/// generators when the fakes are detached; used to verify the detachment.
pub fn detached_generator_gradients(state: &TrainState, batch_s: &Tensor<f32>, batch_t: &Tensor<f32>) -> Result<HashMap<String, Tensor<f32>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let g = Graph::new();
    let b_st = state.g_st.params.bind(&g, true)?;
    let b_ts = state.g_ts.params.bind(&g, true)?;
    let b_s = state.d_s.params.bind(&g, true)?;
    let b_t = state.d_t.params.bind(&g, true)?;
    let (s, t) = (g.constant(batch_s.clone()), g.constant(batch_t.clone()));
    let pass = generator_pass(state, &g, [&b_st, &b_ts, &b_s, &b_t], s, t, true, 0, &mut rng)?;
    let fakes = [g.detach(pass.fake_s), g.detach(pass.fake_t)];
    let (total, _) = discriminator_pass(state, &g, [&b_s, &b_t], [s, t], fakes, true, &mut rng)?;
    let grads = g.backward(total)?;
    let prefixed = |b: &Bound<'_, f32>, model: &'static str| b.gradients(&grads).into_iter().map(move |(k, v)| (format!("{model}/{k}"), v));
    Ok(prefixed(&b_st, "g_st").chain(prefixed(&b_ts, "g_ts")).collect())
}

pub(crate) fn ensure_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(format!("creating {}", p.display()), e))
}
