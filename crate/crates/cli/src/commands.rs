use std::path::{Path, PathBuf};

use rand::SeedableRng;
use vologan_core::config::RunConfig;
use vologan_core::data::{save_sample, synth_toy_dataset, Dataset, DatasetManifest, Domain, RawSample, SynthParams};
use vologan_core::gradcheck::{run_registry, TOLERANCE};
use vologan_core::models::{Discriminator, Generator, GeneratorConfig};
use vologan_core::nn::ParamStore;
use vologan_core::training::{self, latest_checkpoint, EpochSummary, RunPaths, TrainState};
use vologan_core::Error;

use crate::{CmdResult, Direction, Failure, GradcheckArgs, InspectArgs, SynthArgs, TrainArgs, TranslateArgs};

/// Reference totals `(total, non-trainable)` of the full-scale models.
const GENERATOR_REFERENCE: (usize, usize) = (39_390_917, 14_276);
const DISCRIMINATOR_REFERENCE: (usize, usize) = (9_385_686, 5_640);

fn parse_size(s: &str) -> Result<[usize; 2], Failure> {
    let dim = |v: &str| v.trim().parse::<usize>().map_err(|_| Failure::usage(format!("bad --size {s:?}; use S or HxW")));
    match s.split_once('x') {
        Some((h, w)) => Ok([dim(h)?, dim(w)?]),
        None => {
            let d = dim(s)?;
            Ok([d, d])
        }
    }
}

pub fn dataset_synth(a: SynthArgs) -> CmdResult {
    let size = parse_size(&a.size)?;
    let levels = a.levels.unwrap_or(GeneratorConfig::toy().levels);
    let step = 1usize << levels;
    if size.iter().any(|&d| d % step != 0 || d / step < 2) {
        return Err(Failure::usage(format!(
            "size {}x{} must be a multiple of 2^{levels} = {step} (the generator halves it {levels} times) \
             and leave a bottleneck of at least 2",
            size[0], size[1]
        )));
    }
    if a.n == 0 {
        return Err(Failure::usage("--n must be positive"));
    }
    let (s, t) = synth_toy_dataset(&a.out, a.n, size, a.seed, &SynthParams::default())?;
    println!(
        "wrote {} synthetic and {} target samples of {}x{} to {} (seed {})",
        s.len(),
        t.len(),
        size[0],
        size[1],
        a.out.display(),
        a.seed
    );
    println!("manifests: {}, {}", a.out.join("synthetic.txt").display(), a.out.join("target.txt").display());
    Ok(())
}

fn print_epoch(s: &EpochSummary, total: usize) {
    let l = &s.train;
    let mut line = format!(
        "epoch {:>3}/{total}  adv_g {:.4}  cyc {:.4}  ide {:.4}  ssim {:.4}  total_g {:.4}  total_d {:.4}  ({:.1} s)",
        s.epoch, l.adv_g, l.cyc, l.ide, l.ssim, l.total_g, l.total_d, s.seconds
    );
    if let Some(t) = &s.test {
        line.push_str(&format!("  test cyc {:.4} total_g {:.4}", t.cyc, t.total_g));
    }
    if let Some(c) = &s.checkpoint {
        line.push_str(&format!("  saved {}", c.display()));
    }
    println!("{line}");
}

pub fn train(a: TrainArgs) -> CmdResult {
    let mut cfg = RunConfig::load(&a.config)?;
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(b) = a.batch_size {
        cfg.batch_size = b;
    }
    if let Some(d) = a.run_dir {
        cfg.run_dir = d;
    }
    cfg.validate()?;
    let paths = RunPaths::new(&cfg.run_dir);
    let mut state = match a.resume.then(|| latest_checkpoint(&paths.checkpoints())).transpose()?.flatten() {
        Some(ckpt) => {
            let mut st = TrainState::load_checkpoint(&ckpt)?;
            let mut expected = st.config.clone();
            expected.epochs = cfg.epochs;
            if expected != cfg {
                return Err(Failure::usage(format!(
                    "{} was written with a different config; only `epochs` may change on resume",
                    ckpt.display()
                )));
            }
            st.config.epochs = cfg.epochs;
            println!("resuming from {} (epoch {})", ckpt.display(), st.epoch);
            st
        }
        None => {
            if a.resume {
                println!("no checkpoint under {}; starting fresh", paths.checkpoints().display());
            }
            TrainState::new(cfg.clone())?
        }
    };
    let synthetic = Dataset::load(&cfg.data.synthetic)?;
    let target = Dataset::load(&cfg.data.target)?;
    println!(
        "training {} epochs on {} synthetic and {} target samples; run directory {}",
        cfg.epochs,
        synthetic.len(),
        target.len(),
        cfg.run_dir.display()
    );
    training::train(&mut state, &synthetic, &target, &paths, |s| print_epoch(s, cfg.epochs))?;
    println!("metrics: {}", paths.metrics().display());
    Ok(())
}

/// A checkpoint directory, or the newest checkpoint of a run directory.
pub fn resolve_checkpoint(path: &Path) -> Result<PathBuf, Failure> {
    if path.join("manifest.json").is_file() {
        return Ok(path.to_path_buf());
    }
    for dir in [path.join("checkpoints"), path.to_path_buf()] {
        if let Some(c) = latest_checkpoint(&dir)? {
            return Ok(c);
        }
    }
    Err(Failure {
        code: 2,
        message: format!("no checkpoint found at {}", path.display()),
    })
}

pub fn load_state(path: &Path) -> Result<TrainState, Failure> {
    Ok(TrainState::load_checkpoint(&resolve_checkpoint(path)?)?)
}

pub fn generator(state: &TrainState, direction: Direction) -> &Generator {
    match direction {
        Direction::St => &state.g_st,
        Direction::Ts => &state.g_ts,
    }
}

pub fn source_domain(direction: Direction) -> Domain {
    match direction {
        Direction::St => Domain::Synthetic,
        Direction::Ts => Domain::Target,
    }
}

pub fn translate(a: TranslateArgs) -> CmdResult {
    let state = load_state(&a.checkpoint)?;
    let input = Dataset::load(&a.input)?;
    let from = source_domain(a.direction);
    if input.manifest.domain != from {
        return Err(Failure::usage(format!(
            "{} holds {} samples but direction {:?} translates {from} samples",
            a.input.display(),
            input.manifest.domain,
            a.direction
        )));
    }
    let to = match from {
        Domain::Synthetic => Domain::Target,
        Domain::Target => Domain::Synthetic,
    };
    let all: Vec<usize> = (0..input.len()).collect();
    let out = training::translate(generator(&state, a.direction), &input.stack(&all)?, a.batch_size)?;
    if out.data().iter().any(|v| !v.is_finite()) {
        return Err(Failure::numerical("translation produced non-finite values"));
    }
    let dir = a.out.join(to.as_str());
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let mut paths = Vec::with_capacity(input.len());
    for (i, sample) in out.unstack().iter().enumerate() {
        let rel = Path::new(to.as_str()).join(format!("{i:05}.vrgd"));
        save_sample(&a.out.join(&rel), &RawSample::from_tensor(sample)?)?;
        paths.push(rel);
    }
    let manifest = DatasetManifest {
        domain: to,
        size: input.manifest.size,
        paths,
        root: a.out.clone(),
    };
    let mpath = a.out.join(format!("{to}.txt"));
    manifest.save(&mpath)?;
    println!("translated {} samples ({from} -> {to}); manifest {}", manifest.len(), mpath.display());
    Ok(())
}

pub fn gradcheck(a: GradcheckArgs) -> CmdResult {
    if a.bits != 64 {
        return Err(Failure::usage(format!(
            "--bits {}: only 64-bit checks are supported; central differences at eps 1e-4 are meaningless in 32-bit",
            a.bits
        )));
    }
    let outcomes = run_registry(a.filter.as_deref());
    if outcomes.is_empty() {
        return Err(Failure::usage("no gradient check matches the filter"));
    }
    let mut worst = 0.0f64;
    let mut failed = 0;
    for o in &outcomes {
        match &o.report {
            Ok(r) => {
                worst = worst.max(r.max_rel_error);
                println!(
                    "{:<34} max_rel {:.3e}  max_abs {:.3e}  entries {:>5}  {}",
                    o.name,
                    r.max_rel_error,
                    r.max_abs_error,
                    r.entries,
                    if o.passed() { "ok" } else { "FAIL" }
                );
            }
            Err(e) => println!("{:<34} error: {e}", o.name),
        }
        failed += usize::from(!o.passed());
    }
    println!("{} checks, {failed} failed, worst relative error {worst:.3e} (tolerance {TOLERANCE:e})", outcomes.len());
    if failed > 0 {
        return Err(Failure::numerical(format!("{failed} gradient checks above tolerance")));
    }
    Ok(())
}

fn group(name: &str) -> &str {
    name.rsplit_once('.').map_or(name, |(layer, _)| layer)
}

fn layer_table(store: &ParamStore<f32>) {
    let mut rows: Vec<(String, usize, usize, Vec<String>)> = Vec::new();
    for (name, p) in store.iter() {
        let layer = group(name);
        let n = p.value.numel();
        let (tr, non) = if p.trainable { (n, 0) } else { (0, n) };
        let shape = format!("{}:{}", &name[layer.len() + 1..], p.value.shape());
        match rows.last_mut() {
            Some(r) if r.0 == layer => {
                r.1 += tr;
                r.2 += non;
                r.3.push(shape);
            }
            _ => rows.push((layer.to_string(), tr, non, vec![shape])),
        }
    }
    println!("  {:<28} {:>10} {:>8}  shapes", "layer", "trainable", "fixed");
    for (layer, tr, non, shapes) in rows {
        println!("  {layer:<28} {tr:>10} {non:>8}  {}", shapes.join(" "));
    }
}

fn report(label: &str, store: &ParamStore<f32>, reference: (usize, usize), table: bool) {
    let c = store.count();
    println!("{label}");
    println!("  total         {:>12}  (reference {:>12}, delta {:+})", c.total, reference.0, c.total as i64 - reference.0 as i64);
    println!("  trainable     {:>12}", c.trainable);
    println!(
        "  non-trainable {:>12}  (reference {:>12}, delta {:+})",
        c.non_trainable,
        reference.1,
        c.non_trainable as i64 - reference.1 as i64
    );
    if table {
        layer_table(store);
    }
}

pub fn inspect(a: InspectArgs) -> CmdResult {
    let cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    // counts do not depend on the initial values
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    let g = Generator::<f32>::build(cfg.generator.clone(), cfg.init, &mut rng)?;
    let d = Discriminator::<f32>::build(cfg.discriminator.clone(), cfg.init, &mut rng)?;
    println!(
        "input {}x{}, generator levels {} base {}, discriminator stages {} base {}",
        cfg.generator.input_size[0],
        cfg.generator.input_size[1],
        cfg.generator.levels,
        cfg.generator.base_channels,
        cfg.discriminator.encoder_stages,
        cfg.discriminator.base_channels
    );
    report("generator (each of two)", &g.params, GENERATOR_REFERENCE, !a.summary);
    report("discriminator (each of two)", &d.params, DISCRIMINATOR_REFERENCE, !a.summary);
    Ok(())
}
