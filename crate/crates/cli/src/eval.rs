use std::fs;
use std::io::Write;
use std::path::Path;

use serde_json::{json, Map, Value};
use vologan_core::config::RunConfig;
use vologan_core::data::Dataset;
use vologan_core::eval::{channel_histogram, compare_domains, layout_maps, pointcloud_export, write_scatter_csv, DomainComparison, PCA_FIT};
use vologan_core::tensor::Tensor;
use vologan_core::training::{self, RunPaths, TrainState};
use vologan_core::Error;

use crate::commands::{generator, load_state, resolve_checkpoint, source_domain};
use crate::{CmdResult, Failure, HistArgs, Judge, LayoutArgs, PcaArgs, PointcloudArgs, SampleArgs};

fn io(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io(format!("writing {}", path.display()), e)
}

fn stage_json(c: &DomainComparison) -> Value {
    json!({
        "domain_distance": c.distance,
        "explained_variance": c.model.explained_variance,
        "real_spread": c.real_spread,
        "generated_spread": c.generated_spread,
    })
}

pub fn pca(a: PcaArgs) -> CmdResult {
    let paths = RunPaths::new(&a.run_dir);
    let cfg = RunConfig::load(&paths.config())?;
    let synthetic = Dataset::load(&cfg.data.synthetic)?;
    let target = Dataset::load(&cfg.data.target)?;
    let n = a.n.min(synthetic.len()).min(target.len());
    if n < 2 || a.k > 2 * n {
        return Err(Failure::usage(format!("need at least 2 samples per set and k ≤ {}, got n = {n}, k = {}", 2 * n, a.k)));
    }
    let idx: Vec<usize> = (0..n).collect();
    let real = target.stack(&idx)?;
    let source = synthetic.stack(&idx)?;
    let (before, after) = if a.before || a.after { (a.before, a.after) } else { (true, true) };

    let mut stages: Vec<(&str, Tensor<f32>, Option<String>)> = vec![("untranslated", source.clone(), None)];
    if before {
        let st = TrainState::new(cfg.clone())?;
        stages.push(("before", training::translate(&st.g_st, &source, cfg.batch_size)?, None));
    }
    if after {
        let ckpt = resolve_checkpoint(&a.run_dir)?;
        let st = TrainState::load_checkpoint(&ckpt)?;
        stages.push(("after", training::translate(&st.g_st, &source, cfg.batch_size)?, Some(ckpt.display().to_string())));
    }

    let out = a.out.unwrap_or_else(|| a.run_dir.join("eval"));
    fs::create_dir_all(&out).map_err(|e| Error::io(format!("creating {}", out.display()), e))?;
    let mut summary = Map::new();
    let mut distances = Vec::new();
    for (name, generated, ckpt) in &stages {
        let c = compare_domains(&real, generated, a.k)?;
        if !c.distance.is_finite() {
            return Err(Failure::numerical(format!("{name}: non-finite domain distance")));
        }
        write_scatter_csv(&out.join(format!("pca_{name}.csv")), &c.scatter_rows())?;
        let mut entry = stage_json(&c);
        if let Some(p) = ckpt {
            entry["checkpoint"] = json!(p);
        }
        summary.insert(name.to_string(), entry);
        println!("domain_distance {name:<12} {:.6}", c.distance);
        distances.push((*name, c.distance));
    }
    let file = out.join("pca.json");
    let doc = json!({ "pca_fit": PCA_FIT, "k": a.k, "n_per_set": n, "stages": summary });
    fs::write(&file, serde_json::to_string_pretty(&doc).expect("json") + "\n").map_err(io(&file))?;
    let find = |s: &str| distances.iter().find(|(n, _)| *n == s).map(|d| d.1);
    if let (Some(b), Some(f)) = (find("before"), find("after")) {
        println!("domain_distance {} ({:.6} -> {:.6})", if f < b { "decreased" } else { "did not decrease" }, b, f);
    }
    println!("pca fitted on the {PCA_FIT} of real and generated samples; summary {}", file.display());
    Ok(())
}

/// The selected sample, translated when a checkpoint is given.
fn sample(a: &SampleArgs) -> Result<Tensor<f32>, Failure> {
    let ds = Dataset::load(&a.manifest)?;
    if a.index >= ds.len() {
        return Err(Failure::usage(format!("--index {} out of range for {} samples", a.index, ds.len())));
    }
    let x = ds.samples[a.index].clone();
    match &a.checkpoint {
        None => Ok(x),
        Some(c) => {
            if ds.manifest.domain != source_domain(a.direction) {
                return Err(Failure::usage(format!("direction {:?} does not translate {} samples", a.direction, ds.manifest.domain)));
            }
            let st = load_state(c)?;
            Ok(training::translate(generator(&st, a.direction), &x, 1)?)
        }
    }
}

pub fn hist(a: HistArgs) -> CmdResult {
    let x = sample(&a.sample)?;
    let counts = channel_histogram(&x, a.bins)?;
    let mut text = String::from("bin,lo,hi,r,g,b,d\n");
    for b in 0..a.bins {
        let (lo, hi) = (b as f64 / a.bins as f64, (b + 1) as f64 / a.bins as f64);
        text.push_str(&format!("{b},{lo},{hi},{},{},{},{}\n", counts[0][b], counts[1][b], counts[2][b], counts[3][b]));
    }
    match &a.out {
        Some(p) => fs::write(p, text).map_err(io(p))?,
        None => std::io::stdout().write_all(text.as_bytes()).map_err(io(Path::new("stdout")))?,
    }
    Ok(())
}

pub fn pointcloud(a: PointcloudArgs) -> CmdResult {
    let x = sample(&a.sample)?;
    let n = pointcloud_export(&x, &a.out, a.stride)?;
    println!("wrote {n} points to {}", a.out.display());
    Ok(())
}

pub fn layout(a: LayoutArgs) -> CmdResult {
    let st = load_state(&a.checkpoint)?;
    let ds = Dataset::load(&a.manifest)?;
    if a.index >= ds.len() {
        return Err(Failure::usage(format!("--index {} out of range for {} samples", a.index, ds.len())));
    }
    let disc = match a.discriminator {
        Judge::S => &st.d_s,
        Judge::T => &st.d_t,
    };
    let map = layout_maps(disc, &ds.samples[a.index])?;
    let s = map.shape();
    println!("layout map {}x{} (higher reads as real)", s.h(), s.w());
    for y in 0..s.h() {
        let row: Vec<String> = (0..s.w()).map(|x| format!("{:>8.4}", map.at(0, 0, y, x))).collect();
        println!("{}", row.join(" "));
    }
    Ok(())
}
