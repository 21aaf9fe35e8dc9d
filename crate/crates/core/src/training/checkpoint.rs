//! Checkpoint directories: `manifest.json` plus one VTEN file per
//! parameter and optimizer slot, written to a temporary directory and
//! renamed into place.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ensure_dir, TrainState};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::nn::{check_shape, ParamStore};
use crate::optim::{OptimizerKind, OptimizerState};
use crate::tensor::{Shape, Tensor};

const FORMAT: &str = "vologan-checkpoint";
const MODELS: [&str; 4] = ["g_st", "g_ts", "d_s", "d_t"];

#[derive(Serialize, Deserialize)]
struct ParamEntry {
    name: String,
    shape: [usize; 4],
    trainable: bool,
}

#[derive(Serialize, Deserialize)]
struct OptimizerEntry {
    kind: OptimizerKind,
    step: u64,
    /// Parameters that have slots, in slot order.
    params: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    epoch: usize,
    global_step: u64,
    config: RunConfig,
    models: Vec<(String, Vec<ParamEntry>)>,
    optimizers: Vec<(String, OptimizerEntry)>,
}

pub fn checkpoint_dir_name(epoch: usize) -> String {
    format!("epoch-{epoch:04}")
}

/// Highest-epoch checkpoint under `dir`, if any.
pub fn latest_checkpoint(dir: &Path) -> Result<Option<PathBuf>> {
    if !dir.exists() {
        return Ok(None);
    }
    let entries = fs::read_dir(dir).map_err(|e| Error::io(format!("listing {}", dir.display()), e))?;
    let mut best: Option<(usize, PathBuf)> = None;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(format!("listing {}", dir.display()), e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(n) = name.strip_prefix("epoch-").and_then(|n| n.parse::<usize>().ok()) {
            if best.as_ref().is_none_or(|(b, _)| n > *b) {
                best = Some((n, entry.path()));
            }
        }
    }
    Ok(best.map(|(_, p)| p))
}

fn file_name(param: &str) -> String {
    format!("{param}.vten")
}

fn stores(state: &TrainState) -> [&ParamStore<f32>; 4] {
    [&state.g_st.params, &state.g_ts.params, &state.d_s.params, &state.d_t.params]
}

fn optimizers(state: &TrainState) -> [&OptimizerState<f32>; 4] {
    [&state.opt_g_st, &state.opt_g_ts, &state.opt_d_s, &state.opt_d_t]
}

impl TrainState {
    /// Writes `dir/epoch-NNNN` and returns its path.
    pub fn save_checkpoint(&self, dir: &Path) -> Result<PathBuf> {
        ensure_dir(dir)?;
        let name = checkpoint_dir_name(self.epoch);
        let tmp = dir.join(format!(".{name}.tmp"));
        let dst = dir.join(&name);
        if tmp.exists() {
            fs::remove_dir_all(&tmp).map_err(|e| Error::io(format!("removing {}", tmp.display()), e))?;
        }
        let mut models = Vec::new();
        for (model, store) in MODELS.iter().zip(stores(self)) {
            let sub = tmp.join(model);
            ensure_dir(&sub)?;
            let mut entries = Vec::new();
            for (pname, p) in store.iter() {
                p.value.save_vten(&sub.join(file_name(pname)))?;
                entries.push(ParamEntry {
                    name: pname.to_string(),
                    shape: p.value.shape().0,
                    trainable: p.trainable,
                });
            }
            models.push((model.to_string(), entries));
        }
        let mut opts = Vec::new();
        for (model, opt) in MODELS.iter().zip(optimizers(self)) {
            let sub = tmp.join(format!("opt_{model}"));
            ensure_dir(&sub)?;
            for (pname, slots) in &opt.slots {
                for (slot, t) in opt.kind.slot_names().iter().zip(slots) {
                    t.save_vten(&sub.join(file_name(&format!("{pname}.{slot}"))))?;
                }
            }
            opts.push((
                model.to_string(),
                OptimizerEntry {
                    kind: opt.kind,
                    step: opt.step,
                    params: opt.slots.keys().cloned().collect(),
                },
            ));
        }
        let manifest = Manifest {
            format: FORMAT.into(),
            version: 1,
            epoch: self.epoch,
            global_step: self.global_step,
            config: self.config.clone(),
            models,
            optimizers: opts,
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        let mpath = tmp.join("manifest.json");
        fs::write(&mpath, text + "\n").map_err(|e| Error::io(format!("writing {}", mpath.display()), e))?;
        if dst.exists() {
            fs::remove_dir_all(&dst).map_err(|e| Error::io(format!("removing {}", dst.display()), e))?;
        }
        fs::rename(&tmp, &dst).map_err(|e| Error::io(format!("renaming {} to {}", tmp.display(), dst.display()), e))?;
        Ok(dst)
    }

    /// Restores a state written by [`save_checkpoint`](Self::save_checkpoint).
    pub fn load_checkpoint(path: &Path) -> Result<TrainState> {
        let mpath = path.join("manifest.json");
        let text = fs::read_to_string(&mpath).map_err(|e| Error::io(format!("reading {}", mpath.display()), e))?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", mpath.display())))?;
        if m.format != FORMAT || m.version != 1 {
            return Err(Error::Checkpoint(format!("{}: unsupported format {} v{}", mpath.display(), m.format, m.version)));
        }
        let mut state = TrainState::new(m.config)?;
        state.epoch = m.epoch;
        state.global_step = m.global_step;
        {
            let TrainState { g_st, g_ts, d_s, d_t, .. } = &mut state;
            let targets = [&mut g_st.params, &mut g_ts.params, &mut d_s.params, &mut d_t.params];
            for (store, model) in targets.into_iter().zip(MODELS) {
                let entries = &m
                    .models
                    .iter()
                    .find(|(n, _)| n == model)
                    .ok_or_else(|| Error::Checkpoint(format!("manifest lacks model {model}")))?
                    .1;
                let names: Vec<&str> = store.iter().map(|(n, _)| n).collect();
                let listed: Vec<&str> = entries.iter().map(|e| e.name.as_str()).collect();
                if names != listed {
                    return Err(Error::Checkpoint(format!("{model}: parameter names differ from the config's architecture")));
                }
                for e in entries {
                    let t = Tensor::load_vten(&path.join(model).join(file_name(&e.name)))?;
                    let want = store.value(&e.name)?.shape();
                    check_shape(&e.name, want, Shape(e.shape))?;
                    check_shape(&e.name, want, t.shape())?;
                    store.set(&e.name, t)?;
                }
            }
        }
        let TrainState {
            g_st,
            g_ts,
            d_s,
            d_t,
            opt_g_st,
            opt_g_ts,
            opt_d_s,
            opt_d_t,
            ..
        } = &mut state;
        let pairs = [(opt_g_st, &g_st.params), (opt_g_ts, &g_ts.params), (opt_d_s, &d_s.params), (opt_d_t, &d_t.params)];
        for ((opt, store), model) in pairs.into_iter().zip(MODELS) {
            let entry = &m
                .optimizers
                .iter()
                .find(|(n, _)| n == model)
                .ok_or_else(|| Error::Checkpoint(format!("manifest lacks optimizer of {model}")))?
                .1;
            *opt = OptimizerState::new(entry.kind);
            opt.step = entry.step;
            let dir = path.join(format!("opt_{model}"));
            for pname in &entry.params {
                let want = store.value(pname)?.shape();
                let slots = entry
                    .kind
                    .slot_names()
                    .iter()
                    .map(|slot| {
                        let t = Tensor::load_vten(&dir.join(file_name(&format!("{pname}.{slot}"))))?;
                        check_shape(&format!("{pname}.{slot}"), want, t.shape())?;
                        Ok(t)
                    })
                    .collect::<Result<Vec<_>>>()?;
                opt.slots.insert(pname.clone(), slots);
            }
        }
        Ok(state)
    }
}
