//! Run configuration: every hyperparameter of a training run in one JSON
//! document.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::LossWeights;
use crate::models::{DiscriminatorConfig, GeneratorConfig};
use crate::optim::{InitSpec, OptimizerKind, ScheduleSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Manifest of the synthetic (source) domain.
    pub synthetic: PathBuf,
    /// Manifest of the target domain.
    pub target: PathBuf,
    pub train_fraction: f64,
    pub augment: bool,
    /// Largest shift in pixels; `None` uses 10% of the image width.
    pub max_shift: Option<usize>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            synthetic: PathBuf::from("data/synthetic.txt"),
            target: PathBuf::from("data/target.txt"),
            train_fraction: 0.8,
            augment: true,
            max_shift: None,
        }
    }
}

impl DataConfig {
    pub fn max_shift_for(&self, width: usize) -> usize {
        self.max_shift.unwrap_or(width / 10)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub generator: GeneratorConfig,
    pub discriminator: DiscriminatorConfig,
    pub init: InitSpec,
    pub loss: LossWeights,
    pub gen_schedule: ScheduleSpec,
    pub disc_schedule: ScheduleSpec,
    pub gen_optimizer: OptimizerKind,
    pub disc_optimizer: OptimizerKind,
    pub data: DataConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Checkpoint interval in epochs; the last epoch is always saved.
    pub checkpoint_every: usize,
    /// Test-set evaluation interval in epochs.
    pub test_every: usize,
    /// Receives `config.json`, `run.json`, `metrics.csv` and `checkpoints/`.
    pub run_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            generator: GeneratorConfig::default(),
            discriminator: DiscriminatorConfig::default(),
            init: InitSpec::default(),
            loss: LossWeights::default(),
            gen_schedule: ScheduleSpec::generator(),
            disc_schedule: ScheduleSpec::discriminator(),
            gen_optimizer: OptimizerKind::nadam(),
            disc_optimizer: OptimizerKind::sgd(),
            data: DataConfig::default(),
            epochs: 80,
            batch_size: 8,
            seed: 0,
            checkpoint_every: 5,
            test_every: 5,
            run_dir: PathBuf::from("runs/default"),
        }
    }
}

impl RunConfig {
    /// 64×64 models, 20 epochs of batch 4.
    pub fn toy() -> Self {
        let schedule = |target_lr| ScheduleSpec {
            target_lr,
            warmup_epochs: 2,
            total_epochs: 20,
        };
        RunConfig {
            generator: GeneratorConfig::toy(),
            discriminator: DiscriminatorConfig::toy(),
            loss: LossWeights {
                epoch_sw: 10,
                ..LossWeights::default()
            },
            gen_schedule: schedule(2e-3),
            disc_schedule: schedule(1e-3),
            epochs: 20,
            batch_size: 4,
            run_dir: PathBuf::from("runs/toy"),
            ..RunConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.generator.validate()?;
        self.discriminator.validate()?;
        self.loss.validate()?;
        self.gen_schedule.validate()?;
        self.disc_schedule.validate()?;
        if self.generator.input_size != self.discriminator.input_size
            || self.generator.in_channels != self.discriminator.in_channels
        {
            return bad("generator and discriminator disagree on input size or channels".into());
        }
        if !matches!(self.gen_optimizer, OptimizerKind::Nadam { .. }) || !matches!(self.disc_optimizer, OptimizerKind::Sgd { .. }) {
            return bad("generators use nadam and discriminators use sgd".into());
        }
        for (name, s) in [("gen_schedule", &self.gen_schedule), ("disc_schedule", &self.disc_schedule)] {
            if self.epochs > s.total_epochs {
                return bad(format!("epochs {} exceed {name}.total_epochs {}", self.epochs, s.total_epochs));
            }
        }
        if self.batch_size == 0 || self.checkpoint_every == 0 || self.test_every == 0 {
            return bad("batch_size, checkpoint_every and test_every must be positive".into());
        }
        if !(self.data.train_fraction > 0.0 && self.data.train_fraction < 1.0) {
            return bad(format!("train_fraction {} outside (0, 1)", self.data.train_fraction));
        }
        let w = self.generator.input_size[0].min(self.generator.input_size[1]);
        if self.data.max_shift_for(w) >= w {
            return bad(format!("max_shift {} must be smaller than the image", self.data.max_shift_for(w)));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }
}
