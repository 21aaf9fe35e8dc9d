#![allow(dead_code)]
pub mod oracle;

use std::path::Path;

use vologan_core::config::RunConfig;
use vologan_core::data::{synth_toy_dataset, Dataset, SynthParams};
use vologan_core::models::{DiscriminatorConfig, GeneratorConfig};
use vologan_core::optim::ScheduleSpec;

/// 32×32 models small enough for multi-epoch runs inside unit tests.
pub fn tiny_config(epochs: usize) -> RunConfig {
    let schedule = |target_lr| ScheduleSpec {
        target_lr,
        warmup_epochs: 1,
        total_epochs: epochs.max(2),
    };
    let mut cfg = RunConfig::toy();
    cfg.generator = GeneratorConfig {
        input_size: [32, 32],
        levels: 3,
        base_channels: 4,
        attention_level: 16,
        ..GeneratorConfig::toy()
    };
    cfg.discriminator = DiscriminatorConfig {
        input_size: [32, 32],
        base_channels: 4,
        ..DiscriminatorConfig::toy()
    };
    cfg.gen_schedule = schedule(2e-3);
    cfg.disc_schedule = schedule(1e-3);
    cfg.loss.epoch_sw = 2;
    cfg.epochs = epochs;
    cfg.batch_size = 4;
    cfg
}

/// `n` samples per domain at 32×32, loaded back from disk.
pub fn tiny_datasets(dir: &Path, n: usize, seed: u64) -> (Dataset, Dataset) {
    synth_toy_dataset(dir, n, [32, 32], seed, &SynthParams::default()).unwrap();
    (
        Dataset::load(&dir.join("synthetic.txt")).unwrap(),
        Dataset::load(&dir.join("target.txt")).unwrap(),
    )
}
