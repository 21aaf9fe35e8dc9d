use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-epoch learning rate: linear warmup to `target_lr`, then cosine
/// decay towards zero at `total_epochs`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub target_lr: f64,
    pub warmup_epochs: usize,
    pub total_epochs: usize,
}

impl ScheduleSpec {
    pub fn generator() -> Self {
        ScheduleSpec {
            target_lr: 2e-4,
            warmup_epochs: 10,
            total_epochs: 80,
        }
    }

    pub fn discriminator() -> Self {
        ScheduleSpec {
            target_lr: 1e-4,
            ..Self::generator()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target_lr > 0.0 && self.target_lr.is_finite()) {
            return Err(Error::Config(format!("target_lr must be positive, got {}", self.target_lr)));
        }
        if self.warmup_epochs == 0 || self.warmup_epochs >= self.total_epochs {
            return Err(Error::Config(format!(
                "need 0 < warmup_epochs < total_epochs, got {} and {}",
                self.warmup_epochs, self.total_epochs
            )));
        }
        Ok(())
    }
}

/// Learning rate for a 0-based `epoch`.
pub fn lr_at(spec: &ScheduleSpec, epoch: usize) -> Result<f64> {
    spec.validate()?;
    if epoch >= spec.total_epochs {
        return Err(Error::InvalidArgument(format!(
            "epoch {epoch} outside the schedule of {} epochs",
            spec.total_epochs
        )));
    }
    let (w, t) = (spec.warmup_epochs, spec.total_epochs);
    Ok(if epoch < w {
        spec.target_lr * ((epoch + 1) as f64 / w as f64)
    } else {
        spec.target_lr * 0.5 * (1.0 + (PI * (epoch - w) as f64 / (t - w) as f64).cos())
    })
}
