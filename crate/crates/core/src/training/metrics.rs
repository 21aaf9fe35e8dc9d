//! Per-step loss values and the metrics CSV.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

macro_rules! loss_values {
    ($($field:ident),* $(,)?) => {
        /// Scalar losses of one step (or the mean over several).
        #[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
        pub struct LossValues {
            $(pub $field: f64,)*
        }

        impl LossValues {
            pub const NAMES: &'static [&'static str] = &[$(stringify!($field)),*];

            pub fn to_vec(&self) -> Vec<f64> {
                vec![$(self.$field),*]
            }

            pub fn from_slice(v: &[f64]) -> Self {
                let mut it = v.iter().copied();
                LossValues { $($field: it.next().unwrap_or(f64::NAN),)* }
            }

            /// Field-wise mean; all-zero for an empty slice.
            pub fn mean(items: &[LossValues]) -> LossValues {
                if items.is_empty() {
                    return LossValues::default();
                }
                let n = items.len() as f64;
                LossValues { $($field: items.iter().map(|m| m.$field).sum::<f64>() / n,)* }
            }

            /// Name of the first non-finite value.
            pub fn first_non_finite(&self) -> Option<&'static str> {
                $(if !self.$field.is_finite() { return Some(stringify!($field)); })*
                None
            }
        }
    };
}

loss_values!(
    adv_g, cyc, ide, ssim, total_g, d_lowlevel, d_layout, d_content, total_d, adv_g_st, adv_g_ts, cyc_r, cyc_g,
    cyc_b, cyc_d, ide_r, ide_g, ide_b, ide_d, ssim_r, ssim_g, ssim_b, ssim_d,
);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Train,
    Test,
}

impl Phase {
    fn as_str(self) -> &'static str {
        match self {
            Phase::Train => "train",
            Phase::Test => "test",
        }
    }
}

/// One CSV row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepMetrics {
    pub phase: Phase,
    /// 1-based epoch the row belongs to.
    pub epoch: usize,
    /// Global optimizer step after this row's update.
    pub step: u64,
    pub losses: LossValues,
    pub lr_g: f64,
    pub lr_d: f64,
}

pub fn header() -> Vec<&'static str> {
    let mut h = vec!["phase", "epoch", "step"];
    h.extend_from_slice(LossValues::NAMES);
    h.extend(["lr_g", "lr_d"]);
    h
}

impl StepMetrics {
    fn record(&self) -> Vec<String> {
        let mut r = vec![self.phase.as_str().to_string(), self.epoch.to_string(), self.step.to_string()];
        r.extend(self.losses.to_vec().iter().map(f64::to_string));
        r.push(self.lr_g.to_string());
        r.push(self.lr_d.to_string());
        r
    }

    fn parse(rec: &csv::StringRecord) -> Option<Self> {
        let f = |i: usize| rec.get(i)?.parse::<f64>().ok();
        let n = LossValues::NAMES.len();
        let phase = match rec.get(0)? {
            "train" => Phase::Train,
            "test" => Phase::Test,
            _ => return None,
        };
        let losses: Option<Vec<f64>> = (3..3 + n).map(f).collect();
        Some(StepMetrics {
            phase,
            epoch: rec.get(1)?.parse().ok()?,
            step: rec.get(2)?.parse().ok()?,
            losses: LossValues::from_slice(&losses?),
            lr_g: f(3 + n)?,
            lr_d: f(4 + n)?,
        })
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(
        format!("metrics file {}", path.display()),
        std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()),
    )
}

pub fn read_metrics(path: &Path) -> Result<Vec<StepMetrics>> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        out.push(StepMetrics::parse(&rec).ok_or_else(|| {
            Error::io(
                format!("metrics file {}", path.display()),
                std::io::Error::new(std::io::ErrorKind::InvalidData, format!("malformed row {rec:?}")),
            )
        })?);
    }
    Ok(out)
}

/// Appends rows, creating the file with a header first when needed.
pub fn append_metrics(path: &Path, rows: &[StepMetrics]) -> Result<()> {
    let exists = path.exists();
    let file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let mut w = csv::Writer::from_writer(file);
    if !exists {
        w.write_record(header()).map_err(|e| csv_err(path, e))?;
    }
    for r in rows {
        w.write_record(r.record()).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Rewrites the file keeping only rows of epochs `≤ epoch`.
pub fn truncate_metrics(path: &Path, epoch: usize) -> Result<()> {
    if !path.exists() {
        return Ok(());
    }
    let keep: Vec<StepMetrics> = read_metrics(path)?.into_iter().filter(|r| r.epoch <= epoch).collect();
    fs::remove_file(path).map_err(|e| Error::io(format!("removing {}", path.display()), e))?;
    append_metrics(path, &keep)
}
