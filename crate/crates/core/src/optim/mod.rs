//! Optimizers, learning-rate schedule and initializers.

pub mod init;
pub mod optimizer;
pub mod schedule;

pub use init::{conv_fans, init_uniform, InitSpec};
pub use optimizer::{nadam_step, sgd_momentum_step, OptimizerKind, OptimizerState};
pub use schedule::{lr_at, ScheduleSpec};
