pub mod autodiff;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod losses;
pub mod models;
pub mod nn;
pub mod optim;
pub mod tensor;
pub mod threads;
pub mod training;

pub use error::{Error, Result};
