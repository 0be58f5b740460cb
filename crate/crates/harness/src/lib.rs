//! Run harness: configuration, checkpoints, and the training, evaluation,
//! inference, gradient-check and PR-export entry points behind the `colsod`
//! binary.

mod error;

pub mod batch;
pub mod checkpoint;
pub mod config;
pub mod evaluate;
pub mod export;
pub mod gradcheck;
pub mod infer;
pub mod train;

pub use checkpoint::Checkpoint;
pub use config::RunConfig;
pub use error::{HarnessError, Result};
pub use evaluate::{evaluate, EvalOptions, EvalOutcome};
pub use export::export_pr;
pub use gradcheck::grad_check;
pub use infer::infer;
pub use train::train;
