//! Collaborative-learning network for RGB-D salient object detection.
//!
//! An RGB image goes through a backbone whose five side outputs are resized by
//! transition layers. Low-level features are fused into `f_l`; high-level ones
//! pass through the global guidance module into `f_h`. Three collaborators
//! (edge on `f_l`, saliency and depth on `f_h`) are supervised during training
//! and their attention logits are combined by the knowledge collector to
//! predict the final saliency map. Depth is only ever a training target.
//!
//! Parameters live in a [`ParamStore`]; a [`Session`] binds them onto an
//! autograd tape for one forward pass.

mod error;

pub mod backbone;
pub mod collaborators;
pub mod collector;
pub mod gradcheck;
pub mod guidance;
pub mod losses;
pub mod model;
pub mod nn;
pub mod optim;
pub mod params;
pub mod session;

pub use backbone::{BackboneConfig, Scale};
pub use error::{CoreError, Result};
pub use losses::{LossBreakdown, LossWeights};
pub use model::{Ablation, Model, ModelConfig, Outputs, Targets, PRESETS};
pub use optim::Sgd;
pub use params::{Builder, ParamStore};
pub use session::{Mode, ObservedStats, Session};
