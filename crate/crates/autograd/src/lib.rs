//! Reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! The engine covers exactly the operations a convolutional dense-prediction
//! network needs: strided/dilated convolution, batch normalization, (parametric)
//! rectification, max pooling, bilinear resizing, channel softmax, spatial and
//! channel broadcasting products, and the classification/regression losses.
//!
//! ```
//! use colsod_autograd::{Tape, Tensor};
//!
//! let tape = Tape::new();
//! let x = tape.leaf(Tensor::new(&[1, 1, 1, 2], vec![1.0, -2.0]).unwrap());
//! let y = x.relu().sum_all();
//! let grads = tape.backward(&y);
//! assert_eq!(grads.get(&x).unwrap().data(), &[1.0, 0.0]);
//! ```

mod error;
pub mod gradcheck;
mod ops;
mod tape;
mod tensor;

pub use error::{Result, TensorError};
pub use ops::conv::Conv2dOptions;
pub use ops::loss::Reduction;
pub use ops::norm::{BatchNormMode, BatchStats};
pub use ops::resize::{linear_taps, LinearTap};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
