//! A small set of differentiable layers with hand-written backward passes.
//!
//! Every layer caches what it needs during `forward` and accumulates
//! parameter gradients in `backward`, returning the gradient with respect to
//! its input. Layers are generic over [`Scalar`](crate::Scalar); training runs
//! in `f32` and gradient checks in `f64`.

mod activation;
mod adam;
mod checkpoint;
mod conv;
mod dense;
mod dropout;
mod embedding;
mod gradcheck;
mod inception;
mod loss;
mod lstm;
mod param;
mod pool;

pub use activation::Activation;
pub use adam::Adam;
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use conv::Conv1d;
pub use dense::Dense;
pub use dropout::{dropout, Dropout};
pub use embedding::Embedding;
pub use gradcheck::{flatten_grads, flatten_values, set_values, GradCheck, GradReport};
pub use inception::Inception;
pub use loss::{sigmoid, sigmoid_bce, softmax_cross_entropy, softmax_rows};
pub use lstm::BiLstm;
pub use param::{HasParams, Param};
pub use pool::{MaxPool1d, PoolMode};
