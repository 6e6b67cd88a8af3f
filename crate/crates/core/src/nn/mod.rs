//! Small sequential network engine: dense and stride-1 convolution layers
//! with exact backpropagation to parameters and inputs.

mod layer;
mod loss;
mod model;
mod optim;
mod scalar;
mod tensor;
mod train;

pub use layer::{Layer, Padding, Params};
pub use loss::{cross_entropy, softmax, LabelDist, PROB_FLOOR};
pub use model::{GradientReport, Model};
pub use optim::{optimizer_step, Optimizer, OptimizerState};
pub use scalar::Scalar;
pub use tensor::Tensor;
pub use train::train_epoch;
