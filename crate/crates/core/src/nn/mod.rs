//! A small neural network engine: dense, 1-D convolution, GRU, LSTM and
//! self-attention layers with hand-derived gradients, Adam, and an
//! early-stopping training loop.

pub mod adam;
pub mod gradcheck;
mod layers;
pub mod network;
pub mod scalar;
pub mod spec;
pub mod tensor;
pub mod train;

pub use gradcheck::{check_gradients, GradientReport};
pub use adam::{adam_step, AdamConfig, AdamState};
pub use network::{backward, check_params, forward, init_weights, loss_mse, mse_grad, param_layout, predict, Mode, Trace};
pub use scalar::Scalar;
pub use spec::{count_params, Dims, LayerKind, LayerSpec, ModelSpec, Reduction};
pub use tensor::{ParamSet, Tensor};
pub use train::{train, train_from, Forecaster, TrainConfig, TrainMeta, TrainedModel};
