//! Policy-value network with hand-derived gradients, diagonal Gaussian
//! policy, adaptive-moment optimizer and checkpoint files.

mod checkpoint;
mod gradcheck;
mod network;
mod optim;
mod params;
mod policy;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use gradcheck::{gradient_check, GradCheckReport, GRAD_CHECK_FLOOR};
pub use network::{backward, cnn_forward, forward, forward_batch, ForwardCache, ForwardOutput};
pub use optim::{optimizer_step, OptimizerState, StepReport};
pub use params::{ConvLayerSpec, NetworkSpec, PolicyParams, TensorSlot, Variant, HIDDEN_BIAS_RANGE, INITIAL_LOG_STD, LOG_STD_RANGE};
pub use policy::{entropy, gaussian_log_prob, gaussian_policy, ActionSample};
