//! The trainable decoder: skip-connection perceptron with hand-written
//! backpropagation, Adam, and the data + eikonal objective.

mod adam;
mod checkpoint;
mod mlp;
mod network;
mod train;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{Checkpoint, CheckpointHeader};
pub use mlp::{mlp_backward, mlp_forward, Activation, Mlp, MlpCache, MlpConfig, MlpGradients};
pub use network::{
    Conditioning, GlobalProjection, InputLayout, NetworkConfig, PreparedScene, SceneContext, SdfNetwork,
};
pub use train::{
    batch_gradient, mean_abs_error, stencil_loss, stencil_points, train_step, BatchItem, LossReport,
    StencilTerms, TrainConfig, Trainer, TrainingScene, STENCIL,
};
