//! MLP encoder: `Linear → LayerNorm → GELU → Dropout` blocks, a unit-norm embedding head
//! and a two-logit linear classifier head, trained with class-weighted cross-entropy.

mod model;
mod scaler;
mod train;

pub use model::{gelu, gelu_grad, gelu_tanh, layer_norm, Block, EncoderConfig, EncoderModel, ForwardOutput, Params};
pub use scaler::EmbeddingScaler;
pub use train::{train_encoder, AdamW, EpochRecord, TrainHistory, TrainSchedule};
