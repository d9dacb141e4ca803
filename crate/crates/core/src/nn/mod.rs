//! A small deterministic conv-net substrate: a fixed layer vocabulary with
//! hand-written backward passes, optimizers and MAC accounting.

mod ops;
mod optim;
mod params;
mod spec;
mod tensor;

pub use ops::{backward, forward, Cache};
pub use optim::{adam_step, OptimKind, OptimState, ParamSlot};
pub use params::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, ConvParams, Params};
pub use spec::{audit_macs, count_macs, LayerKind, LayerSpec, MacReport, ModelSpec, Shape, INPUT};
pub use tensor::Tensor4;

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("layer {layer}: {message}")]
    InvalidSpec { layer: String, message: String },
    #[error("layer {layer}: dimension mismatch: {message}")]
    DimensionMismatch { layer: String, message: String },
    #[error("layer {layer}: non-finite activation")]
    NonFinite { layer: String },
    #[error("non-finite gradient in {name}")]
    NonFiniteGradient { name: String },
    #[error("cache does not belong to this model")]
    StaleCache,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid optimizer: {0}")]
    InvalidOptimizer(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
