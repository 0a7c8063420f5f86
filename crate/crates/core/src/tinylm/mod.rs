//! From-scratch decoder-only language model: tokenizer, differentiation,
//! model, optimizer, sampling and checkpoints.

pub mod autograd;
pub mod checkpoint;
pub mod model;
pub mod optim;
pub mod sampler;
pub mod tokenizer;

pub use autograd::{Gradients, Graph, Matrix, Parameters};
pub use checkpoint::{ModelCheckpoint, TrainingMeta};
pub use model::{ModelConfig, Sequence, TinyLm};
pub use optim::{adam_step, AdamState};
pub use sampler::{sample, Sampler, SamplerConfig};
pub use tokenizer::Tokenizer;
