//! Multimodal rating prediction that stays accurate when modalities are
//! missing.
//!
//! Four per-sample channels feed the model: the user's review history, the
//! item's review history, item metadata text and item image features. Each
//! channel is encoded (LSTM with mean pooling for text, a tanh projection for
//! images), passed through its own autoencoder, and the four reconstructions
//! are scored by a linear layer. Training randomly drops whole channels so
//! the autoencoders learn to impute them from a zero input.

pub mod config;
pub mod data;
pub mod encoders;
pub mod error;
pub mod eval;
pub mod experiments;
pub mod fusion;
pub mod gradcheck;
pub mod graph;
pub mod imputation;
pub mod lstm;
pub mod modality;
pub mod model;
pub mod optim;
pub mod params;
pub mod tensor;
pub mod train;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use eval::{ExperimentReport, Regime};
pub use modality::{Modality, ModalityMask};
pub use model::{Model, ModelConfig, Objective};
pub use params::ParameterStore;
pub use tensor::Tensor;
pub use train::{train, TrainConfig, TrainOutcome};
