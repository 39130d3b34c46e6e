// Kernels index several slices in lockstep; `!(x > 0.0)` is used on purpose
// so NaN is rejected.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod autoencoder;
pub mod backprop;
pub mod classifier;
pub mod data;
pub mod error;
pub mod format;
pub mod ga;
pub mod harness;
pub mod numerics;
pub mod stack;

pub use autoencoder::{Gradients, TiedAutoencoder};
pub use backprop::{BackpropConfig, GenerationRecord, LayerResult};
pub use classifier::{train_classifier, ClassifierConfig, SoftmaxClassifier};
pub use data::{Dataset, LabeledDataset};
pub use error::{Error, Result};
pub use ga::GaConfig;
pub use harness::ExperimentConfig;
pub use numerics::{Matrix, RandomStream, Vector};
pub use stack::{train_stack, DeepStack, LayerTrainer, StackResult};
