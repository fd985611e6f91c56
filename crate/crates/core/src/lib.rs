//! Per-layer training-time prediction for neural networks.
//!
//! Layers are described by their hyperparameters, turned into feature
//! vectors (operation counts, memory footprint, hardware specs), and fed to
//! one regressor per layer family. Whole-model estimates sum those per-layer
//! predictions over layers and batches.

pub mod cli;
pub mod datagen;
pub mod dataset;
pub mod domain;
pub mod error;
pub mod featurize;
pub mod learners;
pub mod predictor;

pub use domain::{
    Catalog, FeatureSet, HardwareEncoding, HardwareProfile, LayerConfig, LayerFamily, LayerParams,
};
pub use error::{Error, Result};
