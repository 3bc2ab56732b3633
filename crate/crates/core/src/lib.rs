//! Inference-aware privacy for windowed sensor streams.
//!
//! Sensor streams are cut into windows, compressed by a supervised
//! autoencoder with orthonormal tied weights, perturbed with Laplace noise in
//! feature space (under full or relaxed sensitivity) and decoded back into the
//! original sensor layout. A Laplace baseline on raw coordinates, a budget
//! ledger and an evaluation harness complete the pipeline.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autoencoder;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod inference;
pub mod numerics;
pub mod privacy;
pub mod registry;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Default scalar.
pub type Real = f64;
pub type Matrix = numerics::DenseMatrix<Real>;
pub type Stream = dataset::SensorStream<Real>;
pub type Dataset = dataset::WindowedDataset<Real>;
pub type Autoencoder = autoencoder::AutoencoderStack<Real>;
pub type Ridge = inference::RidgeClassifier<Real>;
pub type Classifiers = evaluation::ClassifierSet<Real>;

/// Single-precision variants.
pub type Matrix32 = numerics::DenseMatrix<f32>;
pub type Dataset32 = dataset::WindowedDataset<f32>;
pub type Autoencoder32 = autoencoder::AutoencoderStack<f32>;
