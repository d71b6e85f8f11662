//! Adversarial correction of misspecified prior generative models for
//! tabular regression.
//!
//! A fitted prior (ordinary least squares or gradient-boosted trees) is turned
//! into a deliberately misspecified sampler, and a small GAN learns to correct
//! its samples. Three corrector variants are provided:
//!
//! * **cGAN**: a conditional GAN fed with features and Gaussian noise.
//! * **mGAN**: the generator consumes the prior's simulated response.
//! * **skipGAN**: mGAN plus a learnable convex blend of prior and generator
//!   output; the learned weight measures how much correction the data demand.
//!
//! The numeric core is generic over the scalar type (see [`Scalar`]); the
//! experiment harness runs in `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod experiments;
pub mod format;
pub mod gan;
pub mod misspec;
pub mod neural;
pub mod priors;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Row-major dense matrix of `f64`.
pub type Matrix = neural::Matrix<f64>;
/// Row-major dense matrix of `f32`.
pub type Matrix32 = neural::Matrix<f32>;
/// Feed-forward network in `f64`.
pub type Network = neural::Network<f64>;
/// Feed-forward network in `f32`.
pub type Network32 = neural::Network<f32>;
/// Fitted prior generative model in `f64`.
pub type PriorModel = priors::PriorModel<f64>;
/// Misspecification level in `f64`.
pub type NoiseSpec = misspec::NoiseSpec<f64>;
/// GAN corrector in `f64`.
pub type GanModel = gan::GanModel<f64>;
/// GAN corrector in `f32`.
pub type GanModel32 = gan::GanModel<f32>;
/// Tabular regression dataset in `f64`.
pub type Dataset = data::Dataset<f64>;
