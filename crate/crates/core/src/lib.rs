//! Fourier neural operator engine for resolution-robust 3D segmentation.

#![allow(clippy::needless_range_loop)]

pub mod canonical;
pub mod data;
pub mod error;
pub mod experiment;
pub mod gradsuite;
pub mod model;
pub mod ops;
pub mod scalar;
pub mod seed;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Field64 = tensor::Field<f64>;
pub type Field32 = tensor::Field<f32>;
pub type Model64 = model::Model<f64>;
pub type Model32 = model::Model<f32>;
