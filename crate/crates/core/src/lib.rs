//! Knowledge distillation over extended transfer-sets.
//!
//! The crate bundles a small dense-network trainer ([`nn`]), the distillation
//! losses ([`losses`]), samplers that approximate the data distribution
//! ([`samplers`]), teacher/transfer-set handling ([`teacher`]), measurement
//! procedures ([`analysis`]), synthetic datasets ([`datasets`]) and the
//! experiment drivers used by the `xcl` binary ([`experiments`]).
//!
//! Everything numeric is generic over a [`Scalar`] (`f32` or `f64`). The
//! aliases at the bottom of this file fix the scalar to `f64`, which is what
//! the experiment drivers use.

pub mod analysis;
pub mod config;
pub mod datasets;
pub mod error;
pub mod experiments;
pub mod io;
pub mod losses;
pub mod matrix;
pub mod nn;
pub mod results;
pub mod rng;
pub mod samplers;
pub mod scalar;
pub mod sources;
pub mod teacher;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use rng::{Rng, Stream};
pub use scalar::Scalar;

pub type Network64 = nn::Network<f64>;
pub type Network32 = nn::Network<f32>;
pub type Dataset64 = datasets::Dataset<f64>;
pub type Teacher64 = teacher::Teacher<f64>;
pub type TransferSet64 = teacher::TransferSet<f64>;
pub type CategoricalDist64 = losses::CategoricalDist<f64>;
pub type GaussianPred64 = losses::GaussianPred<f64>;
pub type Matrix64 = Matrix<f64>;
