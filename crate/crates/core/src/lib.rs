//! Relative geodesic representations.
//!
//! Latent codes are described by the pullback-metric lengths (or energies) of
//! straight latent segments joining them to a fixed set of anchors. Because
//! those lengths are measured in the decoder's output space, they agree
//! across models that parametrise the same data manifold differently, which
//! makes them usable for cross-model retrieval and zero-shot stitching.
//!
//! Module map:
//!
//! - [`numerics`]: dense matrices, Jacobi SVD, least squares, seeded RNG streams
//! - [`models`]: MLPs, analytic decoders, latent reparametrisations, output isometries
//! - [`training`]: backpropagation, Adam, autoencoder and instance-discrimination heads
//! - [`geometry`]: output metrics, straight-line energy/length, discrete geodesic oracle
//! - [`relrep`]: anchor selection, cosine and geodesic relative representations
//! - [`alignment`]: cross-space similarity, correspondences, Procrustes and linear maps, stitching
//! - [`eval`]: MRR, Spearman correlation, reconstruction error
//! - [`synthbench`]: synthetic datasets and reparametrised decoder pairs
//! - [`io`]: embedding binary format, CSV and JSON sidecars
//! - [`experiments`]: end-to-end protocols shared by the CLI and the acceptance suite

pub mod alignment;
pub mod error;
pub mod eval;
pub mod experiments;
pub mod geometry;
pub mod io;
pub mod models;
pub mod numerics;
pub mod relrep;
pub mod synthbench;
pub mod training;

pub use error::{Error, Result};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use numerics::{DenseMatrix, RngStream};
