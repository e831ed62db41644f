//! Dense linear algebra and seeded randomness.

mod linalg;
mod matrix;
mod rng;

pub use linalg::{determinant, inverse, lstsq, random_orthogonal, thin_svd, LstsqSolution, Svd};
pub use matrix::{axpy, cosine, dot, euclidean_distance, matmul, norm, DenseMatrix};
pub use rng::{fnv1a, RngStream};
