//! Feed-forward encoders/decoders, analytic test decoders, and the latent
//! and output maps used to reparametrise them.

mod decoder;
pub mod format;
mod latent;
mod mlp;

pub use decoder::{compose, Decoder, OutputIsometry};
pub use latent::{spectral_norm_estimate, AffineMap, LatentMap, ResidualBlock, SmoothStep};
pub use mlp::{Activation, ForwardCache, Layer, MlpModel, MlpSpec};
