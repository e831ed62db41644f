use crate::error::{dim_mismatch, Error, Result};
use crate::numerics::{random_orthogonal, DenseMatrix, RngStream};

use super::latent::LatentMap;
use super::mlp::MlpModel;

/// Output-space isometry `y ↦ Q y + t`.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputIsometry {
    q: DenseMatrix,
    t: Vec<f64>,
}

impl OutputIsometry {
    pub fn new(q: DenseMatrix, t: Vec<f64>) -> Result<Self> {
        if q.rows() != q.cols() || t.len() != q.rows() {
            return Err(dim_mismatch(
                "OutputIsometry::new",
                "square Q with matching translation",
                format!("{}x{} / {}", q.rows(), q.cols(), t.len()),
            ));
        }
        let err = q
            .transpose()
            .matmul(&q)?
            .max_abs_diff(&DenseMatrix::identity(q.rows()));
        if err > 1e-10 {
            return Err(Error::InvalidArgument(format!("Q is not orthogonal (‖QᵀQ − I‖∞ = {err:e})")));
        }
        Ok(Self { q, t })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            q: DenseMatrix::identity(dim),
            t: vec![0.0; dim],
        }
    }

    pub fn random(dim: usize, rng: &mut RngStream) -> Result<Self> {
        let q = random_orthogonal(dim, rng)?;
        let t = rng.normal_vec(dim);
        Self::new(q, t)
    }

    pub fn dim(&self) -> usize {
        self.t.len()
    }

    pub fn rotation(&self) -> &DenseMatrix {
        &self.q
    }

    pub fn translation(&self) -> &[f64] {
        &self.t
    }

    pub fn apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.q.matvec(y)?;
        out.iter_mut().zip(&self.t).for_each(|(o, t)| *o += t);
        Ok(out)
    }

    pub fn vjp(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.q.matvec_t(u)
    }
}

/// A smooth map from latent codes to the output space whose metric is pulled
/// back.
///
/// `SphereChart` uses `r · (sinθ cosφ, sinθ sinφ, cosθ)` for latent `(θ, φ)`;
/// `SwissRoll` maps `(t, h)` to `scale · (t cos t, h, t sin t)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Decoder {
    Mlp(MlpModel),
    Linear {
        a: DenseMatrix,
        b: Vec<f64>,
    },
    SphereChart {
        radius: f64,
    },
    SwissRoll {
        scale: f64,
    },
    Composed {
        inner: Box<Decoder>,
        pre: Option<LatentMap>,
        post: Option<OutputIsometry>,
    },
}

impl Decoder {
    pub fn linear(a: DenseMatrix, b: Vec<f64>) -> Result<Self> {
        if b.len() != a.rows() {
            return Err(dim_mismatch("Decoder::linear", a.rows(), b.len()));
        }
        Ok(Decoder::Linear { a, b })
    }

    pub fn identity(dim: usize) -> Self {
        Decoder::Linear {
            a: DenseMatrix::identity(dim),
            b: vec![0.0; dim],
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Decoder::Mlp(m) => m.input_dim(),
            Decoder::Linear { a, .. } => a.cols(),
            Decoder::SphereChart { .. } | Decoder::SwissRoll { .. } => 2,
            Decoder::Composed { inner, pre, .. } => pre.as_ref().map_or_else(|| inner.input_dim(), |p| p.dim()),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Decoder::Mlp(m) => m.output_dim(),
            Decoder::Linear { a, .. } => a.rows(),
            Decoder::SphereChart { .. } | Decoder::SwissRoll { .. } => 3,
            Decoder::Composed { inner, post, .. } => post.as_ref().map_or_else(|| inner.output_dim(), |p| p.dim()),
        }
    }

    pub fn forward(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.input_dim() {
            return Err(dim_mismatch("Decoder::forward", self.input_dim(), z.len()));
        }
        let y = match self {
            Decoder::Mlp(m) => m.forward(z)?,
            Decoder::Linear { a, b } => {
                let mut y = a.matvec(z)?;
                y.iter_mut().zip(b).for_each(|(y, b)| *y += b);
                y
            }
            Decoder::SphereChart { radius } => {
                let (theta, phi) = (z[0], z[1]);
                vec![
                    radius * theta.sin() * phi.cos(),
                    radius * theta.sin() * phi.sin(),
                    radius * theta.cos(),
                ]
            }
            Decoder::SwissRoll { scale } => {
                let (t, h) = (z[0], z[1]);
                vec![scale * t * t.cos(), scale * h, scale * t * t.sin()]
            }
            Decoder::Composed { inner, pre, post } => {
                let x = match pre {
                    Some(p) => p.apply(z)?,
                    None => z.to_vec(),
                };
                let y = inner.forward(&x)?;
                match post {
                    Some(iso) => iso.apply(&y)?,
                    None => y,
                }
            }
        };
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("decoder output".into()));
        }
        Ok(y)
    }

    /// Row-wise forward pass.
    pub fn forward_batch(&self, z: &DenseMatrix) -> Result<DenseMatrix> {
        if z.cols() != self.input_dim() {
            return Err(dim_mismatch("Decoder::forward_batch", self.input_dim(), z.cols()));
        }
        if let Decoder::Mlp(m) = self {
            return m.forward_batch(z);
        }
        let mut out = DenseMatrix::zeros(z.rows(), self.output_dim());
        for i in 0..z.rows() {
            let y = self.forward(z.row(i))?;
            out.row_mut(i).copy_from_slice(&y);
        }
        Ok(out)
    }

    /// Row-wise `J_D(zᵢ)ᵀ uᵢ`; MLP decoders share a single forward pass.
    pub fn vjp_batch(&self, z: &DenseMatrix, u: &DenseMatrix) -> Result<DenseMatrix> {
        if z.cols() != self.input_dim() || u.cols() != self.output_dim() || u.rows() != z.rows() {
            return Err(dim_mismatch(
                "Decoder::vjp_batch",
                format!("{}x{} / {}x{}", z.rows(), self.input_dim(), z.rows(), self.output_dim()),
                format!("{}x{} / {}x{}", z.rows(), z.cols(), u.rows(), u.cols()),
            ));
        }
        if let Decoder::Mlp(m) = self {
            return m.vjp_batch(z, u);
        }
        let mut out = DenseMatrix::zeros(z.rows(), z.cols());
        for i in 0..z.rows() {
            let g = self.vjp(z.row(i), u.row(i))?;
            out.row_mut(i).copy_from_slice(&g);
        }
        Ok(out)
    }

    /// `J_D(z)ᵀ u`.
    pub fn vjp(&self, z: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.input_dim() {
            return Err(dim_mismatch("Decoder::vjp input", self.input_dim(), z.len()));
        }
        if u.len() != self.output_dim() {
            return Err(dim_mismatch("Decoder::vjp cotangent", self.output_dim(), u.len()));
        }
        match self {
            Decoder::Mlp(m) => m.vjp(z, u),
            Decoder::Linear { a, .. } => a.matvec_t(u),
            Decoder::SphereChart { radius } => {
                let (theta, phi) = (z[0], z[1]);
                let (st, ct, sp, cp) = (theta.sin(), theta.cos(), phi.sin(), phi.cos());
                let d_theta = [ct * cp, ct * sp, -st];
                let d_phi = [-st * sp, st * cp, 0.0];
                Ok(vec![
                    radius * (d_theta[0] * u[0] + d_theta[1] * u[1] + d_theta[2] * u[2]),
                    radius * (d_phi[0] * u[0] + d_phi[1] * u[1] + d_phi[2] * u[2]),
                ])
            }
            Decoder::SwissRoll { scale } => {
                let t = z[0];
                let d_t = [t.cos() - t * t.sin(), 0.0, t.sin() + t * t.cos()];
                Ok(vec![
                    scale * (d_t[0] * u[0] + d_t[2] * u[2]),
                    scale * u[1],
                ])
            }
            Decoder::Composed { inner, pre, post } => {
                let u_inner = match post {
                    Some(iso) => iso.vjp(u)?,
                    None => u.to_vec(),
                };
                match pre {
                    Some(p) => {
                        let x = p.apply(z)?;
                        let g = inner.vjp(&x, &u_inner)?;
                        p.vjp(z, &g)
                    }
                    None => inner.vjp(z, &u_inner),
                }
            }
        }
    }
}

/// `z ↦ post(inner(pre(z)))`, checking that dimensions chain.
pub fn compose(inner: Decoder, pre: Option<LatentMap>, post: Option<OutputIsometry>) -> Result<Decoder> {
    if let Some(p) = &pre {
        if p.dim() != inner.input_dim() {
            return Err(dim_mismatch("compose pre-map", inner.input_dim(), p.dim()));
        }
    }
    if let Some(iso) = &post {
        if iso.dim() != inner.output_dim() {
            return Err(dim_mismatch("compose post-isometry", inner.output_dim(), iso.dim()));
        }
    }
    Ok(Decoder::Composed {
        inner: Box::new(inner),
        pre,
        post,
    })
}
