//! Invertible latent reparametrisations.

use crate::error::{dim_mismatch, Error, Result};
use crate::numerics::{determinant, dot, inverse, random_orthogonal, DenseMatrix, RngStream};

/// `z ↦ A z + b` with `A` invertible.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMap {
    a: DenseMatrix,
    b: Vec<f64>,
    a_inv: DenseMatrix,
}

impl AffineMap {
    pub fn new(a: DenseMatrix, b: Vec<f64>) -> Result<Self> {
        if a.rows() != a.cols() || b.len() != a.rows() {
            return Err(dim_mismatch(
                "AffineMap::new",
                "square A with matching offset",
                format!("{}x{} / {}", a.rows(), a.cols(), b.len()),
            ));
        }
        let det = determinant(&a)?;
        if det.abs() <= 1e-12 {
            return Err(Error::InvalidArgument(format!("affine map is singular (|det| = {:e})", det.abs())));
        }
        let a_inv = inverse(&a)?;
        Ok(Self { a, b, a_inv })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            a: DenseMatrix::identity(dim),
            b: vec![0.0; dim],
            a_inv: DenseMatrix::identity(dim),
        }
    }

    /// `Q1 · diag(s) · Q2` with singular values in `[0.5, 2]` and offset `N(0, 1)`.
    pub fn random(dim: usize, rng: &mut RngStream) -> Result<Self> {
        let q1 = random_orthogonal(dim, rng)?;
        let q2 = random_orthogonal(dim, rng)?;
        let s: Vec<f64> = (0..dim).map(|_| rng.uniform(0.5, 2.0)).collect();
        let a = q1.matmul(&DenseMatrix::diag(&s))?.matmul(&q2)?;
        let b = rng.normal_vec(dim);
        Self::new(a, b)
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn offset(&self) -> &[f64] {
        &self.b
    }

    pub fn apply(&self, z: &[f64]) -> Result<Vec<f64>> {
        let mut y = self.a.matvec(z)?;
        y.iter_mut().zip(&self.b).for_each(|(y, b)| *y += b);
        Ok(y)
    }

    pub fn apply_inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.dim() {
            return Err(dim_mismatch("AffineMap::apply_inverse", self.dim(), y.len()));
        }
        let shifted: Vec<f64> = y.iter().zip(&self.b).map(|(y, b)| y - b).collect();
        self.a_inv.matvec(&shifted)
    }

    pub fn inverse(&self) -> AffineMap {
        let neg_b = self.a_inv.matvec(&self.b).expect("square map");
        AffineMap {
            a: self.a_inv.clone(),
            b: neg_b.iter().map(|v| -v).collect(),
            a_inv: self.a.clone(),
        }
    }
}

/// `z ↦ z + α · tanh(W z + b)` with a certified contraction `α ‖W‖₂ < 0.9`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualBlock {
    w: DenseMatrix,
    b: Vec<f64>,
    alpha: f64,
    lipschitz: f64,
}

const MAX_RESIDUAL_LIPSCHITZ: f64 = 0.9;
const POWER_ITERATIONS: usize = 50;
const INVERSION_MAX_ITERS: usize = 200;
const INVERSION_TOL: f64 = 1e-10;

/// Largest singular value estimate by power iteration on `WᵀW`.
pub fn spectral_norm_estimate(w: &DenseMatrix, iters: usize) -> f64 {
    let n = w.cols();
    if n == 0 || w.rows() == 0 {
        return 0.0;
    }
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut sigma = 0.0;
    for _ in 0..iters {
        let wv = w.matvec(&v).expect("dims");
        let wtwv = w.matvec_t(&wv).expect("dims");
        let nrm = dot(&wtwv, &wtwv).sqrt();
        if nrm == 0.0 {
            return 0.0;
        }
        v = wtwv.iter().map(|x| x / nrm).collect();
        sigma = nrm.sqrt();
    }
    sigma
}

impl ResidualBlock {
    pub fn new(w: DenseMatrix, b: Vec<f64>, alpha: f64) -> Result<Self> {
        if w.rows() != w.cols() || b.len() != w.rows() {
            return Err(dim_mismatch(
                "ResidualBlock::new",
                "square W with matching bias",
                format!("{}x{} / {}", w.rows(), w.cols(), b.len()),
            ));
        }
        let lipschitz = alpha.abs() * spectral_norm_estimate(&w, POWER_ITERATIONS);
        if lipschitz >= MAX_RESIDUAL_LIPSCHITZ {
            return Err(Error::InvalidArgument(format!(
                "residual block is not a certified contraction (α‖W‖ ≈ {lipschitz:.4} >= {MAX_RESIDUAL_LIPSCHITZ})"
            )));
        }
        Ok(Self { w, b, alpha, lipschitz })
    }

    /// Random block whose residual has Lipschitz constant `contraction`.
    pub fn random(dim: usize, contraction: f64, rng: &mut RngStream) -> Result<Self> {
        let w = DenseMatrix::from_fn(dim, dim, |_, _| rng.normal());
        let sigma = crate::numerics::thin_svd(&w)?.s[0];
        let b = (0..dim).map(|_| rng.uniform(-0.5, 0.5)).collect();
        Self::new(w, b, contraction / sigma)
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// Certified `α‖W‖₂` estimate.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn hidden(&self, z: &[f64]) -> Vec<f64> {
        self.w
            .row_iter()
            .zip(&self.b)
            .map(|(w, b)| (dot(w, z) + b).tanh())
            .collect()
    }

    pub fn apply(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.dim() {
            return Err(dim_mismatch("ResidualBlock::apply", self.dim(), z.len()));
        }
        let h = self.hidden(z);
        Ok(z.iter().zip(&h).map(|(z, h)| z + self.alpha * h).collect())
    }

    /// Fixed-point inversion `z ← y − α tanh(W z + b)`.
    pub fn apply_inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.dim() {
            return Err(dim_mismatch("ResidualBlock::apply_inverse", self.dim(), y.len()));
        }
        let mut z = y.to_vec();
        let mut step = f64::INFINITY;
        for _ in 0..INVERSION_MAX_ITERS {
            let h = self.hidden(&z);
            step = 0.0;
            for ((zi, yi), hi) in z.iter_mut().zip(y).zip(&h) {
                let next = yi - self.alpha * hi;
                step = f64::max(step, (next - *zi).abs());
                *zi = next;
            }
            if step <= INVERSION_TOL {
                // One extra sweep pushes the error well below the tolerance.
                let h = self.hidden(&z);
                for ((zi, yi), hi) in z.iter_mut().zip(y).zip(&h) {
                    *zi = yi - self.alpha * hi;
                }
                return Ok(z);
            }
        }
        Err(Error::NonConvergence {
            what: "residual block fixed-point inversion",
            residual: step,
        })
    }

    /// Jacobian `I + α diag(1 − tanh²) W` at `z`.
    pub fn jacobian(&self, z: &[f64]) -> DenseMatrix {
        let h = self.hidden(z);
        let n = self.dim();
        DenseMatrix::from_fn(n, n, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            id + self.alpha * (1.0 - h[i] * h[i]) * self.w.get(i, j)
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SmoothStep {
    Affine(AffineMap),
    Residual(ResidualBlock),
}

impl SmoothStep {
    fn dim(&self) -> usize {
        match self {
            SmoothStep::Affine(a) => a.dim(),
            SmoothStep::Residual(r) => r.dim(),
        }
    }

    fn apply(&self, z: &[f64]) -> Result<Vec<f64>> {
        match self {
            SmoothStep::Affine(a) => a.apply(z),
            SmoothStep::Residual(r) => r.apply(z),
        }
    }

    fn apply_inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        match self {
            SmoothStep::Affine(a) => a.apply_inverse(y),
            SmoothStep::Residual(r) => r.apply_inverse(y),
        }
    }

    fn jacobian(&self, z: &[f64]) -> DenseMatrix {
        match self {
            SmoothStep::Affine(a) => a.matrix().clone(),
            SmoothStep::Residual(r) => r.jacobian(z),
        }
    }
}

/// Invertible map of the latent space used to reparametrise a decoder.
#[derive(Clone, Debug, PartialEq)]
pub enum LatentMap {
    Affine(AffineMap),
    /// Alternating invertible affine maps and contractive tanh residuals.
    InvertibleMlp(Vec<SmoothStep>),
    /// The inverse of the wrapped map.
    Inverse(Box<LatentMap>),
}

impl LatentMap {
    pub fn invertible_mlp(steps: Vec<SmoothStep>) -> Result<Self> {
        let Some(first) = steps.first() else {
            return Err(Error::InvalidArgument("InvertibleMlp needs at least one step".into()));
        };
        let d = first.dim();
        if steps.iter().any(|s| s.dim() != d) {
            return Err(dim_mismatch("LatentMap::invertible_mlp", d, "mixed step widths"));
        }
        Ok(LatentMap::InvertibleMlp(steps))
    }

    /// Lower-triangular affine, contractive residual, lower-triangular affine.
    pub fn random_smooth(dim: usize, contraction: f64, rng: &mut RngStream) -> Result<Self> {
        let triangular = |rng: &mut RngStream| -> Result<AffineMap> {
            let a = DenseMatrix::from_fn(dim, dim, |i, j| {
                if i == j {
                    rng.uniform(0.7, 1.5) * if rng.uniform(0.0, 1.0) < 0.5 { -1.0 } else { 1.0 }
                } else if j < i {
                    rng.uniform(-0.5, 0.5)
                } else {
                    0.0
                }
            });
            AffineMap::new(a, rng.normal_vec(dim).iter().map(|v| 0.5 * v).collect())
        };
        let first = triangular(rng)?;
        let residual = ResidualBlock::random(dim, contraction, rng)?;
        let last = triangular(rng)?;
        Self::invertible_mlp(vec![
            SmoothStep::Affine(first),
            SmoothStep::Residual(residual),
            SmoothStep::Affine(last),
        ])
    }

    pub fn dim(&self) -> usize {
        match self {
            LatentMap::Affine(a) => a.dim(),
            LatentMap::InvertibleMlp(steps) => steps[0].dim(),
            LatentMap::Inverse(inner) => inner.dim(),
        }
    }

    pub fn inverse(&self) -> LatentMap {
        match self {
            LatentMap::Affine(a) => LatentMap::Affine(a.inverse()),
            LatentMap::Inverse(inner) => (**inner).clone(),
            other => LatentMap::Inverse(Box::new(other.clone())),
        }
    }

    pub fn apply(&self, z: &[f64]) -> Result<Vec<f64>> {
        match self {
            LatentMap::Affine(a) => a.apply(z),
            LatentMap::InvertibleMlp(steps) => {
                let mut cur = z.to_vec();
                for s in steps {
                    cur = s.apply(&cur)?;
                }
                Ok(cur)
            }
            LatentMap::Inverse(inner) => inner.apply_inverse(z),
        }
    }

    pub fn apply_inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        match self {
            LatentMap::Affine(a) => a.apply_inverse(y),
            LatentMap::InvertibleMlp(steps) => {
                let mut cur = y.to_vec();
                for s in steps.iter().rev() {
                    cur = s.apply_inverse(&cur)?;
                }
                Ok(cur)
            }
            LatentMap::Inverse(inner) => inner.apply(y),
        }
    }

    pub fn apply_rows(&self, z: &DenseMatrix) -> Result<DenseMatrix> {
        let mut out = DenseMatrix::zeros(z.rows(), self.dim());
        for i in 0..z.rows() {
            let y = self.apply(z.row(i))?;
            out.row_mut(i).copy_from_slice(&y);
        }
        Ok(out)
    }

    /// Full Jacobian at `z`.
    pub fn jacobian(&self, z: &[f64]) -> Result<DenseMatrix> {
        if z.len() != self.dim() {
            return Err(dim_mismatch("LatentMap::jacobian", self.dim(), z.len()));
        }
        match self {
            LatentMap::Affine(a) => Ok(a.matrix().clone()),
            LatentMap::InvertibleMlp(steps) => {
                let mut cur = z.to_vec();
                let mut jac = DenseMatrix::identity(self.dim());
                for s in steps {
                    jac = s.jacobian(&cur).matmul(&jac)?;
                    cur = s.apply(&cur)?;
                }
                Ok(jac)
            }
            LatentMap::Inverse(inner) => {
                let x = inner.apply_inverse(z)?;
                inverse(&inner.jacobian(&x)?)
            }
        }
    }

    /// `J(z)ᵀ u`.
    pub fn vjp(&self, z: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        match self {
            LatentMap::Affine(a) => a.matrix().matvec_t(u),
            _ => self.jacobian(z)?.matvec_t(u),
        }
    }
}
