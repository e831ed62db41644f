//! SVD (one-sided Jacobi), least squares, inverses and random orthogonal
//! matrices.

use super::matrix::{axpy, dot, norm, DenseMatrix};
use super::rng::RngStream;
use crate::error::{dim_mismatch, Error, Result};

/// Thin singular value decomposition `a = u * diag(s) * vt`.
#[derive(Clone, Debug)]
pub struct Svd {
    /// `m x r`, orthonormal columns.
    pub u: DenseMatrix,
    /// Non-negative, descending, length `r = min(m, n)`.
    pub s: Vec<f64>,
    /// `r x n`, orthonormal rows.
    pub vt: DenseMatrix,
}

impl Svd {
    pub fn reconstruct(&self) -> DenseMatrix {
        let r = self.s.len();
        let us = DenseMatrix::from_fn(self.u.rows(), r, |i, j| self.u.get(i, j) * self.s[j]);
        us.matmul(&self.vt).expect("svd factors chain")
    }
}

const JACOBI_TOL: f64 = 1e-15;

/// Thin SVD via one-sided (Hestenes) Jacobi rotations.
pub fn thin_svd(a: &DenseMatrix) -> Result<Svd> {
    if !a.is_finite() {
        return Err(Error::NonFinite("thin_svd input".into()));
    }
    if a.rows() < a.cols() {
        let t = thin_svd(&a.transpose())?;
        return Ok(Svd {
            u: t.vt.transpose(),
            s: t.s,
            vt: t.u.transpose(),
        });
    }
    let (m, n) = a.shape();
    if n == 0 {
        return Ok(Svd {
            u: DenseMatrix::zeros(m, 0),
            s: Vec::new(),
            vt: DenseMatrix::zeros(0, 0),
        });
    }

    // Columns of A and V stored as rows for contiguous access.
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    let max_sweeps = 100 * n;
    let mut converged = false;
    let mut off = 0.0;
    for _ in 0..max_sweeps {
        let mut rotated = false;
        off = 0.0;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let rel = gamma.abs() / (alpha * beta).sqrt();
                off = f64::max(off, rel);
                if rel <= JACOBI_TOL {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            what: "one-sided Jacobi SVD",
            residual: off,
        });
    }

    let mut order: Vec<(f64, usize)> = cols.iter().enumerate().map(|(j, c)| (norm(c), j)).collect();
    order.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    let smax = order[0].0;
    let tiny = smax * (m as f64) * f64::EPSILON;

    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    let mut vt = DenseMatrix::zeros(n, n);
    let mut deficient = Vec::new();
    for (k, &(sigma, j)) in order.iter().enumerate() {
        s.push(sigma);
        vt.row_mut(k).copy_from_slice(&v[j]);
        if sigma > tiny && sigma > 0.0 {
            u_cols.push(cols[j].iter().map(|x| x / sigma).collect());
        } else {
            u_cols.push(vec![0.0; m]);
            deficient.push(k);
        }
    }
    complete_orthonormal(&mut u_cols, &deficient);

    let u = DenseMatrix::from_fn(m, n, |i, k| u_cols[k][i]);
    Ok(Svd { u, s, vt })
}

fn rotate(vecs: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = vecs.split_at_mut(q);
    let vp = &mut lo[p];
    let vq = &mut hi[0];
    for (x, y) in vp.iter_mut().zip(vq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Fills the listed slots with unit vectors orthogonal to every other column,
/// via Gram-Schmidt against the standard basis.
fn complete_orthonormal(cols: &mut [Vec<f64>], slots: &[usize]) {
    if slots.is_empty() {
        return;
    }
    let m = cols[0].len();
    let mut candidate = 0;
    for &slot in slots {
        loop {
            assert!(candidate < m, "orthonormal completion ran out of basis vectors");
            let mut e = vec![0.0; m];
            e[candidate] = 1.0;
            candidate += 1;
            // Two passes of Gram-Schmidt for numerical orthogonality.
            for _ in 0..2 {
                for (k, c) in cols.iter().enumerate() {
                    if k == slot || c.iter().all(|&x| x == 0.0) {
                        continue;
                    }
                    let proj = dot(&e, c);
                    axpy(-proj, c, &mut e);
                }
            }
            let ne = norm(&e);
            if ne > 1e-8 {
                e.iter_mut().for_each(|x| *x /= ne);
                cols[slot] = e;
                break;
            }
        }
    }
}

/// Least-squares solution with diagnostics.
#[derive(Clone, Debug)]
pub struct LstsqSolution {
    pub x: DenseMatrix,
    pub rank: usize,
    /// Set when the system has fewer rows than unknowns or is rank deficient;
    /// `x` is then the minimum-norm minimiser.
    pub underdetermined: bool,
}

/// Minimum-norm minimiser of `‖a x − b‖_F` via the SVD pseudoinverse with
/// singular-value cutoff `1e-12 · max(s)`.
pub fn lstsq(a: &DenseMatrix, b: &DenseMatrix) -> Result<LstsqSolution> {
    if a.rows() != b.rows() {
        return Err(dim_mismatch("lstsq", a.rows(), b.rows()));
    }
    let svd = thin_svd(a)?;
    let smax = svd.s.first().copied().unwrap_or(0.0);
    let cutoff = 1e-12 * smax;
    let rank = svd.s.iter().filter(|&&s| s > cutoff && s > 0.0).count();

    // x = V · diag(1/s) · Uᵀ b, truncated at `rank`.
    let utb = svd.u.transpose().matmul(b)?;
    let mut scaled = DenseMatrix::zeros(rank, b.cols());
    for k in 0..rank {
        let inv = 1.0 / svd.s[k];
        for (dst, src) in scaled.row_mut(k).iter_mut().zip(utb.row(k)) {
            *dst = src * inv;
        }
    }
    let v_r = DenseMatrix::from_fn(a.cols(), rank, |i, k| svd.vt.get(k, i));
    let x = v_r.matmul(&scaled)?;
    Ok(LstsqSolution {
        x,
        rank,
        underdetermined: a.rows() < a.cols() || rank < a.cols(),
    })
}

/// Haar-distributed random orthogonal matrix (QR of a Gaussian matrix with
/// sign correction).
pub fn random_orthogonal(n: usize, rng: &mut RngStream) -> Result<DenseMatrix> {
    if n == 0 {
        return Err(Error::InvalidArgument("random_orthogonal requires n >= 1".into()));
    }
    loop {
        let mut cols: Vec<Vec<f64>> = (0..n).map(|_| rng.normal_vec(n)).collect();
        let mut ok = true;
        for j in 0..n {
            for _ in 0..2 {
                for k in 0..j {
                    let (done, rest) = cols.split_at_mut(j);
                    let proj = dot(&rest[0], &done[k]);
                    axpy(-proj, &done[k], &mut rest[0]);
                }
            }
            let nj = norm(&cols[j]);
            if nj < 1e-10 {
                ok = false;
                break;
            }
            cols[j].iter_mut().for_each(|x| *x /= nj);
        }
        if ok {
            return Ok(DenseMatrix::from_fn(n, n, |i, j| cols[j][i]));
        }
    }
}

/// LU factorisation with partial pivoting, returning `(lu, perm, sign)`.
fn lu(a: &DenseMatrix) -> Result<(DenseMatrix, Vec<usize>, f64)> {
    if a.rows() != a.cols() {
        return Err(dim_mismatch("lu", "square", format!("{}x{}", a.rows(), a.cols())));
    }
    let n = a.rows();
    let mut m = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign = 1.0;
    for k in 0..n {
        let (p, pivot) = (k..n)
            .map(|i| (i, m.get(i, k).abs()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot == 0.0 {
            continue;
        }
        if p != k {
            for j in 0..n {
                let tmp = m.get(k, j);
                m.set(k, j, m.get(p, j));
                m.set(p, j, tmp);
            }
            perm.swap(k, p);
            sign = -sign;
        }
        let pivot = m.get(k, k);
        for i in k + 1..n {
            let f = m.get(i, k) / pivot;
            m.set(i, k, f);
            for j in k + 1..n {
                let v = m.get(i, j) - f * m.get(k, j);
                m.set(i, j, v);
            }
        }
    }
    Ok((m, perm, sign))
}

pub fn determinant(a: &DenseMatrix) -> Result<f64> {
    let (lu, _, sign) = lu(a)?;
    Ok((0..a.rows()).map(|i| lu.get(i, i)).product::<f64>() * sign)
}

/// Inverse of a square matrix; errors when `|det| <= 1e-12`.
pub fn inverse(a: &DenseMatrix) -> Result<DenseMatrix> {
    let (lu, perm, sign) = lu(a)?;
    let n = a.rows();
    let det = (0..n).map(|i| lu.get(i, i)).product::<f64>() * sign;
    if det.abs() <= 1e-12 {
        return Err(Error::InvalidArgument(format!("matrix is singular (|det| = {:e})", det.abs())));
    }
    let mut inv = DenseMatrix::zeros(n, n);
    for col in 0..n {
        let mut x: Vec<f64> = (0..n).map(|i| if perm[i] == col { 1.0 } else { 0.0 }).collect();
        for i in 0..n {
            for k in 0..i {
                x[i] -= lu.get(i, k) * x[k];
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                x[i] -= lu.get(i, k) * x[k];
            }
            x[i] /= lu.get(i, i);
        }
        for i in 0..n {
            inv.set(i, col, x[i]);
        }
    }
    Ok(inv)
}
