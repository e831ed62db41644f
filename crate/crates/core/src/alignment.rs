//! Cross-space similarity, correspondences, alignment maps and stitching.
//!
//! Maps act on row vectors: `y = x T + t`.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{dim_mismatch, Error, Result};
use crate::models::{Decoder, MlpModel};
use crate::numerics::{cosine, lstsq, thin_svd, DenseMatrix};
use crate::relrep::RelRepMatrix;

/// Cosine similarity between every row of `r1` and every row of `r2`.
///
/// The two matrices must be built on corresponding anchors: equal anchor
/// counts and equal fingerprints.
pub fn crossspace_similarity(r1: &RelRepMatrix, r2: &RelRepMatrix) -> Result<DenseMatrix> {
    if r1.num_anchors() != r2.num_anchors() {
        return Err(dim_mismatch("crossspace_similarity anchors", r1.num_anchors(), r2.num_anchors()));
    }
    if r1.fingerprint != r2.fingerprint {
        return Err(Error::InvalidArgument(
            "relative representations were built on different anchor sets".into(),
        ));
    }
    Ok(row_cosine_matrix(&r1.values, &r2.values))
}

/// `D[i][j] = cos(a_i, b_j)`, with 0 where either row is zero.
pub fn row_cosine_matrix(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let rows: Vec<f64> = (0..a.rows())
        .into_par_iter()
        .flat_map_iter(|i| (0..b.rows()).map(move |j| cosine(a.row(i), b.row(j)).unwrap_or(0.0)))
        .collect();
    DenseMatrix::new(a.rows(), b.rows(), rows).expect("cosines are finite")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    /// Source row index for each match.
    pub sources: Vec<usize>,
    pub targets: Vec<usize>,
    pub scores: Vec<f64>,
}

impl Correspondence {
    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    /// Keeps matches with score at least `threshold`.
    pub fn filtered(&self, threshold: f64) -> Correspondence {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| self.scores[i] >= threshold).collect();
        Correspondence {
            sources: keep.iter().map(|&i| self.sources[i]).collect(),
            targets: keep.iter().map(|&i| self.targets[i]).collect(),
            scores: keep.iter().map(|&i| self.scores[i]).collect(),
        }
    }
}

/// Row-wise argmax of `d`; ties go to the smallest column index.
pub fn extract_correspondence(d: &DenseMatrix) -> Result<Correspondence> {
    if !d.is_finite() {
        return Err(Error::NonFinite("similarity matrix".into()));
    }
    if d.cols() == 0 && d.rows() > 0 {
        return Err(Error::InvalidArgument("cannot match against zero columns".into()));
    }
    let mut targets = Vec::with_capacity(d.rows());
    let mut scores = Vec::with_capacity(d.rows());
    for row in d.row_iter() {
        let mut best = 0;
        for (j, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = j;
            }
        }
        targets.push(best);
        scores.push(row[best]);
    }
    Ok(Correspondence {
        sources: (0..d.rows()).collect(),
        targets,
        scores,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapKind {
    Orthogonal,
    Linear,
}

impl fmt::Display for MapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MapKind::Orthogonal => "orthogonal",
            MapKind::Linear => "linear",
        })
    }
}

impl FromStr for MapKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "orthogonal" | "procrustes" => Ok(MapKind::Orthogonal),
            "linear" => Ok(MapKind::Linear),
            other => Err(Error::InvalidArgument(format!("unknown map kind '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlignmentMap {
    pub kind: MapKind,
    pub matrix: DenseMatrix,
    pub translation: Vec<f64>,
    /// Frobenius norm of `X T + t − Y` on the fitting data.
    pub fit_residual: f64,
    /// Set when the linear fit had fewer equations than unknowns or a rank-deficient design.
    pub underdetermined: bool,
}

impl AlignmentMap {
    pub fn identity(dim: usize) -> Self {
        Self {
            kind: MapKind::Orthogonal,
            matrix: DenseMatrix::identity(dim),
            translation: vec![0.0; dim],
            fit_residual: 0.0,
            underdetermined: false,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        x.matmul(&self.matrix)?.add_row_vector(&self.translation)
    }

    /// `‖X T + t − Y‖_F`.
    pub fn residual(&self, x: &DenseMatrix, y: &DenseMatrix) -> Result<f64> {
        Ok(self.apply(x)?.sub(y)?.frobenius_norm())
    }
}

fn check_pair(op: &'static str, x: &DenseMatrix, y: &DenseMatrix) -> Result<()> {
    if x.rows() != y.rows() {
        return Err(dim_mismatch(op, x.rows(), y.rows()));
    }
    if x.rows() == 0 {
        return Err(Error::InvalidArgument(format!("{op}: no rows to fit")));
    }
    Ok(())
}

/// Orthogonal Procrustes: `T = U Vᵀ` from the SVD of `Xᵀ Y` (of the centred
/// data when `center` is set, in which case `t = ȳ − x̄ T`).
pub fn fit_orthogonal(x: &DenseMatrix, y: &DenseMatrix, center: bool) -> Result<AlignmentMap> {
    check_pair("fit_orthogonal", x, y)?;
    if x.cols() != y.cols() {
        return Err(dim_mismatch("fit_orthogonal dims", x.cols(), y.cols()));
    }
    let (mx, my) = if center {
        (x.column_means(), y.column_means())
    } else {
        (vec![0.0; x.cols()], vec![0.0; y.cols()])
    };
    let xc = x.sub_row_vector(&mx)?;
    let yc = y.sub_row_vector(&my)?;
    let cross = xc.transpose().matmul(&yc)?;
    let svd = thin_svd(&cross)?;
    if svd.s.first().copied().unwrap_or(0.0) == 0.0 {
        return Err(Error::InvalidArgument("cross-covariance has rank 0".into()));
    }
    let t = svd.u.matmul(&svd.vt)?;
    let mut translation = my;
    for (k, tk) in translation.iter_mut().enumerate() {
        *tk -= (0..mx.len()).map(|i| mx[i] * t.get(i, k)).sum::<f64>();
    }
    let mut map = AlignmentMap {
        kind: MapKind::Orthogonal,
        matrix: t,
        translation,
        fit_residual: 0.0,
        underdetermined: false,
    };
    map.fit_residual = map.residual(x, y)?;
    Ok(map)
}

/// Least-squares linear map. With `center` the data are centred and `t` is
/// recovered from the means; without it a bias column is appended so the fit
/// is still affine.
pub fn fit_linear(x: &DenseMatrix, y: &DenseMatrix, center: bool) -> Result<AlignmentMap> {
    check_pair("fit_linear", x, y)?;
    let d = x.cols();
    let (matrix, translation, underdetermined) = if center {
        let (mx, my) = (x.column_means(), y.column_means());
        let sol = lstsq(&x.sub_row_vector(&mx)?, &y.sub_row_vector(&my)?)?;
        let mut t = my;
        for (k, tk) in t.iter_mut().enumerate() {
            *tk -= (0..d).map(|i| mx[i] * sol.x.get(i, k)).sum::<f64>();
        }
        (sol.x, t, sol.underdetermined)
    } else {
        let sol = lstsq(&x.with_bias_column(), y)?;
        let matrix = sol.x.row_slice(0, d);
        let t = sol.x.row(d).to_vec();
        (matrix, t, sol.underdetermined)
    };
    let mut map = AlignmentMap {
        kind: MapKind::Linear,
        matrix,
        translation,
        fit_residual: 0.0,
        underdetermined,
    };
    map.fit_residual = map.residual(x, y)?;
    Ok(map)
}

pub fn fit_map(kind: MapKind, x: &DenseMatrix, y: &DenseMatrix, center: bool) -> Result<AlignmentMap> {
    match kind {
        MapKind::Orthogonal => fit_orthogonal(x, y, center),
        MapKind::Linear => fit_linear(x, y, center),
    }
}

/// Fits a map on the matched pairs `(x[sources[i]], y[targets[i]])`.
pub fn fit_from_correspondence(
    kind: MapKind,
    x: &DenseMatrix,
    y: &DenseMatrix,
    corr: &Correspondence,
    center: bool,
) -> Result<AlignmentMap> {
    fit_map(kind, &x.select_rows(&corr.sources)?, &y.select_rows(&corr.targets)?, center)
}

/// `dec2(enc1(x) T + t)` for every row of `x`.
pub fn stitch(enc1: &MlpModel, map: &AlignmentMap, dec2: &Decoder, x: &DenseMatrix) -> Result<DenseMatrix> {
    if map.input_dim() != enc1.output_dim() {
        return Err(dim_mismatch("stitch encoder/map", enc1.output_dim(), map.input_dim()));
    }
    if map.output_dim() != dec2.input_dim() {
        return Err(dim_mismatch("stitch map/decoder", dec2.input_dim(), map.output_dim()));
    }
    if x.rows() == 0 {
        return Ok(DenseMatrix::empty(dec2.output_dim()));
    }
    let z = enc1.forward_batch(x)?;
    dec2.forward_batch(&map.apply(&z)?)
}
