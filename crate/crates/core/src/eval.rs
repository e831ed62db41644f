//! Retrieval and agreement metrics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{dim_mismatch, Error, Result};
use crate::numerics::DenseMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MrrResult {
    pub mrr: f64,
    /// 1-based rank of the true counterpart for every query row.
    pub ranks: Vec<usize>,
    pub symmetric: bool,
}

/// Options for [`mrr`]. The defaults describe cross-model retrieval on a
/// similarity matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MrrOptions {
    pub higher_is_better: bool,
    pub symmetric: bool,
    /// Skip column `i` when ranking row `i` (self-retrieval diagnostics only).
    pub exclude_diagonal: bool,
}

impl Default for MrrOptions {
    fn default() -> Self {
        Self {
            higher_is_better: true,
            symmetric: false,
            exclude_diagonal: false,
        }
    }
}

/// Mean reciprocal rank of `gt[i]` in row `i` of `d`.
///
/// Ties are ranked pessimistically: an equal score in a column with a smaller
/// index counts as better.
pub fn mrr(d: &DenseMatrix, gt: &[usize], opts: MrrOptions) -> Result<MrrResult> {
    if gt.len() != d.rows() {
        return Err(dim_mismatch("mrr ground truth", d.rows(), gt.len()));
    }
    if d.rows() == 0 {
        return Err(Error::InvalidArgument("mrr needs at least one query".into()));
    }
    if let Some(&bad) = gt.iter().find(|&&g| g >= d.cols()) {
        return Err(Error::InvalidArgument(format!(
            "ground-truth index {bad} out of range for {} columns",
            d.cols()
        )));
    }
    if !d.is_finite() {
        return Err(Error::NonFinite("similarity matrix".into()));
    }
    let sym;
    let m = if opts.symmetric {
        if d.rows() != d.cols() {
            return Err(Error::InvalidArgument(format!(
                "symmetric MRR needs a square matrix, got {}x{}",
                d.rows(),
                d.cols()
            )));
        }
        sym = DenseMatrix::from_fn(d.rows(), d.cols(), |i, j| 0.5 * (d.get(i, j) + d.get(j, i)));
        &sym
    } else {
        d
    };
    let ranks: Vec<usize> = (0..m.rows())
        .into_par_iter()
        .map(|i| {
            let row = m.row(i);
            let target = gt[i];
            let score = row[target];
            let better = |v: f64| if opts.higher_is_better { v > score } else { v < score };
            1 + row
                .iter()
                .enumerate()
                .filter(|&(j, &v)| {
                    j != target && !(opts.exclude_diagonal && j == i) && (better(v) || (v == score && j < target))
                })
                .count()
        })
        .collect();
    let mrr = ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / ranks.len() as f64;
    Ok(MrrResult {
        mrr,
        ranks,
        symmetric: opts.symmetric,
    })
}

/// Average (fractional) ranks, 1-based.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::InvalidArgument("correlation is undefined for a constant vector".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation: Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(dim_mismatch("spearman", x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(Error::InvalidArgument("spearman needs at least two observations".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("spearman input".into()));
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Mean squared entrywise error.
pub fn reconstruction_mse(xhat: &DenseMatrix, x: &DenseMatrix) -> Result<f64> {
    if xhat.shape() != x.shape() {
        return Err(dim_mismatch(
            "reconstruction_mse",
            format!("{:?}", x.shape()),
            format!("{:?}", xhat.shape()),
        ));
    }
    if x.data().is_empty() {
        return Err(Error::InvalidArgument("reconstruction_mse of an empty matrix".into()));
    }
    let sum: f64 = xhat.data().iter().zip(x.data()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum / x.data().len() as f64)
}
