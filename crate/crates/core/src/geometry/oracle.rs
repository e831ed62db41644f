//! Discrete geodesic oracle: minimises the discretised pullback energy over
//! the interior points of a latent polyline.

use serde::{Deserialize, Serialize};

use crate::error::{dim_mismatch, Error, Result};
use crate::models::{Decoder, ForwardCache};
use crate::numerics::DenseMatrix;
use crate::training::{Adam, AdamConfig};

use super::curve::{measure_outputs, straight_line_measure, CurveMeasure, CurveSpec, DiscreteCurve};
use super::metric::{segment_output_distance, MetricSpec};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub steps: usize,
    pub iters: usize,
    pub learning_rate: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            steps: 16,
            iters: 500,
            learning_rate: 1e-2,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GeodesicEstimate {
    /// Lowest-energy curve visited (the straight line if nothing improved on it).
    pub curve: DiscreteCurve,
    pub energy: f64,
    /// Discrete length of `curve`.
    pub length: f64,
    /// Energy and length of the initial straight line at the same resolution.
    pub straight: CurveMeasure,
    pub iterations: usize,
}

const FD_STEP: f64 = 1e-6;

/// Decoded polyline, keeping the MLP forward cache for the gradient pass.
fn decode(dec: &Decoder, points: &DenseMatrix) -> Result<(DenseMatrix, Option<ForwardCache>)> {
    match dec {
        Decoder::Mlp(m) => {
            let cache = m.forward_cached(points)?;
            let outputs = cache.outputs.last().expect("at least one layer").clone();
            Ok((outputs, Some(cache)))
        }
        _ => Ok((dec.forward_batch(points)?, None)),
    }
}

/// Energy gradient with respect to every interior point.
fn energy_gradient(
    dec: &Decoder,
    metric: MetricSpec,
    points: &DenseMatrix,
    outputs: &DenseMatrix,
    cache: Option<&ForwardCache>,
) -> Result<DenseMatrix> {
    let n = points.rows() - 1;
    let d = points.cols();
    let scale = n as f64;
    match metric {
        MetricSpec::Euclidean => {
            // ∂E/∂y_j = N (2 y_j − y_{j−1} − y_{j+1}), pulled back through J_Dᵀ.
            let dy = |j: usize, k: usize| {
                scale * (2.0 * outputs.get(j, k) - outputs.get(j - 1, k) - outputs.get(j + 1, k))
            };
            match (dec, cache) {
                (Decoder::Mlp(m), Some(cache)) => {
                    // Endpoint rows get a zero cotangent and are dropped afterwards.
                    let full = DenseMatrix::from_fn(n + 1, outputs.cols(), |j, k| {
                        if j == 0 || j == n {
                            0.0
                        } else {
                            dy(j, k)
                        }
                    });
                    Ok(m.vjp_cached(cache, &full)?.row_slice(1, n))
                }
                _ => {
                    let interior = DenseMatrix::from_fn(n - 1, outputs.cols(), |r, k| dy(r + 1, k));
                    dec.vjp_batch(&points.row_slice(1, n), &interior)
                }
            }
        }
        _ => {
            let mut grad = DenseMatrix::zeros(n - 1, d);
            // Only the two segments touching γ_j depend on it.
            for j in 1..n {
                let (prev, next) = (outputs.row(j - 1), outputs.row(j + 1));
                let local = |z: &[f64]| -> Result<f64> {
                    let y = dec.forward(z)?;
                    let a = segment_output_distance(metric, &y, prev)?;
                    let b = segment_output_distance(metric, next, &y)?;
                    Ok(0.5 * scale * (a * a + b * b))
                };
                let mut z = points.row(j).to_vec();
                for k in 0..d {
                    let orig = z[k];
                    let h = FD_STEP * orig.abs().max(1.0);
                    z[k] = orig + h;
                    let fp = local(&z)?;
                    z[k] = orig - h;
                    let fm = local(&z)?;
                    z[k] = orig;
                    grad.set(j - 1, k, (fp - fm) / (2.0 * h));
                }
            }
            Ok(grad)
        }
    }
}

/// Minimises `(N/2) Σ s_j²` over the interior points with Adam, starting from
/// the straight line. Endpoints never move; the returned energy is never above
/// the straight-line energy.
pub fn geodesic_oracle(
    dec: &Decoder,
    metric: MetricSpec,
    z0: &[f64],
    z1: &[f64],
    cfg: &OracleConfig,
) -> Result<GeodesicEstimate> {
    if cfg.steps < 2 {
        return Err(Error::InvalidArgument("geodesic oracle needs at least 2 steps".into()));
    }
    if z0.len() != dec.input_dim() || z1.len() != dec.input_dim() {
        return Err(dim_mismatch("geodesic_oracle endpoints", dec.input_dim(), z0.len()));
    }
    let spec = CurveSpec::new(z0.to_vec(), z1.to_vec(), cfg.steps)?;
    let mut points = spec.points();
    let straight = straight_line_measure(dec, metric, &spec)?;
    let n = cfg.steps;
    let d = z0.len();

    let mut best_points = points.clone();
    let mut best = straight;
    let mut adam = Adam::new(
        AdamConfig {
            learning_rate: cfg.learning_rate,
            ..AdamConfig::default()
        },
        &[(n - 1) * d],
    );
    let mut interior: Vec<f64> = points.data()[d..n * d].to_vec();

    for iteration in 0..cfg.iters {
        let (outputs, cache) = decode(dec, &points)?;
        if !outputs.is_finite() {
            return Err(Error::OracleDiverged { iteration });
        }
        let measure = measure_outputs(metric, &outputs)?;
        if !measure.energy.is_finite() {
            return Err(Error::OracleDiverged { iteration });
        }
        if measure.energy < best.energy {
            best = measure;
            best_points = points.clone();
        }
        let grad = energy_gradient(dec, metric, &points, &outputs, cache.as_ref())?;
        if !grad.is_finite() {
            return Err(Error::OracleDiverged { iteration });
        }
        adam.step(&mut [interior.as_mut_slice()], &[grad.data()]);
        points.data_mut()[d..n * d].copy_from_slice(&interior);
    }
    let outputs = dec.forward_batch(&points)?;
    let last = measure_outputs(metric, &outputs)?;
    if !last.energy.is_finite() {
        return Err(Error::OracleDiverged { iteration: cfg.iters });
    }
    if last.energy < best.energy {
        best = last;
        best_points = points;
    }

    Ok(GeodesicEstimate {
        curve: DiscreteCurve::new(best_points)?,
        energy: best.energy,
        length: best.length,
        straight,
        iterations: cfg.iters,
    })
}

/// Outcome of checking `d² ≤ L̃² ≤ 2Ẽ` for one pair of latent codes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundCheck {
    pub geodesic_distance: f64,
    pub line_length: f64,
    pub line_energy: f64,
    pub tolerance: f64,
    pub holds: bool,
}

/// Compares the oracle's geodesic distance with the straight line's length and
/// energy at the same resolution, with tolerance `1e-6 · max(1, 2Ẽ)`.
pub fn check_bounds(
    dec: &Decoder,
    metric: MetricSpec,
    z0: &[f64],
    z1: &[f64],
    cfg: &OracleConfig,
) -> Result<BoundCheck> {
    let est = geodesic_oracle(dec, metric, z0, z1, cfg)?;
    let (d, l, e) = (est.length, est.straight.length, est.straight.energy);
    let tol = 1e-6 * f64::max(1.0, 2.0 * e);
    Ok(BoundCheck {
        geodesic_distance: d,
        line_length: l,
        line_energy: e,
        tolerance: tol,
        holds: d * d <= l * l + tol && l * l <= 2.0 * e + tol,
    })
}
