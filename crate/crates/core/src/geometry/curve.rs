use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{dim_mismatch, Error, Result};
use crate::models::Decoder;
use crate::numerics::DenseMatrix;

use super::metric::{segment_output_distance, MetricSpec};

pub const DEFAULT_STEPS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveQuantity {
    Energy,
    Length,
}

impl fmt::Display for CurveQuantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CurveQuantity::Energy => "energy",
            CurveQuantity::Length => "length",
        })
    }
}

impl FromStr for CurveQuantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "energy" => Ok(CurveQuantity::Energy),
            "length" | "distance" => Ok(CurveQuantity::Length),
            other => Err(Error::InvalidArgument(format!("unknown curve quantity '{other}'"))),
        }
    }
}

/// Straight latent segment from `z0` to `z1`, sampled at `steps + 1` points.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveSpec {
    pub z0: Vec<f64>,
    pub z1: Vec<f64>,
    pub steps: usize,
}

impl CurveSpec {
    pub fn new(z0: Vec<f64>, z1: Vec<f64>, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidArgument("curve needs at least one step".into()));
        }
        if z0.len() != z1.len() {
            return Err(dim_mismatch("CurveSpec endpoints", z0.len(), z1.len()));
        }
        Ok(Self { z0, z1, steps })
    }

    /// `γ_j = ((N − j)/N) z0 + (j/N) z1`. The weights are formed from integer
    /// ratios so that the reversed segment visits bit-identical points.
    pub fn points(&self) -> DenseMatrix {
        let n = self.steps;
        DenseMatrix::from_fn(n + 1, self.z0.len(), |j, k| {
            let w0 = (n - j) as f64 / n as f64;
            let w1 = j as f64 / n as f64;
            w0 * self.z0[k] + w1 * self.z1[k]
        })
    }
}

/// Latent polyline with fixed endpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteCurve {
    points: DenseMatrix,
}

impl DiscreteCurve {
    pub fn new(points: DenseMatrix) -> Result<Self> {
        if points.rows() < 2 {
            return Err(Error::InvalidArgument("a discrete curve needs at least two points".into()));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &DenseMatrix {
        &self.points
    }

    pub fn steps(&self) -> usize {
        self.points.rows() - 1
    }

    pub fn start(&self) -> &[f64] {
        self.points.row(0)
    }

    pub fn end(&self) -> &[f64] {
        self.points.row(self.points.rows() - 1)
    }

    /// Piecewise-linear resampling at curve parameters `ts` in `[0, 1]`,
    /// where node `j` sits at `j / steps`.
    pub fn resample(&self, ts: &[f64]) -> Result<DiscreteCurve> {
        let n = self.steps();
        let d = self.points.cols();
        let mut out = DenseMatrix::zeros(ts.len(), d);
        for (row, &t) in ts.iter().enumerate() {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::InvalidArgument(format!("curve parameter {t} outside [0, 1]")));
            }
            let x = t * n as f64;
            let seg = (x.floor() as usize).min(n - 1);
            let frac = x - seg as f64;
            let (a, b) = (self.points.row(seg), self.points.row(seg + 1));
            for (k, dst) in out.row_mut(row).iter_mut().enumerate() {
                *dst = if frac == 0.0 {
                    a[k]
                } else if frac == 1.0 {
                    b[k]
                } else {
                    (1.0 - frac) * a[k] + frac * b[k]
                };
            }
        }
        DiscreteCurve::new(out)
    }
}

/// Discrete length `Σ s_j` and energy `(N/2) Σ s_j²` of a decoded polyline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurveMeasure {
    pub length: f64,
    pub energy: f64,
}

impl CurveMeasure {
    pub fn get(&self, q: CurveQuantity) -> f64 {
        match q {
            CurveQuantity::Energy => self.energy,
            CurveQuantity::Length => self.length,
        }
    }
}

/// Measures a polyline given its decoded points (one per row).
pub fn measure_outputs(metric: MetricSpec, outputs: &DenseMatrix) -> Result<CurveMeasure> {
    let n = outputs.rows().saturating_sub(1);
    if n == 0 {
        return Err(Error::InvalidArgument("curve needs at least one segment".into()));
    }
    let mut segments = Vec::with_capacity(n);
    for j in 1..=n {
        segments.push(segment_output_distance(metric, outputs.row(j), outputs.row(j - 1))?);
    }
    // Canonical summation order: symmetric under reversal and slightly more accurate.
    segments.sort_by(f64::total_cmp);
    let length: f64 = segments.iter().sum();
    let sq: f64 = segments.iter().map(|s| s * s).sum();
    Ok(CurveMeasure {
        length,
        energy: 0.5 * n as f64 * sq,
    })
}

pub fn measure_curve(dec: &Decoder, metric: MetricSpec, points: &DenseMatrix) -> Result<CurveMeasure> {
    measure_outputs(metric, &dec.forward_batch(points)?)
}

/// Length and energy of the decoded straight segment.
pub fn straight_line_measure(dec: &Decoder, metric: MetricSpec, curve: &CurveSpec) -> Result<CurveMeasure> {
    if curve.z0.len() != dec.input_dim() {
        return Err(dim_mismatch("straight_line_quantity", dec.input_dim(), curve.z0.len()));
    }
    measure_curve(dec, metric, &curve.points())
}

/// Straight-line approximation of the pullback geodesic length or energy
/// between `curve.z0` and `curve.z1`.
pub fn straight_line_quantity(
    dec: &Decoder,
    metric: MetricSpec,
    curve: &CurveSpec,
    mode: CurveQuantity,
) -> Result<f64> {
    Ok(straight_line_measure(dec, metric, curve)?.get(mode))
}
