use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{dim_mismatch, Error, Result};
use crate::numerics::{euclidean_distance, norm};

pub const DEFAULT_FISHER_EPS: f64 = 1e-6;

/// Riemannian metric on the decoder's output space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MetricSpec {
    Euclidean,
    /// Round metric of the unit sphere; outputs are projected onto it first.
    Spherical,
    /// Fisher-Rao metric of the categorical family; outputs are probability
    /// vectors, clamped to `[eps, 1]` and renormalised.
    FisherRaoCategorical { eps: f64 },
}

impl MetricSpec {
    pub fn fisher_rao() -> Self {
        MetricSpec::FisherRaoCategorical { eps: DEFAULT_FISHER_EPS }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            MetricSpec::FisherRaoCategorical { eps } if !(eps > 0.0 && eps < 1.0) => Err(Error::InvalidArgument(
                format!("Fisher-Rao eps must lie in (0, 1), got {eps}"),
            )),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for MetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricSpec::Euclidean => f.write_str("euclidean"),
            MetricSpec::Spherical => f.write_str("spherical"),
            MetricSpec::FisherRaoCategorical { eps } => write!(f, "fisher-rao(eps={eps})"),
        }
    }
}

impl FromStr for MetricSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" | "l2" => Ok(MetricSpec::Euclidean),
            "spherical" | "sphere" => Ok(MetricSpec::Spherical),
            "fisher-rao" | "fisher" | "fisher-rao-categorical" => Ok(MetricSpec::fisher_rao()),
            other => Err(Error::InvalidArgument(format!("unknown metric '{other}'"))),
        }
    }
}

/// Angle between two unit vectors, stable for both tiny and near-π angles.
fn unit_angle(u: &[f64], v: &[f64]) -> f64 {
    let mut diff = 0.0;
    let mut sum = 0.0;
    for (a, b) in u.iter().zip(v) {
        diff += (a - b) * (a - b);
        sum += (a + b) * (a + b);
    }
    2.0 * diff.sqrt().atan2(sum.sqrt())
}

fn sqrt_probabilities(p: &[f64], eps: f64) -> Result<Vec<f64>> {
    if let Some(bad) = p.iter().find(|&&x| x < -1e-9 || !x.is_finite()) {
        return Err(Error::InvalidArgument(format!("probability vector has invalid entry {bad}")));
    }
    let clamped: Vec<f64> = p.iter().map(|&x| x.clamp(eps, 1.0)).collect();
    let total: f64 = clamped.iter().sum();
    Ok(clamped.iter().map(|x| (x / total).sqrt()).collect())
}

/// Length of the output-space geodesic between two points under `metric`.
///
/// Euclidean: `‖a − b‖`. Spherical: the angle between `a/‖a‖` and `b/‖b‖`.
/// Fisher-Rao: `2 arccos Σ √(pᵢ qᵢ)`.
pub fn segment_output_distance(metric: MetricSpec, a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(dim_mismatch("segment_output_distance", a.len(), b.len()));
    }
    match metric {
        MetricSpec::Euclidean => Ok(euclidean_distance(a, b)),
        MetricSpec::Spherical => {
            let (na, nb) = (norm(a), norm(b));
            if na == 0.0 || nb == 0.0 {
                return Err(Error::InvalidArgument(
                    "spherical metric is undefined for the zero vector".into(),
                ));
            }
            let ua: Vec<f64> = a.iter().map(|x| x / na).collect();
            let ub: Vec<f64> = b.iter().map(|x| x / nb).collect();
            Ok(unit_angle(&ua, &ub))
        }
        MetricSpec::FisherRaoCategorical { eps } => {
            metric.validate()?;
            let sa = sqrt_probabilities(a, eps)?;
            let sb = sqrt_probabilities(b, eps)?;
            Ok(2.0 * unit_angle(&sa, &sb))
        }
    }
}
