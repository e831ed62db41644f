//! Synthetic datasets and decoder pairs that parametrise the same manifold
//! differently.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{compose, AffineMap, Decoder, LatentMap, OutputIsometry};
use crate::numerics::{norm, DenseMatrix, RngStream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatentMapKind {
    Identity,
    Affine,
    Smooth,
}

impl FromStr for LatentMapKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "identity" => Ok(LatentMapKind::Identity),
            "affine" => Ok(LatentMapKind::Affine),
            "smooth" => Ok(LatentMapKind::Smooth),
            other => Err(Error::InvalidArgument(format!("unknown latent map kind '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    pub map: LatentMapKind,
    /// Draw a random output isometry; otherwise use the identity.
    pub random_isometry: bool,
    /// Number of latent samples, uniform in `[-1, 1]^d`.
    pub samples: usize,
    /// Contraction factor of the residual block for smooth maps.
    pub contraction: f64,
}

impl Default for PairSpec {
    fn default() -> Self {
        Self {
            map: LatentMapKind::Affine,
            random_isometry: true,
            samples: 500,
            contraction: 0.5,
        }
    }
}

/// Two decoders with `decoder2(φ(z)) = Q · decoder1(z) + t`.
#[derive(Clone, Debug)]
pub struct ManifoldPair {
    pub decoder1: Decoder,
    pub decoder2: Decoder,
    /// `φ`, taking codes of the first model to codes of the second.
    pub encoder_map: LatentMap,
    pub isometry: OutputIsometry,
    pub z1: DenseMatrix,
    pub descriptor: String,
}

impl ManifoldPair {
    /// Latent samples seen by the second model, `φ(Z1)`; row `i` corresponds to row `i` of `z1`.
    pub fn z2(&self) -> Result<DenseMatrix> {
        self.encoder_map.apply_rows(&self.z1)
    }

    /// Largest violation of the defining identity over the rows of `z`,
    /// relative to `max(1, ‖y‖)`.
    pub fn invariant_error(&self, z: &DenseMatrix) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for row in z.row_iter() {
            let y1 = self.isometry.apply(&self.decoder1.forward(row)?)?;
            let y2 = self.decoder2.forward(&self.encoder_map.apply(row)?)?;
            let diff: f64 = y1.iter().zip(&y2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            worst = worst.max(diff / norm(&y1).max(1.0));
        }
        Ok(worst)
    }
}

fn uniform_cube(n: usize, d: usize, rng: &mut RngStream) -> DenseMatrix {
    DenseMatrix::from_fn(n, d, |_, _| rng.uniform(-1.0, 1.0))
}

const PROBES: usize = 32;

/// Builds `decoder2 = compose(base, φ⁻¹, isometry)` and verifies the defining
/// identity on fresh probe points.
pub fn make_manifold_pair(base: Decoder, spec: &PairSpec, rng: &mut RngStream) -> Result<ManifoldPair> {
    let d = base.input_dim();
    let mut map_rng = rng.derive("latent-map");
    let mut iso_rng = rng.derive("isometry");
    let mut sample_rng = rng.derive("samples");
    let mut probe_rng = rng.derive("probes");
    let encoder_map = match spec.map {
        LatentMapKind::Identity => LatentMap::Affine(AffineMap::identity(d)),
        LatentMapKind::Affine => LatentMap::Affine(AffineMap::random(d, &mut map_rng)?),
        LatentMapKind::Smooth => LatentMap::random_smooth(d, spec.contraction, &mut map_rng)?,
    };
    let isometry = if spec.random_isometry {
        OutputIsometry::random(base.output_dim(), &mut iso_rng)?
    } else {
        OutputIsometry::identity(base.output_dim())
    };
    let decoder2 = compose(base.clone(), Some(encoder_map.inverse()), Some(isometry.clone()))?;
    let pair = ManifoldPair {
        decoder1: base,
        decoder2,
        encoder_map,
        isometry,
        z1: uniform_cube(spec.samples, d, &mut sample_rng),
        descriptor: format!(
            "map={:?} isometry={} samples={} contraction={}",
            spec.map,
            if spec.random_isometry { "random" } else { "identity" },
            spec.samples,
            spec.contraction
        ),
    };
    let tol = match spec.map {
        LatentMapKind::Smooth => 1e-8,
        _ => 1e-10,
    };
    let err = pair.invariant_error(&uniform_cube(PROBES, d, &mut probe_rng))?;
    if !(err <= tol) {
        return Err(Error::NonConvergence {
            what: "manifold pair invariant",
            residual: err,
        });
    }
    Ok(pair)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    GaussianMixture,
    SwissRoll,
    SpherePatch,
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetKind::GaussianMixture => "gaussian-mixture",
            DatasetKind::SwissRoll => "swiss-roll",
            DatasetKind::SpherePatch => "sphere-patch",
        })
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian-mixture" | "mixture" => Ok(DatasetKind::GaussianMixture),
            "swiss-roll" => Ok(DatasetKind::SwissRoll),
            "sphere-patch" => Ok(DatasetKind::SpherePatch),
            other => Err(Error::InvalidArgument(format!("unknown dataset kind '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    pub n: usize,
    /// Latent dimension for the mixture; the chart-based kinds are always 2-dimensional.
    pub latent_dim: usize,
    pub ambient_dim: usize,
    pub noise: f64,
    /// Mixture components, or label bins for the chart-based kinds.
    pub components: usize,
    /// Standard deviation of each mixture component around its centre.
    pub spread: f64,
    /// Minimum distance between mixture centres (best effort after a bounded number of redraws).
    pub min_separation: f64,
    /// Width of the hidden layer of the ambient embedding.
    pub embed_hidden: usize,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            kind: DatasetKind::GaussianMixture,
            n: 1000,
            latent_dim: 2,
            ambient_dim: 16,
            noise: 0.01,
            components: 10,
            spread: 0.35,
            min_separation: 0.0,
            embed_hidden: 32,
        }
    }
}

impl DatasetSpec {
    pub fn latent_dim(&self) -> usize {
        match self.kind {
            DatasetKind::GaussianMixture => self.latent_dim,
            DatasetKind::SwissRoll | DatasetKind::SpherePatch => 2,
        }
    }

    /// Dimension of the manifold before the ambient embedding.
    fn chart_dim(&self) -> usize {
        match self.kind {
            DatasetKind::GaussianMixture => self.latent_dim,
            DatasetKind::SwissRoll | DatasetKind::SpherePatch => 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("dataset needs at least one point".into()));
        }
        if self.components == 0 {
            return Err(Error::InvalidArgument("components must be at least 1".into()));
        }
        if self.latent_dim() == 0 {
            return Err(Error::InvalidArgument("latent dimension must be at least 1".into()));
        }
        if self.ambient_dim < self.chart_dim() {
            return Err(Error::InvalidArgument(format!(
                "ambient dimension {} is smaller than the manifold dimension {}",
                self.ambient_dim,
                self.chart_dim()
            )));
        }
        if !(self.noise >= 0.0) || !(self.spread >= 0.0) {
            return Err(Error::InvalidArgument("noise and spread must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticDataset {
    pub x: DenseMatrix,
    pub z: DenseMatrix,
    pub labels: Vec<usize>,
    pub noise: f64,
}

impl SyntheticDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> Result<SyntheticDataset> {
        Ok(SyntheticDataset {
            x: self.x.select_rows(indices)?,
            z: self.z.select_rows(indices)?,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            noise: self.noise,
        })
    }
}

/// Frozen ambient embedding `u ↦ B u + C tanh(A u + a)`; the linear term
/// keeps it injective.
struct Embedding {
    a: DenseMatrix,
    bias: Vec<f64>,
    b: DenseMatrix,
    c: DenseMatrix,
}

impl Embedding {
    fn random(input: usize, hidden: usize, output: usize, rng: &mut RngStream) -> Self {
        let sa = 1.0 / (input as f64).sqrt();
        let sb = 1.0 / (input as f64).sqrt();
        let sc = 1.0 / (hidden as f64).sqrt();
        Self {
            a: DenseMatrix::from_fn(hidden, input, |_, _| sa * rng.normal()),
            bias: (0..hidden).map(|_| 0.5 * rng.normal()).collect(),
            b: DenseMatrix::from_fn(output, input, |_, _| sb * rng.normal()),
            c: DenseMatrix::from_fn(output, hidden, |_, _| sc * rng.normal()),
        }
    }

    fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        let mut h = self.a.matvec(u)?;
        h.iter_mut().zip(&self.bias).for_each(|(v, b)| *v = (*v + b).tanh());
        let mut y = self.b.matvec(u)?;
        y.iter_mut().zip(self.c.matvec(&h)?).for_each(|(v, c)| *v += c);
        Ok(y)
    }
}

const CENTRE_REDRAWS: usize = 1000;

/// Centres uniform in `[-2, 2]^d`, each redrawn until it is at least
/// `min_sep` from the previous ones (keeping the farthest candidate if the
/// redraw budget runs out).
fn mixture_centres(k: usize, d: usize, min_sep: f64, rng: &mut RngStream) -> DenseMatrix {
    let mut centres = DenseMatrix::zeros(k, d);
    for c in 0..k {
        let mut best: Vec<f64> = Vec::new();
        let mut best_gap = f64::NEG_INFINITY;
        for _ in 0..CENTRE_REDRAWS {
            let cand: Vec<f64> = (0..d).map(|_| rng.uniform(-2.0, 2.0)).collect();
            let gap = (0..c)
                .map(|p| crate::numerics::euclidean_distance(&cand, centres.row(p)))
                .fold(f64::INFINITY, f64::min);
            if gap > best_gap {
                best_gap = gap;
                best = cand;
            }
            if best_gap >= min_sep {
                break;
            }
        }
        centres.row_mut(c).copy_from_slice(&best);
    }
    centres
}

fn bin_labels(values: &[f64], bins: usize) -> Vec<usize> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo).max(f64::MIN_POSITIVE);
    values
        .iter()
        .map(|&v| (((v - lo) / width * bins as f64) as usize).min(bins - 1))
        .collect()
}

/// Draws a dataset. Mixture rows cycle through the components so every label
/// appears `⌊n / components⌋` or `⌈n / components⌉` times.
pub fn make_dataset(spec: &DatasetSpec, rng: &mut RngStream) -> Result<SyntheticDataset> {
    spec.validate()?;
    let mut embed_rng = rng.derive("embedding");
    let mut latent_rng = rng.derive("latent");
    let mut noise_rng = rng.derive("noise");
    let n = spec.n;
    let d = spec.latent_dim();

    let (z, chart, labels) = match spec.kind {
        DatasetKind::GaussianMixture => {
            let centres = mixture_centres(spec.components, d, spec.min_separation, &mut latent_rng);
            let labels: Vec<usize> = (0..n).map(|i| i % spec.components).collect();
            let z = DenseMatrix::from_fn(n, d, |i, k| centres.get(labels[i], k) + spec.spread * latent_rng.normal());
            (z.clone(), z, labels)
        }
        DatasetKind::SwissRoll => {
            let z = DenseMatrix::from_fn(n, 2, |_, k| {
                if k == 0 {
                    latent_rng.uniform(1.5 * PI, 4.5 * PI)
                } else {
                    latent_rng.uniform(-1.0, 1.0)
                }
            });
            let roll = Decoder::SwissRoll { scale: 0.1 };
            let chart = roll.forward_batch(&z)?;
            let labels = bin_labels(&z.column(0), spec.components);
            (z, chart, labels)
        }
        DatasetKind::SpherePatch => {
            let z = DenseMatrix::from_fn(n, 2, |_, k| {
                if k == 0 {
                    latent_rng.uniform(0.25 * PI, 0.75 * PI)
                } else {
                    latent_rng.uniform(-0.5 * PI, 0.5 * PI)
                }
            });
            let chart = Decoder::SphereChart { radius: 1.0 }.forward_batch(&z)?;
            let labels = bin_labels(&z.column(1), spec.components);
            (z, chart, labels)
        }
    };

    let embedding = Embedding::random(chart.cols(), spec.embed_hidden.max(1), spec.ambient_dim, &mut embed_rng);
    let mut x = DenseMatrix::zeros(n, spec.ambient_dim);
    for i in 0..n {
        let y = embedding.apply(chart.row(i))?;
        for (dst, v) in x.row_mut(i).iter_mut().zip(y) {
            *dst = v + spec.noise * noise_rng.normal();
        }
    }
    Ok(SyntheticDataset {
        x,
        z,
        labels,
        noise: spec.noise,
    })
}

/// Balanced subsample: the first `per_label` rows of every label, in label order.
pub fn per_label_indices(labels: &[usize], per_label: usize) -> Vec<usize> {
    let num = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut out = Vec::with_capacity(num * per_label);
    for l in 0..num {
        out.extend(labels.iter().enumerate().filter(|&(_, &v)| v == l).map(|(i, _)| i).take(per_label));
    }
    out
}
