//! End-to-end protocols: geodesic comparison, cross-model retrieval and anchor
//! sweeps, correspondence-based stitching. The CLI and the acceptance suite
//! both drive these.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alignment::{crossspace_similarity, extract_correspondence, fit_from_correspondence, stitch, AlignmentMap, MapKind};
use crate::error::{dim_mismatch, Error, Result};
use crate::eval::{mrr, reconstruction_mse, spearman, MrrOptions};
use crate::geometry::{geodesic_oracle, straight_line_measure, CurveSpec, MetricSpec, OracleConfig};
use crate::models::{Activation, Decoder, MlpSpec};
use crate::numerics::{fnv1a, DenseMatrix, RngStream};
use crate::relrep::{relrep, select_anchors, AnchorScheme, AnchorSet, RelRepMode};
use crate::training::TrainedAutoencoder;

/// Seed for a named sub-task, so each model or repeat draws from its own stream.
pub fn sub_seed(seed: u64, name: &str) -> u64 {
    fnv1a(format!("{seed}:{name}").as_bytes())
}

/// Mirror-symmetric MLP autoencoder: Tanh hidden layers, linear latent and output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AeArchitecture {
    pub hidden: Vec<usize>,
    pub latent_dim: usize,
}

impl AeArchitecture {
    pub fn encoder_spec(&self, ambient: usize) -> Result<MlpSpec> {
        let mut dims = vec![ambient];
        dims.extend(&self.hidden);
        dims.push(self.latent_dim);
        MlpSpec::uniform(dims, Activation::Tanh, Activation::Identity)
    }

    pub fn decoder_spec(&self, ambient: usize) -> Result<MlpSpec> {
        let mut dims = vec![self.latent_dim];
        dims.extend(self.hidden.iter().rev());
        dims.push(ambient);
        MlpSpec::uniform(dims, Activation::Tanh, Activation::Identity)
    }
}

/// How a relative representation is computed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelRepSettings {
    pub mode: RelRepMode,
    pub metric: MetricSpec,
    pub steps: usize,
}

impl RelRepSettings {
    pub fn cosine() -> Self {
        Self {
            mode: RelRepMode::Cosine,
            metric: MetricSpec::Euclidean,
            steps: 1,
        }
    }

    pub fn geodesic(metric: MetricSpec, steps: usize) -> Self {
        Self {
            mode: RelRepMode::GeoLength,
            metric,
            steps,
        }
    }

    pub fn label(&self) -> String {
        match self.mode {
            RelRepMode::Cosine => "cosine".into(),
            m => format!("{m}/{}/N={}", self.metric, self.steps),
        }
    }
}

/// One model's view of a retrieval problem.
#[derive(Clone, Copy, Debug)]
pub struct Space<'a> {
    /// Latent codes of the query/target samples; row `i` of both spaces is the same sample.
    pub samples: &'a DenseMatrix,
    /// Latent codes of the candidate anchors; rows correspond across spaces.
    pub pool: &'a DenseMatrix,
    pub decoder: &'a Decoder,
}

fn check_spaces(s1: &Space<'_>, s2: &Space<'_>) -> Result<()> {
    if s1.samples.rows() != s2.samples.rows() {
        return Err(dim_mismatch("retrieval sample count", s1.samples.rows(), s2.samples.rows()));
    }
    if s1.pool.rows() != s2.pool.rows() {
        return Err(dim_mismatch("retrieval anchor pool", s1.pool.rows(), s2.pool.rows()));
    }
    Ok(())
}

/// Cross-model similarity of relative representations on shared anchors.
pub fn cross_similarity(
    s1: &Space<'_>,
    s2: &Space<'_>,
    anchors: &[usize],
    settings: &RelRepSettings,
) -> Result<DenseMatrix> {
    check_spaces(s1, s2)?;
    let a1 = AnchorSet::from_indices(s1.pool, anchors.to_vec(), AnchorScheme::Uniform, 0)?;
    let a2 = a1.reembed(s2.pool)?;
    let r1 = relrep(s1.samples, &a1, settings.mode, s1.decoder, settings.metric, settings.steps)?;
    let r2 = relrep(s2.samples, &a2, settings.mode, s2.decoder, settings.metric, settings.steps)?;
    crossspace_similarity(&r1, &r2)
}

/// MRR of retrieving sample `i` of the second space from sample `i` of the first.
pub fn cross_mrr(s1: &Space<'_>, s2: &Space<'_>, anchors: &[usize], settings: &RelRepSettings) -> Result<f64> {
    let d = cross_similarity(s1, s2, anchors, settings)?;
    let gt: Vec<usize> = (0..d.rows()).collect();
    Ok(mrr(&d, &gt, MrrOptions::default())?.mrr)
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub method: String,
    pub mean: f64,
    pub std: f64,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub ks: Vec<usize>,
    pub repeats: usize,
    pub scheme: AnchorScheme,
}

/// Anchor draw `rep` for `k` anchors, chosen on the first space's pool.
pub fn draw_anchors(pool: &DenseMatrix, k: usize, scheme: AnchorScheme, seed: u64, rep: usize) -> Result<Vec<usize>> {
    let rng = RngStream::named(seed, &format!("anchors:rep-{rep}"));
    let mut rng = rng.derive(&format!("k-{k}"));
    Ok(select_anchors(pool, k, scheme, &mut rng)?.indices().to_vec())
}

/// MRR versus anchor count: for each `k` and repeat, every method sees the
/// same anchors.
pub fn anchor_sweep(
    s1: &Space<'_>,
    s2: &Space<'_>,
    spec: &SweepSpec,
    methods: &[RelRepSettings],
    seed: u64,
) -> Result<Vec<SweepRow>> {
    check_spaces(s1, s2)?;
    if spec.repeats == 0 {
        return Err(Error::InvalidArgument("anchor sweep needs at least one repeat".into()));
    }
    let mut rows = Vec::new();
    for &k in &spec.ks {
        let draws: Vec<Vec<usize>> = (0..spec.repeats)
            .map(|rep| draw_anchors(s1.pool, k, spec.scheme, seed, rep))
            .collect::<Result<_>>()?;
        for m in methods {
            let values: Vec<f64> = draws
                .par_iter()
                .map(|a| cross_mrr(s1, s2, a, m))
                .collect::<Result<_>>()?;
            let (mean, std) = mean_std(&values);
            rows.push(SweepRow {
                k,
                method: m.label(),
                mean,
                std,
                values,
            });
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug)]
pub struct GeodesicComparison {
    /// Straight-line energies; symmetric with zero diagonal.
    pub line: DenseMatrix,
    /// Oracle (optimised) energies; symmetric with zero diagonal.
    pub oracle: DenseMatrix,
    /// Spearman correlation over the strict upper triangle.
    pub spearman: f64,
}

/// Straight-line versus optimised energies for every pair of rows of `z`.
pub fn geodesic_compare(
    dec: &Decoder,
    z: &DenseMatrix,
    metric: MetricSpec,
    line_steps: usize,
    oracle: &OracleConfig,
) -> Result<GeodesicComparison> {
    let n = z.rows();
    if n < 3 {
        return Err(Error::InvalidArgument("geodesic comparison needs at least three points".into()));
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let results: Vec<(f64, f64)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let spec = CurveSpec::new(z.row(i).to_vec(), z.row(j).to_vec(), line_steps)?;
            let line = straight_line_measure(dec, metric, &spec)?.energy;
            let est = geodesic_oracle(dec, metric, z.row(i), z.row(j), oracle)?;
            Ok((line, est.energy))
        })
        .collect::<Result<_>>()?;
    let mut line = DenseMatrix::zeros(n, n);
    let mut opt = DenseMatrix::zeros(n, n);
    for (&(i, j), &(l, o)) in pairs.iter().zip(&results) {
        line.set(i, j, l);
        line.set(j, i, l);
        opt.set(i, j, o);
        opt.set(j, i, o);
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = results.into_iter().unzip();
    Ok(GeodesicComparison {
        line,
        oracle: opt,
        spearman: spearman(&xs, &ys)?,
    })
}

#[derive(Clone, Debug)]
pub struct StitchReport {
    /// Reconstruction MSE of the target model on its own codes.
    pub native_mse: f64,
    /// MSE of `D₂(E₁(x) T + t)`.
    pub stitched_mse: f64,
    /// MSE of `D₂(E₁(x))` without any map.
    pub unmapped_mse: f64,
    pub map: AlignmentMap,
    /// Fraction of fitting samples matched to their true counterpart.
    pub correspondence_accuracy: f64,
}

/// Zero-shot stitching: match the fitting samples across the two latent
/// spaces through relative representations, fit a map on the matches, and
/// evaluate `D₂ ∘ T ∘ E₁` on `x_eval`.
pub fn stitching(
    ae1: &TrainedAutoencoder,
    ae2: &TrainedAutoencoder,
    x_fit: &DenseMatrix,
    x_eval: &DenseMatrix,
    anchors: &[usize],
    settings: &RelRepSettings,
    kind: MapKind,
    center: bool,
) -> Result<StitchReport> {
    let z1 = ae1.encode(x_fit)?;
    let z2 = ae2.encode(x_fit)?;
    let (d1, d2) = (ae1.decoder(), ae2.decoder());
    let s1 = Space {
        samples: &z1,
        pool: &z1,
        decoder: &d1,
    };
    let s2 = Space {
        samples: &z2,
        pool: &z2,
        decoder: &d2,
    };
    let sim = cross_similarity(&s1, &s2, anchors, settings)?;
    let corr = extract_correspondence(&sim)?;
    let correct = corr.sources.iter().zip(&corr.targets).filter(|(s, t)| s == t).count();
    let map = fit_from_correspondence(kind, &z1, &z2, &corr, center)?;
    let native = reconstruction_mse(&ae2.reconstruct(x_eval)?, x_eval)?;
    let stitched = reconstruction_mse(&stitch(&ae1.encoder, &map, &d2, x_eval)?, x_eval)?;
    let identity = AlignmentMap::identity(ae1.encoder.output_dim());
    let unmapped = reconstruction_mse(&stitch(&ae1.encoder, &identity, &d2, x_eval)?, x_eval)?;
    Ok(StitchReport {
        native_mse: native,
        stitched_mse: stitched,
        unmapped_mse: unmapped,
        map,
        correspondence_accuracy: correct as f64 / corr.len().max(1) as f64,
    })
}
