//! Anchor selection and relative representations.
//!
//! A relative representation describes each latent code by its similarity
//! (cosine) or straight-line pullback distance (length or energy) to a fixed
//! set of anchors.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{dim_mismatch, Error, Result};
use crate::geometry::{straight_line_measure, CurveQuantity, CurveSpec, MetricSpec};
use crate::models::Decoder;
use crate::numerics::{cosine, euclidean_distance, DenseMatrix, RngStream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnchorScheme {
    Uniform,
    Fps,
    Kmeans,
}

impl fmt::Display for AnchorScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AnchorScheme::Uniform => "uniform",
            AnchorScheme::Fps => "fps",
            AnchorScheme::Kmeans => "kmeans",
        })
    }
}

impl FromStr for AnchorScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" | "random" => Ok(AnchorScheme::Uniform),
            "fps" => Ok(AnchorScheme::Fps),
            "kmeans" | "k-means" => Ok(AnchorScheme::Kmeans),
            other => Err(Error::InvalidArgument(format!("unknown anchor scheme '{other}'"))),
        }
    }
}

/// Hex SHA-256 of the anchor indices. Two relative representations are
/// comparable column by column only if their fingerprints agree.
pub fn anchor_fingerprint(indices: &[usize]) -> String {
    let mut h = Sha256::new();
    for &i in indices {
        h.update((i as u64).to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnchorSet {
    indices: Vec<usize>,
    latent: DenseMatrix,
    scheme: AnchorScheme,
    seed: u64,
}

impl AnchorSet {
    /// Anchors at `indices` of `z`; indices must be unique and in range.
    pub fn from_indices(z: &DenseMatrix, indices: Vec<usize>, scheme: AnchorScheme, seed: u64) -> Result<Self> {
        let unique: BTreeSet<usize> = indices.iter().copied().collect();
        if unique.len() != indices.len() {
            return Err(Error::InvalidArgument("anchor indices must be unique".into()));
        }
        let latent = z.select_rows(&indices)?;
        Ok(Self {
            indices,
            latent,
            scheme,
            seed,
        })
    }

    /// Same anchor indices, latent codes taken from another space.
    pub fn reembed(&self, z: &DenseMatrix) -> Result<Self> {
        Self::from_indices(z, self.indices.clone(), self.scheme, self.seed)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn latent(&self) -> &DenseMatrix {
        &self.latent
    }

    pub fn scheme(&self) -> AnchorScheme {
        self.scheme
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn fingerprint(&self) -> String {
        anchor_fingerprint(&self.indices)
    }
}

fn farthest_point(z: &DenseMatrix, k: usize, rng: &mut RngStream) -> Vec<usize> {
    let n = z.rows();
    let first = rng.index(n);
    let mut chosen = vec![first];
    let mut dist: Vec<f64> = (0..n).map(|i| euclidean_distance(z.row(i), z.row(first))).collect();
    while chosen.len() < k {
        // Strictly greater keeps the smallest index on ties; chosen points have distance 0.
        let mut best = None;
        let mut best_d = -1.0;
        for (i, &d) in dist.iter().enumerate() {
            if d > best_d && !chosen.contains(&i) {
                best = Some(i);
                best_d = d;
            }
        }
        let next = best.expect("k <= n leaves an unchosen point");
        chosen.push(next);
        for (i, d) in dist.iter_mut().enumerate() {
            *d = d.min(euclidean_distance(z.row(i), z.row(next)));
        }
    }
    chosen
}

const KMEANS_ITERS: usize = 50;

fn nearest(z: &DenseMatrix, centroids: &DenseMatrix, i: usize) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for c in 0..centroids.rows() {
        let d = euclidean_distance(z.row(i), centroids.row(c));
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

fn kmeans(z: &DenseMatrix, k: usize, rng: &mut RngStream) -> Result<Vec<usize>> {
    let init = rng.sample_indices(z.rows(), k);
    let mut centroids = z.select_rows(&init)?;
    for _ in 0..KMEANS_ITERS {
        let assign: Vec<usize> = (0..z.rows()).map(|i| nearest(z, &centroids, i)).collect();
        let mut sums = DenseMatrix::zeros(k, z.cols());
        let mut counts = vec![0usize; k];
        for (i, &c) in assign.iter().enumerate() {
            counts[c] += 1;
            for (s, v) in sums.row_mut(c).iter_mut().zip(z.row(i)) {
                *s += v;
            }
        }
        let mut next = centroids.clone();
        for c in 0..k {
            if counts[c] > 0 {
                for (dst, s) in next.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s / counts[c] as f64;
                }
            }
        }
        let converged = next == centroids;
        centroids = next;
        if converged {
            break;
        }
    }
    // Nearest data point per centroid, deduplicated in centroid order.
    let mut picked = Vec::with_capacity(k);
    for c in 0..k {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for i in 0..z.rows() {
            let d = euclidean_distance(z.row(i), centroids.row(c));
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        if !picked.contains(&best) {
            picked.push(best);
        }
    }
    top_up(&mut picked, z.rows(), k, rng);
    Ok(picked)
}

fn top_up(picked: &mut Vec<usize>, n: usize, k: usize, rng: &mut RngStream) {
    if picked.len() >= k {
        return;
    }
    let mut rest: Vec<usize> = (0..n).filter(|i| !picked.contains(i)).collect();
    rng.shuffle(&mut rest);
    picked.extend(rest.into_iter().take(k - picked.len()));
}

/// Picks `k` anchors from the rows of `z`.
pub fn select_anchors(z: &DenseMatrix, k: usize, scheme: AnchorScheme, rng: &mut RngStream) -> Result<AnchorSet> {
    if k > z.rows() {
        return Err(Error::InvalidArgument(format!(
            "cannot select {k} anchors from {} points",
            z.rows()
        )));
    }
    let seed = rng.seed();
    let indices = if k == 0 {
        Vec::new()
    } else {
        match scheme {
            AnchorScheme::Uniform => rng.sample_indices(z.rows(), k),
            AnchorScheme::Fps => farthest_point(z, k, rng),
            AnchorScheme::Kmeans => kmeans(z, k, rng)?,
        }
    };
    AnchorSet::from_indices(z, indices, scheme, seed)
}

/// Anchors chosen jointly for several spaces over the same samples: each
/// space proposes `k` anchors, the proposals are merged and a seeded uniform
/// subsample of size `k` is kept. The returned sets share indices.
pub fn select_anchors_multi(
    spaces: &[&DenseMatrix],
    k: usize,
    scheme: AnchorScheme,
    rng: &mut RngStream,
) -> Result<Vec<AnchorSet>> {
    let first = spaces
        .first()
        .ok_or_else(|| Error::InvalidArgument("at least one latent space is required".into()))?;
    let n = first.rows();
    if let Some(bad) = spaces.iter().find(|s| s.rows() != n) {
        return Err(dim_mismatch("select_anchors_multi rows", n, bad.rows()));
    }
    let mut union = BTreeSet::new();
    for (m, z) in spaces.iter().enumerate() {
        let mut sub = rng.derive(&format!("model-{m}"));
        union.extend(select_anchors(z, k, scheme, &mut sub)?.indices);
    }
    let pool: Vec<usize> = union.into_iter().collect();
    let keep = rng.sample_indices(pool.len(), k.min(pool.len()));
    let mut indices: Vec<usize> = keep.into_iter().map(|i| pool[i]).collect();
    top_up(&mut indices, n, k, rng);
    spaces
        .iter()
        .map(|z| AnchorSet::from_indices(z, indices.clone(), scheme, rng.seed()))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelRepMode {
    Cosine,
    GeoLength,
    GeoEnergy,
}

impl RelRepMode {
    pub fn quantity(self) -> Option<CurveQuantity> {
        match self {
            RelRepMode::Cosine => None,
            RelRepMode::GeoLength => Some(CurveQuantity::Length),
            RelRepMode::GeoEnergy => Some(CurveQuantity::Energy),
        }
    }
}

impl fmt::Display for RelRepMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RelRepMode::Cosine => "cosine",
            RelRepMode::GeoLength => "geo-length",
            RelRepMode::GeoEnergy => "geo-energy",
        })
    }
}

impl FromStr for RelRepMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cosine" => Ok(RelRepMode::Cosine),
            "geo-length" | "length" => Ok(RelRepMode::GeoLength),
            "geo-energy" | "energy" => Ok(RelRepMode::GeoEnergy),
            other => Err(Error::InvalidArgument(format!("unknown relrep mode '{other}'"))),
        }
    }
}

/// Samples × anchors matrix together with how it was produced.
#[derive(Clone, Debug, PartialEq)]
pub struct RelRepMatrix {
    pub values: DenseMatrix,
    pub mode: RelRepMode,
    pub metric: Option<MetricSpec>,
    pub steps: Option<usize>,
    pub fingerprint: String,
    /// Rows whose latent code had zero norm (cosine mode only); their entries are 0.
    pub zero_rows: Vec<usize>,
}

impl RelRepMatrix {
    pub fn num_anchors(&self) -> usize {
        self.values.cols()
    }
}

fn check_latent_dim(z: &DenseMatrix, anchors: &AnchorSet) -> Result<()> {
    if z.cols() != anchors.latent().cols() {
        return Err(dim_mismatch("relrep latent dim", anchors.latent().cols(), z.cols()));
    }
    Ok(())
}

/// Cosine similarity of every row of `z` to every anchor.
pub fn relrep_cosine(z: &DenseMatrix, anchors: &AnchorSet) -> Result<RelRepMatrix> {
    check_latent_dim(z, anchors)?;
    let a = anchors.latent();
    let mut values = DenseMatrix::zeros(z.rows(), a.rows());
    let mut zero_rows = Vec::new();
    for i in 0..z.rows() {
        let mut degenerate = false;
        for j in 0..a.rows() {
            let c = cosine(z.row(i), a.row(j));
            degenerate |= c.is_none();
            values.set(i, j, c.unwrap_or(0.0));
        }
        if degenerate {
            zero_rows.push(i);
        }
    }
    Ok(RelRepMatrix {
        values,
        mode: RelRepMode::Cosine,
        metric: None,
        steps: None,
        fingerprint: anchors.fingerprint(),
        zero_rows,
    })
}

/// Straight-line pullback length or energy from every row of `z` to every
/// anchor. Entries are computed in parallel; any failure reports its cell.
pub fn relrep_geodesic(
    z: &DenseMatrix,
    anchors: &AnchorSet,
    dec: &Decoder,
    metric: MetricSpec,
    steps: usize,
    quantity: CurveQuantity,
) -> Result<RelRepMatrix> {
    check_latent_dim(z, anchors)?;
    if z.cols() != dec.input_dim() {
        return Err(dim_mismatch("relrep_geodesic decoder input", dec.input_dim(), z.cols()));
    }
    if steps == 0 {
        return Err(Error::InvalidArgument("relrep_geodesic needs at least one step".into()));
    }
    metric.validate()?;
    let a = anchors.latent();
    let k = a.rows();
    let rows: Vec<Vec<f64>> = (0..z.rows())
        .into_par_iter()
        .map(|i| {
            (0..k)
                .map(|j| {
                    let spec = CurveSpec::new(z.row(i).to_vec(), a.row(j).to_vec(), steps)?;
                    straight_line_measure(dec, metric, &spec)
                        .map(|m| m.get(quantity))
                        .map_err(|e| Error::Entry {
                            row: i,
                            col: j,
                            source: Box::new(e),
                        })
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let values = DenseMatrix::new(z.rows(), k, rows.concat())?;
    Ok(RelRepMatrix {
        values,
        mode: match quantity {
            CurveQuantity::Length => RelRepMode::GeoLength,
            CurveQuantity::Energy => RelRepMode::GeoEnergy,
        },
        metric: Some(metric),
        steps: Some(steps),
        fingerprint: anchors.fingerprint(),
        zero_rows: Vec::new(),
    })
}

/// Dispatches on `mode`; `dec` and `metric` are ignored for cosine.
pub fn relrep(
    z: &DenseMatrix,
    anchors: &AnchorSet,
    mode: RelRepMode,
    dec: &Decoder,
    metric: MetricSpec,
    steps: usize,
) -> Result<RelRepMatrix> {
    match mode.quantity() {
        None => relrep_cosine(z, anchors),
        Some(q) => relrep_geodesic(z, anchors, dec, metric, steps, q),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_points(n: usize) -> DenseMatrix {
        DenseMatrix::from_fn(n, 1, |i, _| i as f64)
    }

    #[test]
    fn k_equals_rows_takes_everything() {
        let z = line_points(6);
        for scheme in [AnchorScheme::Uniform, AnchorScheme::Fps, AnchorScheme::Kmeans] {
            let a = select_anchors(&z, 6, scheme, &mut RngStream::new(1, 0)).unwrap();
            let mut idx = a.indices().to_vec();
            idx.sort();
            assert_eq!(idx, (0..6).collect::<Vec<_>>());
        }
    }

    #[test]
    fn fps_picks_far_end() {
        let z = line_points(10);
        // Find a seed whose first pick is 0, then check the second pick.
        for seed in 0..200 {
            let a = select_anchors(&z, 2, AnchorScheme::Fps, &mut RngStream::new(seed, 0)).unwrap();
            if a.indices()[0] == 0 {
                assert_eq!(a.indices()[1], 9);
                return;
            }
        }
        panic!("no seed picked index 0 first");
    }

    #[test]
    fn kmeans_one_anchor_per_cluster() {
        let mut rng = RngStream::new(3, 0);
        let z = DenseMatrix::from_fn(40, 2, |i, _| if i < 20 { 0.0 } else { 10.0 } + 0.01 * rng.normal());
        for seed in 0..10 {
            let a = select_anchors(&z, 2, AnchorScheme::Kmeans, &mut RngStream::new(seed, 0)).unwrap();
            let sides: BTreeSet<bool> = a.indices().iter().map(|&i| i < 20).collect();
            assert_eq!(sides.len(), 2, "seed {seed}: {:?}", a.indices());
        }
    }

    #[test]
    fn too_many_anchors_rejected() {
        assert!(select_anchors(&line_points(3), 4, AnchorScheme::Uniform, &mut RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn multi_model_sets_share_indices() {
        let z1 = line_points(30);
        let z2 = DenseMatrix::from_fn(30, 1, |i, _| ((i * 7) % 30) as f64);
        let sets = select_anchors_multi(&[&z1, &z2], 5, AnchorScheme::Fps, &mut RngStream::new(9, 0)).unwrap();
        assert_eq!(sets[0].indices(), sets[1].indices());
        assert_eq!(sets[0].len(), 5);
        assert_eq!(sets[0].fingerprint(), sets[1].fingerprint());
    }

    #[test]
    fn cosine_examples() {
        let z = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 2.0], [0.0, 0.0]]).unwrap();
        let anchors = AnchorSet::from_indices(&z, vec![0], AnchorScheme::Uniform, 0).unwrap();
        let r = relrep_cosine(&z, &anchors).unwrap();
        assert_eq!(r.values.get(0, 0), 1.0);
        assert_eq!(r.values.get(1, 0), 0.0);
        assert_eq!(r.values.get(2, 0), 0.0);
        assert_eq!(r.zero_rows, vec![2]);
    }

    #[test]
    fn cosine_matches_scalar_loop() {
        let mut rng = RngStream::new(8, 0);
        let z = DenseMatrix::from_fn(20, 4, |_, _| rng.normal());
        let anchors = select_anchors(&z, 5, AnchorScheme::Uniform, &mut rng).unwrap();
        let r = relrep_cosine(&z, &anchors).unwrap();
        for i in 0..20 {
            for (j, &a) in anchors.indices().iter().enumerate() {
                let (mut d, mut na, mut nb) = (0.0, 0.0, 0.0);
                for k in 0..4 {
                    d += z.get(i, k) * z.get(a, k);
                    na += z.get(i, k) * z.get(i, k);
                    nb += z.get(a, k) * z.get(a, k);
                }
                assert!((r.values.get(i, j) - d / (na.sqrt() * nb.sqrt())).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identity_length_is_euclidean_distance() {
        let mut rng = RngStream::new(2, 0);
        let z = DenseMatrix::from_fn(12, 3, |_, _| rng.normal());
        let anchors = select_anchors(&z, 4, AnchorScheme::Uniform, &mut rng).unwrap();
        let r = relrep_geodesic(&z, &anchors, &Decoder::identity(3), MetricSpec::Euclidean, 8, CurveQuantity::Length)
            .unwrap();
        for i in 0..12 {
            for (j, &a) in anchors.indices().iter().enumerate() {
                let d = euclidean_distance(z.row(i), z.row(a));
                assert!((r.values.get(i, j) - d).abs() < 1e-12);
                if i == a {
                    assert_eq!(r.values.get(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn entry_errors_carry_location() {
        let z = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]).unwrap();
        let anchors = AnchorSet::from_indices(&z, vec![0], AnchorScheme::Uniform, 0).unwrap();
        let err = relrep_geodesic(&z, &anchors, &Decoder::identity(2), MetricSpec::Spherical, 4, CurveQuantity::Length)
            .unwrap_err();
        assert!(matches!(err, Error::Entry { row: 1, col: 0, .. }), "{err:?}");
    }

    #[test]
    fn fingerprint_depends_on_order() {
        assert_ne!(anchor_fingerprint(&[1, 2]), anchor_fingerprint(&[2, 1]));
        assert_eq!(anchor_fingerprint(&[1, 2]).len(), 64);
    }
}
