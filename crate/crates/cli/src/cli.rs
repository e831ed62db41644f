//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use relgeo::geometry::MetricSpec;
use relgeo::relrep::{AnchorScheme, RelRepMode};

use crate::config::{ExperimentConfig, SpaceKind};
use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "relgeo", version, about = "Relative geodesic representation experiments")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Experiment config (JSON). Defaults are used when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Overrides the output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "RELGEO_THREADS")]
    pub threads: Option<usize>,

    /// Number of anchors.
    #[arg(long, global = true)]
    pub anchors: Option<usize>,

    /// Straight-line discretisation steps.
    #[arg(long, global = true)]
    pub steps: Option<usize>,

    /// Relative representation: cosine, geo-length or geo-energy.
    #[arg(long, global = true)]
    pub mode: Option<RelRepMode>,

    /// Output metric: euclidean, spherical or fisher-rao.
    #[arg(long, global = true)]
    pub metric: Option<MetricSpec>,

    /// Anchor selection: uniform, fps or kmeans.
    #[arg(long, global = true)]
    pub scheme: Option<AnchorScheme>,

    /// Decoder the geodesic representation is measured through: ae or diet.
    #[arg(long, global = true)]
    pub space: Option<SpaceKind>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Generate the synthetic dataset and its train/test split.
    Synth,
    /// Train the seed-different autoencoders and export their latents.
    TrainAe,
    /// Train an instance-discrimination head on each autoencoder's latents.
    TrainDiet,
    /// Compute relative representations of the test latents on shared anchors.
    Relrep,
    /// Rank-correlate straight-line energies with optimised geodesic energies.
    GeodesicCompare,
    /// Cross-model retrieval MRR from two relative representation files.
    Retrieve,
    /// Fit a latent map from relative-representation correspondences.
    Align,
    /// Reconstruct with the source encoder, the fitted map and the target decoder.
    Stitch,
    /// Retrieval MRR as a function of the anchor count.
    AnchorSweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::TrainAe => "train-ae",
            Command::TrainDiet => "train-diet",
            Command::Relrep => "relrep",
            Command::GeodesicCompare => "geodesic-compare",
            Command::Retrieve => "retrieve",
            Command::Align => "align",
            Command::Stitch => "stitch",
            Command::AnchorSweep => "anchor-sweep",
        }
    }
}

impl GlobalArgs {
    /// Loads the config (or defaults) and applies the flag overrides.
    pub fn resolve_config(&self) -> CliResult<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(k) = self.anchors {
            cfg.anchors.k = k;
        }
        if let Some(steps) = self.steps {
            cfg.relrep.steps = steps;
        }
        if let Some(mode) = self.mode {
            cfg.relrep.mode = mode;
        }
        if let Some(metric) = self.metric {
            cfg.relrep.metric = metric;
        }
        if let Some(scheme) = self.scheme {
            cfg.anchors.scheme = scheme;
        }
        if let Some(space) = self.space {
            cfg.relrep.space = space;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
