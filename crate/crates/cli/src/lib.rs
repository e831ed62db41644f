//! Experiment runner for relative geodesic representations.
//!
//! Commands share one output directory: `synth` writes the dataset,
//! `train-ae` and `train-diet` the models and latents, and the remaining
//! commands consume those artifacts. Every command also writes a manifest
//! under `manifests/`.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod layout;
pub mod manifest;

use std::path::PathBuf;

pub use cli::{Cli, Command, GlobalArgs};
pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
pub use layout::Layout;

/// Runs one command against a resolved config and records its manifest.
pub fn execute(command: Command, cfg: &ExperimentConfig) -> CliResult<Vec<PathBuf>> {
    let layout = Layout::new(&cfg.output_dir);
    std::fs::create_dir_all(layout.root())?;
    let mut outputs = match command {
        Command::Synth => commands::synth(cfg, &layout)?,
        Command::TrainAe => commands::train_ae(cfg, &layout)?,
        Command::TrainDiet => commands::train_diet_cmd(cfg, &layout)?,
        Command::Relrep => commands::relrep_cmd(cfg, &layout)?,
        Command::GeodesicCompare => commands::geodesic_compare_cmd(cfg, &layout)?,
        Command::Retrieve => commands::retrieve(cfg, &layout)?,
        Command::Align => commands::align(cfg, &layout)?,
        Command::Stitch => commands::stitch_cmd(cfg, &layout)?,
        Command::AnchorSweep => commands::anchor_sweep_cmd(cfg, &layout)?,
    };
    let manifest = manifest::Manifest::new(command.name(), cfg, outputs.clone());
    outputs.push(layout.relative(&manifest.write(layout.root())?));
    Ok(outputs)
}

/// Configures the thread pool, resolves the config and runs the command.
pub fn run(cli: &Cli) -> CliResult<Vec<PathBuf>> {
    if let Some(n) = cli.global.threads {
        // A pool may already exist when called repeatedly in one process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let cfg = cli.global.resolve_config()?;
    execute(cli.command, &cfg)
}
