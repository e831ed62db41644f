//! One function per subcommand. Each reads its inputs from the output
//! directory, writes results there and returns the files it produced.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use relgeo::alignment::{crossspace_similarity, extract_correspondence, fit_from_correspondence, stitch, AlignmentMap};
use relgeo::eval::{mrr, reconstruction_mse, MrrOptions};
use relgeo::experiments::{
    anchor_sweep, cross_similarity, draw_anchors, geodesic_compare, sub_seed, Space, SweepSpec,
};
use relgeo::io::{
    fmt_real, load_alignment, read_embedding, read_index_csv, read_relrep, save_alignment, write_correspondence_csv,
    write_embedding, write_index_csv, write_loss_csv, write_matrix_csv, write_relrep,
};
use relgeo::models::format::{load_model, save_model};
use relgeo::models::{Decoder, MlpModel};
use relgeo::relrep::{relrep, AnchorSet};
use relgeo::synthbench::{make_dataset, per_label_indices};
use relgeo::training::{train_autoencoder, train_diet, DietHead, DietSpec, LossKind, TrainedAutoencoder};
use relgeo::{DenseMatrix, RngStream};

use crate::config::{ExperimentConfig, SpaceKind};
use crate::error::{load, CliError, CliResult};
use crate::layout::{Layout, Split};

fn create_parent(path: &Path) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    create_parent(path)?;
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn column_header(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Collects written paths so the manifest can list them.
struct Outputs<'a> {
    layout: &'a Layout,
    files: Vec<PathBuf>,
}

impl<'a> Outputs<'a> {
    fn new(layout: &'a Layout) -> Self {
        Self { layout, files: Vec::new() }
    }

    /// Registers `path`, creating its parent directory.
    fn add(&mut self, path: PathBuf) -> CliResult<PathBuf> {
        create_parent(&path)?;
        self.files.push(self.layout.relative(&path));
        Ok(path)
    }

    fn finish(self) -> Vec<PathBuf> {
        self.files
    }
}

pub fn synth(cfg: &ExperimentConfig, layout: &Layout) -> CliResult<Vec<PathBuf>> {
    let ds = make_dataset(&cfg.dataset, &mut RngStream::named(cfg.seed, "dataset"))?;
    let mut out = Outputs::new(layout);
    let splits = [
        (Split::Train, (0..cfg.train_size).collect::<Vec<_>>()),
        (Split::Test, (cfg.train_size..ds.len()).collect()),
    ];
    for (split, rows) in splits {
        let part = ds.subset(&rows)?;
        write_embedding(&out.add(layout.data_x(split))?, &part.x)?;
        write_embedding(&out.add(layout.data_z(split))?, &part.z)?;
        write_index_csv(&out.add(layout.labels(split))?, "label", &part.labels)?;
    }
    let summary = serde_json::json!({
        "rows": ds.len(),
        "train_rows": cfg.train_size,
        "test_rows": ds.len() - cfg.train_size,
        "ambient_dim": ds.x.cols(),
        "latent_dim": ds.z.cols(),
        "noise": ds.noise,
    });
    write_json(&out.add(layout.result("synth.json"))?, &summary)?;
    Ok(out.finish())
}

pub fn train_ae(cfg: &ExperimentConfig, layout: &Layout) -> CliResult<Vec<PathBuf>> {
    let train = load(&layout.data_x(Split::Train), read_embedding)?;
    let test = load(&layout.data_x(Split::Test), read_embedding)?;
    let arch = &cfg.autoencoder.architecture;
    let (enc_spec, dec_spec) = (arch.encoder_spec(train.cols())?, arch.decoder_spec(train.cols())?);
    let mut out = Outputs::new(layout);
    let mut summary = Vec::new();
    for m in 0..cfg.autoencoder.models {
        let tc = cfg
            .autoencoder
            .training
            .train_config(LossKind::Mse, sub_seed(cfg.seed, &format!("model-{m}")));
        let ae = train_autoencoder(&train, &enc_spec, &dec_spec, &tc)?;
        save_model(&ae.encoder, out.add(layout.encoder(m))?)?;
        save_model(&ae.decoder, out.add(layout.decoder(m))?)?;
        write_loss_csv(&out.add(layout.ae_loss(m))?, &ae.loss_history)?;
        write_embedding(&out.add(layout.embedding(m, Split::Train))?, &ae.encode(&train)?)?;
        write_embedding(&out.add(layout.embedding(m, Split::Test))?, &ae.encode(&test)?)?;
        summary.push(serde_json::json!({
            "model": m,
            "final_loss": ae.loss_history.last().copied(),
            "test_mse": reconstruction_mse(&ae.reconstruct(&test)?, &test)?,
        }));
    }
    write_json(&out.add(layout.result("train_ae.json"))?, &summary)?;
    Ok(out.finish())
}

pub fn train_diet_cmd(cfg: &ExperimentConfig, layout: &Layout) -> CliResult<Vec<PathBuf>> {
    let labels = load(&layout.labels(Split::Train), read_index_csv)?;
    let spec = DietSpec {
        hidden: cfg.diet.hidden.clone(),
    };
    let mut out = Outputs::new(layout);
    let mut summary = Vec::new();
    for m in 0..cfg.autoencoder.models {
        let emb = load(&layout.embedding(m, Split::Train), read_embedding)?;
        let tc = cfg
            .diet
            .training
            .train_config(LossKind::DietCrossEntropy, sub_seed(cfg.seed, &format!("diet-{m}")));
        let trained = train_diet(&emb, &labels, &spec, &tc)?;
        save_model(&trained.head.to_model(), out.add(layout.diet(m))?)?;
        write_loss_csv(&out.add(layout.diet_loss(m))?, &trained.loss_history)?;
        summary.push(serde_json::json!({
            "model": m,
            "accuracy": trained.accuracy,
            "final_loss": trained.loss_history.last().copied(),
        }));
    }
    write_json(&out.add(layout.result("train_diet.json"))?, &summary)?;
    Ok(out.finish())
}

fn load_autoencoder(layout: &Layout, m: usize) -> CliResult<TrainedAutoencoder> {
    Ok(TrainedAutoencoder {
        encoder: load(&layout.encoder(m), |p| load_model(p))?,
        decoder: load(&layout.decoder(m), |p| load_model(p))?,
        loss_history: Vec::new(),
    })
}

/// Decoder the relative representation of model `m` is measured through.
fn space_decoder(layout: &Layout, space: SpaceKind, m: usize) -> CliResult<Decoder> {
    match space {
        SpaceKind::Ae => Ok(Decoder::Mlp(load(&layout.decoder(m), |p| load_model(p))?)),
        SpaceKind::Diet => {
            let model: MlpModel = load(&layout.diet(m), |p| load_model(p))?;
            let head = DietHead::from_model(&model).map_err(|source| CliError::InvalidFile {
                path: layout.diet(m),
                source,
            })?;
            Ok(head.penultimate_decoder())
        }
    }
}

/// Train-split (anchor pool) and test-split latents of model `m`.
fn latents(layout: &Layout, m: usize) -> CliResult<(DenseMatrix, DenseMatrix)> {
    Ok((
        load(&layout.embedding(m, Split::Train), read_embedding)?,
        load(&layout.embedding(m, Split::Test), read_embedding)?,
    ))
}

pub fn relrep_cmd(cfg: &ExperimentConfig, layout: &Layout) -> CliResult<Vec<PathBuf>> {
    let mut out = Outputs::new(layout);
    let mut anchors: Option<Vec<usize>> = None;
    let rs = &cfg.relrep;
    for m in 0..cfg.autoencoder.models {
        let (pool, samples) = latents(layout, m)?;
        // Anchors are drawn once, in the first model's space, and shared by index.
        let idx = match &anchors {
            Some(idx) => idx.clone(),
            None => {
                let idx = draw_anchors(&pool, cfg.anchors.k, cfg.anchors.scheme, cfg.seed, 0)?;
                write_index_csv(&out.add(layout.anchors())?, "anchor_index", &idx)?;
                anchors = Some(idx.clone());
                idx
            }
        };
        let set = AnchorSet::from_indices(&pool, idx.clone(), cfg.anchors.scheme, cfg.seed)?;
        let dec = space_decoder(layout, rs.space, m)?;
        let r = relrep(&samples, &set, rs.mode, &dec, rs.metric, rs.steps)?;
        let path = out.add(layout.relrep(rs.space, m))?;
        write_relrep(&path, &r, &idx)?;
        out.files.push(layout.relative(&relgeo::io::sidecar_path(&path)));
    }
    Ok(out.finish())
}

#[derive(Serialize)]
struct RetrieveSummary {
    mrr: f64,
    queries: usize,
    anchors: usize,
    mode: String,
    metric: Option<String>,
    steps: Option<usize>,
    fingerprint: String,
}

pub fn retrieve(cfg: &ExperimentConfig, layout: &Layout) -> CliResult<Vec<PathBuf>> {
    let src = cfg.retrieve.source.clone().unwrap_or_else(|| layout.relrep(cfg.relrep.space, 0));
    let dst = cfg.retrieve.target.clone().unwrap_or_else(|| layout.relrep(cfg.relrep.space, 1));
    let (r1, _) = load(&src, read_relrep)?;
    let (r2, _) = load(&dst, read_relrep)?;
    let sim = crossspace_similarity(&r1, &r2)?;
    let gt: Vec<usize> = (0..sim.rows()).collect();
    let res = mrr(&sim, &gt, MrrOptions::default())?;
    let mut out = Outputs::new(layout);
    write_index_csv(&out.add(layout.result("retrieve_ranks.csv"))?, "rank", &res.ranks)?;
    let summary = RetrieveSummary {
        mrr: res.mrr,
        queries: sim.rows(),
        anchors: r1.num_anchors(),
        mode: r1.mode.to_string(),
        metric: r1.metric.map(|m| m.to_string()),
        steps: r1.steps,
        fingerprint: r1.fingerprint.clone(),
    };
    write_json(&out.add(layout.result("retrieve.json"))?, &summary)?;
    Ok(out.finish())
}

pub fn geodesic_compare_cmd(cfg: &ExperimentConfig, layout: &Layout) -> CliResult<Vec<PathBuf>> {
    let gc = &cfg.geodesic_compare;
    let labels = load(&layout.labels(Split::Test), read_index_csv)?;
    let (_, test) = latents(layout, gc.model)?;
    let dec = space_decoder(layout, SpaceKind::Ae, gc.model)?;
    let idx = per_label_indices(&labels, gc.per_label);
    let z = test.select_rows(&idx)?;
    let cmp = geodesic_compare(&dec, &z, cfg.relrep.metric, cfg.relrep.steps, &gc.oracle)?;
    let mut out = Outputs::new(layout);
    let header = column_header("p", idx.len());
    write_index_csv(&out.add(layout.result("geodesic_points.csv"))?, "test_index", &idx)?;
    write_matrix_csv(&out.add(layout.result("geodesic_line_energy.csv"))?, &header, &cmp.line)?;
    write_matrix_csv(&out.add(layout.result("geodesic_oracle_energy.csv"))?, &header, &cmp.oracle)?;
    let summary = serde_json::json!({
        "spearman": cmp.spearman,
        "points": idx.len(),
        "metric": cfg.relrep.metric.to_string(),
        "line_steps": cfg.relrep.steps,
        "oracle": gc.oracle,
    });
    write_json(&out.add(layout.result("geodesic_compare.json"))?, &summary)?;
    Ok(out.finish())
}

pub fn align(cfg: &ExperimentConfig, layout: &Layout) -> CliResult<Vec<PathBuf>> {
    let a = &cfg.alignment;
    let space = cfg.relrep.space;
    let (z1, _) = latents(layout, a.source)?;
    let (z2, _) = latents(layout, a.target)?;
    let (d1, d2) = (space_decoder(layout, space, a.source)?, space_decoder(layout, space, a.target)?);
    let anchors = draw_anchors(&z1, cfg.anchors.k, cfg.anchors.scheme, cfg.seed, 0)?;
    let s1 = Space { samples: &z1, pool: &z1, decoder: &d1 };
    let s2 = Space { samples: &z2, pool: &z2, decoder: &d2 };
    let sim = cross_similarity(&s1, &s2, &anchors, &cfg.relrep.settings())?;
    let mut corr = extract_correspondence(&sim)?;
    if let Some(t) = a.min_score {
        corr = corr.filtered(t);
    }
    let map = fit_from_correspondence(a.kind, &z1, &z2, &corr, a.center)?;
    let correct = corr.sources.iter().zip(&corr.targets).filter(|(s, t)| s == t).count();
    let mut out = Outputs::new(layout);
    write_correspondence_csv(&out.add(layout.result("correspondence.csv"))?, &corr)?;
    save_alignment(&out.add(layout.alignment_map())?, &map)?;
    let summary = serde_json::json!({
        "kind": map.kind.to_string(),
        "pairs": corr.len(),
        "correspondence_accuracy": correct as f64 / corr.len().max(1) as f64,
        "fit_residual": map.fit_residual,
        "underdetermined": map.underdetermined,
        "anchors": anchors.len(),
    });
    write_json(&out.add(layout.result("align.json"))?, &summary)?;
    Ok(out.finish())
}

pub fn stitch_cmd(cfg: &ExperimentConfig, layout: &Layout) -> CliResult<Vec<PathBuf>> {
    let a = &cfg.alignment;
    let x = load(&layout.data_x(Split::Test), read_embedding)?;
    let map = load(&layout.alignment_map(), load_alignment)?;
    let src = load_autoencoder(layout, a.source)?;
    let dst = load_autoencoder(layout, a.target)?;
    if map.input_dim() != src.encoder.output_dim() || map.output_dim() != dst.decoder.input_dim() {
        return Err(CliError::InvalidFile {
            path: layout.alignment_map(),
            source: relgeo::Error::Format("map dimensions do not match the models".into()),
        });
    }
    let dec = dst.decoder();
    let stitched = stitch(&src.encoder, &map, &dec, &x)?;
    let unmapped = stitch(&src.encoder, &AlignmentMap::identity(map.input_dim()), &dec, &x)?;
    let mut out = Outputs::new(layout);
    write_embedding(&out.add(layout.result("stitched_test.rgem"))?, &stitched)?;
    let summary = serde_json::json!({
        "native_mse": reconstruction_mse(&dst.reconstruct(&x)?, &x)?,
        "stitched_mse": reconstruction_mse(&stitched, &x)?,
        "unmapped_mse": reconstruction_mse(&unmapped, &x)?,
        "source": a.source,
        "target": a.target,
    });
    write_json(&out.add(layout.result("stitch.json"))?, &summary)?;
    Ok(out.finish())
}

pub fn anchor_sweep_cmd(cfg: &ExperimentConfig, layout: &Layout) -> CliResult<Vec<PathBuf>> {
    let space = cfg.relrep.space;
    let (p1, t1) = latents(layout, 0)?;
    let (p2, t2) = latents(layout, 1)?;
    let (d1, d2) = (space_decoder(layout, space, 0)?, space_decoder(layout, space, 1)?);
    let s1 = Space { samples: &t1, pool: &p1, decoder: &d1 };
    let s2 = Space { samples: &t2, pool: &p2, decoder: &d2 };
    let spec = SweepSpec {
        ks: cfg.anchors.sweep.clone(),
        repeats: cfg.anchors.repeats,
        scheme: cfg.anchors.scheme,
    };
    let rows = anchor_sweep(&s1, &s2, &spec, &cfg.sweep_methods(), cfg.seed)?;
    let mut out = Outputs::new(layout);
    let path = out.add(layout.result("anchor_sweep.csv"))?;
    let mut w = std::io::BufWriter::new(fs::File::create(&path)?);
    let reps: Vec<String> = (0..spec.repeats).map(|r| format!("rep_{r}")).collect();
    writeln!(w, "k,method,mean,std,{}", reps.join(","))?;
    for r in &rows {
        let vals: Vec<String> = r.values.iter().map(|&v| fmt_real(v)).collect();
        writeln!(w, "{},{},{},{},{}", r.k, r.method, fmt_real(r.mean), fmt_real(r.std), vals.join(","))?;
    }
    w.flush()?;
    write_json(&out.add(layout.result("anchor_sweep.json"))?, &rows)?;
    Ok(out.finish())
}
