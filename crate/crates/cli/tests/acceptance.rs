//! Acceptance suite: one PASS/FAIL line per criterion, each held to its stated
//! tolerance and runtime budget. Protocol criteria run through the CLI
//! commands; the exact checks call the library directly.
//!
//! Run with `cargo test -p relgeo-cli --test acceptance`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;
use std::time::{Duration, Instant};

use relgeo::alignment::{
    crossspace_similarity, extract_correspondence, fit_linear, fit_orthogonal, stitch, AlignmentMap,
};
use relgeo::eval::{average_ranks, mrr, reconstruction_mse, spearman, MrrOptions};
use relgeo::experiments::SweepRow;
use relgeo::geometry::{
    check_bounds, geodesic_oracle, segment_output_distance, straight_line_measure, CurveQuantity, CurveSpec,
    MetricSpec, OracleConfig,
};
use relgeo::models::format::load_model;
use relgeo::models::{compose, Activation, Decoder, Layer, LatentMap, MlpModel, MlpSpec, OutputIsometry};
use relgeo::numerics::{lstsq, random_orthogonal, thin_svd};
use relgeo::relrep::{relrep_cosine, relrep_geodesic, select_anchors, AnchorScheme, AnchorSet};
use relgeo::synthbench::{make_dataset, make_manifold_pair, DatasetSpec, LatentMapKind, PairSpec};
use relgeo::training::{backprop_step, batch_loss, Target};
use relgeo::{DenseMatrix, RngStream};
use relgeo_cli::config::SpaceKind;
use relgeo_cli::{execute, Command, ExperimentConfig, Layout};

type Check = Result<String, String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

struct Suite {
    passed: usize,
    failed: usize,
}

impl Suite {
    /// Runs one criterion. `extra` is time already spent on shared setup that
    /// counts against this criterion's budget.
    fn run(&mut self, id: u32, name: &str, budget: Duration, extra: Duration, f: impl FnOnce() -> Check) {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed() + extra;
        let timing = format!("{:.1}s of {}s", elapsed.as_secs_f64(), budget.as_secs());
        let (ok, detail) = match outcome {
            Ok(d) if elapsed <= budget => (true, d),
            Ok(d) => (false, format!("{d}; over the runtime budget")),
            Err(d) => (false, d),
        };
        let tag = if ok { "PASS" } else { "FAIL" };
        println!("[{tag}] {id:>2}. {name}: {detail} ({timing})");
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
    }
}

fn minutes(m: u64) -> Duration {
    Duration::from_secs(60 * m)
}

fn random_mlp(dims: Vec<usize>, act: Activation, seed: u64) -> MlpModel {
    let spec = MlpSpec::uniform(dims, act, Activation::Identity).expect("valid spec");
    MlpModel::init(&spec, &mut RngStream::named(seed, "acceptance-net"))
}

fn read_json(path: &Path) -> Result<serde_json::Value, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(err)
}

fn read_sweep(layout: &Layout) -> Result<Vec<SweepRow>, String> {
    let text = std::fs::read_to_string(layout.result("anchor_sweep.json")).map_err(err)?;
    serde_json::from_str(&text).map_err(err)
}

fn sweep_mean(rows: &[SweepRow], k: usize, method: &str) -> Result<f64, String> {
    rows.iter()
        .find(|r| r.k == k && r.method == method)
        .map(|r| r.mean)
        .ok_or_else(|| format!("no sweep row for k={k}, {method}"))
}

fn run_commands(cfg: &ExperimentConfig, commands: &[Command]) -> Result<(), String> {
    for &c in commands {
        execute(c, cfg).map_err(|e| format!("{}: {e}", c.name()))?;
    }
    Ok(())
}

// ---------------------------------------------------------------- criterion 1

fn bounds(layout: &Layout) -> Check {
    let cfg = OracleConfig::default();
    let mut rng = RngStream::named(1, "acceptance-bounds");
    let ae = Decoder::Mlp(load_model(layout.decoder(0)).map_err(err)?);
    let z = relgeo::io::read_embedding(&layout.embedding(0, relgeo_cli::layout::Split::Test)).map_err(err)?;
    let smooth = Decoder::Mlp(random_mlp(vec![2, 32, 16], Activation::Tanh, 1));
    let cases: [(&str, Decoder); 3] = [
        ("trained AE", ae),
        ("sphere chart", Decoder::SphereChart { radius: 1.0 }),
        ("random smooth MLP", smooth),
    ];
    let mut report = Vec::new();
    let mut failures = 0;
    for (name, dec) in &cases {
        let mut bad = 0;
        for _ in 0..50 {
            let (z0, z1) = if *name == "trained AE" {
                let i = rng.index(z.rows());
                let j = (i + 1 + rng.index(z.rows() - 1)) % z.rows();
                (z.row(i).to_vec(), z.row(j).to_vec())
            } else {
                let mut draw = || vec![rng.uniform(0.2, 2.8), rng.uniform(0.2, 2.8)];
                (draw(), draw())
            };
            let b = check_bounds(dec, MetricSpec::Euclidean, &z0, &z1, &cfg).map_err(err)?;
            if !b.holds {
                bad += 1;
            }
        }
        failures += bad;
        report.push(format!("{name} {}/50", 50 - bad));
    }
    let detail = format!("d² ≤ L² ≤ 2E held for {}", report.join(", "));
    if failures == 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- criterion 2

fn approximation(cfg: &ExperimentConfig) -> Check {
    run_commands(cfg, &[Command::GeodesicCompare])?;
    let summary = read_json(&Layout::new(&cfg.output_dir).result("geodesic_compare.json"))?;
    let rho = summary["spearman"].as_f64().ok_or("missing spearman")?;
    let points = summary["points"].as_u64().unwrap_or(0);
    let detail = format!("Spearman ρ = {rho:.5} over {points} points (need ≥ 0.97)");
    if rho >= 0.97 && points == 100 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- criterion 3

fn exact_invariance() -> Check {
    let base = Decoder::Mlp(random_mlp(vec![2, 32, 16], Activation::Tanh, 3));
    let spec = PairSpec {
        map: LatentMapKind::Affine,
        random_isometry: true,
        samples: 500,
        contraction: 0.5,
    };
    let pair = make_manifold_pair(base, &spec, &mut RngStream::named(3, "acceptance-pair")).map_err(err)?;
    let z1 = &pair.z1;
    let z2 = pair.z2().map_err(err)?;
    let a1 = select_anchors(z1, 8, AnchorScheme::Uniform, &mut RngStream::named(3, "acceptance-anchors"))
        .map_err(err)?;
    let a2 = a1.reembed(&z2).map_err(err)?;
    let r1 = relrep_geodesic(z1, &a1, &pair.decoder1, MetricSpec::Euclidean, 8, CurveQuantity::Length).map_err(err)?;
    let r2 = relrep_geodesic(&z2, &a2, &pair.decoder2, MetricSpec::Euclidean, 8, CurveQuantity::Length).map_err(err)?;
    let gap = r1.values.max_abs_diff(&r2.values);
    let sim = crossspace_similarity(&r1, &r2).map_err(err)?;
    let gt: Vec<usize> = (0..sim.rows()).collect();
    let score = mrr(&sim, &gt, MrrOptions::default()).map_err(err)?.mrr;
    let detail = format!("max entry gap {gap:.2e} (need ≤ 1e-9), MRR {score} (need 1.0), 8 anchors, 500 samples");
    if gap <= 1e-9 && score == 1.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ------------------------------------------------------------ criteria 4 and 5

const GEO: &str = "geo-length/euclidean/N=8";

fn retrieval(layout: &Layout) -> Check {
    let rows = read_sweep(layout)?;
    let mut parts = Vec::new();
    let mut ok = true;
    for k in [5, 10, 20, 50] {
        let (g, c) = (sweep_mean(&rows, k, GEO)?, sweep_mean(&rows, k, "cosine")?);
        ok &= g >= c;
        parts.push(format!("k={k} {g:.3}/{c:.3}"));
    }
    let top = sweep_mean(&rows, 50, GEO)?;
    ok &= top >= 0.9;
    let detail = format!("RelGeo/cosine MRR {} (need RelGeo ≥ cosine, RelGeo ≥ 0.9 at k=50)", parts.join(", "));
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn monotone_trend(layout: &Layout) -> Check {
    let rows = read_sweep(layout)?;
    let ks = [2, 5, 8, 15, 50];
    let means: Vec<f64> = ks.iter().map(|&k| sweep_mean(&rows, k, GEO)).collect::<Result<_, _>>()?;
    let drops: Vec<f64> = means.windows(2).map(|w| w[0] - w[1]).filter(|&d| d > 0.0).collect();
    let ok = drops.is_empty() || (drops.len() == 1 && drops[0] <= 0.02);
    let listed: Vec<String> = ks.iter().zip(&means).map(|(k, m)| format!("{k}:{m:.3}")).collect();
    let detail = format!("mean MRR by k {} with {} inversion(s)", listed.join(" "), drops.len());
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- criterion 6

fn stitching(cfg: &ExperimentConfig) -> Check {
    run_commands(cfg, &[Command::Align, Command::Stitch])?;
    let layout = Layout::new(&cfg.output_dir);
    let s = read_json(&layout.result("stitch.json"))?;
    let a = read_json(&layout.result("align.json"))?;
    let (native, stitched, unmapped) = (
        s["native_mse"].as_f64().ok_or("missing native_mse")?,
        s["stitched_mse"].as_f64().ok_or("missing stitched_mse")?,
        s["unmapped_mse"].as_f64().ok_or("missing unmapped_mse")?,
    );
    let acc = a["correspondence_accuracy"].as_f64().unwrap_or(f64::NAN);
    let detail = format!(
        "stitched {stitched:.5}, native {native:.5}, no map {unmapped:.5}, correspondence accuracy {acc:.3} \
         (need stitched ≤ 2×native and < no map)"
    );
    if stitched <= 2.0 * native && stitched < unmapped {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- criterion 7

fn recovery() -> Check {
    let mut rng = RngStream::named(7, "acceptance-procrustes");
    let x = DenseMatrix::from_fn(200, 5, |_, _| rng.normal());

    let q = random_orthogonal(5, &mut rng).map_err(err)?;
    let y = x.matmul(&q).map_err(err)?;
    let fitted = fit_orthogonal(&x, &y, false).map_err(err)?;
    let orth_err = fitted.matrix.sub(&q).map_err(err)?.frobenius_norm();

    let a = DenseMatrix::from_fn(5, 5, |i, j| rng.normal() + if i == j { 3.0 } else { 0.0 });
    let y = x.matmul(&a).map_err(err)?;
    let fitted = fit_linear(&x, &y, false).map_err(err)?;
    let lin_err = fitted.matrix.sub(&a).map_err(err)?.frobenius_norm();
    let lin_shift = fitted.translation.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    // Noisy 10×3 problem against 1000 random orthogonal candidates.
    let x = DenseMatrix::from_fn(10, 3, |_, _| rng.normal());
    let q = random_orthogonal(3, &mut rng).map_err(err)?;
    let y = x
        .matmul(&q)
        .map_err(err)?
        .add(&DenseMatrix::from_fn(10, 3, |_, _| 0.01 * rng.normal()))
        .map_err(err)?;
    let fitted = fit_orthogonal(&x, &y, false).map_err(err)?;
    let best = fitted.residual(&x, &y).map_err(err)?;
    let mut beaten = 0;
    for _ in 0..1000 {
        let r = random_orthogonal(3, &mut rng).map_err(err)?;
        let candidate = x.matmul(&r).map_err(err)?.sub(&y).map_err(err)?.frobenius_norm();
        if candidate < best {
            beaten += 1;
        }
    }
    let detail = format!(
        "orthogonal ‖ΔQ‖ {orth_err:.1e}, linear ‖ΔA‖ {lin_err:.1e} (bias {lin_shift:.1e}), \
         {beaten}/1000 random rotations beat the fit"
    );
    if orth_err <= 1e-8 && lin_err <= 1e-8 && lin_shift <= 1e-8 && beaten == 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- criterion 8

fn diet(cfg: &ExperimentConfig) -> Check {
    run_commands(
        cfg,
        &[Command::Synth, Command::TrainAe, Command::TrainDiet, Command::AnchorSweep],
    )?;
    let layout = Layout::new(&cfg.output_dir);
    let heads = read_json(&layout.result("train_diet.json"))?;
    let accs: Vec<f64> = heads
        .as_array()
        .ok_or("train_diet.json is not a list")?
        .iter()
        .map(|h| h["accuracy"].as_f64().unwrap_or(0.0))
        .collect();
    let rows = read_sweep(&layout)?;
    let geo = cfg.relrep.settings().label();
    let mut parts = Vec::new();
    let mut ok = accs.len() == 2 && accs.iter().all(|&a| a > 0.9);
    for &k in &cfg.anchors.sweep {
        let (g, c) = (sweep_mean(&rows, k, &geo)?, sweep_mean(&rows, k, "cosine")?);
        ok &= g >= c;
        parts.push(format!("k={k} {g:.3}/{c:.3}"));
    }
    let detail = format!(
        "head accuracies {:?}, spherical RelGeo/cosine MRR {} (need accuracy > 0.9, RelGeo ≥ cosine)",
        accs.iter().map(|a| (a * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
        parts.join(", ")
    );
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- criterion 9

/// Stated example values, each evaluated exactly as written.
fn examples() -> Check {
    let mut failures: Vec<String> = Vec::new();
    let mut total = 0;
    let mut check = |name: &str, ok: Result<bool, String>| {
        total += 1;
        match ok {
            Ok(true) => {}
            Ok(false) => failures.push(name.to_string()),
            Err(e) => failures.push(format!("{name} ({e})")),
        }
    };
    let close = |a: f64, b: f64, tol: f64| (a - b).abs() <= tol;
    let m = |rows: &[&[f64]]| DenseMatrix::from_rows(rows).expect("rectangular");

    // numerics
    check("I3 × A = A", (|| {
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]);
        Ok(DenseMatrix::identity(3).matmul(&a).map_err(err)? == a)
    })());
    check("[[1,2],[3,4]] × [1,1]ᵀ", (|| {
        let p = m(&[&[1.0, 2.0], &[3.0, 4.0]]).matmul(&m(&[&[1.0], &[1.0]])).map_err(err)?;
        Ok(p == m(&[&[3.0], &[7.0]]))
    })());
    check("svd diag(3,2,1)", (|| {
        let s = thin_svd(&DenseMatrix::diag(&[3.0, 2.0, 1.0])).map_err(err)?.s;
        Ok(s.iter().zip([3.0, 2.0, 1.0]).all(|(a, b)| close(*a, b, 1e-12)))
    })());
    check("svd of zeros", (|| Ok(thin_svd(&DenseMatrix::zeros(3, 2)).map_err(err)?.s.iter().all(|&v| v == 0.0)))());
    check("lstsq with a = I", (|| {
        let b = m(&[&[1.5, -2.0], &[0.25, 3.0]]);
        Ok(lstsq(&DenseMatrix::identity(2), &b).map_err(err)?.x.max_abs_diff(&b) <= 1e-12)
    })());
    check("lstsq planted X0", (|| {
        let mut rng = RngStream::new(9, 1);
        let a = DenseMatrix::from_fn(12, 4, |_, _| rng.normal());
        let x0 = DenseMatrix::from_fn(4, 2, |_, _| rng.normal());
        let b = a.matmul(&x0).map_err(err)?;
        Ok(lstsq(&a, &b).map_err(err)?.x.max_abs_diff(&x0) <= 1e-9)
    })());
    check("random_orthogonal n=1", (|| {
        let q = random_orthogonal(1, &mut RngStream::new(1, 1)).map_err(err)?;
        Ok(q.get(0, 0).abs() == 1.0)
    })());
    check("random_orthogonal QᵀQ = I (n=16) and seeded", (|| {
        let q = random_orthogonal(16, &mut RngStream::new(2, 2)).map_err(err)?;
        let again = random_orthogonal(16, &mut RngStream::new(2, 2)).map_err(err)?;
        let qtq = q.transpose().matmul(&q).map_err(err)?;
        Ok(qtq.max_abs_diff(&DenseMatrix::identity(16)) <= 1e-10 && q == again)
    })());

    // models
    check("Linear(I, 0) is the identity", (|| Ok(Decoder::identity(2).forward(&[0.3, -0.7]).map_err(err)? == vec![0.3, -0.7]))());
    check("SphereChart pole", (|| {
        let y = Decoder::SphereChart { radius: 1.0 }.forward(&[0.0, 0.0]).map_err(err)?;
        Ok(y == vec![0.0, 0.0, 1.0])
    })());
    check("tanh layer vs scalar oracle", (|| {
        let layer = Layer::new(DenseMatrix::identity(3), vec![0.0; 3], Activation::Tanh).map_err(err)?;
        let net = MlpModel::new(vec![layer]).map_err(err)?;
        let z = [0.4, -1.3, 2.2];
        let y = net.forward(&z).map_err(err)?;
        Ok(y.iter().zip(z).all(|(a, b)| close(*a, b.tanh(), 1e-15)))
    })());
    check("batch forward equals row forwards", (|| {
        let net = random_mlp(vec![2, 6, 3], Activation::Tanh, 9);
        let z = m(&[&[0.1, 0.2], &[-1.0, 0.5], &[2.0, -0.3]]);
        let batch = net.forward_batch(&z).map_err(err)?;
        let mut ok = batch.rows() == 3;
        for i in 0..3 {
            let row = net.forward(z.row(i)).map_err(err)?;
            ok &= row.iter().zip(batch.row(i)).all(|(a, b)| close(*a, *b, 1e-12));
        }
        let empty = net.forward_batch(&DenseMatrix::empty(2)).map_err(err)?;
        Ok(ok && empty.rows() == 0)
    })());
    check("compose without maps is the inner decoder", (|| {
        let inner = Decoder::SwissRoll { scale: 0.5 };
        let c = compose(inner.clone(), None, None).map_err(err)?;
        Ok(c.forward(&[1.0, 2.0]).map_err(err)? == inner.forward(&[1.0, 2.0]).map_err(err)?)
    })());
    check("translation-only isometry preserves distances", (|| {
        let post = OutputIsometry::new(DenseMatrix::identity(3), vec![5.0, -1.0, 2.0]).map_err(err)?;
        let c = compose(Decoder::SwissRoll { scale: 0.5 }, None, Some(post)).map_err(err)?;
        let inner = Decoder::SwissRoll { scale: 0.5 };
        let d = |dec: &Decoder| -> Result<f64, String> {
            let (a, b) = (dec.forward(&[1.0, 2.0]).map_err(err)?, dec.forward(&[3.0, -1.0]).map_err(err)?);
            Ok(relgeo::numerics::euclidean_distance(&a, &b))
        };
        Ok(close(d(&c)?, d(&inner)?, 1e-12))
    })());

    // geometry
    let seg = |metric: MetricSpec, a: &[f64], b: &[f64]| segment_output_distance(metric, a, b).map_err(err);
    check("Euclidean (0,0)-(3,4) = 5", seg(MetricSpec::Euclidean, &[0.0, 0.0], &[3.0, 4.0]).map(|d| d == 5.0));
    check(
        "spherical e1-e2 = π/2",
        seg(MetricSpec::Spherical, &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).map(|d| close(d, FRAC_PI_2, 1e-15)),
    );
    // The stated formula is the unclamped one; a vanishing clamp reproduces it
    // exactly, and the default clamp shifts it by the predicted 4·√eps.
    check(
        "Fisher-Rao (1,0)-(0,1) = π",
        seg(MetricSpec::FisherRaoCategorical { eps: 1e-300 }, &[1.0, 0.0], &[0.0, 1.0]).map(|d| d == PI),
    );
    check(
        "Fisher-Rao default clamp offset",
        seg(MetricSpec::fisher_rao(), &[1.0, 0.0], &[0.0, 1.0]).map(|d| close(PI - d, 4e-3, 1e-5)),
    );
    for steps in [1, 8, 64] {
        check("identity line (0,0)-(3,4)", (|| {
            let c = CurveSpec::new(vec![0.0, 0.0], vec![3.0, 4.0], steps).map_err(err)?;
            let me = straight_line_measure(&Decoder::identity(2), MetricSpec::Euclidean, &c).map_err(err)?;
            Ok(close(me.length, 5.0, 1e-12) && close(me.energy, 12.5, 1e-12))
        })());
    }
    check("Linear(diag(2,1)) line", (|| {
        let dec = Decoder::linear(DenseMatrix::diag(&[2.0, 1.0]), vec![0.0, 0.0]).map_err(err)?;
        let c = CurveSpec::new(vec![0.0, 0.0], vec![1.0, 0.0], 8).map_err(err)?;
        let me = straight_line_measure(&dec, MetricSpec::Euclidean, &c).map_err(err)?;
        Ok(close(me.length, 2.0, 1e-12) && close(me.energy, 2.0, 1e-12))
    })());
    check("N=64 length within 2% of N=1024", (|| {
        let dec = Decoder::Mlp(random_mlp(vec![2, 16, 16], Activation::Tanh, 5));
        let q = |n| -> Result<f64, String> {
            let c = CurveSpec::new(vec![-1.5, 0.8], vec![1.2, -1.1], n).map_err(err)?;
            Ok(straight_line_measure(&dec, MetricSpec::Euclidean, &c).map_err(err)?.length)
        };
        let (coarse, fine) = (q(64)?, q(1024)?);
        Ok((coarse - fine).abs() <= 0.02 * fine)
    })());
    check("oracle keeps flat-space lines straight", (|| {
        let est = geodesic_oracle(&Decoder::identity(2), MetricSpec::Euclidean, &[0.0, 0.0], &[3.0, 4.0], &OracleConfig::default())
            .map_err(err)?;
        Ok(close(est.energy, est.straight.energy, 1e-9))
    })());
    check("oracle cannot improve a linear decoder", (|| {
        let mut rng = RngStream::new(4, 4);
        let dec = Decoder::linear(DenseMatrix::from_fn(3, 2, |_, _| rng.normal()), vec![0.1, 0.2, 0.3]).map_err(err)?;
        let est = geodesic_oracle(&dec, MetricSpec::Euclidean, &[0.2, -0.4], &[1.0, 0.7], &OracleConfig::default())
            .map_err(err)?;
        Ok(est.straight.energy - est.energy <= 1e-9)
    })());
    check("identity bounds are equalities", (|| {
        let b = check_bounds(&Decoder::identity(2), MetricSpec::Euclidean, &[1.0, 1.0], &[-2.0, 0.5], &OracleConfig::default())
            .map_err(err)?;
        let l2 = b.line_length * b.line_length;
        Ok(b.holds && close(b.geodesic_distance, b.line_length, 1e-9) && close(l2, 2.0 * b.line_energy, 1e-9))
    })());

    // relrep
    let pts = DenseMatrix::from_fn(10, 1, |i, _| i as f64);
    check("k = rows selects everything", (|| {
        let mut ok = true;
        for scheme in [AnchorScheme::Uniform, AnchorScheme::Fps, AnchorScheme::Kmeans] {
            let a = select_anchors(&pts, 10, scheme, &mut RngStream::new(1, 1)).map_err(err)?;
            let mut idx = a.indices().to_vec();
            idx.sort_unstable();
            ok &= idx == (0..10).collect::<Vec<_>>();
        }
        Ok(ok)
    })());
    check("fps from 0 picks 9", (|| {
        // Search for a seed whose uniform first pick is index 0.
        for seed in 0..1000 {
            let a = select_anchors(&pts, 2, AnchorScheme::Fps, &mut RngStream::new(seed, 0)).map_err(err)?;
            if a.indices()[0] == 0 {
                return Ok(a.indices()[1] == 9);
            }
        }
        Err("no seed starts at index 0".into())
    })());
    check("kmeans separates two clusters", (|| {
        let mut rng = RngStream::new(3, 3);
        let z = DenseMatrix::from_fn(40, 2, |i, _| if i < 20 { 0.0 } else { 10.0 } + 0.01 * rng.normal());
        let a = select_anchors(&z, 2, AnchorScheme::Kmeans, &mut rng).map_err(err)?;
        let low = a.indices().iter().filter(|&&i| i < 20).count();
        Ok(low == 1)
    })());
    check("cosine relrep: self 1, orthogonal 0", (|| {
        let z = m(&[&[2.0, 0.0], &[0.0, 3.0]]);
        let anchors = AnchorSet::from_indices(&z, vec![0], AnchorScheme::Uniform, 0).map_err(err)?;
        let r = relrep_cosine(&z, &anchors).map_err(err)?;
        Ok(close(r.values.get(0, 0), 1.0, 1e-15) && r.values.get(1, 0) == 0.0)
    })());
    check("identity geodesic relrep = Euclidean distances", (|| {
        let mut rng = RngStream::new(6, 6);
        let z = DenseMatrix::from_fn(12, 3, |_, _| rng.normal());
        let anchors = AnchorSet::from_indices(&z, vec![1, 4, 7], AnchorScheme::Uniform, 0).map_err(err)?;
        let r = relrep_geodesic(&z, &anchors, &Decoder::identity(3), MetricSpec::Euclidean, 8, CurveQuantity::Length)
            .map_err(err)?;
        let mut ok = true;
        for i in 0..12 {
            for (j, &a) in [1, 4, 7].iter().enumerate() {
                let d = relgeo::numerics::euclidean_distance(z.row(i), z.row(a));
                ok &= close(r.values.get(i, j), d, 1e-12);
            }
        }
        Ok(ok && r.values.get(4, 1) == 0.0)
    })());

    // alignment
    check("R1 = R2 gives a unit diagonal", (|| {
        let mut rng = RngStream::new(8, 8);
        let z = DenseMatrix::from_fn(6, 3, |_, _| rng.normal());
        let anchors = AnchorSet::from_indices(&z, vec![0, 2, 5], AnchorScheme::Uniform, 0).map_err(err)?;
        let r = relrep_cosine(&z, &anchors).map_err(err)?;
        let d = crossspace_similarity(&r, &r).map_err(err)?;
        Ok((0..6).all(|i| close(d.get(i, i), 1.0, 1e-12)))
    })());
    check("identity similarity → identity correspondence; ties → 0", (|| {
        let c = extract_correspondence(&DenseMatrix::identity(4)).map_err(err)?;
        let tie = extract_correspondence(&DenseMatrix::from_fn(1, 3, |_, _| 0.5)).map_err(err)?;
        Ok(c.targets == vec![0, 1, 2, 3] && tie.targets == vec![0])
    })());
    check("X = Y fits the identity", (|| {
        let mut rng = RngStream::new(10, 10);
        let x = DenseMatrix::from_fn(20, 3, |_, _| rng.normal());
        let o = fit_orthogonal(&x, &x, true).map_err(err)?;
        let l = fit_linear(&x, &x, false).map_err(err)?;
        let eye = DenseMatrix::identity(3);
        Ok(o.matrix.max_abs_diff(&eye) <= 1e-10 && l.matrix.max_abs_diff(&eye) <= 1e-10)
    })());
    check("underdetermined linear fit is flagged", (|| {
        let mut rng = RngStream::new(11, 11);
        let x = DenseMatrix::from_fn(2, 4, |_, _| rng.normal());
        Ok(fit_linear(&x, &x, true).map_err(err)?.underdetermined)
    })());
    check("stitch with identity map is reconstruction; empty input", (|| {
        let enc = random_mlp(vec![4, 6, 2], Activation::Tanh, 12);
        let dec = random_mlp(vec![2, 6, 4], Activation::Tanh, 13);
        let mut rng = RngStream::new(12, 12);
        let x = DenseMatrix::from_fn(5, 4, |_, _| rng.normal());
        let direct = dec.forward_batch(&enc.forward_batch(&x).map_err(err)?).map_err(err)?;
        let via = stitch(&enc, &AlignmentMap::identity(2), &Decoder::Mlp(dec), &x).map_err(err)?;
        let dec = Decoder::Mlp(random_mlp(vec![2, 6, 4], Activation::Tanh, 13));
        let empty = stitch(&enc, &AlignmentMap::identity(2), &dec, &DenseMatrix::empty(4)).map_err(err)?;
        Ok(direct.max_abs_diff(&via) <= 1e-12 && empty.rows() == 0)
    })());

    // eval
    check("diagonal dominance → MRR 1", (|| {
        let r = mrr(&DenseMatrix::identity(5), &[0, 1, 2, 3, 4], MrrOptions::default()).map_err(err)?;
        Ok(r.mrr == 1.0)
    })());
    check("ranks (1, 2, 4) → 0.58333", (|| {
        let d = m(&[&[0.9, 0.1, 0.0, 0.0], &[0.9, 0.5, 0.0, 0.0], &[0.9, 0.8, 0.7, 0.1]]);
        let r = mrr(&d, &[0, 1, 3], MrrOptions::default()).map_err(err)?;
        Ok(r.ranks == vec![1, 2, 4] && close(r.mrr, 1.75 / 3.0, 1e-15))
    })());
    check("Spearman ±1", (|| {
        let x = [1.0, 3.0, 2.0, 7.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        Ok(spearman(&x, &x).map_err(err)? == 1.0 && spearman(&x, &neg).map_err(err)? == -1.0)
    })());
    check("average ranks on ties", (|| Ok(average_ranks(&[2.0, 1.0, 2.0, 3.0]) == vec![2.5, 1.0, 2.5, 4.0]))());
    check("MSE of X and X + 1", (|| {
        let x = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let shifted = x.add(&DenseMatrix::from_fn(2, 2, |_, _| 1.0)).map_err(err)?;
        Ok(reconstruction_mse(&x, &x).map_err(err)? == 0.0 && reconstruction_mse(&shifted, &x).map_err(err)? == 1.0)
    })());

    // synthbench
    check("identity pair reproduces the base decoder", (|| {
        let base = Decoder::Mlp(random_mlp(vec![2, 8, 5], Activation::Tanh, 14));
        let spec = PairSpec {
            map: LatentMapKind::Identity,
            random_isometry: false,
            samples: 10,
            contraction: 0.5,
        };
        let pair = make_manifold_pair(base, &spec, &mut RngStream::new(14, 14)).map_err(err)?;
        let a = pair.decoder1.forward_batch(&pair.z1).map_err(err)?;
        let b = pair.decoder2.forward_batch(&pair.z1).map_err(err)?;
        Ok(a.max_abs_diff(&b) <= 1e-12)
    })());
    check("smooth map inversion round trip < 1e-9", (|| {
        let map = LatentMap::random_smooth(3, 0.5, &mut RngStream::new(15, 15)).map_err(err)?;
        let z = [0.3, -0.8, 1.1];
        let back = map.apply_inverse(&map.apply(&z).map_err(err)?).map_err(err)?;
        Ok(back.iter().zip(z).all(|(a, b)| (a - b).abs() < 1e-9))
    })());
    check("noise-free dataset is seed-deterministic; labels partition n", (|| {
        let spec = DatasetSpec {
            n: 1,
            noise: 0.0,
            ..DatasetSpec::default()
        };
        let a = make_dataset(&spec, &mut RngStream::new(16, 16)).map_err(err)?;
        let b = make_dataset(&spec, &mut RngStream::new(16, 16)).map_err(err)?;
        let big = make_dataset(&DatasetSpec::default(), &mut RngStream::new(16, 16)).map_err(err)?;
        let counts = (0..10).map(|l| big.labels.iter().filter(|&&v| v == l).count()).sum::<usize>();
        Ok(a.x == b.x && counts == big.len())
    })());

    if failures.is_empty() {
        Ok(format!("{total}/{total} stated examples hold"))
    } else {
        Err(format!("{} of {total} failed: {}", failures.len(), failures.join("; ")))
    }
}

// --------------------------------------------------------------- criterion 10

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale.max(1e-6)
}

/// Finite-difference `J(z)ᵀ u` for a map `f`.
fn fd_vjp(f: &dyn Fn(&[f64]) -> Vec<f64>, z: &[f64], u: &[f64]) -> Vec<f64> {
    (0..z.len())
        .map(|k| {
            let h = 1e-6 * z[k].abs().max(1.0);
            let (mut zp, mut zm) = (z.to_vec(), z.to_vec());
            zp[k] += h;
            zm[k] -= h;
            let (fp, fm) = (f(&zp), f(&zm));
            fp.iter().zip(&fm).zip(u).map(|((a, b), w)| w * (a - b) / (2.0 * h)).sum()
        })
        .collect()
}

fn gradients() -> Check {
    const INSTANCES: usize = 20;
    let mut rng = RngStream::named(10, "acceptance-gradients");
    let mut worst: Vec<(String, f64)> = Vec::new();
    let mut record = |name: &str, e: f64| match worst.iter_mut().find(|(n, _)| n == name) {
        Some(w) => w.1 = w.1.max(e),
        None => worst.push((name.to_string(), e)),
    };

    for i in 0..INSTANCES {
        let seed = 100 + i as u64;
        let z: Vec<f64> = (0..2).map(|_| rng.uniform(0.3, 2.5)).collect();
        let mut decoders: Vec<(String, Decoder)> = vec![
            ("linear decoder".into(), {
                let a = DenseMatrix::from_fn(4, 2, |_, _| rng.normal());
                Decoder::linear(a, rng.normal_vec(4)).map_err(err)?
            }),
            ("sphere chart".into(), Decoder::SphereChart { radius: rng.uniform(0.5, 2.0) }),
            ("swiss roll".into(), Decoder::SwissRoll { scale: rng.uniform(0.2, 1.0) }),
        ];
        for act in [Activation::Tanh, Activation::Sigmoid, Activation::Relu, Activation::Identity] {
            decoders.push((format!("{act} MLP"), Decoder::Mlp(random_mlp(vec![2, 7, 5, 3], act, seed))));
        }
        let pre = LatentMap::random_smooth(2, 0.5, &mut rng).map_err(err)?;
        let post = OutputIsometry::random(5, &mut rng).map_err(err)?;
        let inner = Decoder::Mlp(random_mlp(vec![2, 6, 5], Activation::Tanh, seed));
        decoders.push(("composed decoder".into(), compose(inner, Some(pre.clone()), Some(post)).map_err(err)?));

        for (name, dec) in &decoders {
            let u = rng.normal_vec(dec.output_dim());
            let g = dec.vjp(&z, &u).map_err(err)?;
            let f = |p: &[f64]| dec.forward(p).expect("finite forward");
            record(name, rel_err(&g, &fd_vjp(&f, &z, &u)));
            let zb = DenseMatrix::from_rows(&[z.clone(), z.iter().map(|v| v * 0.7).collect()]).map_err(err)?;
            let ub = DenseMatrix::from_rows(&[u.clone(), u.iter().map(|v| -v).collect()]).map_err(err)?;
            let gb = dec.vjp_batch(&zb, &ub).map_err(err)?;
            let g1 = fd_vjp(&f, zb.row(1), ub.row(1));
            record(&format!("{name} (batched)"), rel_err(gb.row(1), &g1));
        }

        let u = rng.normal_vec(2);
        let g = pre.vjp(&z, &u).map_err(err)?;
        let f = |p: &[f64]| pre.apply(p).expect("finite map");
        record("smooth latent map", rel_err(&g, &fd_vjp(&f, &z, &u)));

        // Parameter gradients of both training losses.
        let net = random_mlp(vec![3, 5, 4], Activation::Tanh, seed);
        let x = DenseMatrix::from_fn(6, 3, |_, _| rng.normal());
        let y = DenseMatrix::from_fn(6, 4, |_, _| rng.normal());
        let labels: Vec<usize> = (0..6).map(|r| r % 4).collect();
        for (name, target) in [("MSE backprop", Target::Mse(&y)), ("cross-entropy backprop", Target::CrossEntropy(&labels))] {
            let (_, grads) = backprop_step(&net, &x, target).map_err(err)?;
            let mut analytic = Vec::new();
            let mut numeric = Vec::new();
            for l in 0..net.layers().len() {
                for k in 0..net.layers()[l].weight.data().len() {
                    let h = 1e-5;
                    let mut plus = net.clone();
                    plus.layers_mut()[l].weight.data_mut()[k] += h;
                    let mut minus = net.clone();
                    minus.layers_mut()[l].weight.data_mut()[k] -= h;
                    let fp = batch_loss(&plus, &x, target).map_err(err)?;
                    let fm = batch_loss(&minus, &x, target).map_err(err)?;
                    numeric.push((fp - fm) / (2.0 * h));
                    analytic.push(grads.weights[l].data()[k]);
                }
                for k in 0..net.layers()[l].bias.len() {
                    let h = 1e-5;
                    let mut plus = net.clone();
                    plus.layers_mut()[l].bias[k] += h;
                    let mut minus = net.clone();
                    minus.layers_mut()[l].bias[k] -= h;
                    let fp = batch_loss(&plus, &x, target).map_err(err)?;
                    let fm = batch_loss(&minus, &x, target).map_err(err)?;
                    numeric.push((fp - fm) / (2.0 * h));
                    analytic.push(grads.biases[l][k]);
                }
            }
            record(name, rel_err(&analytic, &numeric));
        }
    }
    let bad: Vec<String> = worst
        .iter()
        .filter(|(_, e)| !(*e <= 1e-3))
        .map(|(n, e)| format!("{n} {e:.1e}"))
        .collect();
    let overall = worst.iter().map(|(_, e)| *e).fold(0.0f64, f64::max);
    if bad.is_empty() {
        Ok(format!(
            "{} operations × {INSTANCES} instances, worst relative error {overall:.1e} (need ≤ 1e-3)",
            worst.len()
        ))
    } else {
        Err(format!("relative error above 1e-3: {}", bad.join(", ")))
    }
}

// ------------------------------------------------------------------- driver

fn main() {
    // `cargo test` passes harness flags such as `--nocapture`; none apply here.
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        return;
    }
    let work = tempfile::tempdir().expect("temporary directory");
    let mut suite = Suite { passed: 0, failed: 0 };

    let main_cfg = ExperimentConfig {
        output_dir: work.path().join("main"),
        ..ExperimentConfig::default()
    };
    let main_layout = Layout::new(&main_cfg.output_dir);
    let start = Instant::now();
    let setup = run_commands(&main_cfg, &[Command::Synth, Command::TrainAe]);
    let training = start.elapsed();
    println!("# shared setup (dataset + two autoencoders): {:.1}s", training.as_secs_f64());

    let need_setup = |f: &dyn Fn() -> Check| -> Check {
        match &setup {
            Ok(()) => f(),
            Err(e) => Err(format!("shared setup failed: {e}")),
        }
    };

    suite.run(1, "Bounds", minutes(2), Duration::ZERO, || need_setup(&|| bounds(&main_layout)));
    suite.run(2, "Approximation quality", minutes(10), Duration::ZERO, || {
        need_setup(&|| approximation(&main_cfg))
    });
    suite.run(3, "Exact invariance", minutes(1), Duration::ZERO, exact_invariance);

    let start = Instant::now();
    let sweep = setup.clone().and_then(|()| run_commands(&main_cfg, &[Command::AnchorSweep]));
    let sweep_time = start.elapsed();
    let with_sweep = |f: &dyn Fn() -> Check| -> Check {
        match &sweep {
            Ok(()) => f(),
            Err(e) => Err(format!("anchor sweep failed: {e}")),
        }
    };
    suite.run(4, "Retrieval dominance", minutes(15), training + sweep_time, || {
        with_sweep(&|| retrieval(&main_layout))
    });
    suite.run(5, "Anchor-count trend", minutes(20), sweep_time, || {
        with_sweep(&|| monotone_trend(&main_layout))
    });
    suite.run(6, "Stitching", minutes(5), Duration::ZERO, || need_setup(&|| stitching(&main_cfg)));
    suite.run(7, "Procrustes/linear recovery", minutes(1), Duration::ZERO, recovery);

    let mut diet_cfg = ExperimentConfig {
        output_dir: work.path().join("diet"),
        ..ExperimentConfig::default()
    };
    diet_cfg.dataset.spread = 0.1;
    diet_cfg.dataset.min_separation = 0.8;
    diet_cfg.relrep.metric = MetricSpec::Spherical;
    diet_cfg.relrep.space = SpaceKind::Diet;
    diet_cfg.anchors.sweep = vec![10, 50];
    suite.run(8, "Diet head", minutes(10), Duration::ZERO, || diet(&diet_cfg));
    suite.run(9, "Metric unit examples", minutes(2), Duration::ZERO, examples);
    suite.run(10, "Gradient integrity", minutes(2), Duration::ZERO, gradients);

    println!("# {} passed, {} failed", suite.passed, suite.failed);
    if suite.failed > 0 {
        std::process::exit(1);
    }
}
