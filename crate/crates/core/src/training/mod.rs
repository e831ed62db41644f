//! Minibatch training of MLP autoencoders and instance-discrimination heads
//! with hand-written backpropagation and Adam.
//!
//! Training is single-threaded per model with a fixed reduction order, so a
//! fixed seed gives bit-identical weights. Randomness comes from two named
//! streams of the config seed: `init` for weights and `shuffle:epoch-k` for
//! the batch order of epoch `k`.

mod adam;
mod backprop;

pub use adam::{Adam, AdamConfig};
pub use backprop::{backprop_step, batch_loss, loss_and_output_grad, Gradients, Target};

use serde::{Deserialize, Serialize};

use crate::error::{dim_mismatch, Error, Result};
use crate::models::{Activation, Decoder, Layer, MlpModel, MlpSpec};
use crate::numerics::{DenseMatrix, RngStream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    Mse,
    DietCrossEntropy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub betas: (f64, f64),
    pub adam_eps: f64,
    pub seed: u64,
    pub loss: LossKind,
}

impl TrainConfig {
    pub fn new(loss: LossKind, seed: u64) -> Self {
        let adam = AdamConfig::default();
        Self {
            epochs: 50,
            batch_size: 64,
            learning_rate: adam.learning_rate,
            betas: (adam.beta1, adam.beta2),
            adam_eps: adam.eps,
            seed,
            loss,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        let ok_beta = |b: f64| b > 0.0 && b < 1.0;
        if !ok_beta(self.betas.0) || !ok_beta(self.betas.1) {
            return Err(Error::InvalidArgument("Adam betas must lie in (0, 1)".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be at least 1".into()));
        }
        if !(self.adam_eps > 0.0) {
            return Err(Error::InvalidArgument("Adam eps must be positive".into()));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.betas.0,
            beta2: self.betas.1,
            eps: self.adam_eps,
        }
    }
}

/// Runs minibatch Adam on `model`, returning the mean training loss of each
/// epoch (averaged over the batches seen during that epoch).
fn fit(
    model: &mut MlpModel,
    inputs: &DenseMatrix,
    targets: FitTargets<'_>,
    cfg: &TrainConfig,
    frozen_bias: &[bool],
) -> Result<Vec<f64>> {
    let n = inputs.rows();
    let mut adam = Adam::for_model(cfg.adam(), model);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..cfg.epochs {
        let mut rng = RngStream::named(cfg.seed, &format!("shuffle:epoch-{epoch}"));
        order.sort_unstable();
        rng.shuffle(&mut order);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let xb = inputs.select_rows(chunk)?;
            let step = match targets {
                FitTargets::Regression(y) => {
                    let yb = y.select_rows(chunk)?;
                    backprop_step(model, &xb, Target::Mse(&yb))
                }
                FitTargets::Labels(labels) => {
                    let lb: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
                    backprop_step(model, &xb, Target::CrossEntropy(&lb))
                }
            };
            // Overflow inside the forward or backward pass surfaces as a non-finite matrix.
            let (loss, grads) = match step {
                Err(Error::NonFinite(_)) => return Err(Error::Divergence { epoch, loss: f64::NAN }),
                other => other?,
            };
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, loss });
            }
            total += loss * chunk.len() as f64;
            adam.step_model(model, &grads, frozen_bias);
        }
        let mean = total / n as f64;
        if !mean.is_finite() || model.layers().iter().any(|l| !l.weight.is_finite()) {
            return Err(Error::Divergence { epoch, loss: mean });
        }
        history.push(mean);
    }
    Ok(history)
}

#[derive(Clone, Copy)]
enum FitTargets<'a> {
    Regression(&'a DenseMatrix),
    Labels(&'a [usize]),
}

#[derive(Clone, Debug)]
pub struct TrainedAutoencoder {
    pub encoder: MlpModel,
    pub decoder: MlpModel,
    pub loss_history: Vec<f64>,
}

impl TrainedAutoencoder {
    pub fn decoder(&self) -> Decoder {
        Decoder::Mlp(self.decoder.clone())
    }

    pub fn encode(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.encoder.forward_batch(x)
    }

    pub fn reconstruct(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.decoder.forward_batch(&self.encoder.forward_batch(x)?)
    }
}

/// Trains encoder and decoder jointly on reconstruction loss
/// `(1/B) Σ ‖D(E(x)) − x‖²`.
pub fn train_autoencoder(
    data: &DenseMatrix,
    encoder_spec: &MlpSpec,
    decoder_spec: &MlpSpec,
    cfg: &TrainConfig,
) -> Result<TrainedAutoencoder> {
    cfg.validate()?;
    if cfg.loss != LossKind::Mse {
        return Err(Error::InvalidArgument("autoencoders train with the MSE loss".into()));
    }
    let d = data.cols();
    let latent = *encoder_spec.dims.last().expect("validated spec");
    if encoder_spec.dims[0] != d || *decoder_spec.dims.last().expect("validated spec") != d {
        return Err(dim_mismatch("train_autoencoder data width", d, "encoder input / decoder output"));
    }
    if decoder_spec.dims[0] != latent {
        return Err(dim_mismatch("train_autoencoder latent width", latent, decoder_spec.dims[0]));
    }
    if data.rows() < cfg.batch_size {
        return Err(Error::InvalidArgument(format!(
            "need at least batch_size = {} rows, got {}",
            cfg.batch_size,
            data.rows()
        )));
    }
    let mut rng = RngStream::named(cfg.seed, "init");
    let encoder = MlpModel::init(encoder_spec, &mut rng);
    let decoder = MlpModel::init(decoder_spec, &mut rng);
    let n_enc = encoder.layers().len();
    let mut joint = encoder.then(&decoder)?;
    let loss_history = fit(&mut joint, data, FitTargets::Regression(data), cfg, &[])?;
    let n_all = joint.layers().len();
    Ok(TrainedAutoencoder {
        encoder: joint.slice(0..n_enc)?,
        decoder: joint.slice(n_enc..n_all)?,
        loss_history,
    })
}

/// Instance-discrimination head: nonlinear map `f` followed by a bias-free
/// linear classifier `W` over instances.
#[derive(Clone, Debug, PartialEq)]
pub struct DietHead {
    f: MlpModel,
    w: DenseMatrix,
}

impl DietHead {
    pub fn new(f: MlpModel, w: DenseMatrix) -> Result<Self> {
        if w.cols() != f.output_dim() {
            return Err(dim_mismatch("DietHead::new", f.output_dim(), w.cols()));
        }
        Ok(Self { f, w })
    }

    /// Splits a full network whose last layer is bias-free and linear.
    pub fn from_model(model: &MlpModel) -> Result<Self> {
        let layers = model.layers();
        if layers.len() < 2 {
            return Err(Error::Format("a Diet head needs a feature map and a projection layer".into()));
        }
        let last = &layers[layers.len() - 1];
        if last.activation != Activation::Identity || last.bias.iter().any(|&b| b != 0.0) {
            return Err(Error::Format("Diet projection layer must be linear without bias".into()));
        }
        Self::new(model.slice(0..layers.len() - 1)?, last.weight.clone())
    }

    /// Full network `W ∘ f` with an explicit zero bias on the projection.
    pub fn to_model(&self) -> MlpModel {
        let proj = Layer::new(self.w.clone(), vec![0.0; self.w.rows()], Activation::Identity).expect("dims");
        let mut layers = self.f.layers().to_vec();
        layers.push(proj);
        MlpModel::new(layers).expect("dims chain")
    }

    pub fn feature_map(&self) -> &MlpModel {
        &self.f
    }

    pub fn projection(&self) -> &DenseMatrix {
        &self.w
    }

    pub fn num_instances(&self) -> usize {
        self.w.rows()
    }

    pub fn penultimate_dim(&self) -> usize {
        self.w.cols()
    }

    /// Decoder whose output is the penultimate layer (for pulling back the
    /// spherical metric).
    pub fn penultimate_decoder(&self) -> Decoder {
        Decoder::Mlp(self.f.clone())
    }

    pub fn logits(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.to_model().forward_batch(x)
    }

    /// Fraction of rows whose arg-max logit (smallest index on ties) equals the label.
    pub fn accuracy(&self, x: &DenseMatrix, labels: &[usize]) -> Result<f64> {
        let logits = self.logits(x)?;
        if labels.len() != logits.rows() {
            return Err(dim_mismatch("DietHead::accuracy", logits.rows(), labels.len()));
        }
        if labels.is_empty() {
            return Ok(0.0);
        }
        let hits = logits
            .row_iter()
            .zip(labels)
            .filter(|(row, &label)| argmax(row) == label)
            .count();
        Ok(hits as f64 / labels.len() as f64)
    }
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Widths of the Tanh hidden layers of `f`; the last width is the
/// penultimate dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DietSpec {
    pub hidden: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct TrainedDiet {
    pub head: DietHead,
    pub loss_history: Vec<f64>,
    pub accuracy: f64,
}

/// Trains `W ∘ f` on softmax cross-entropy over instance labels.
pub fn train_diet(
    embeddings: &DenseMatrix,
    labels: &[usize],
    spec: &DietSpec,
    cfg: &TrainConfig,
) -> Result<TrainedDiet> {
    cfg.validate()?;
    if cfg.loss != LossKind::DietCrossEntropy {
        return Err(Error::InvalidArgument("Diet heads train with the cross-entropy loss".into()));
    }
    if labels.len() != embeddings.rows() {
        return Err(dim_mismatch("train_diet labels", embeddings.rows(), labels.len()));
    }
    if spec.hidden.is_empty() {
        return Err(Error::InvalidArgument("Diet head needs at least one hidden layer".into()));
    }
    let num_instances = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut used = vec![false; num_instances];
    labels.iter().for_each(|&l| used[l] = true);
    if let Some(missing) = used.iter().position(|&u| !u) {
        return Err(Error::InvalidArgument(format!(
            "instance label {missing} is never used (labels must cover 0..{num_instances})"
        )));
    }
    if num_instances == 0 {
        return Err(Error::InvalidArgument("no training rows".into()));
    }

    let mut dims = vec![embeddings.cols()];
    dims.extend_from_slice(&spec.hidden);
    dims.push(num_instances);
    let mut acts = vec![Activation::Tanh; spec.hidden.len()];
    acts.push(Activation::Identity);
    let full_spec = MlpSpec::new(dims, acts)?;
    let mut model = MlpModel::init(&full_spec, &mut RngStream::named(cfg.seed, "init"));

    let mut frozen = vec![false; model.layers().len()];
    *frozen.last_mut().expect("non-empty") = true;
    let loss_history = fit(&mut model, embeddings, FitTargets::Labels(labels), cfg, &frozen)?;
    let head = DietHead::from_model(&model)?;
    let accuracy = head.accuracy(embeddings, labels)?;
    Ok(TrainedDiet {
        head,
        loss_history,
        accuracy,
    })
}
