use crate::error::{dim_mismatch, Error, Result};
use crate::models::MlpModel;
use crate::numerics::{axpy, DenseMatrix};

/// Training target for one batch.
#[derive(Clone, Copy, Debug)]
pub enum Target<'a> {
    /// Regression targets; loss is `(1/B) Σᵢ ‖ŷᵢ − yᵢ‖²`.
    Mse(&'a DenseMatrix),
    /// Class/instance labels; loss is mean softmax cross-entropy over the outputs.
    CrossEntropy(&'a [usize]),
}

/// Parameter gradients, shaped like the model's layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub weights: Vec<DenseMatrix>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(model: &MlpModel) -> Self {
        Self {
            weights: model
                .layers()
                .iter()
                .map(|l| DenseMatrix::zeros(l.weight.rows(), l.weight.cols()))
                .collect(),
            biases: model.layers().iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }
}

/// Numerically stable `log Σ exp`.
fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Loss and `dL/dŷ` for a batch of network outputs.
pub fn loss_and_output_grad(outputs: &DenseMatrix, target: Target<'_>) -> Result<(f64, DenseMatrix)> {
    let b = outputs.rows();
    if b == 0 {
        return Ok((0.0, outputs.clone()));
    }
    let inv_b = 1.0 / b as f64;
    match target {
        Target::Mse(y) => {
            if y.shape() != outputs.shape() {
                return Err(dim_mismatch(
                    "mse target",
                    format!("{}x{}", outputs.rows(), outputs.cols()),
                    format!("{}x{}", y.rows(), y.cols()),
                ));
            }
            let diff = outputs.sub(y)?;
            let loss = diff.data().iter().map(|d| d * d).sum::<f64>() * inv_b;
            Ok((loss, diff.scaled(2.0 * inv_b)))
        }
        Target::CrossEntropy(labels) => {
            if labels.len() != b {
                return Err(dim_mismatch("cross-entropy labels", b, labels.len()));
            }
            let mut grad = DenseMatrix::zeros(b, outputs.cols());
            let mut loss = 0.0;
            for (i, &label) in labels.iter().enumerate() {
                if label >= outputs.cols() {
                    return Err(Error::InvalidArgument(format!(
                        "label {label} out of range for {} outputs",
                        outputs.cols()
                    )));
                }
                let logits = outputs.row(i);
                let lse = log_sum_exp(logits);
                loss += lse - logits[label];
                for (g, &o) in grad.row_mut(i).iter_mut().zip(logits) {
                    *g = (o - lse).exp() * inv_b;
                }
                grad.row_mut(i)[label] -= inv_b;
            }
            Ok((loss * inv_b, grad))
        }
    }
}

/// Loss of `model` on a batch, without gradients.
pub fn batch_loss(model: &MlpModel, inputs: &DenseMatrix, target: Target<'_>) -> Result<f64> {
    let out = model.forward_batch(inputs)?;
    Ok(loss_and_output_grad(&out, target)?.0)
}

/// One reverse-mode pass: returns the batch loss and the gradient of every
/// weight and bias.
pub fn backprop_step(model: &MlpModel, inputs: &DenseMatrix, target: Target<'_>) -> Result<(f64, Gradients)> {
    let cache = model.forward_cached(inputs)?;
    let (loss, mut delta) = loss_and_output_grad(cache.outputs.last().expect("output"), target)?;
    let mut grads = Gradients::zeros_like(model);

    for (l, layer) in model.layers().iter().enumerate().rev() {
        let pre = &cache.pre[l];
        let out = &cache.outputs[l + 1];
        let input = &cache.outputs[l];
        for ((d, &a), &h) in delta.data_mut().iter_mut().zip(pre.data()).zip(out.data()) {
            *d *= layer.activation.derivative(a, h);
        }
        let gw = &mut grads.weights[l];
        let gb = &mut grads.biases[l];
        for i in 0..delta.rows() {
            let di = delta.row(i);
            let xi = input.row(i);
            for (o, &dio) in di.iter().enumerate() {
                if dio != 0.0 {
                    axpy(dio, xi, gw.row_mut(o));
                }
                gb[o] += dio;
            }
        }
        if l > 0 {
            let mut prev = DenseMatrix::zeros(delta.rows(), layer.input_dim());
            for i in 0..delta.rows() {
                let di = delta.row(i);
                let pi = prev.row_mut(i);
                for (o, &dio) in di.iter().enumerate() {
                    if dio != 0.0 {
                        axpy(dio, layer.weight.row(o), pi);
                    }
                }
            }
            delta = prev;
        }
    }
    Ok((loss, grads))
}
