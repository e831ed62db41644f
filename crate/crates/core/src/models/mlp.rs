use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{dim_mismatch, Error, Result};
use crate::numerics::{dot, DenseMatrix, RngStream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the pre-activation `x` and output `y`.
    /// ReLU uses subgradient 0 at the kink.
    #[inline]
    pub fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Identity => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::Identity => "identity",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            "identity" | "linear" => Ok(Activation::Identity),
            other => Err(Error::InvalidArgument(format!("unknown activation '{other}'"))),
        }
    }
}

/// Affine map followed by an elementwise activation. `weight` is
/// `out x in`, so the layer computes `act(W x + b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weight: DenseMatrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weight: DenseMatrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(dim_mismatch("Layer::new bias", weight.rows(), bias.len()));
        }
        if bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite("layer bias".into()));
        }
        Ok(Self {
            weight,
            bias,
            activation,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }

    fn pre_activation(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weight
                .row_iter()
                .zip(&self.bias)
                .map(|(w, b)| dot(w, x) + b),
        );
    }
}

/// Layer widths and activations for building a fresh network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    /// `dims[0]` is the input width, `dims[l + 1]` the output width of layer `l`.
    pub dims: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl MlpSpec {
    pub fn new(dims: Vec<usize>, activations: Vec<Activation>) -> Result<Self> {
        if dims.len() < 2 || activations.len() != dims.len() - 1 {
            return Err(Error::InvalidArgument(format!(
                "MlpSpec needs k+1 widths for k activations (got {} widths, {} activations)",
                dims.len(),
                activations.len()
            )));
        }
        if dims.contains(&0) {
            return Err(Error::InvalidArgument("MlpSpec widths must be positive".into()));
        }
        Ok(Self { dims, activations })
    }

    /// Hidden layers share one activation; the last layer uses `output`.
    pub fn uniform(dims: Vec<usize>, hidden: Activation, output: Activation) -> Result<Self> {
        let n = dims.len().saturating_sub(1);
        let activations = (0..n).map(|l| if l + 1 == n { output } else { hidden }).collect();
        Self::new(dims, activations)
    }
}

/// Feed-forward network of dense layers.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    layers: Vec<Layer>,
}

/// Per-layer pre-activations and outputs of a batched forward pass.
/// `outputs[0]` is the input batch; `pre[l]` and `outputs[l + 1]` belong to layer `l`.
pub struct ForwardCache {
    pub pre: Vec<DenseMatrix>,
    pub outputs: Vec<DenseMatrix>,
}

impl MlpModel {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("MlpModel needs at least one layer".into()));
        }
        for (l, pair) in layers.windows(2).enumerate() {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(dim_mismatch(
                    "MlpModel::new",
                    format!("layer {} input {}", l + 1, pair[0].output_dim()),
                    pair[1].input_dim(),
                ));
            }
        }
        Ok(Self { layers })
    }

    /// Glorot-uniform weights `U(−a, a)`, `a = sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn init(spec: &MlpSpec, rng: &mut RngStream) -> Self {
        let layers = spec
            .dims
            .windows(2)
            .zip(&spec.activations)
            .map(|(w, &activation)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weight = DenseMatrix::from_fn(fan_out, fan_in, |_, _| rng.uniform(-a, a));
                Layer {
                    weight,
                    bias: vec![0.0; fan_out],
                    activation,
                }
            })
            .collect();
        Self { layers }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn into_layers(self) -> Vec<Layer> {
        self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.rows() * l.weight.cols() + l.bias.len())
            .sum()
    }

    /// Network made of the layers `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<MlpModel> {
        MlpModel::new(self.layers[range].to_vec())
    }

    /// Layers of `self` followed by layers of `next`.
    pub fn then(&self, next: &MlpModel) -> Result<MlpModel> {
        let mut layers = self.layers.clone();
        layers.extend(next.layers.iter().cloned());
        MlpModel::new(layers)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(dim_mismatch("MlpModel::forward", self.input_dim(), x.len()));
        }
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            layer.pre_activation(&cur, &mut next);
            next.iter_mut().for_each(|v| *v = layer.activation.apply(*v));
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    pub fn forward_batch(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        Ok(self.forward_cached(x)?.outputs.pop().expect("at least one output"))
    }

    pub fn forward_cached(&self, x: &DenseMatrix) -> Result<ForwardCache> {
        if x.cols() != self.input_dim() {
            return Err(dim_mismatch("MlpModel::forward_batch", self.input_dim(), x.cols()));
        }
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut outputs = Vec::with_capacity(self.layers.len() + 1);
        outputs.push(x.clone());
        for layer in &self.layers {
            let input = outputs.last().expect("input pushed");
            let mut a = DenseMatrix::zeros(input.rows(), layer.output_dim());
            for i in 0..input.rows() {
                let xi = input.row(i);
                for ((dst, w), b) in a.row_mut(i).iter_mut().zip(layer.weight.row_iter()).zip(&layer.bias) {
                    *dst = dot(w, xi) + b;
                }
            }
            let mut h = a.clone();
            h.data_mut().iter_mut().for_each(|v| *v = layer.activation.apply(*v));
            pre.push(a);
            outputs.push(h);
        }
        Ok(ForwardCache { pre, outputs })
    }

    /// Vector-Jacobian product `J(x)ᵀ u` by reverse-mode accumulation.
    pub fn vjp(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(dim_mismatch("MlpModel::vjp input", self.input_dim(), x.len()));
        }
        if u.len() != self.output_dim() {
            return Err(dim_mismatch("MlpModel::vjp cotangent", self.output_dim(), u.len()));
        }
        let mut pres = Vec::with_capacity(self.layers.len());
        let mut outs = Vec::with_capacity(self.layers.len());
        let mut cur = x.to_vec();
        for layer in &self.layers {
            let mut a = Vec::new();
            layer.pre_activation(&cur, &mut a);
            let h: Vec<f64> = a.iter().map(|&v| layer.activation.apply(v)).collect();
            pres.push(a);
            cur = h.clone();
            outs.push(h);
        }
        let mut grad = u.to_vec();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            for (g, (&a, &h)) in grad.iter_mut().zip(pres[l].iter().zip(&outs[l])) {
                *g *= layer.activation.derivative(a, h);
            }
            grad = layer.weight.matvec_t(&grad)?;
        }
        Ok(grad)
    }
    /// Row-wise `J(xᵢ)ᵀ uᵢ` for a batch, sharing one forward pass.
    pub fn vjp_batch(&self, x: &DenseMatrix, u: &DenseMatrix) -> Result<DenseMatrix> {
        let cache = self.forward_cached(x)?;
        self.vjp_cached(&cache, u)
    }

    /// Row-wise vector-Jacobian products at the inputs recorded in `cache`.
    pub fn vjp_cached(&self, cache: &ForwardCache, u: &DenseMatrix) -> Result<DenseMatrix> {
        let rows = cache.outputs[0].rows();
        if u.rows() != rows || u.cols() != self.output_dim() {
            return Err(dim_mismatch(
                "MlpModel::vjp_cached cotangents",
                format!("{}x{}", rows, self.output_dim()),
                format!("{}x{}", u.rows(), u.cols()),
            ));
        }
        let mut grad = u.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let (pre, out) = (&cache.pre[l], &cache.outputs[l + 1]);
            for ((g, &a), &h) in grad.data_mut().iter_mut().zip(pre.data()).zip(out.data()) {
                *g *= layer.activation.derivative(a, h);
            }
            grad = grad.matmul(&layer.weight)?;
        }
        Ok(grad)
    }
}
