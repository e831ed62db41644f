//! JSON model documents.
//!
//! ```json
//! {"format_version": 1,
//!  "layers": [{"rows": 16, "cols": 2, "weights": [...], "bias": [...], "activation": "tanh"}]}
//! ```
//!
//! `weights` is the row-major `rows x cols` matrix (`rows` = output width).
//! Reals are written in shortest round-trip form, so a write/read cycle is
//! lossless.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

use super::mlp::{Activation, Layer, MlpModel};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerDocument {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub format_version: u32,
    pub layers: Vec<LayerDocument>,
}

impl From<&MlpModel> for ModelDocument {
    fn from(model: &MlpModel) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            layers: model
                .layers()
                .iter()
                .map(|l| LayerDocument {
                    rows: l.weight.rows(),
                    cols: l.weight.cols(),
                    weights: l.weight.data().to_vec(),
                    bias: l.bias.clone(),
                    activation: l.activation.to_string(),
                })
                .collect(),
        }
    }
}

impl TryFrom<ModelDocument> for MlpModel {
    type Error = Error;

    fn try_from(doc: ModelDocument) -> Result<Self> {
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported model format_version {} (expected {MODEL_FORMAT_VERSION})",
                doc.format_version
            )));
        }
        let layers = doc
            .layers
            .into_iter()
            .enumerate()
            .map(|(i, l)| {
                let weight = DenseMatrix::new(l.rows, l.cols, l.weights)
                    .map_err(|e| Error::Format(format!("layer {i}: {e}")))?;
                let activation: Activation = l.activation.parse()?;
                Layer::new(weight, l.bias, activation).map_err(|e| Error::Format(format!("layer {i}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        MlpModel::new(layers).map_err(|e| Error::Format(e.to_string()))
    }
}

pub fn model_to_json(model: &MlpModel) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ModelDocument::from(model))?)
}

pub fn model_from_json(text: &str) -> Result<MlpModel> {
    let doc: ModelDocument = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    MlpModel::try_from(doc)
}

pub fn save_model(model: &MlpModel, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, model_to_json(model)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<MlpModel> {
    model_from_json(&std::fs::read_to_string(path)?)
}
