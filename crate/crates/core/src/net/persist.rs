//! Versioned JSON document for one network. Floats are written in shortest
//! round-trip form, so a save/load cycle reproduces every parameter bit.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ResultExt};
use crate::format::{read_text, write_text};

use super::{Activation, Mlp};

pub const MLP_FORMAT: &str = "cyclevc-mlp";
pub const MLP_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct MlpDocument {
    format: String,
    version: u32,
    layer_dims: Vec<usize>,
    hidden_activation: Activation,
    output_activation: Activation,
    /// One row-major matrix per layer, shaped `layer_dims[l+1] × layer_dims[l]`.
    weights: Vec<Vec<Vec<f64>>>,
    biases: Vec<Vec<f64>>,
}

impl Mlp {
    pub fn to_json(&self) -> Result<String> {
        let doc = MlpDocument {
            format: MLP_FORMAT.into(),
            version: MLP_FORMAT_VERSION,
            layer_dims: self.layer_dims.clone(),
            hidden_activation: self.hidden_activation,
            output_activation: self.output_activation,
            weights: self
                .weights
                .iter()
                .map(|w| w.rows().into_iter().map(|r| r.to_vec()).collect())
                .collect(),
            biases: self.biases.iter().map(|b| b.to_vec()).collect(),
        };
        let mut text = serde_json::to_string(&doc)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: MlpDocument = serde_json::from_str(text)?;
        if doc.format != MLP_FORMAT || doc.version != MLP_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "expected {MLP_FORMAT} v{MLP_FORMAT_VERSION}, found {} v{}",
                doc.format, doc.version
            )));
        }
        let weights = doc
            .weights
            .into_iter()
            .map(|rows| {
                let (r, c) = (rows.len(), rows.first().map_or(0, Vec::len));
                if rows.iter().any(|row| row.len() != c) {
                    return Err(Error::Format("ragged weight matrix".into()));
                }
                Array2::from_shape_vec((r, c), rows.into_iter().flatten().collect())
                    .map_err(|e| Error::Format(e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        let biases = doc.biases.into_iter().map(Array1::from).collect();
        Mlp::from_parts(
            doc.layer_dims,
            weights,
            biases,
            doc.hidden_activation,
            doc.output_activation,
        )
    }
}

pub fn save_mlp(path: impl AsRef<Path>, net: &Mlp) -> Result<()> {
    write_text(path, &net.to_json()?)
}

pub fn load_mlp(path: impl AsRef<Path>) -> Result<Mlp> {
    let path = path.as_ref();
    Mlp::from_json(&read_text(path)?).in_file(path)
}
