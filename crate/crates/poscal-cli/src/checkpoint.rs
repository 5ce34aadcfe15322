//! Versioned model checkpoint files. JSON with shortest-round-trip floats,
//! so write-then-read reproduces every parameter bit-exactly.

use std::fs;
use std::path::Path;

use poscal::model::{Architecture, DenseLayer, ModelParams};
use poscal::Matrix;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ArchSpec {
    LogisticRegression,
    Mlp1Hidden { hidden_width: usize },
}

impl From<Architecture> for ArchSpec {
    fn from(arch: Architecture) -> Self {
        match arch {
            Architecture::LogisticRegression => ArchSpec::LogisticRegression,
            Architecture::Mlp1Hidden { hidden_width } => ArchSpec::Mlp1Hidden { hidden_width },
        }
    }
}

impl From<ArchSpec> for Architecture {
    fn from(spec: ArchSpec) -> Self {
        match spec {
            ArchSpec::LogisticRegression => Architecture::LogisticRegression,
            ArchSpec::Mlp1Hidden { hidden_width } => Architecture::Mlp1Hidden { hidden_width },
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct LayerData {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointFile {
    format_version: u32,
    architecture: ArchSpec,
    input_dim: usize,
    num_classes: usize,
    layers: Vec<LayerData>,
}

pub fn save_checkpoint(params: &ModelParams, path: &Path) -> Result<(), CliError> {
    let file = CheckpointFile {
        format_version: CHECKPOINT_VERSION,
        architecture: params.architecture().into(),
        input_dim: params.input_dim(),
        num_classes: params.num_classes(),
        layers: params
            .layers()
            .iter()
            .map(|l| LayerData {
                rows: l.weights.rows(),
                cols: l.weights.cols(),
                weights: l.weights.data().to_vec(),
                biases: l.biases.clone(),
            })
            .collect(),
    };
    let mut json = serde_json::to_string_pretty(&file)?;
    json.push('\n');
    fs::write(path, json)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams, CliError> {
    let text = fs::read_to_string(path)?;
    let file: CheckpointFile = serde_json::from_str(&text)?;
    if file.format_version != CHECKPOINT_VERSION {
        return Err(CliError::config(format!(
            "unsupported checkpoint version {}",
            file.format_version
        )));
    }
    let layers = file
        .layers
        .into_iter()
        .map(|l| {
            Matrix::from_vec(l.rows, l.cols, l.weights).map(|weights| DenseLayer {
                weights,
                biases: l.biases,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ModelParams::from_layers(
        file.architecture.into(),
        file.input_dim,
        file.num_classes,
        layers,
    )?)
}
