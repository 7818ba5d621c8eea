//! JSON model record: architecture, parameters, input scaling, the training
//! configuration that produced them and the operating point they target.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ScenarioParams, SystemParams};

use super::mlp::{Mlp, Normalization};
use super::train::TrainConfig;

/// Hidden-layer / output-layer activation tag written to every record.
pub const ACTIVATION_TAG: &str = "relu_hidden_linear_output";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub layer_dims: Vec<usize>,
    /// Row-major `(dims[l + 1], dims[l])` matrices.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub activation: String,
    pub normalization: Option<Normalization>,
    pub config: TrainConfig,
    pub final_train_mse: f64,
    pub final_val_mse: f64,
    pub system: SystemParams,
    pub scenario: ScenarioParams,
}

impl ModelRecord {
    pub fn new(
        model: &Mlp,
        config: TrainConfig,
        final_train_mse: f64,
        final_val_mse: f64,
        system: SystemParams,
        scenario: ScenarioParams,
    ) -> Self {
        Self {
            layer_dims: model.dims().to_vec(),
            weights: model.weights().to_vec(),
            biases: model.biases().to_vec(),
            activation: ACTIVATION_TAG.to_string(),
            normalization: model.normalization().cloned(),
            config,
            final_train_mse,
            final_val_mse,
            system,
            scenario,
        }
    }

    /// Rebuilds the network, checking shapes and the activation tag.
    pub fn to_mlp(&self) -> Result<Mlp> {
        if self.activation != ACTIVATION_TAG {
            return Err(Error::Format(format!(
                "unsupported activation {:?}",
                self.activation
            )));
        }
        Mlp::from_parts(
            self.layer_dims.clone(),
            self.weights.clone(),
            self.biases.clone(),
        )?
        .with_normalization(self.normalization.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let rec: Self = serde_json::from_str(s)?;
        rec.to_mlp()?;
        Ok(rec)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
