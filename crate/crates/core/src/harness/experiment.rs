//! End-to-end pipeline: labeled data, three trained schemes, evaluation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ScenarioParams, SystemParams, UncertaintyProfile};
use crate::nn::{train, HistoryPoint, ModelRecord, Regularization, TrainConfig};

use super::dataset::{gen_mixed_dataset, split, LabeledDataset};
use super::eval::{evaluate, EvalReport};

/// Trains one network on `train_set`, scoring history on `val_set`.
pub fn train_record(
    train_set: &LabeledDataset,
    val_set: &LabeledDataset,
    cfg: &TrainConfig,
) -> Result<(ModelRecord, Vec<HistoryPoint>)> {
    if train_set.header.scenario != val_set.header.scenario
        || train_set.header.system != val_set.header.system
    {
        return Err(Error::ScenarioMismatch(
            "training and validation sets disagree".into(),
        ));
    }
    let out = train(&train_set.examples(), &val_set.examples(), cfg)?;
    let rec = ModelRecord::new(
        &out.model,
        cfg.clone(),
        out.final_train_mse,
        out.final_val_mse,
        train_set.header.system,
        train_set.header.scenario,
    );
    Ok((rec, out.history))
}

/// Validation curve shape: the last sample is at most half the first, and
/// the mean of the last quarter is no more than 10% above the mean of the
/// third quarter (no sustained rise after the initial drop).
pub fn history_settles(history: &[HistoryPoint]) -> bool {
    if history.len() < 4 {
        return false;
    }
    let val: Vec<f64> = history.iter().map(|h| h.val_mse).collect();
    let n = val.len();
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let third = mean(&val[n / 2..3 * n / 4]);
    let last = mean(&val[3 * n / 4..]);
    val[n - 1] <= 0.5 * val[0] && last <= 1.10 * third
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub system: SystemParams,
    pub scenario: ScenarioParams,
    /// Error radii of the imperfect half of every dataset.
    pub uncertainty: UncertaintyProfile,
    /// Rows generated for training plus validation.
    pub samples: usize,
    pub train_fraction: f64,
    pub test_samples: usize,
    pub seed: u64,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            system: SystemParams::default(),
            scenario: ScenarioParams {
                max_power: 100.0,
                leakage_cap: 6.0,
            },
            uncertainty: UncertaintyProfile::uniform(0.1),
            samples: 100_000,
            train_fraction: 5.0 / 6.0,
            test_samples: 3000,
            seed: 2024,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: EvalReport,
    pub models: Vec<ModelRecord>,
    pub histories: Vec<(Regularization, Vec<HistoryPoint>)>,
    pub test: LabeledDataset,
}

/// Generates mixed data, trains the unregularized, L1 and L2 schemes and
/// evaluates them on a fresh mixed test set drawn from a different seed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let data = gen_mixed_dataset(
        cfg.samples,
        &cfg.system,
        &cfg.scenario,
        cfg.uncertainty,
        cfg.seed,
    )?;
    let (train_set, val_set) = split(&data, cfg.train_fraction, cfg.seed)?;
    let test_seed = cfg.seed ^ 0x7e57_7e57_7e57_7e57;
    let test = gen_mixed_dataset(
        cfg.test_samples,
        &cfg.system,
        &cfg.scenario,
        cfg.uncertainty,
        test_seed,
    )?;

    let mut models = Vec::new();
    let mut histories = Vec::new();
    for reg in Regularization::ALL {
        let tc = TrainConfig {
            regularization: reg,
            ..cfg.train.clone()
        };
        let (rec, hist) = train_record(&train_set, &val_set, &tc)?;
        models.push(rec);
        histories.push((reg, hist));
    }
    let report = evaluate(&models, &test)?;
    Ok(ExperimentOutcome {
        report,
        models,
        histories,
        test,
    })
}
