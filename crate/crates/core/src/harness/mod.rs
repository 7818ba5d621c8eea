//! Dataset generation, training orchestration, evaluation and reporting.

mod dataset;
mod eval;
mod experiment;

pub use dataset::{
    gen_dataset, gen_mixed_dataset, label_channel, row_seed, split, DatasetHeader, LabeledDataset,
    LabeledRow, SolverTag, DATASET_COLUMNS, LEAKAGE_TOL,
};
pub use eval::{
    conventional_pass, evaluate, infer_powers, score_powers, EvalReport, ReportFormat,
    SchemeReport, REPORT_COLUMNS,
};
pub use experiment::{
    history_settles, run_experiment, train_record, ExperimentConfig, ExperimentOutcome,
};
