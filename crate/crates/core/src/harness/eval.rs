//! Scoring trained networks against the conventional solvers.

use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{effective_gains, leakage, secrecy_rate};
use crate::nn::{ModelRecord, Predictor, Regularization};

use super::dataset::{label_channel, LabeledDataset, LEAKAGE_TOL};

/// Column order of the CSV report. One row per scheme, then an `aggregate` row.
pub const REPORT_COLUMNS: [&str; 9] = [
    "scheme",
    "rows",
    "mean_rate_nn",
    "mean_rate_conv",
    "rate_ratio",
    "time_nn",
    "time_conv",
    "time_ratio",
    "satisfaction",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::invalid(format!("unknown report format {other:?}"))),
        }
    }
}

/// Scores of one trained network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeReport {
    pub scheme: Regularization,
    /// Mean secrecy rate of the clipped network power (bits/s/Hz).
    pub mean_rate_nn: f64,
    /// `100 * mean_rate_nn / mean_rate_conv`.
    pub rate_ratio: f64,
    /// Seconds for the full inference pass.
    pub time_nn: f64,
    /// `100 * time_nn / time_conv`.
    pub time_ratio: f64,
    /// Percent of rows whose worst-case leakage stays within the cap.
    pub satisfaction: f64,
}

/// Comparison of every scheme with the conventional solvers on one test set.
///
/// The aggregate fields are the least favorable scheme values: minimum rate,
/// rate ratio and satisfaction; maximum time and time ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: usize,
    pub mean_rate_nn: f64,
    pub mean_rate_conv: f64,
    pub rate_ratio: f64,
    pub time_nn: f64,
    pub time_conv: f64,
    pub time_ratio: f64,
    pub satisfaction: f64,
    pub schemes: Vec<SchemeReport>,
}

fn percent(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        100.0 * num / den
    } else {
        100.0
    }
}

fn check_scenario(rec: &ModelRecord, test: &LabeledDataset) -> Result<()> {
    if rec.scenario != test.header.scenario {
        return Err(Error::ScenarioMismatch(format!(
            "model trained for {:?}, test set uses {:?}",
            rec.scenario, test.header.scenario
        )));
    }
    if rec.system != test.header.system {
        return Err(Error::ScenarioMismatch(
            "model and test set use different system parameters".into(),
        ));
    }
    Ok(())
}

/// Clipped network power for every test row, with the wall time of the pass.
pub fn infer_powers(rec: &ModelRecord, test: &LabeledDataset) -> Result<(Vec<f64>, f64)> {
    let model = rec.to_mlp()?;
    let features: Vec<[f64; 8]> = test.rows.iter().map(|r| r.channel.features()).collect();
    let start = Instant::now();
    let predictor = Predictor::new(&model, test.header.scenario.max_power);
    let powers = predictor.predict_batch(features.iter().map(|f| f.as_slice()));
    Ok((powers, start.elapsed().as_secs_f64()))
}

/// Re-solves every test row with its conventional solver; returns the mean
/// rate and the wall time of the pass.
pub fn conventional_pass(test: &LabeledDataset) -> (f64, f64) {
    let (params, sc) = (&test.header.system, &test.header.scenario);
    let start = Instant::now();
    let total: f64 = test
        .rows
        .iter()
        .map(|r| label_channel(&r.channel, params, sc).rate_star)
        .sum();
    (total / test.len() as f64, start.elapsed().as_secs_f64())
}

/// Mean secrecy rate and leakage satisfaction (percent) of `powers`.
///
/// Imperfect rows are scored at the worst-case gains of their error disks,
/// perfect rows at the nominal gains.
pub fn score_powers(test: &LabeledDataset, powers: &[f64]) -> (f64, f64) {
    let params = &test.header.system;
    let q = test.header.scenario.leakage_cap;
    let mut rate = 0.0;
    let mut satisfied = 0usize;
    for (r, &p) in test.rows.iter().zip(powers) {
        let g = effective_gains(&r.channel, params, !r.channel.is_perfect());
        rate += secrecy_rate(p, &g);
        if leakage(p, &g) <= q + LEAKAGE_TOL {
            satisfied += 1;
        }
    }
    let n = test.len() as f64;
    (rate / n, 100.0 * satisfied as f64 / n)
}

/// Scores each model on `test` against a fresh conventional re-solve.
pub fn evaluate(models: &[ModelRecord], test: &LabeledDataset) -> Result<EvalReport> {
    if models.is_empty() {
        return Err(Error::invalid("evaluation needs at least one model"));
    }
    if test.is_empty() {
        return Err(Error::invalid("test set is empty"));
    }
    for rec in models {
        check_scenario(rec, test)?;
    }

    let (mean_rate_conv, time_conv) = conventional_pass(test);
    let time_den = time_conv.max(1e-9);
    let mut schemes = Vec::with_capacity(models.len());
    for rec in models {
        let (powers, time_nn) = infer_powers(rec, test)?;
        let (mean_rate_nn, satisfaction) = score_powers(test, &powers);
        schemes.push(SchemeReport {
            scheme: rec.config.regularization,
            mean_rate_nn,
            rate_ratio: percent(mean_rate_nn, mean_rate_conv),
            time_nn,
            time_ratio: 100.0 * time_nn / time_den,
            satisfaction,
        });
    }

    let min = |f: fn(&SchemeReport) -> f64| schemes.iter().map(f).fold(f64::INFINITY, f64::min);
    let max = |f: fn(&SchemeReport) -> f64| schemes.iter().map(f).fold(0.0, f64::max);
    Ok(EvalReport {
        rows: test.len(),
        mean_rate_nn: min(|s| s.mean_rate_nn),
        mean_rate_conv,
        rate_ratio: min(|s| s.rate_ratio),
        time_nn: max(|s| s.time_nn),
        time_conv,
        time_ratio: max(|s| s.time_ratio),
        satisfaction: min(|s| s.satisfaction),
        schemes,
    })
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// CSV table with [`REPORT_COLUMNS`]; ratios and satisfaction use two
    /// decimals.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(REPORT_COLUMNS)?;
        let row = |name: &str, rate: f64, rr: f64, t: f64, tr: f64, sat: f64| {
            vec![
                name.to_string(),
                self.rows.to_string(),
                rate.to_string(),
                self.mean_rate_conv.to_string(),
                format!("{rr:.2}"),
                t.to_string(),
                self.time_conv.to_string(),
                format!("{tr:.2}"),
                format!("{sat:.2}"),
            ]
        };
        for s in &self.schemes {
            w.write_record(row(
                s.scheme.as_str(),
                s.mean_rate_nn,
                s.rate_ratio,
                s.time_nn,
                s.time_ratio,
                s.satisfaction,
            ))?;
        }
        w.write_record(row(
            "aggregate",
            self.mean_rate_nn,
            self.rate_ratio,
            self.time_nn,
            self.time_ratio,
            self.satisfaction,
        ))?;
        let body = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(body).expect("CSV writer emits UTF-8"))
    }

    pub fn render(&self, format: ReportFormat) -> Result<String> {
        match format {
            ReportFormat::Csv => self.to_csv(),
            ReportFormat::Json => self.to_json(),
        }
    }

    pub fn write(&self, path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
        fs::write(path, self.render(format)?)?;
        Ok(())
    }
}
