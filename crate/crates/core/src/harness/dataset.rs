//! Solver-labeled channel datasets and their CSV file format.
//!
//! A dataset file starts with one `#`-prefixed JSON line holding the
//! [`DatasetHeader`], followed by a CSV table with the columns in
//! [`DATASET_COLUMNS`]. Reals are written with 17 significant digits so a
//! load/save cycle is lossless.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    effective_gains, gen_channel, leakage, ChannelInstance, ScenarioParams, SystemParams,
    UncertaintyProfile,
};
use crate::nn::Example;
use crate::solver::{
    golden_search, solve_robust, SolveResult, DEFAULT_BISECTION_TOL, DEFAULT_SEARCH_TOL,
};

pub const DATASET_COLUMNS: [&str; 10] = [
    "h_s",
    "h_p",
    "h_e",
    "g_s",
    "g_e",
    "eps_s",
    "eps_e",
    "eps_p",
    "p_star",
    "rate_star",
];

/// Slack allowed on the leakage constraint of a stored label (mW).
pub const LEAKAGE_TOL: f64 = 1e-9;

/// Which conventional solver produced the labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverTag {
    /// Perfect-CSI golden-section search on every row.
    Golden,
    /// Robust bisection on every row.
    Robust,
    /// Alternating perfect (golden) and imperfect (robust) rows.
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub system: SystemParams,
    pub scenario: ScenarioParams,
    /// Error radii of the imperfect rows.
    pub uncertainty: UncertaintyProfile,
    pub solver: SolverTag,
    pub seed: u64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledRow {
    pub channel: ChannelInstance,
    /// Optimal power (mW).
    pub p_star: f64,
    /// Secrecy rate at `p_star` (bits/s/Hz).
    pub rate_star: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub header: DatasetHeader,
    pub rows: Vec<LabeledRow>,
}

/// SplitMix64 finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce5_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent channel seed for row `index` of a dataset seeded with `seed`.
pub fn row_seed(seed: u64, index: usize) -> u64 {
    splitmix64(splitmix64(seed) ^ index as u64)
}

/// Labels one channel with the solver matching its CSI: golden search for
/// perfect rows, robust bisection otherwise.
pub fn label_channel(
    ch: &ChannelInstance,
    params: &SystemParams,
    sc: &ScenarioParams,
) -> SolveResult {
    if ch.is_perfect() {
        golden_search(&effective_gains(ch, params, false), sc, DEFAULT_SEARCH_TOL)
    } else {
        solve_robust(ch, params, sc, DEFAULT_BISECTION_TOL)
    }
}

fn labeled(ch: ChannelInstance, res: SolveResult) -> LabeledRow {
    LabeledRow {
        channel: ch,
        p_star: res.p_star,
        rate_star: res.rate_star,
    }
}

fn validate_inputs(
    n: usize,
    params: &SystemParams,
    sc: &ScenarioParams,
    profile: &UncertaintyProfile,
) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("dataset size must be at least 1"));
    }
    params.validate()?;
    sc.validate()?;
    profile.validate()
}

/// `n` channel draws labeled by a conventional solver.
///
/// With `robust` every row is solved by the robust bisection (which reduces to
/// the perfect solution at zero radii); otherwise the profile must be perfect
/// and rows are solved by golden-section search.
pub fn gen_dataset(
    n: usize,
    params: &SystemParams,
    sc: &ScenarioParams,
    profile: UncertaintyProfile,
    seed: u64,
    robust: bool,
) -> Result<LabeledDataset> {
    validate_inputs(n, params, sc, &profile)?;
    if !robust && !profile.is_perfect() {
        return Err(Error::invalid("nonzero error radii need the robust solver"));
    }
    let rows = (0..n)
        .map(|i| {
            let ch = gen_channel(row_seed(seed, i), params, profile);
            let res = if robust {
                solve_robust(&ch, params, sc, DEFAULT_BISECTION_TOL)
            } else {
                golden_search(&effective_gains(&ch, params, false), sc, DEFAULT_SEARCH_TOL)
            };
            labeled(ch, res)
        })
        .collect();
    let solver = if robust {
        SolverTag::Robust
    } else {
        SolverTag::Golden
    };
    Ok(LabeledDataset {
        header: DatasetHeader {
            system: *params,
            scenario: *sc,
            uncertainty: profile,
            solver,
            seed,
            count: n,
        },
        rows,
    })
}

/// Half perfect-CSI rows, half rows with error radii `profile`, alternating
/// by row index (even rows perfect).
pub fn gen_mixed_dataset(
    n: usize,
    params: &SystemParams,
    sc: &ScenarioParams,
    profile: UncertaintyProfile,
    seed: u64,
) -> Result<LabeledDataset> {
    validate_inputs(n, params, sc, &profile)?;
    let rows = (0..n)
        .map(|i| {
            let radii = if i % 2 == 0 {
                UncertaintyProfile::PERFECT
            } else {
                profile
            };
            let ch = gen_channel(row_seed(seed, i), params, radii);
            labeled(ch, label_channel(&ch, params, sc))
        })
        .collect();
    Ok(LabeledDataset {
        header: DatasetHeader {
            system: *params,
            scenario: *sc,
            uncertainty: profile,
            solver: SolverTag::Mixed,
            seed,
            count: n,
        },
        rows,
    })
}

/// Seeded shuffle, then the first `round(n * train_fraction)` rows go to the
/// training part.
pub fn split(
    ds: &LabeledDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let mut order: Vec<usize> = (0..ds.rows.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (ds.rows.len() as f64 * train_fraction).round() as usize;
    let part = |idx: &[usize]| LabeledDataset {
        header: DatasetHeader {
            count: idx.len(),
            ..ds.header
        },
        rows: idx.iter().map(|&i| ds.rows[i]).collect(),
    };
    Ok((part(&order[..n_train]), part(&order[n_train..])))
}

fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_real(field: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Format(format!("line {line}: cannot parse {field:?} as a number")))
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Network training pairs `(features, p_star)`.
    pub fn examples(&self) -> Vec<Example> {
        self.rows
            .iter()
            .map(|r| Example::new(r.channel.features(), r.p_star))
            .collect()
    }

    /// Checks every row: finite nonnegative channel, label in `[0, P_t]`,
    /// worst-case leakage within `q + LEAKAGE_TOL`, and a matching count.
    pub fn verify(&self) -> Result<()> {
        let sc = &self.header.scenario;
        if self.header.count != self.rows.len() {
            return Err(Error::Format(format!(
                "header count {} does not match {} rows",
                self.header.count,
                self.rows.len()
            )));
        }
        for (i, r) in self.rows.iter().enumerate() {
            r.channel.validate()?;
            if !(r.p_star >= 0.0 && r.p_star <= sc.max_power) {
                return Err(Error::invalid(format!(
                    "row {i}: label {} outside [0, {}]",
                    r.p_star, sc.max_power
                )));
            }
            let wc = effective_gains(&r.channel, &self.header.system, true);
            let leak = leakage(r.p_star, &wc);
            if leak > sc.leakage_cap + LEAKAGE_TOL {
                return Err(Error::invalid(format!(
                    "row {i}: leakage {leak} exceeds cap {}",
                    sc.leakage_cap
                )));
            }
            if !(r.rate_star.is_finite() && r.rate_star >= 0.0) {
                return Err(Error::invalid(format!(
                    "row {i}: rate {} is not a valid rate",
                    r.rate_star
                )));
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut out = format!("# {}\n", serde_json::to_string(&self.header)?);
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(DATASET_COLUMNS)?;
        for r in &self.rows {
            let mut fields: Vec<String> =
                r.channel.features().iter().map(|v| fmt_real(*v)).collect();
            fields.push(fmt_real(r.p_star));
            fields.push(fmt_real(r.rate_star));
            w.write_record(&fields)?;
        }
        let body = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        out.push_str(std::str::from_utf8(&body).expect("CSV writer emits UTF-8"));
        Ok(out)
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let (first, body) = text.split_once('\n').unwrap_or((text, ""));
        let header_json = first.strip_prefix('#').ok_or_else(|| {
            Error::Format("dataset must start with a '#' JSON header line".into())
        })?;
        let header: DatasetHeader = serde_json::from_str(header_json.trim())?;

        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(body.as_bytes());
        let columns = reader.headers()?.clone();
        if columns.iter().ne(DATASET_COLUMNS.iter().copied()) {
            return Err(Error::Format(format!(
                "expected columns {DATASET_COLUMNS:?}, got {columns:?}"
            )));
        }
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let line = i + 3;
            if rec.len() != DATASET_COLUMNS.len() {
                return Err(Error::Format(format!(
                    "line {line}: expected {} fields",
                    DATASET_COLUMNS.len()
                )));
            }
            let mut f = [0.0; ChannelInstance::FEATURES];
            for (k, slot) in f.iter_mut().enumerate() {
                *slot = parse_real(&rec[k], line)?;
            }
            rows.push(LabeledRow {
                channel: ChannelInstance::from_features(&f),
                p_star: parse_real(&rec[8], line)?,
                rate_star: parse_real(&rec[9], line)?,
            });
        }
        let ds = Self { header, rows };
        if ds.header.count != ds.rows.len() {
            return Err(Error::Format(format!(
                "header count {} does not match {} rows",
                ds.header.count,
                ds.rows.len()
            )));
        }
        Ok(ds)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_csv_string()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_str(&fs::read_to_string(path)?)
    }
}
