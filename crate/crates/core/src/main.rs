use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use secpower::harness::{
    evaluate, gen_dataset, gen_mixed_dataset, split, train_record, EvalReport, LabeledDataset,
    ReportFormat,
};
use secpower::model::{
    effective_gains, ChannelInstance, ScenarioParams, SystemParams, UncertaintyProfile,
};
use secpower::nn::{HistoryPoint, ModelRecord, Optimizer, Regularization, TrainConfig};
use secpower::solver::{golden_search, solve_robust, DEFAULT_BISECTION_TOL, DEFAULT_SEARCH_TOL};
use secpower::{Error, Result};

/// Secrecy-rate power control: conventional solvers, dataset generation,
/// network training and evaluation.
#[derive(Debug, Parser)]
#[command(name = "secpower", version)]
struct Cli {
    /// JSON file with `system` and `train` defaults.
    #[arg(long, global = true, env = "SECPOWER_CONFIG")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a solver-labeled dataset.
    GenData(GenDataArgs),
    /// Solve a single channel instance and print the result as JSON.
    Solve(SolveArgs),
    /// Train a network on a dataset file.
    Train(TrainArgs),
    /// Evaluate trained networks on a test dataset.
    Eval(EvalArgs),
    /// Re-render a JSON evaluation report.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// Maximum transmit power (mW).
    #[arg(long, default_value_t = 100.0)]
    pt: f64,
    /// Interference leakage cap at the primary receiver (mW).
    #[arg(long, default_value_t = 6.0)]
    q: f64,
}

#[derive(Debug, Args)]
struct GenDataArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, default_value_t = 0.0)]
    eps_s: f64,
    #[arg(long, default_value_t = 0.0)]
    eps_e: f64,
    #[arg(long, default_value_t = 0.0)]
    eps_p: f64,
    /// Label every row with the robust solver.
    #[arg(long, conflicts_with = "mixed")]
    robust: bool,
    /// Alternate perfect-CSI and imperfect-CSI rows.
    #[arg(long)]
    mixed: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// Channel instance as a JSON object, or a path to a file holding one.
    #[arg(long)]
    instance: String,
    #[arg(long)]
    robust: bool,
    #[command(flatten)]
    scenario: ScenarioArgs,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 1.0 / 6.0)]
    val_fraction: f64,
    #[arg(long)]
    reg: Option<Regularization>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Layer sizes, e.g. `8,100,100,1`.
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    /// `adam` or `gd`.
    #[arg(long)]
    optimizer: Option<String>,
    /// Standardize inputs with training-set statistics.
    #[arg(long)]
    standardize: bool,
    /// Stop after this many history samples without validation improvement.
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    out_model: PathBuf,
    /// Write the sampled training curves as CSV.
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long, num_args = 1.., required = true)]
    models: Vec<PathBuf>,
    #[arg(long)]
    test: PathBuf,
    /// Report path; printed to stdout when omitted.
    #[arg(long)]
    out_report: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: ReportFormat,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value = "csv")]
    format: ReportFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    system: SystemParams,
    train: TrainConfig,
}

fn load_config(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let cfg: FileConfig = serde_json::from_str(&fs::read_to_string(path)?)?;
    cfg.system.validate()?;
    cfg.train.validate()?;
    Ok(cfg)
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn gen_data(args: GenDataArgs, cfg: &FileConfig) -> Result<()> {
    let sc = ScenarioParams::new(args.scenario.pt, args.scenario.q)?;
    let profile = UncertaintyProfile {
        eps_s: args.eps_s,
        eps_e: args.eps_e,
        eps_p: args.eps_p,
    };
    let ds = if args.mixed {
        gen_mixed_dataset(args.n, &cfg.system, &sc, profile, args.seed)?
    } else {
        gen_dataset(args.n, &cfg.system, &sc, profile, args.seed, args.robust)?
    };
    ds.verify()?;
    ds.save(&args.out)?;
    eprintln!("wrote {} rows to {}", ds.len(), args.out.display());
    Ok(())
}

fn solve(args: SolveArgs, cfg: &FileConfig) -> Result<()> {
    let text = if args.instance.trim_start().starts_with('{') {
        args.instance.clone()
    } else {
        fs::read_to_string(&args.instance)?
    };
    let ch: ChannelInstance = serde_json::from_str(&text)?;
    ch.validate()?;
    let sc = ScenarioParams::new(args.scenario.pt, args.scenario.q)?;
    let res = if args.robust {
        solve_robust(&ch, &cfg.system, &sc, DEFAULT_BISECTION_TOL)
    } else if ch.is_perfect() {
        golden_search(
            &effective_gains(&ch, &cfg.system, false),
            &sc,
            DEFAULT_SEARCH_TOL,
        )
    } else {
        return Err(Error::InvalidParameter(
            "instance has nonzero error radii; pass --robust".into(),
        ));
    };
    println!("{}", serde_json::to_string_pretty(&res)?);
    Ok(())
}

fn write_history(path: &Path, history: &[HistoryPoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["step", "train_mse", "val_mse"])?;
    for h in history {
        w.write_record([
            h.step.to_string(),
            h.train_mse.to_string(),
            h.val_mse.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn train_cmd(args: TrainArgs, cfg: &FileConfig) -> Result<()> {
    let mut tc = cfg.train.clone();
    if let Some(v) = args.reg {
        tc.regularization = v;
    }
    if let Some(v) = args.lr {
        tc.learning_rate = v;
    }
    if let Some(v) = args.lambda {
        tc.reg_lambda = v;
    }
    if let Some(v) = args.batch {
        tc.batch_size = v;
    }
    if let Some(v) = args.epochs {
        tc.epochs = v;
    }
    if let Some(v) = args.seed {
        tc.seed = v;
    }
    if let Some(v) = args.dims {
        tc.layer_dims = v;
    }
    if let Some(v) = args.optimizer {
        tc.optimizer = match v.to_ascii_lowercase().as_str() {
            "adam" => Optimizer::ADAM,
            "gd" | "plain_gd" => Optimizer::PlainGd,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown optimizer {other:?}"
                )))
            }
        };
    }
    tc.standardize |= args.standardize;
    if args.patience.is_some() {
        tc.early_stopping_patience = args.patience;
    }
    tc.validate()?;
    if !(args.val_fraction > 0.0 && args.val_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "val fraction must be in (0, 1), got {}",
            args.val_fraction
        )));
    }

    let data = LabeledDataset::load(&args.data)?;
    data.verify()?;
    let (train_set, val_set) = split(&data, 1.0 - args.val_fraction, tc.seed)?;
    let (rec, history) = train_record(&train_set, &val_set, &tc)?;
    rec.save(&args.out_model)?;
    if let Some(path) = &args.history {
        write_history(path, &history)?;
    }
    eprintln!(
        "trained {} scheme: train mse {:.6e}, val mse {:.6e}",
        tc.regularization.as_str(),
        rec.final_train_mse,
        rec.final_val_mse
    );
    Ok(())
}

fn eval_cmd(args: EvalArgs) -> Result<()> {
    let models = args
        .models
        .iter()
        .map(ModelRecord::load)
        .collect::<Result<Vec<_>>>()?;
    let test = LabeledDataset::load(&args.test)?;
    let report = evaluate(&models, &test)?;
    emit(&report.render(args.format)?, args.out_report.as_deref())
}

fn report_cmd(args: ReportArgs) -> Result<()> {
    let report = EvalReport::from_json(&fs::read_to_string(&args.input)?)?;
    emit(&report.render(args.format)?, args.out.as_deref())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::GenData(a) => gen_data(a, &cfg),
        Command::Solve(a) => solve(a, &cfg),
        Command::Train(a) => train_cmd(a, &cfg),
        Command::Eval(a) => eval_cmd(a),
        Command::Report(a) => report_cmd(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
