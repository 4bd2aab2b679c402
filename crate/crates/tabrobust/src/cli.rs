//! Command-line interface.
//!
//! Exit codes: 0 on success, 1 on usage or validation errors, 2 on runtime
//! failures.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use tabrobust_core::attack::Norm;
use tabrobust_core::bench::{evaluate, evaluate_sweep, leaderboard, BenchError, EvaluationReport, SweepAxis, SweepSpec};
use tabrobust_core::defense::AugmentMethod;
use tabrobust_core::model::{ReferenceModel, TrainError};
use tabrobust_core::synth::Template;
use tabrobust_core::{ConstraintSet, Dataset, DatasetSchema};

use crate::exec::RayonExecutor;
use crate::io::{self, IoError};
use crate::pipeline::{self, Config, PipelineError, SyntheticSplit, WallClock};

pub const TRAIN_FILE: &str = "train.csv";
pub const TEST_FILE: &str = "test.csv";
pub const SCHEMA_FILE: &str = "schema.json";
pub const CONSTRAINTS_FILE: &str = "constraints.txt";

#[derive(Parser, Debug)]
#[command(name = "tabrobust", version, about = "Constrained evasion attacks and defenses for tabular classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic constrained dataset with train and test splits.
    Synth(SynthArgs),
    /// Train a standard classifier.
    Train(TrainArgs),
    /// Train a classifier with constrained adversarial training.
    Advtrain(AdvTrainArgs),
    /// Attack a classifier with CAA and write an evaluation report.
    Attack(AttackArgs),
    /// Evaluate robust accuracy over a range of attack budgets.
    Sweep(SweepArgs),
    /// Merge evaluation reports into a leaderboard.
    Report(ReportArgs),
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// Seed for data generation, training and attacks.
    #[arg(long)]
    seed: Option<u64>,
    /// JSON configuration file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Schema JSON (defaults to schema.json next to the data).
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Constraint file (defaults to constraints.txt next to the data).
    #[arg(long)]
    constraints: Option<PathBuf>,
    /// Output path; reports go to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    features: Option<usize>,
    /// sum3, implication or sum3-implication.
    #[arg(long)]
    template: Option<String>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Dataset directory (reads train.csv) or a CSV file.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Append this fraction of Cutmix rows before training.
    #[arg(long)]
    cutmix: Option<f64>,
}

#[derive(Args, Debug)]
struct AdvTrainArgs {
    #[command(flatten)]
    train: TrainArgs,
    /// Perturbation budget of the inner attack.
    #[arg(long)]
    eps: Option<f64>,
    /// Fraction of each batch left clean.
    #[arg(long)]
    replay: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum NormArg {
    L2,
    Linf,
}

#[derive(Args, Debug)]
struct AttackArgs {
    #[command(flatten)]
    common: Common,
    /// Model checkpoint; a standard model is trained when omitted.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Dataset directory (reads test.csv) or a CSV file; synthetic data is
    /// generated when omitted.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Perturbation budget in scaled feature space.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, value_enum)]
    norm: Option<NormArg>,
    /// Iterations of the gradient stage.
    #[arg(long)]
    gradient_iters: Option<usize>,
    /// Generations of the evolutionary stage.
    #[arg(long)]
    search_iters: Option<usize>,
    /// Cap on the number of attacked rows.
    #[arg(long)]
    max_samples: Option<usize>,
    /// Model label recorded in the report.
    #[arg(long)]
    name: Option<String>,
    /// Defense label recorded in the report.
    #[arg(long)]
    defense: Option<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AxisArg {
    Eps,
    GradientIters,
    SearchIters,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    attack: AttackArgs,
    #[arg(long, value_enum, default_value = "eps")]
    axis: AxisArg,
    /// Comma-separated budget values (defaults depend on the axis).
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[command(flatten)]
    common: Common,
    /// Report JSON files to merge.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => m,
        }
    }
}

fn read_err(e: IoError) -> CliError {
    CliError::Validation(e.to_string())
}

fn write_err(e: IoError) -> CliError {
    CliError::Runtime(e.to_string())
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        let msg = e.to_string();
        match e {
            PipelineError::Synth(_) | PipelineError::Data(_) | PipelineError::TestFraction => CliError::Validation(msg),
            PipelineError::Train(TrainError::Config(_) | TrainError::Width { .. } | TrainError::Data(_)) => {
                CliError::Validation(msg)
            }
            PipelineError::Bench(b) => b.into(),
            PipelineError::Train(_) => CliError::Runtime(msg),
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        let msg = e.to_string();
        match e {
            BenchError::Sweep(_) | BenchError::Data(_) | BenchError::Attack(_) => CliError::Validation(msg),
            BenchError::Model(_) => CliError::Validation(msg),
            BenchError::EmptyAttackSet | BenchError::Metrics(_) => CliError::Runtime(msg),
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a, None),
        Command::Advtrain(a) => {
            let AdvTrainArgs { train: t, eps, replay } = a;
            train(t, Some((eps, replay)))
        }
        Command::Attack(a) => attack(a, None),
        Command::Sweep(a) => {
            let axis = match a.axis {
                AxisArg::Eps => SweepAxis::Eps,
                AxisArg::GradientIters => SweepAxis::GradientIters,
                AxisArg::SearchIters => SweepAxis::SearchIters,
            };
            let spec = SweepSpec { axis, values: a.values.unwrap_or_else(|| axis.default_values()) };
            attack(a.attack, Some(spec))
        }
        Command::Report(a) => report(a),
    }
}

fn load_config(common: &Common) -> Result<Config, CliError> {
    let mut cfg: Config = match &common.config {
        Some(p) => io::read_json(p).map_err(read_err)?,
        None => Config::default(),
    };
    if let Some(seed) = common.seed {
        cfg.train.seed = seed;
        cfg.eval.attack.budget.seed = seed;
        cfg.augment.seed = seed;
    }
    Ok(cfg)
}

fn executor() -> Result<RayonExecutor, CliError> {
    RayonExecutor::from_env().map_err(|e| CliError::Runtime(format!("cannot start worker threads: {e}")))
}

fn require_out(common: &Common) -> Result<&Path, CliError> {
    common.out.as_deref().ok_or_else(|| CliError::Validation("--out is required".into()))
}

fn synth(a: SynthArgs) -> Result<(), CliError> {
    let mut cfg = load_config(&a.common)?;
    if let Some(n) = a.rows {
        cfg.synth.n_rows = n;
    }
    if let Some(n) = a.features {
        cfg.synth.n_features = n;
    }
    if let Some(t) = &a.template {
        cfg.synth.template = Template::from_name(t).ok_or_else(|| CliError::Validation(format!("unknown template `{t}`")))?;
    }
    let out = require_out(&a.common)?;
    let split = pipeline::synthetic_split(&cfg, a.common.seed.unwrap_or(0))?;
    io::write_schema(&out.join(SCHEMA_FILE), &split.schema).map_err(write_err)?;
    io::write_constraints(&out.join(CONSTRAINTS_FILE), &split.constraints, &split.schema).map_err(write_err)?;
    io::write_dataset(&out.join(TRAIN_FILE), &split.train, &split.schema).map_err(write_err)?;
    io::write_dataset(&out.join(TEST_FILE), &split.test, &split.schema).map_err(write_err)?;
    info!("wrote {} train and {} test rows to {}", split.train.len(), split.test.len(), out.display());
    Ok(())
}

/// Locates the CSV, schema and constraints for `data` (a directory or a
/// CSV file), honoring explicit `--schema` and `--constraints`.
fn load_data(common: &Common, data: &Path, file: &str) -> Result<(Dataset, DatasetSchema, ConstraintSet), CliError> {
    let (csv, dir) = if data.is_dir() {
        (data.join(file), data.to_path_buf())
    } else {
        (data.to_path_buf(), data.parent().map(Path::to_path_buf).unwrap_or_default())
    };
    let schema_path = common.schema.clone().unwrap_or_else(|| dir.join(SCHEMA_FILE));
    let schema = io::read_schema(&schema_path).map_err(read_err)?;
    let constraints = match &common.constraints {
        Some(p) => io::read_constraints(p, &schema).map_err(read_err)?,
        None if dir.join(CONSTRAINTS_FILE).exists() => io::read_constraints(&dir.join(CONSTRAINTS_FILE), &schema).map_err(read_err)?,
        None => ConstraintSet::default(),
    };
    let dataset = io::read_dataset(&csv, &schema).map_err(read_err)?;
    Ok((dataset, schema, constraints))
}

type AtOverrides = (Option<f64>, Option<f64>);

fn train(a: TrainArgs, adversarial: Option<AtOverrides>) -> Result<(), CliError> {
    let mut cfg = load_config(&a.common)?;
    if let Some(e) = a.epochs {
        cfg.train.epochs = e;
    }
    if let Some(r) = a.cutmix {
        cfg.augment.method = AugmentMethod::Cutmix;
        cfg.augment.ratio = r;
    }
    let out = require_out(&a.common)?;
    let data = a.data.as_deref().ok_or_else(|| CliError::Validation("--data is required".into()))?;
    let (dataset, schema, cs) = load_data(&a.common, data, TRAIN_FILE)?;
    let seed = cfg.train.seed;
    let trained = match adversarial {
        None => pipeline::train_standard(&cfg, &dataset, &schema, &cs, seed)?,
        Some((eps, replay)) => {
            if let Some(e) = eps {
                cfg.adversarial.inner.budget.eps = e;
            }
            if let Some(r) = replay {
                cfg.adversarial.replay = r;
            }
            pipeline::train_adversarial(&cfg, &dataset, &schema, &cs, seed, &executor()?)?
        }
    };
    if let Some(best) = trained.history.best_epoch {
        info!("kept weights of epoch {best}");
    }
    io::write_model(out, &trained.model).map_err(write_err)
}

fn attack(a: AttackArgs, sweep: Option<SweepSpec>) -> Result<(), CliError> {
    let mut cfg = load_config(&a.common)?;
    let budget = &mut cfg.eval.attack.budget;
    if let Some(e) = a.eps {
        budget.eps = e;
    }
    if let Some(n) = a.norm {
        budget.norm = match n {
            NormArg::L2 => Norm::L2,
            NormArg::Linf => Norm::Linf,
        };
    }
    if let Some(n) = a.gradient_iters {
        budget.n_iter_gradient = n;
    }
    if let Some(n) = a.search_iters {
        budget.n_gen = n;
    }
    if let Some(n) = a.max_samples {
        cfg.eval.max_attack_samples = n;
    }
    cfg.eval.model_name = a.name.clone().unwrap_or_else(|| pipeline::model_name(&cfg.hidden));
    cfg.eval.defense = a.defense.clone().unwrap_or_else(|| "none".into());

    let model = match &a.model {
        Some(p) if !p.exists() => return Err(CliError::Validation(format!("model file not found: {}", p.display()))),
        Some(p) => Some(io::read_model(p).map_err(read_err)?),
        None => None,
    };
    let exec = executor()?;
    let seed = a.common.seed.unwrap_or(0);
    let split = match &a.data {
        Some(d) => {
            let (test, schema, constraints) = load_data(&a.common, d, TEST_FILE)?;
            SyntheticSplit { schema, constraints, train: Dataset { x: tabrobust_core::Matrix::zeros(0, test.n_features()), y: vec![] }, test }
        }
        None => pipeline::synthetic_split(&cfg, seed)?,
    };
    let model: ReferenceModel = match model {
        Some(m) => m,
        None if split.train.is_empty() => return Err(CliError::Validation("--model is required with --data".into())),
        None => pipeline::train_standard(&cfg, &split.train, &split.schema, &split.constraints, cfg.train.seed)?.model,
    };
    if model.n_features() != split.schema.n_features() {
        return Err(CliError::Validation(format!(
            "model expects {} features, data has {}",
            model.n_features(),
            split.schema.n_features()
        )));
    }

    let clock = WallClock::start();
    let report = match &sweep {
        None => evaluate(&model, &split.test, &split.schema, &split.constraints, &cfg.eval, &exec, &clock)?.report,
        Some(spec) => evaluate_sweep(&model, &split.test, &split.schema, &split.constraints, &cfg.eval, spec, &exec, &clock)?,
    };
    info!(
        "robust accuracy {:.4} (unconstrained validation {:.4}) on {} rows",
        report.robust_accuracy_constrained, report.robust_accuracy_unconstrained, report.attack_set_size
    );
    emit(&a.common, &report, sweep.is_some())
}

/// Writes to `--out` (CSV when it ends in `.csv`) or prints to stdout:
/// sweeps as CSV, single reports as JSON.
fn emit(common: &Common, report: &EvaluationReport, csv: bool) -> Result<(), CliError> {
    match &common.out {
        Some(p) => io::write_report(p, report).map_err(write_err),
        None if csv => {
            print!("{}", io::render_report_csv(std::slice::from_ref(report)));
            Ok(())
        }
        None => {
            println!("{}", serde_json::to_string_pretty(report).expect("reports serialize"));
            Ok(())
        }
    }
}

fn report(a: ReportArgs) -> Result<(), CliError> {
    let reports = a.inputs.iter().map(|p| io::read_report(p)).collect::<Result<Vec<_>, _>>().map_err(read_err)?;
    let board = leaderboard(reports);
    match &a.common.out {
        Some(p) if io::is_csv(p) => io::write_report_csv(p, &board).map_err(write_err),
        Some(p) => io::write_json(p, &board).map_err(write_err),
        None => {
            print!("{}", io::render_report_csv(&board));
            Ok(())
        }
    }
}
