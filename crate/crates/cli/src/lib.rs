//! Command-line front end: argument and config resolution plus one module
//! per subcommand.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use confcal::CalibratorChoice;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

use config::Layered;
pub use error::{CliError, CliResult};
pub use report::Format;

#[derive(Debug, Parser)]
#[command(name = "confcal", version, about = "Confidence calibration, cascading and label cleaning")]
pub struct Cli {
    /// TOML file supplying option values below env vars and flags.
    #[arg(long, global = true, env = "CONFCAL_CONFIG")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate seeded synthetic prediction files.
    Synth(SynthArgs),
    /// Fit a calibrator and report ECE before and after.
    Calibrate(CalibrateArgs),
    /// Reliability table and ECE of one prediction file.
    Evaluate(EvaluateArgs),
    /// Calibrated-advantage cascade between a base and an escalation model.
    Cascade(CascadeArgs),
    /// Flag likely mislabeled samples.
    Clean(CleanArgs),
    /// APGR of a trade-off curve CSV.
    Apgr(ApgrArgs),
    /// APGR over a grid of bin counts and calibrators.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKindArg {
    Calibrated,
    Miscalibrated,
    Pair,
    SameSize,
    Noisy,
    Platt,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct SynthArgs {
    #[arg(long, env = "CONFCAL_KIND", value_enum)]
    pub kind: Option<SynthKindArg>,
    /// Number of samples.
    #[arg(long, env = "CONFCAL_N")]
    pub n: Option<usize>,
    #[arg(long, env = "CONFCAL_CLASSES")]
    pub classes: Option<usize>,
    /// True temperature (calibrated) or distortion temperature (miscalibrated).
    #[arg(long, env = "CONFCAL_TEMPERATURE")]
    pub temperature: Option<f64>,
    #[arg(long, env = "CONFCAL_FLIP_RATE")]
    pub flip_rate: Option<f64>,
    /// One accuracy per generated model (noisy).
    #[arg(long, env = "CONFCAL_ACCURACIES", value_delimiter = ',')]
    pub accuracies: Option<Vec<f64>>,
    /// Platt slope.
    #[arg(long, env = "CONFCAL_A", allow_hyphen_values = true)]
    pub a: Option<f64>,
    /// Platt intercept.
    #[arg(long, env = "CONFCAL_B", allow_hyphen_values = true)]
    pub b: Option<f64>,
    #[arg(long, env = "CONFCAL_BASE_PROFILE", value_delimiter = ',')]
    pub base_profile: Option<Vec<f64>>,
    #[arg(long, env = "CONFCAL_ESC_PROFILE", value_delimiter = ',')]
    pub esc_profile: Option<Vec<f64>>,
    #[arg(long, env = "CONFCAL_SEED")]
    pub seed: Option<u64>,
    /// Write `{model}_val` and `{model}_test` halves instead of one file per model.
    #[arg(long, env = "CONFCAL_SPLIT", num_args = 0..=1, default_missing_value = "true")]
    pub split: Option<bool>,
    #[arg(long, env = "CONFCAL_OUT")]
    pub out: Option<PathBuf>,
}

impl Layered for SynthArgs {
    const SECTION: &'static str = "synth";

    fn defaults() -> Value {
        json!({
            "kind": "calibrated",
            "n": 10000,
            "classes": 10,
            "flip_rate": 0.05,
            "accuracies": [0.9, 0.9],
            "a": 1.7,
            "b": -0.4,
            "seed": 0,
            "split": true,
            "out": ".",
        })
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct CalibrateArgs {
    /// Validation predictions the calibrator is fit on.
    #[arg(long, env = "CONFCAL_VAL")]
    pub val: Option<PathBuf>,
    /// Held-out predictions scored with the fitted calibrator.
    #[arg(long, env = "CONFCAL_TEST")]
    pub test: Option<PathBuf>,
    #[arg(long, env = "CONFCAL_CALIBRATOR")]
    pub calibrator: Option<CalibratorChoice>,
    #[arg(long, env = "CONFCAL_BINS")]
    pub bins: Option<usize>,
    #[arg(long, env = "CONFCAL_FORMAT", value_enum)]
    pub format: Option<Format>,
    #[arg(long, env = "CONFCAL_OUT")]
    pub out: Option<PathBuf>,
}

impl Layered for CalibrateArgs {
    const SECTION: &'static str = "calibrate";

    fn defaults() -> Value {
        json!({ "calibrator": "temp", "bins": 15, "format": "csv", "out": "." })
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct EvaluateArgs {
    #[arg(long, env = "CONFCAL_INPUT")]
    pub input: Option<PathBuf>,
    /// Fitted calibrator JSON applied before scoring.
    #[arg(long, env = "CONFCAL_CALIBRATION")]
    pub calibration: Option<PathBuf>,
    #[arg(long, env = "CONFCAL_BINS")]
    pub bins: Option<usize>,
    /// Also report ECE over equal-width bins.
    #[arg(long, env = "CONFCAL_EQUAL_WIDTH", num_args = 0..=1, default_missing_value = "true")]
    pub equal_width: Option<bool>,
    #[arg(long, env = "CONFCAL_FORMAT", value_enum)]
    pub format: Option<Format>,
    #[arg(long, env = "CONFCAL_OUT")]
    pub out: Option<PathBuf>,
}

impl Layered for EvaluateArgs {
    const SECTION: &'static str = "evaluate";

    fn defaults() -> Value {
        json!({ "bins": 15, "equal_width": false, "format": "csv", "out": "." })
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct CascadeArgs {
    #[arg(long, env = "CONFCAL_VAL_BASE")]
    pub val_base: Option<PathBuf>,
    #[arg(long, env = "CONFCAL_VAL_ESC")]
    pub val_esc: Option<PathBuf>,
    #[arg(long, env = "CONFCAL_TEST_BASE")]
    pub test_base: Option<PathBuf>,
    #[arg(long, env = "CONFCAL_TEST_ESC")]
    pub test_esc: Option<PathBuf>,
    #[arg(long, env = "CONFCAL_BINS")]
    pub bins: Option<usize>,
    #[arg(long, env = "CONFCAL_CALIBRATOR")]
    pub calibrator: Option<CalibratorChoice>,
    /// Operating budget K (bins kept on the base model).
    #[arg(long, env = "CONFCAL_BUDGET", conflicts_with = "budget_sweep")]
    pub budget: Option<usize>,
    /// Sweep K over 0..=N without a single operating point.
    #[arg(long, env = "CONFCAL_BUDGET_SWEEP", num_args = 0..=1, default_missing_value = "true")]
    pub budget_sweep: Option<bool>,
    #[arg(long, env = "CONFCAL_FORMAT", value_enum)]
    pub format: Option<Format>,
    #[arg(long, env = "CONFCAL_OUT")]
    pub out: Option<PathBuf>,
}

impl Layered for CascadeArgs {
    const SECTION: &'static str = "cascade";

    fn defaults() -> Value {
        json!({ "bins": 15, "calibrator": "temp", "format": "csv", "out": "." })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CleanMethodArg {
    Basic,
    Calibrated,
    Cl,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum GateArg {
    Accuracy,
    Confidence,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct CleanArgs {
    /// Prediction files of the cleaning models on the labelled dataset.
    #[arg(long = "model", env = "CONFCAL_MODEL", value_delimiter = ',')]
    pub model: Option<Vec<PathBuf>>,
    /// Validation files, one per model in the same order, for calibration and gates.
    #[arg(long = "val", env = "CONFCAL_VAL", value_delimiter = ',')]
    pub val: Option<Vec<PathBuf>>,
    #[arg(long, env = "CONFCAL_METHOD", value_enum)]
    pub method: Option<CleanMethodArg>,
    #[arg(long, env = "CONFCAL_CALIBRATOR")]
    pub calibrator: Option<CalibratorChoice>,
    #[arg(long, env = "CONFCAL_BINS")]
    pub bins: Option<usize>,
    #[arg(long, env = "CONFCAL_BUDGET", conflicts_with = "budget_sweep")]
    pub budget: Option<usize>,
    #[arg(long, env = "CONFCAL_BUDGET_SWEEP", num_args = 0..=1, default_missing_value = "true")]
    pub budget_sweep: Option<bool>,
    /// How the admitted bins of each gate are ranked.
    #[arg(long, env = "CONFCAL_GATE", value_enum)]
    pub gate: Option<GateArg>,
    /// `sample_id,verdict` annotations.
    #[arg(long, env = "CONFCAL_TRUTH")]
    pub truth: Option<PathBuf>,
    /// Files of the models used for downstream evaluation.
    #[arg(long = "eval-model", env = "CONFCAL_EVAL_MODEL", value_delimiter = ',')]
    pub eval_model: Option<Vec<PathBuf>>,
    #[arg(long, env = "CONFCAL_ALLOW_SELF_EVAL", num_args = 0..=1, default_missing_value = "true")]
    pub allow_self_eval: Option<bool>,
    #[arg(long, env = "CONFCAL_FORMAT", value_enum)]
    pub format: Option<Format>,
    #[arg(long, env = "CONFCAL_OUT")]
    pub out: Option<PathBuf>,
}

impl Layered for CleanArgs {
    const SECTION: &'static str = "clean";

    fn defaults() -> Value {
        json!({
            "method": "all",
            "calibrator": "temp",
            "bins": 15,
            "gate": "accuracy",
            "allow_self_eval": false,
            "format": "csv",
            "out": ".",
        })
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct ApgrArgs {
    /// `K,p,accuracy` curve CSV.
    #[arg(long, env = "CONFCAL_CURVE")]
    pub curve: Option<PathBuf>,
    #[arg(long, env = "CONFCAL_FORMAT", value_enum)]
    pub format: Option<Format>,
}

impl Layered for ApgrArgs {
    const SECTION: &'static str = "apgr";

    fn defaults() -> Value {
        json!({ "format": "json" })
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct SweepArgs {
    #[arg(long, env = "CONFCAL_VAL_BASE")]
    pub val_base: Option<PathBuf>,
    #[arg(long, env = "CONFCAL_VAL_ESC")]
    pub val_esc: Option<PathBuf>,
    #[arg(long, env = "CONFCAL_TEST_BASE")]
    pub test_base: Option<PathBuf>,
    #[arg(long, env = "CONFCAL_TEST_ESC")]
    pub test_esc: Option<PathBuf>,
    /// Bin counts to evaluate.
    #[arg(long, env = "CONFCAL_BINS", value_delimiter = ',')]
    pub bins: Option<Vec<usize>>,
    /// Calibrator families to evaluate.
    #[arg(long = "calibrator", env = "CONFCAL_CALIBRATOR", value_delimiter = ',')]
    pub calibrator: Option<Vec<CalibratorChoice>>,
    #[arg(long, env = "CONFCAL_FORMAT", value_enum)]
    pub format: Option<Format>,
    #[arg(long, env = "CONFCAL_OUT")]
    pub out: Option<PathBuf>,
}

impl Layered for SweepArgs {
    const SECTION: &'static str = "sweep";

    fn defaults() -> Value {
        json!({
            "bins": [5, 15, 50, 100],
            "calibrator": ["temp", "platt", "hist", "none"],
            "format": "csv",
            "out": ".",
        })
    }
}

/// Resolves options and runs the chosen subcommand. Returns the lines to
/// print on stdout.
pub fn run(cli: Cli) -> CliResult<String> {
    let file = cli.config.as_deref().map(config::read_file).transpose()?;
    let file = file.as_ref();
    match cli.command {
        Command::Synth(a) => commands::synth::run(config::resolve(&a, file)?),
        Command::Calibrate(a) => commands::calibrate::run(config::resolve(&a, file)?),
        Command::Evaluate(a) => commands::evaluate::run(config::resolve(&a, file)?),
        Command::Cascade(a) => commands::cascade::run(config::resolve(&a, file)?),
        Command::Clean(a) => commands::clean::run(config::resolve(&a, file)?),
        Command::Apgr(a) => commands::apgr::run(config::resolve(&a, file)?),
        Command::Sweep(a) => commands::sweep::run(config::resolve(&a, file)?),
    }
}
