//! Command-line front end: batch evaluation, ground-truth synthesis,
//! model-vs-model comparison and an embedded self-check.

pub mod commands;
pub mod engine;
pub mod output;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use objsal_core::ingest::RunConfig;
use objsal_core::Error;

/// Exit status for success.
pub const EXIT_OK: i32 = 0;
/// Exit status for IO, format, configuration and internal errors.
pub const EXIT_ERROR: i32 = 1;
/// Exit status for empty or mismatched input.
pub const EXIT_EMPTY: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "objsal", version, about = "Object-aware saliency evaluation")]
#[command(after_help = CONFIG_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

const CONFIG_HELP: &str = "\
Configuration files are TOML, or JSON when the file name ends in .json.
Unknown keys are rejected. Sections: top-level `things_only` and `jobs`,
[metrics] (kld_epsilon, things_only, per_segment), [gtgen] (fixation_window,
sigma_dva, pixels_per_degree, truncation_radius), [loss.weights]
(lambda_kld, lambda_cc, lambda_sim, lambda_nss, lambda_mse, lambda_osim),
[loss.options] (kld_epsilon, mse_on_raw, things_only), [attributes]
(speed_mean, speed_std, distance_mean, distance_std) and [layout]
(predicted_dir, ground_truth_dir, panoptic_dir, objects_dir, fixations_file,
panoptic_encoding = ids16 | cityscapes-label-ids,
ground_truth = auto | maps | fixations).

Exit codes: 0 success, 1 error, 2 empty or mismatched input.";

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score every frame of a dataset and write JSON and Markdown reports.
    Eval(EvalArgs),
    /// Render ground-truth maps (PFM) from a fixation CSV.
    GtGen(GtGenArgs),
    /// Paired per-frame metric deltas between two datasets (B - A).
    Compare(CompareArgs),
    /// Run the embedded oracle and gradient checks on random instances.
    Selfcheck(SelfcheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Md,
    Both,
}

impl Format {
    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }

    pub fn markdown(self) -> bool {
        matches!(self, Format::Md | Format::Both)
    }
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Run configuration (TOML or JSON).
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Worker threads; defaults to the configured value or every core.
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u32).range(1..))]
    pub jobs: Option<u32>,
    /// Restrict oSIM to segments flagged as things.
    #[arg(long)]
    pub things_only: bool,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    pub format: Format,
    /// Directory that receives the report files.
    #[arg(long, short, value_name = "DIR", default_value = ".")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Dataset root.
    pub root: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
    /// Keep the per-segment oSIM breakdown in the JSON report.
    #[arg(long)]
    pub per_segment: bool,
}

#[derive(Debug, Args)]
pub struct GtGenArgs {
    /// CSV with header `frame_id,x,y`.
    pub fixations: PathBuf,
    /// Directory that receives one `<frame_id>.pfm` per frame.
    #[arg(long, short, value_name = "DIR")]
    pub output: PathBuf,
    #[arg(long)]
    pub width: usize,
    #[arg(long)]
    pub height: usize,
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Number of most recent fixations per frame.
    #[arg(long, value_name = "N")]
    pub fixation_window: Option<usize>,
    /// Overrides `gtgen.pixels_per_degree`.
    #[arg(long, value_name = "PPD")]
    pub pixels_per_degree: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    pub root_a: PathBuf,
    pub root_b: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
    /// Also report the composite training loss of each side.
    #[arg(long)]
    pub loss: bool,
}

#[derive(Debug, Args)]
pub struct SelfcheckArgs {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Corrupts one kernel result so that the check must fail.
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

/// A failure carrying its exit status.
#[derive(Debug)]
pub enum Failure {
    Core(Error),
    /// Empty or mismatched input.
    Input(String),
    /// A self-check property failed.
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Core(Error::EmptyDataset(_)) | Failure::Input(_) => EXIT_EMPTY,
            _ => EXIT_ERROR,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Input(m) | Failure::Check(m) => f.write_str(m),
        }
    }
}

pub fn load_config(path: Option<&PathBuf>) -> Result<RunConfig, Failure> {
    Ok(match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    })
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Eval(a) => commands::eval::run(&a),
        Command::GtGen(a) => commands::gt_gen::run(&a),
        Command::Compare(a) => commands::compare::run(&a),
        Command::Selfcheck(a) => commands::selfcheck::run(&a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}
