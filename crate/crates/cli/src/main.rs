mod commands;
mod config;
mod error;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::ConfigFile;
use crate::error::CliError;

/// Co-occurrence filtered pseudo-labeling for object detection datasets.
#[derive(Parser, Debug)]
#[command(name = "cooclabel", version, about)]
struct Cli {
    /// Worker threads; defaults to all cores. Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Key-value config file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Print the effective configuration before running.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a co-occurrence matrix from an annotated dataset.
    BuildCooccur(BuildCooccurArgs),
    /// Filter detections into pseudo-labels.
    Pseudolabel(PseudolabelArgs),
    /// Merge pseudo-labels into an annotated dataset.
    Merge(MergeArgs),
    /// Score pseudo-labels or detections against ground truth.
    Evaluate(EvaluateArgs),
    /// Simulate detector output over an annotated dataset.
    Simulate(SimulateArgs),
    /// Compare filtering regimes in one table.
    Report(ReportArgs),
    /// Write a synthetic scene-structured dataset.
    Generate(GenerateArgs),
}

#[derive(Args, Debug)]
pub struct BuildCooccurArgs {
    /// Annotated dataset (COCO JSON).
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    /// Matrix output file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the normalized table as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Strongest pairs to print.
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Additive smoothing of the conditional estimates.
    #[arg(long)]
    pub smoothing: Option<f64>,
    /// `row` normalizes per target class, `column` per context class.
    #[arg(long)]
    pub orientation: Option<commands::OrientationArg>,
}

#[derive(Args, Debug)]
pub struct PseudolabelArgs {
    /// Detection file (JSON array).
    #[arg(long)]
    pub detections: Option<PathBuf>,
    /// Annotated dataset supplying the category set.
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    /// Unlabeled images the detections refer to (image list or dataset).
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// Co-occurrence matrix; enables co-occurrence rescoring.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Pseudo-label output file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Filter report output file.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// One-hot acceptance threshold.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Rescored acceptance threshold; needs --matrix.
    #[arg(long)]
    pub rho_co: Option<f64>,
    /// Confidence a co-detection needs to count as context; defaults to rho.
    #[arg(long)]
    pub context_threshold: Option<f64>,
    /// IoU above which same-class labels are suppressed.
    #[arg(long)]
    pub nms_iou: Option<f64>,
    /// Keep overlapping same-class labels.
    #[arg(long)]
    pub no_nms: bool,
    /// Ignore the matrix and use one-hot thresholding.
    #[arg(long)]
    pub no_cooccur: bool,
    /// Provenance tag; defaults to the detection file stem.
    #[arg(long)]
    pub source_tag: Option<String>,
}

#[derive(Args, Debug)]
pub struct MergeArgs {
    /// Human-annotated base dataset.
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    /// Unlabeled images (image list or dataset).
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// Pseudo-label file.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Merged dataset output file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Merge report output file.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// `preserve` keeps unlabeled image ids, `offset` renumbers them.
    #[arg(long)]
    pub id_policy: Option<commands::IdPolicyArg>,
    /// Leave out unlabeled images that received no labels.
    #[arg(long)]
    pub drop_empty: bool,
    /// Write plain COCO without provenance fields.
    #[arg(long)]
    pub strict_coco: bool,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Ground-truth dataset.
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,
    /// Pseudo-label file to score.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Detection file to score (argmax class, top probability).
    #[arg(long)]
    pub detections: Option<PathBuf>,
    /// Report output file (JSON).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-class, per-threshold AP as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// `coco101` or `pascal11`.
    #[arg(long)]
    pub interpolation: Option<commands::InterpolationArg>,
    /// Comma-separated IoU thresholds; defaults to 0.50:0.05:0.95.
    #[arg(long)]
    pub iou_thresholds: Option<String>,
    /// Per-image cap on scored predictions.
    #[arg(long)]
    pub max_detections: Option<usize>,
    /// IoU for pseudo-label precision and recall.
    #[arg(long)]
    pub match_iou: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Annotated dataset whose boxes the detector sees.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Detection output file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Truth sidecar output file.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Probability that a true object is detected.
    #[arg(long)]
    pub p_detect: Option<f64>,
    /// Relative box noise.
    #[arg(long)]
    pub box_jitter: Option<f64>,
    /// Logit margin of the generating class.
    #[arg(long)]
    pub logit_scale: Option<f64>,
    /// Probability of keeping the true class; the rest spreads uniformly.
    #[arg(long)]
    pub p_correct: Option<f64>,
    /// Expected false positives per image.
    #[arg(long)]
    pub fp_rate: Option<f64>,
    /// Draw false-positive classes uniformly (`true`) or from the scene (`false`).
    #[arg(long)]
    pub contextual_fp: Option<bool>,
    #[arg(long)]
    pub source_tag: Option<String>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Annotated prior for the co-occurrence matrix.
    #[arg(long)]
    pub prior: Option<PathBuf>,
    /// Ground truth of the images the detections cover.
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,
    /// Detection file.
    #[arg(long)]
    pub detections: Option<PathBuf>,
    /// Comma-separated one-hot thresholds.
    #[arg(long)]
    pub rho_values: Option<String>,
    /// Comma-separated rescored thresholds.
    #[arg(long)]
    pub rho_co_values: Option<String>,
    /// Also write the table rows as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// Dataset output file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the bare image list.
    #[arg(long)]
    pub image_list: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub images: Option<usize>,
    #[arg(long)]
    pub scenes: Option<usize>,
    #[arg(long)]
    pub classes_per_scene: Option<usize>,
    #[arg(long)]
    pub min_objects: Option<usize>,
    #[arg(long)]
    pub max_objects: Option<usize>,
    #[arg(long)]
    pub width: Option<u32>,
    #[arg(long)]
    pub height: Option<u32>,
    #[arg(long)]
    pub first_image_id: Option<u64>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    let file = match &cli.config {
        Some(path) => {
            commands::require_inputs(&[path])?;
            ConfigFile::load(path)?
        }
        None => ConfigFile::default(),
    };
    let ctx = commands::Context {
        file: &file,
        print_config: cli.print_config,
    };
    match cli.command {
        Command::BuildCooccur(a) => commands::build_cooccur(&ctx, a),
        Command::Pseudolabel(a) => commands::pseudolabel(&ctx, a),
        Command::Merge(a) => commands::merge(&ctx, a),
        Command::Evaluate(a) => commands::evaluate(&ctx, a),
        Command::Simulate(a) => commands::simulate(&ctx, a),
        Command::Report(a) => commands::report(&ctx, a),
        Command::Generate(a) => commands::generate(&ctx, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
