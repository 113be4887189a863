//! `spcomm`: neighborhood compositions, community detection, simulation and
//! evaluation from the command line.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(
    name = "spcomm",
    version,
    about = "Community detection for spatial single-cell data",
    args_override_self = true
)]
struct Cli {
    /// Worker threads (defaults to all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

const SUBCOMMANDS: &[&str] = &[
    "compose",
    "detect",
    "simulate",
    "evaluate",
    "profile",
    "fractions",
    "logit",
    "diagnose",
];

#[derive(Subcommand, Debug)]
enum Command {
    /// Build disk or kNN composition rows from a cell table.
    Compose(ComposeArgs),
    /// Assign composition rows to communities.
    Detect(DetectArgs),
    /// Generate a synthetic tissue with intended communities.
    Simulate(SimulateArgs),
    /// Adjusted Rand index between an assignment and a reference labeling.
    Evaluate(EvaluateArgs),
    /// Cell-type percentages per community.
    Profile(ProfileArgs),
    /// Per-sample percentage of cells in one community.
    Fractions(FractionsArgs),
    /// Logistic regression of sample stage on community percentage.
    Logit(LogitArgs),
    /// Disk occupancy and k-th neighbor distance histograms.
    Diagnose(DiagnoseArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct CellInput {
    /// Cell table with a header row.
    #[arg(long)]
    pub cells: PathBuf,
    #[arg(long, default_value = ",")]
    pub delimiter: char,
    #[arg(long, default_value = "sample")]
    pub col_sample: String,
    #[arg(long, default_value = "x")]
    pub col_x: String,
    #[arg(long, default_value = "y")]
    pub col_y: String,
    #[arg(long, default_value = "cell_type")]
    pub col_type: String,
    #[arg(long, default_value = "fov")]
    pub col_fov: String,
    #[arg(long, default_value = "cell_id")]
    pub col_id: String,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Neighborhood {
    Disk,
    Knn,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    PerFov,
    Global,
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ComposeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: CellInput,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value = "disk")]
    pub method: Neighborhood,
    /// Disk radius. Without it, `--target-occupancy` picks one.
    #[arg(long)]
    pub r: Option<f64>,
    /// Median disk occupancy to aim for when `--r` is absent.
    #[arg(long)]
    pub target_occupancy: Option<f64>,
    /// Minimum distance from a disk center to its scope's bounding box (default r/2).
    #[arg(long)]
    pub margin: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub min_cells: usize,
    /// `per-fov` keeps disks inside one FOV; it needs a FOV for every cell.
    #[arg(long, value_enum, default_value = "global")]
    pub scope: Scope,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Histogram of neighborhood sizes over the retained rows.
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum DetectMethod {
    DcdTmhc,
    Stm,
    Kmeans,
    Elbow,
    Gap,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Real-data defaults: CLR rows, soft-threshold null, size cap 60,000.
    Default,
    /// Settings used for synthetic tissue.
    Simulation,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Transform {
    Clr,
    Skip,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum NullVariant {
    Soft,
    Hard,
    Sample,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Finals {
    Separate,
    Agglomerate,
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct DetectArgs {
    /// Composition CSV written by `compose`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value = "dcd-tmhc")]
    pub method: DetectMethod,
    #[arg(long, value_enum, default_value = "default")]
    pub preset: Preset,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Row transform; the preset decides when absent.
    #[arg(long, value_enum)]
    pub transform: Option<Transform>,
    /// Number of clusters for k-means.
    #[arg(long)]
    pub k: Option<usize>,
    /// Smallest and largest k scanned by elbow and gap.
    #[arg(long, default_value_t = 1)]
    pub k_min: usize,
    #[arg(long, default_value_t = 20)]
    pub k_max: usize,
    #[arg(long)]
    pub k1: Option<usize>,
    #[arg(long)]
    pub k2: Option<usize>,
    #[arg(long)]
    pub size_cap: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub n_sim: Option<usize>,
    #[arg(long, value_enum)]
    pub variant: Option<NullVariant>,
    #[arg(long)]
    pub max_test_rows: Option<usize>,
    #[arg(long, value_enum)]
    pub final_nodes: Option<Finals>,
    #[arg(long)]
    pub min_child_fraction: Option<f64>,
    /// k-means restarts.
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    /// Uniform reference sets for the gap statistic.
    #[arg(long, default_value_t = 20)]
    pub references: usize,
    /// Selection curve (elbow and gap).
    #[arg(long)]
    pub curve: Option<PathBuf>,
    /// Cell table (canonical columns) supplying FOV ids for the assignment;
    /// the composition layout does not carry them.
    #[arg(long)]
    pub cells: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct SimulateArgs {
    /// Setting number, 1 to 5.
    #[arg(long)]
    pub setting: u8,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Fraction of the setting's cell counts to draw.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long)]
    pub output: PathBuf,
    /// Intended community per cell.
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct EvaluateArgs {
    #[arg(long)]
    pub assignment: PathBuf,
    /// Reference labels (`community` or `intended_community` column).
    #[arg(long)]
    pub truth: PathBuf,
    /// JSON report; printed to stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ProfileArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: CellInput,
    #[arg(long)]
    pub assignment: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct FractionsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: CellInput,
    #[arg(long)]
    pub assignment: PathBuf,
    #[arg(long)]
    pub community: usize,
    /// `sample,y` table with y = 1 for primary tumor samples.
    #[arg(long)]
    pub stages: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct LogitArgs {
    /// Table with `x` and `y` columns.
    #[arg(long)]
    pub input: PathBuf,
    /// Fit as JSON.
    #[arg(long)]
    pub output: PathBuf,
    /// Fitted curve on a grid.
    #[arg(long)]
    pub curve: Option<PathBuf>,
    /// Label written in the curve's `method` column.
    #[arg(long, default_value = "fit")]
    pub label: String,
    #[arg(long, default_value_t = 0.0)]
    pub grid_min: f64,
    #[arg(long, default_value_t = 100.0)]
    pub grid_max: f64,
    #[arg(long, default_value_t = 101)]
    pub grid_points: usize,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct DiagnoseArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: CellInput,
    #[arg(long)]
    pub r: f64,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long)]
    pub margin: Option<f64>,
    /// `per-fov` keeps disks inside one FOV; it needs a FOV for every cell.
    #[arg(long, value_enum, default_value = "global")]
    pub scope: Scope,
    #[arg(long, default_value_t = 5.0)]
    pub count_bin_width: f64,
    #[arg(long, default_value_t = 50)]
    pub distance_bins: usize,
    /// Disk occupancy histogram.
    #[arg(long)]
    pub counts_output: PathBuf,
    /// k-th neighbor distance histogram.
    #[arg(long)]
    pub distances_output: PathBuf,
}

fn fail(kind: &str, message: &str, code: u8) -> ExitCode {
    eprintln!(
        "{}",
        serde_json::json!({ "error": kind, "message": message })
    );
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let argv = match config::splice(std::env::args().collect(), SUBCOMMANDS) {
        Ok(a) => a,
        Err(e) => return fail("Config", &format!("{e:#}"), 2),
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("Usage", e.to_string().trim(), 2),
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            return fail("Config", &e.to_string(), 2);
        }
    }
    let result = match cli.command {
        Command::Compose(a) => commands::compose(&a),
        Command::Detect(a) => commands::detect(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Profile(a) => commands::profile(&a),
        Command::Fractions(a) => commands::fractions(&a),
        Command::Logit(a) => commands::logit(&a),
        Command::Diagnose(a) => commands::diagnose(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = e
                .chain()
                .find_map(|c| c.downcast_ref::<spatial_community::Error>())
                .map_or_else(
                    || {
                        if e.chain().any(|c| c.is::<std::io::Error>()) {
                            "Io"
                        } else {
                            "Error"
                        }
                    },
                    |c| c.kind(),
                );
            fail(kind, &format!("{e:#}"), 1)
        }
    }
}
