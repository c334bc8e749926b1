//! Command-line front end, benchmark pipeline and image emitters.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 malformed config or usage,
//! 3 missing input file.

mod commands;
pub mod pipeline;
pub mod render;
pub mod repro;
pub mod settings;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "travbench",
    version,
    about = "Traversability learning and navigation workbench"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a terrain world from a spec file.
    World(WorldArgs),
    /// Drive a vehicle along a path; optionally scan along the way.
    Simulate(SimulateArgs),
    /// Build a PU dataset from traces and scans, or from an annotated cloud.
    Dataset(DatasetArgs),
    /// Train one method on a dataset's train split.
    Train(TrainArgs),
    /// Score checkpoints on a dataset's eval split.
    Eval(EvalArgs),
    /// Build a 2.5D map from a dataset scored by a checkpoint.
    Map(MapArgs),
    /// Run the SMPPI controller on a scenario or a map.
    Navigate(NavigateArgs),
    /// Render a map (and trajectories) to PPM, optionally SVG.
    Render(RenderArgs),
    /// Full benchmark, report, checkpoints and scenario renders.
    Repro(ReproArgs),
}

#[derive(Debug, Args)]
pub struct WorldArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// World spec (`key = value`); flat 128×128 when omitted.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub world: PathBuf,
    #[arg(long, default_value = "suv")]
    pub vehicle: String,
    /// Polyline file, one `x y` per line.
    #[arg(long)]
    pub path: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub dt: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write LiDAR scans taken along the trace.
    #[arg(long)]
    pub scans: Option<PathBuf>,
    #[arg(long, default_value_t = 6.0)]
    pub scan_spacing: f64,
    #[arg(long, default_value_t = 360)]
    pub azimuth_steps: usize,
    #[arg(long, default_value_t = 25.0)]
    pub max_range: f64,
    #[arg(long, default_value_t = 1.8)]
    pub sensor_height: f64,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    /// Annotated cloud (`x y z class`); replaces the trace/scan inputs.
    #[arg(long, conflicts_with_all = ["world", "trace", "scans"])]
    pub semantic: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "grass,mud")]
    pub positive_classes: Vec<String>,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "tree,vehicle,object,person,fence,barrier,bush"
    )]
    pub negative_classes: Vec<String>,
    #[arg(long)]
    pub world: Option<PathBuf>,
    #[arg(long)]
    pub trace: Vec<PathBuf>,
    #[arg(long)]
    pub scans: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    pub k: usize,
    #[arg(long, default_value_t = crate::datagen::DEFAULT_CONTACT_RADIUS)]
    pub radius: f64,
    /// `wheel_force` or `z_accel`.
    #[arg(long, default_value = "wheel_force")]
    pub value_mode: String,
    #[arg(long, default_value_t = 200)]
    pub unlabeled_per_scan: usize,
    /// Eval-only obstacle negatives to add (needs `--world`).
    #[arg(long, default_value_t = 0)]
    pub negatives: usize,
    #[arg(long, default_value_t = 0.3)]
    pub negative_min_height: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// svdd, soft_svdd, nnpu or ours.
    #[arg(long)]
    pub method: String,
    /// Training settings (`key = value`); benchmark defaults otherwise.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch loss CSV.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, required = true)]
    pub checkpoint: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Subsample the larger labeled class to a balanced eval set.
    #[arg(long)]
    pub balanced: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MapArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = crate::gridmap::DEFAULT_MAP_RESOLUTION)]
    pub resolution: f64,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct NavigateArgs {
    /// Scenario file (`key = value`); `scenario = obstacle_band` etc.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Plan on this map instead of the scenario's ground-truth map.
    #[arg(long)]
    pub map: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Trajectory CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub map: PathBuf,
    /// class, value or trajectory.
    #[arg(long, default_value = "class")]
    pub style: String,
    /// Trajectory CSVs to overlay (trajectory style).
    #[arg(long)]
    pub trajectory: Vec<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub scale: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReproArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "repro_out")]
    pub out: PathBuf,
    /// Small benchmark and short training.
    #[arg(long)]
    pub quick: bool,
}

/// Exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::UnknownKey(_) | Error::InvalidConfig(_) => 2,
        Error::Parse { what: "config", .. } => 2,
        Error::MissingFile(_) => 3,
        _ => 1,
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// exit status. Diagnostics go to stderr, summaries to stdout.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub(crate) fn open(path: &Path) -> Result<BufReader<File>> {
    match File::open(path) {
        Ok(f) => Ok(BufReader::new(f)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            Err(Error::MissingFile(path.to_path_buf()))
        }
        Err(e) => Err(e.into()),
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    match std::fs::read_to_string(path) {
        Ok(s) => Ok(s),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            Err(Error::MissingFile(path.to_path_buf()))
        }
        Err(e) => Err(e.into()),
    }
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    let mut f = create(path)?;
    f.write_all(bytes)?;
    f.flush()?;
    Ok(())
}
