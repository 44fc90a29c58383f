use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "tunalab",
    version,
    about = "Latent-space editing lab over a synthetic face world",
    long_about = None,
    arg_required_else_help = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a generator bundle on a freshly sampled face world.
    TrainGenerator(TrainArgs),
    /// Fit a latent attribute model (linear or nonlinear, Z or W) to a bundle.
    Fit(FitArgs),
    /// Edit one face by attribute deltas.
    Edit(EditArgs),
    /// Recover a W latent for an image.
    Invert(InvertArgs),
    /// Render an interpolation between two seeds.
    Interpolate(InterpolateArgs),
    /// Separability, inception score and FID for a fitted model.
    Metrics(MetricsArgs),
    /// Run a traversal-collapse experiment.
    Diagnose(DiagnoseArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct ModelArg {
    /// Generator bundle (TUNAG1). Relative paths also resolve against TUNALAB_MODEL_DIR.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 60)]
    pub epochs: usize,
    /// Weight of the W-probe loss.
    #[arg(long, default_value_t = 0.1)]
    pub beta: f32,
    /// World samples drawn for training and validation.
    #[arg(long, default_value_t = 20000)]
    pub samples: usize,
    #[arg(long, default_value = "generator.tuna")]
    pub out: PathBuf,
    /// Also write the training summary as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub model: ModelArg,
    #[arg(long)]
    pub space: String,
    #[arg(long)]
    pub kind: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Labeled latent draws used for fitting.
    #[arg(long, default_value_t = 10000)]
    pub samples: usize,
    #[arg(long, default_value = "fm.tuna")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EditArgs {
    #[command(flatten)]
    pub model: ModelArg,
    /// Feature model files (TUNAM1); repeat for several.
    #[arg(long)]
    pub fm: Vec<PathBuf>,
    #[arg(long, default_value = "w")]
    pub space: String,
    #[arg(long, default_value = "nonlinear")]
    pub method: String,
    /// Attribute change as name=value, e.g. glasses=+1 or smile=-0.5; repeatable.
    #[arg(long = "delta", required = true)]
    pub deltas: Vec<String>,
    /// Source sample seed; also seeds inversion when --image is given.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Edit this image (PNG or PGM) instead of a seeded sample.
    #[arg(long, conflicts_with = "latent")]
    pub image: Option<PathBuf>,
    /// Edit this latent, a JSON file {"space": "z"|"w", "values": [...]}.
    #[arg(long)]
    pub latent: Option<PathBuf>,
    /// Linear step scale.
    #[arg(long, default_value_t = 3.0)]
    pub alpha: f32,
    /// Linear traversal steps.
    #[arg(long, default_value_t = 16)]
    pub steps: usize,
    #[arg(long, default_value = "edit.png")]
    pub out: PathBuf,
    /// Trajectory CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InvertArgs {
    #[command(flatten)]
    pub model: ModelArg,
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 600)]
    pub iters: usize,
    #[arg(long, default_value_t = 4)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0.1)]
    pub learning_rate: f32,
    /// features, pixels or weighted.
    #[arg(long, default_value = "pixels")]
    pub objective: String,
    /// Pixel weight for the weighted objective.
    #[arg(long, default_value_t = 0.1)]
    pub gamma: f32,
    /// Reconstruction PNG.
    #[arg(long, default_value = "reconstruction.png")]
    pub out: PathBuf,
    /// Recovered latent and labels as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InterpolateArgs {
    #[command(flatten)]
    pub model: ModelArg,
    /// Feature model for feature mode.
    #[arg(long)]
    pub fm: Vec<PathBuf>,
    #[arg(long)]
    pub from_seed: u64,
    #[arg(long)]
    pub to_seed: u64,
    #[arg(long, default_value = "w")]
    pub space: String,
    /// latent or feature.
    #[arg(long, default_value = "latent")]
    pub mode: String,
    #[arg(long, default_value_t = 9)]
    pub frames: usize,
    /// Directory for frame_NNN.png.
    #[arg(long, default_value = "frames")]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[command(flatten)]
    pub model: ModelArg,
    #[arg(long)]
    pub fm: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2000)]
    pub holdout: usize,
    #[arg(long, default_value_t = 500)]
    pub images: usize,
    #[arg(long, default_value = "report.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub model: ModelArg,
    /// Linear feature model supplying the traversal direction; its space is the experiment's.
    #[arg(long)]
    pub fm: Option<PathBuf>,
    /// zero | perturbed=EPS | uniform=C | gaussian=SIGMA | sample
    #[arg(long, default_value = "zero")]
    pub start: String,
    #[arg(long, default_value_t = 64)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.01)]
    pub step_size: f32,
    #[arg(long, default_value = "face_width")]
    pub attribute: String,
    #[arg(long, default_value_t = 0.1)]
    pub band: f32,
    #[arg(long, default_value_t = 0.5)]
    pub cutoff: f32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "report.json")]
    pub out: PathBuf,
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Mean activation spectrum CSV (bin, mean magnitude).
    #[arg(long)]
    pub spectrum: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub model: ModelArg,
    #[arg(long)]
    pub fm: Vec<PathBuf>,
    /// JSON service config; flags given alongside override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub bind: Option<String>,
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub max_body_bytes: Option<usize>,
    /// Seed for requests that carry none.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory of static UI files served at /.
    #[arg(long = "static")]
    pub static_dir: Option<PathBuf>,
}
