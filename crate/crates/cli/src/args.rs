use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "veil", version, about = "Find privacy risks in images and obfuscate them")]
pub struct Cli {
    /// Raise log verbosity (-v info, -vv debug, -vvv trace). Logs go to stderr.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Identify privacy risks and write the annotated report.
    Analyze(AnalyzeArgs),
    /// Obfuscate one region of an image.
    Apply(ApplyArgs),
    /// Score risk identification against a labelled dataset.
    Eval(EvalArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    /// Canned replies loaded from --fixtures.
    Mock,
    /// HTTP endpoints from --config and --endpoint.
    Live,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalBackend {
    /// Stored replies next to each image (<image>.prediction.json).
    Mock,
    /// Replays the gold labels; every metric should be 1.0.
    Oracle,
    /// The full detection and identification pipeline over HTTP.
    Live,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct BackendArgs {
    /// Shared TOML config with [backends.*] and [service] tables.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Override or add one endpoint, e.g. chat=https://host/v1/chat. Repeatable.
    #[arg(long = "endpoint", value_name = "ROLE=URL")]
    pub endpoints: Vec<String>,

    /// Mock fixture directory (content-addressed replies per image hash).
    #[arg(long, value_name = "DIR")]
    pub fixtures: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    /// Image to analyze (PNG or JPEG).
    #[arg(long, value_name = "PATH")]
    pub image: PathBuf,

    /// What you want to share the image for.
    #[arg(long, value_name = "TEXT")]
    pub intent: Option<String>,

    /// Privacy concerns you already have about the image.
    #[arg(long, value_name = "TEXT")]
    pub concern: Option<String>,

    /// Regions you are worried about: a 1-bit PNG mask, or a copy of the image with green strokes.
    #[arg(long, value_name = "PATH")]
    pub concern_mask: Option<PathBuf>,

    /// Where to write the annotated report JSON.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,

    /// Which backends answer model calls.
    #[arg(long, value_enum, default_value_t = BackendKind::Live)]
    pub backend: BackendKind,

    #[command(flatten)]
    pub backends: BackendArgs,
}

#[derive(Debug, Clone, Args)]
#[command(group(clap::ArgGroup::new("selection").required(true).args(["mask", "contour"])))]
pub struct ApplyArgs {
    /// Image to edit (PNG or JPEG).
    #[arg(long, value_name = "PATH")]
    pub image: PathBuf,

    /// Region to obfuscate as a 1-bit PNG mask the size of the image.
    #[arg(long, value_name = "PATH")]
    pub mask: Option<PathBuf>,

    /// Region to obfuscate as contour JSON: {"points": [[x, y], ...], "holes": [...]}.
    #[arg(long, value_name = "PATH")]
    pub contour: Option<PathBuf>,

    /// Technique name or slug: blur, pixelate, mask, silhouette, bar, dots, removal, avatar, generative.
    #[arg(long, value_name = "NAME")]
    pub technique: String,

    /// Blurring: Gaussian standard deviation in pixels.
    #[arg(long)]
    pub sigma: Option<f64>,

    /// Pixelating: cell size in pixels.
    #[arg(long)]
    pub block: Option<u32>,

    /// Masking, silhouette and bar: fill colour as #rrggbb[aa] or r,g,b[,a].
    #[arg(long, value_name = "COLOR")]
    pub color: Option<String>,

    /// Bar: bar height as a fraction of the region height.
    #[arg(long, value_name = "FRACTION")]
    pub height_fraction: Option<f64>,

    /// Dot representation: dot radius in pixels.
    #[arg(long, value_name = "PX")]
    pub dot_radius: Option<u32>,

    /// Dot representation: also draw limb lines between keypoints.
    #[arg(long, value_name = "BOOL")]
    pub draw_skeleton_lines: Option<bool>,

    /// Avatar replacement: style prompt for the generated face.
    #[arg(long, value_name = "TEXT")]
    pub style_prompt: Option<String>,

    /// Generative replacement: what to paint into the region.
    #[arg(long, value_name = "TEXT")]
    pub prompt: Option<String>,

    /// Avatar or generative replacement: reference image guiding the generator.
    #[arg(long, value_name = "PATH")]
    pub reference: Option<PathBuf>,

    /// Where to write the edited image; .jpg/.jpeg selects JPEG, anything else PNG.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,

    /// Backends for techniques that need them. Without it only classical techniques work.
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,

    #[command(flatten)]
    pub backends: BackendArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// JSONL dataset, one case per line; image paths resolve against the file's directory.
    #[arg(long, value_name = "PATH")]
    pub dataset: PathBuf,

    /// Where predictions come from.
    #[arg(long, value_enum, default_value_t = EvalBackend::Live)]
    pub backend: EvalBackend,

    /// Likert cut points "low,medium": 1..=low is Low, ..=medium is Medium, the rest High.
    #[arg(long, value_name = "LOW,MEDIUM", default_value = "2,5")]
    pub severity_map: String,

    /// Minimum token Jaccard similarity for a predicted element to match a gold object.
    #[arg(long, value_name = "T", default_value_t = veil_core::eval::DEFAULT_MATCH_THRESHOLD)]
    pub match_threshold: f64,

    /// Cases evaluated in parallel.
    #[arg(long, value_name = "N", default_value_t = 1)]
    pub jobs: usize,

    /// Where to write the metrics JSON.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Summary printed to stdout.
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    pub format: OutputFormat,

    #[command(flatten)]
    pub backends: BackendArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    /// Port to listen on; overrides [service] port in the config.
    #[arg(long)]
    pub port: Option<u16>,

    /// Address to bind.
    #[arg(long, value_name = "ADDR", default_value = "127.0.0.1")]
    pub host: String,

    /// Which backends serve model calls.
    #[arg(long, value_enum, default_value_t = BackendKind::Live)]
    pub backend: BackendKind,

    #[command(flatten)]
    pub backends: BackendArgs,
}
