//! Command-line definitions.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::output::Format;

pub type Triple = (usize, usize, usize);

/// Parse `a,b,c` into three positive integers.
pub fn parse_triple(s: &str) -> Result<Triple, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated integers, got {s:?}"));
    }
    let mut v = [0usize; 3];
    for (slot, part) in v.iter_mut().zip(&parts) {
        *slot = part.parse().map_err(|_| format!("{part:?} is not a nonnegative integer"))?;
    }
    Ok((v[0], v[1], v[2]))
}

/// Parse `WxH`.
pub fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WIDTHxHEIGHT, got {s:?}"))?;
    let w: usize = w.trim().parse().map_err(|_| format!("bad width {w:?}"))?;
    let h: usize = h.trim().parse().map_err(|_| format!("bad height {h:?}"))?;
    if w == 0 || h == 0 {
        return Err("image size must be positive".into());
    }
    Ok((w, h))
}

#[derive(Debug, Parser)]
#[command(name = "dadl", version, about = "Domain adaptive dictionary learning for faces across pose and illumination")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn a base dictionary and domain codes from a complete training corpus.
    ///
    /// Output columns: iteration, relative_error.
    Train(TrainArgs),
    /// Decompose images into pose, subject and illumination codes.
    ///
    /// Output columns: image, field, index, value. Fields are pose, subject and
    /// illum (one row per code entry), then residual, relative_residual,
    /// iterations and converged (index 0).
    Decompose(DecomposeArgs),
    /// Render a subject under a chosen pose and illumination as a PGM.
    Compose(ComposeArgs),
    /// Identify the subject of each image.
    ///
    /// Output columns: image, subject, score.
    Classify(ClassifyArgs),
    /// Estimate the nearest training pose and illumination of each image.
    ///
    /// Output columns: image, pose, pose_score, illum, illum_score.
    Estimate(EstimateArgs),
    /// Generate a synthetic corpus of PGM images with a manifest.
    ///
    /// Output columns: field, value (scale and offset of the intensity map).
    Synth(SynthArgs),
    /// Fit the tensorfaces (HOSVD) baseline and optionally run recognition.
    ///
    /// Output columns: field, value.
    Baseline(BaselineArgs),
    /// Run a gallery/probe recognition protocol.
    ///
    /// Output columns: field, value.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Tab-separated manifest with header `path subject pose illum`.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory image paths are relative to; defaults to the manifest's directory.
    #[arg(long)]
    pub root: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PresetArg {
    D4,
    D10,
    D34,
    D32,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Code dimensions for pose, subject, illumination.
    #[arg(long, value_parser = parse_triple)]
    pub dims: Option<Triple>,
    /// Sparsity caps for pose, subject, illumination.
    #[arg(long, value_parser = parse_triple)]
    pub sparsity: Option<Triple>,
    /// Named dims and caps; explicit --dims/--sparsity override it.
    #[arg(long, value_enum)]
    pub preset: Option<PresetArg>,
    /// Outer learning iterations.
    #[arg(long, default_value_t = 5)]
    pub iters: usize,
    /// K-SVD iterations per learning step.
    #[arg(long)]
    pub ksvd_iters: Option<usize>,
    /// Extra random starts for each K-SVD run.
    #[arg(long)]
    pub ksvd_restarts: Option<usize>,
    /// Extra random starts when decomposing an image with this model.
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Images to process: explicit PGM files or every row of a manifest.
#[derive(Debug, Args)]
pub struct ImageArgs {
    /// PGM image; may be repeated.
    #[arg(long = "image")]
    pub images: Vec<PathBuf>,
    /// Manifest of images (missing cells allowed).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub root: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CodingArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Maximum alternating sweeps per start; defaults to the model's setting.
    #[arg(long)]
    pub iters: Option<usize>,
    /// Seed for the random starts; defaults to the model's seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub coding: CodingArgs,
    #[command(flatten)]
    pub images: ImageArgs,
    /// Write the output here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ComposeArgs {
    #[command(flatten)]
    pub coding: CodingArgs,
    /// Take the subject code from a decomposition of this image.
    #[arg(long, conflicts_with = "subject", required_unless_present = "subject")]
    pub image: Option<PathBuf>,
    /// Training subject label.
    #[arg(long)]
    pub subject: Option<String>,
    /// Training pose label.
    #[arg(long, conflicts_with = "pose_image", required_unless_present = "pose_image")]
    pub pose: Option<String>,
    /// Take the pose code from a decomposition of this image.
    #[arg(long)]
    pub pose_image: Option<PathBuf>,
    /// Training illumination label.
    #[arg(long, conflicts_with = "illum_image", required_unless_present = "illum_image")]
    pub illum: Option<String>,
    /// Take the illumination code from a decomposition of this image.
    #[arg(long)]
    pub illum_image: Option<PathBuf>,
    /// Output PGM.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Cosine,
    Euclidean,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub coding: CodingArgs,
    #[command(flatten)]
    pub images: ImageArgs,
    /// Gallery manifest; without it the model's training subject codes are enrolled.
    #[arg(long)]
    pub gallery: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = MetricArg::Cosine)]
    pub metric: MetricArg,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub coding: CodingArgs,
    #[command(flatten)]
    pub images: ImageArgs,
    #[arg(long, value_enum, default_value_t = MetricArg::Cosine)]
    pub metric: MetricArg,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory for `manifest.tsv` and `images/`.
    #[arg(long)]
    pub out: PathBuf,
    /// Subjects, poses, illuminations.
    #[arg(long, value_parser = parse_triple, default_value = "4,3,3")]
    pub counts: Triple,
    #[arg(long, value_parser = parse_triple, default_value = "3,4,2")]
    pub dims: Triple,
    #[arg(long, value_parser = parse_triple, default_value = "2,2,1")]
    pub sparsity: Triple,
    /// Image size; the pixel count is WIDTH*HEIGHT.
    #[arg(long, value_parser = parse_size, default_value = "8x8")]
    pub size: (usize, usize),
    /// Standard deviation of additive Gaussian noise before quantization.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    /// Complete training corpus.
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Pixel-mode rank; full rank by default.
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub gallery: Option<PathBuf>,
    #[arg(long)]
    pub probe: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = MetricArg::Cosine)]
    pub metric: MetricArg,
    /// Write per-probe predictions (image, truth, predicted) here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MatcherArg {
    Dadl,
    Tensorfaces,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_enum, default_value_t = MatcherArg::Dadl)]
    pub matcher: MatcherArg,
    /// Model file, for the dadl matcher.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Training corpus, for the tensorfaces matcher.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Root for every manifest; defaults to each manifest's directory.
    #[arg(long)]
    pub root: Option<PathBuf>,
    /// Gallery manifest; without it training codes are enrolled.
    #[arg(long)]
    pub gallery: Option<PathBuf>,
    /// Probe manifest.
    #[arg(long)]
    pub probe: PathBuf,
    #[arg(long, value_enum, default_value_t = MetricArg::Cosine)]
    pub metric: MetricArg,
    /// Maximum alternating sweeps per start for the dadl matcher.
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write per-probe predictions (image, truth, predicted) here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}
