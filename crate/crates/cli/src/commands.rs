use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use wmlab_core::harness::{
    self, ingest_semantic_manifest, mask_fraction_study, run_sweep, score_image, watermark_image, Host, RunConfig,
};
use wmlab_core::io;
use wmlab_core::metrics::{caption_agreement, psnr, ssim, triplet_similarity, TripletSet};
use wmlab_core::perturb::{masked_regenerate, Fill};
use wmlab_core::watermark::{empirical_p_value, treering_statistic, DetectionResult, Scheme, WatermarkKey};
use wmlab_core::{ChannelConfig, Error, Family, PerturbationSpec, Result, Rng, Tensor3, ToyChannel};

#[derive(Debug, Parser)]
#[command(name = "wmlab", version, about = "Watermark robustness lab")]
pub struct Cli {
    /// Log progress to standard error
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Seed for every random choice the command makes
    #[arg(long, env = "WMLAB_SEED")]
    pub seed: Option<u64>,
    /// Output file (or directory for `sweep`)
    #[arg(short, long, visible_alias = "out")]
    pub output: Option<PathBuf>,
}

impl Common {
    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
    fn output(&self) -> Result<&Path> {
        self.output
            .as_deref()
            .ok_or_else(|| Error::Param("--output is required for this command".into()))
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a watermark key
    Keygen(KeygenArgs),
    /// Produce a watermarked latent or image
    Embed(EmbedArgs),
    /// Apply one attack to an image
    Perturb(PerturbArgs),
    /// Detect a watermark in an image or latent
    Detect(DetectArgs),
    /// Compare two images, embeddings or triplet sets
    Metric(MetricArgs),
    /// Run a configured evaluation sweep
    Sweep(SweepArgs),
    /// Check a provider bundle's manifest and files
    ValidateManifest(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct KeygenArgs {
    /// tree-ring, gaussian-shading or spread-spectrum
    #[arg(long)]
    pub scheme: Scheme,
    /// Channel config JSON fixing the latent geometry
    #[arg(long)]
    pub channel: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    /// Keyfile from `keygen`
    #[arg(long)]
    pub key: PathBuf,
    /// Host PNG; without it the host is a channel render of a seeded latent
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Channel config JSON; must match the one used at keygen
    #[arg(long)]
    pub channel: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    /// Perturbation family, e.g. impulse or complete_shuffle
    #[arg(long)]
    pub family: Family,
    /// Family-specific strength, checked against the family's domain
    #[arg(long)]
    pub strength: f64,
    /// Input PNG
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Region for masked regeneration (white = replace); default is a seeded rectangle
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Replacement image for masked regeneration; default is the mock fill
    #[arg(long)]
    pub fill: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Keyfile from `keygen`
    #[arg(long)]
    pub key: PathBuf,
    /// PNG image, or WTNS latent / image tensor
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Null latents drawn to calibrate Tree-Ring p-values
    #[arg(long, default_value_t = 199)]
    pub nulls: usize,
    /// Channel config JSON; must match the one used at keygen
    #[arg(long)]
    pub channel: Option<PathBuf>,
    /// Print machine-readable JSON
    #[arg(long)]
    pub json: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MetricKind {
    Psnr,
    Ssim,
    Caption,
    Triplet,
}

#[derive(Debug, Args)]
pub struct MetricArgs {
    /// Which comparison to compute
    #[arg(long, value_enum)]
    pub metric: MetricKind,
    /// First input (PNG, WTNS embedding or triplet JSON)
    #[arg(long)]
    pub a: PathBuf,
    /// Second input of the same kind
    #[arg(long)]
    pub b: PathBuf,
    /// Print machine-readable JSON
    #[arg(long)]
    pub json: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Run config JSON
    #[arg(long)]
    pub config: PathBuf,
    /// Worker threads; results do not depend on it
    #[arg(long)]
    pub threads: Option<usize>,
    /// Also write the mask-fraction curve for these fractions
    #[arg(long, value_delimiter = ',')]
    pub mask_fractions: Vec<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Bundle directory containing manifest.json
    #[arg(long)]
    pub dir: PathBuf,
    /// Print machine-readable JSON
    #[arg(long)]
    pub json: bool,
    #[command(flatten)]
    pub common: Common,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Keygen(a) => keygen(a),
        Command::Embed(a) => embed(a),
        Command::Perturb(a) => perturb(a),
        Command::Detect(a) => detect(a),
        Command::Metric(a) => metric(a),
        Command::Sweep(a) => sweep(a),
        Command::ValidateManifest(a) => validate(a),
    }
}

fn load_channel(path: &Option<PathBuf>) -> Result<ToyChannel> {
    let cfg: ChannelConfig = match path {
        Some(p) => io::json_read(p)?,
        None => ChannelConfig::default(),
    };
    ToyChannel::new(cfg)
}

fn is_wtns(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("wtns"))
}

fn write_image(t: &Tensor3, path: &Path) -> Result<()> {
    if is_wtns(path) {
        io::tensor_write(t, path)
    } else {
        io::image_write(t, path)
    }
}

fn read_image(path: &Path) -> Result<Tensor3> {
    if is_wtns(path) {
        io::tensor_read(path)
    } else {
        io::image_read(path)
    }
}

/// Writes `text` to `--output` when given, else to standard output.
fn emit(text: &str, output: &Option<PathBuf>) -> Result<()> {
    match output {
        Some(p) => io::write_atomic(p, text.as_bytes()),
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{}", text.trim_end()).map_err(|e| Error::Validation(format!("stdout: {e}")))
        }
    }
}

fn keygen(a: KeygenArgs) -> Result<()> {
    let channel = load_channel(&a.channel)?;
    let key = WatermarkKey::generate_for_latent(a.scheme, a.common.seed(), channel.latent_shape())?;
    key.save(a.common.output()?)
}

/// Latent output (`.wtns`) for latent schemes; an image otherwise.
fn embed(a: EmbedArgs) -> Result<()> {
    let channel = load_channel(&a.channel)?;
    let key = WatermarkKey::load(&a.key)?;
    key.validate_for_latent(channel.latent_shape())?;
    let out = a.common.output()?;
    let mut rng = Rng::new(a.common.seed(), 0);
    let host = match &a.input {
        Some(p) => Host::Image(io::image_read(p)?),
        None => Host::Latent(channel.sample_latent(&mut rng)),
    };
    if is_wtns(out) && key.scheme().is_latent() {
        let z = match (&key, &host) {
            (WatermarkKey::TreeRing(k), Host::Latent(z)) => wmlab_core::watermark::treering_embed(k, z)?,
            (WatermarkKey::TreeRing(k), Host::Image(x)) => {
                wmlab_core::watermark::treering_embed(k, &harness::pipeline::standardize_latent(&channel.invert_pixels(x)?))?
            }
            (WatermarkKey::GaussianShading(k), _) => {
                wmlab_core::watermark::gaussianshading_sample(k, channel.latent_shape(), &mut rng)?
            }
            _ => unreachable!("latent schemes only"),
        };
        return io::tensor_write(&z, out);
    }
    let img = watermark_image(&channel, &key, &host, &mut rng)?;
    write_image(&img, out)
}

fn perturb(a: PerturbArgs) -> Result<()> {
    let img = read_image(&a.input)?;
    let spec = PerturbationSpec::new(a.family, a.strength, a.common.seed())?;
    let out = a.common.output()?;
    let fill = match &a.fill {
        Some(p) => Fill::External(p.clone()),
        None => Fill::Mock,
    };
    if (a.mask.is_some() || a.fill.is_some()) && a.family != Family::MaskedRegen {
        return Err(Error::Param("--mask and --fill apply to masked_regen only".into()));
    }
    let result = match (&a.mask, a.family) {
        (Some(m), Family::MaskedRegen) => masked_regenerate(&img, &io::mask_read(m)?, &fill, spec.seed)?,
        _ => spec.apply_with_fill(&img, &fill)?,
    };
    write_image(&result, out)
}

#[derive(Serialize)]
struct DetectReport {
    scheme: Scheme,
    statistic: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    p_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bit_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    decoded_hex: Option<String>,
}

fn detect(a: DetectArgs) -> Result<()> {
    let channel = load_channel(&a.channel)?;
    let key = WatermarkKey::load(&a.key)?;
    let input = read_image(&a.input)?;
    let latent_input = input.shape() == channel.latent_shape();
    let mut result: DetectionResult = match (&key, latent_input) {
        (WatermarkKey::TreeRing(k), true) => DetectionResult {
            scheme: Scheme::TreeRing,
            statistic: treering_statistic(k, &input)?,
            p_value: None,
            decoded_bits: None,
        },
        (WatermarkKey::GaussianShading(k), true) => wmlab_core::watermark::gaussianshading_decode(k, &input)?,
        _ => score_image(&channel, &key, &input)?,
    };
    if let WatermarkKey::TreeRing(k) = &key {
        if a.nulls == 0 {
            return Err(Error::Calibration("--nulls must be positive".into()));
        }
        // the channel inverts its own outputs exactly, so prior draws stand in for inverted nulls
        let mut rng = Rng::new(a.common.seed(), 0x4E55);
        let nulls: Vec<f64> = (0..a.nulls)
            .map(|_| treering_statistic(k, &channel.sample_latent(&mut rng)))
            .collect::<Result<_>>()?;
        result.p_value = Some(empirical_p_value(result.statistic, &nulls)?);
    }
    let report = DetectReport {
        scheme: result.scheme,
        statistic: result.statistic,
        p_value: result.p_value,
        bit_accuracy: result.scheme.higher_is_detected().then_some(result.statistic),
        decoded_hex: result
            .decoded_bits
            .as_ref()
            .filter(|b| b.len() % 4 == 0)
            .map(|b| wmlab_core::watermark::bits_to_hex(b)),
    };
    let text = if a.json {
        serde_json::to_string_pretty(&report)?
    } else {
        let mut s = format!("scheme: {}\nstatistic: {}\n", report.scheme, report.statistic);
        if let Some(p) = report.p_value {
            s += &format!("p_value: {p}\n");
        }
        if let Some(acc) = report.bit_accuracy {
            s += &format!("bit_accuracy: {acc}\n");
        }
        s
    };
    emit(&text, &a.common.output)
}

#[derive(Serialize)]
struct MetricReport {
    metric: &'static str,
    value: f64,
}

fn metric(a: MetricArgs) -> Result<()> {
    let (name, value) = match a.metric {
        MetricKind::Psnr => ("psnr", psnr(&read_image(&a.a)?, &read_image(&a.b)?)?),
        MetricKind::Ssim => ("ssim", ssim(&read_image(&a.a)?, &read_image(&a.b)?)?),
        MetricKind::Caption => ("caption", caption_agreement(&io::vector_read(&a.a)?, &io::vector_read(&a.b)?)?),
        MetricKind::Triplet => {
            let t1: TripletSet = io::json_read(&a.a)?;
            let t2: TripletSet = io::json_read(&a.b)?;
            ("triplet", triplet_similarity(&t1, &t2))
        }
    };
    let text = if a.json {
        serde_json::to_string_pretty(&MetricReport { metric: name, value })?
    } else {
        format!("{name}: {value}\n")
    };
    emit(&text, &a.common.output)
}

fn sweep(a: SweepArgs) -> Result<()> {
    let mut cfg = RunConfig::load(&a.config)?;
    if let Some(seed) = a.common.seed {
        cfg.data_seed = seed;
    }
    if let Some(out) = &a.common.output {
        cfg.output_dir = out.clone();
    }
    if a.threads.is_some() {
        cfg.threads = a.threads;
    }
    let dir = run_sweep(&cfg)?;
    if !a.mask_fractions.is_empty() {
        mask_fraction_study(&cfg, &a.mask_fractions)?;
    }
    log::info!("results in {}", dir.display());
    Ok(())
}

#[derive(Serialize)]
struct ValidationSummary<'a> {
    records: usize,
    skipped: &'a [String],
    errors: usize,
    warnings: usize,
    issues: &'a [harness::Issue],
}

fn validate(a: ValidateArgs) -> Result<()> {
    let report = ingest_semantic_manifest(&a.dir)?;
    let summary = ValidationSummary {
        records: report.records.len(),
        skipped: &report.skipped,
        errors: report.error_count(),
        warnings: report.warning_count(),
        issues: &report.issues,
    };
    let text = if a.json {
        serde_json::to_string_pretty(&summary)?
    } else {
        let mut s: String = report.issues.iter().map(|i| format!("{i}\n")).collect();
        s += &format!(
            "{} records valid, {} skipped, {} errors, {} warnings\n",
            summary.records,
            report.skipped.len(),
            summary.errors,
            summary.warnings
        );
        s
    };
    emit(&text, &a.common.output)?;
    if summary.errors > 0 {
        return Err(Error::Validation(format!("{} manifest errors", summary.errors)));
    }
    Ok(())
}
