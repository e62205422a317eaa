use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use segaudit_core::components::{CocoParams, CocoPooling, Connectivity};
use segaudit_core::confident::DEFAULT_DOWNSAMPLE_FACTOR;
use segaudit_core::inject::{CorruptionPlan, ErrorType, DEFAULT_SHIFT_RADIUS_RANGE};
use segaudit_core::io::{self, DatasetManifest, ReportFormat};
use segaudit_core::metrics;
use segaudit_core::pipeline::{self, with_threads};
use segaudit_core::scores::{SoftminParams, TccpMode, TccpParams, DEFAULT_SOFTMIN_TAU};
use segaudit_core::synthetic::{self, SyntheticConfig};
use segaudit_core::{Error, Result, ScorerRegistry, ScoringOptions};

#[derive(Parser)]
#[command(name = "segaudit", version, about = "Find mislabeled images in segmentation datasets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score every image of a manifest with one or more label quality methods.
    Score(ScoreArgs),
    /// Inject synthetic annotation errors into a dataset.
    Inject(InjectArgs),
    /// Evaluate a score report against an injected-error log.
    Evaluate(EvaluateArgs),
    /// Write masks highlighting suspicious pixels for review.
    Overlay(OverlayArgs),
    /// Generate a synthetic dataset with simulated model outputs.
    Synth(SynthArgs),
}

#[derive(Args)]
struct PoolArgs {
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Comma-separated methods (ccp, tccp, cil, softmin, clc, iou, coco) or `all`.
    #[arg(long, value_delimiter = ',', default_value = "all")]
    methods: Vec<String>,
    /// Softmin temperature.
    #[arg(long, default_value_t = DEFAULT_SOFTMIN_TAU)]
    softmin_tau: f64,
    /// Comma-separated TCCP thresholds; defaults to 0.05, 0.10, ..., 0.95.
    #[arg(long, value_delimiter = ',')]
    tccp_thresholds: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = TccpModeArg::Agreement)]
    tccp_mode: TccpModeArg,
    /// Pooling window for CLC and COCO.
    #[arg(long, default_value_t = DEFAULT_DOWNSAMPLE_FACTOR, value_parser = positive)]
    downsample_factor: usize,
    #[arg(long, value_enum, default_value_t = ConnectivityArg::Four)]
    connectivity: ConnectivityArg,
    #[arg(long, value_enum, default_value_t = PoolingArg::Flat)]
    coco_pooling: PoolingArg,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    #[arg(long)]
    output: PathBuf,
    /// Also write review overlays, marking pixels scoring below this value.
    #[arg(long, requires = "overlay_dir", value_parser = unit_interval)]
    overlay_threshold: Option<f64>,
    #[arg(long, requires = "overlay_threshold")]
    overlay_dir: Option<PathBuf>,
    #[command(flatten)]
    pool: PoolArgs,
}

#[derive(Args)]
struct InjectArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long = "type", value_enum)]
    error_type: ErrorTypeArg,
    /// Fraction of images to corrupt, in (0, 1].
    #[arg(long, value_parser = proportion)]
    proportion: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_SHIFT_RADIUS_RANGE.0)]
    shift_radius_min: usize,
    #[arg(long, default_value_t = DEFAULT_SHIFT_RADIUS_RANGE.1)]
    shift_radius_max: usize,
    /// Directory receiving manifest.json, errors.jsonl and masks/.
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    pool: PoolArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Score report (CSV or JSON).
    #[arg(long)]
    report: PathBuf,
    /// Error log written by `inject`.
    #[arg(long)]
    errors: PathBuf,
    /// Output JSON path; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct OverlayArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Images to render; all images when omitted.
    #[arg(long = "image-id")]
    image_ids: Vec<String>,
    #[arg(long, value_parser = unit_interval)]
    threshold: f64,
    #[arg(long, default_value_t = DEFAULT_DOWNSAMPLE_FACTOR, value_parser = positive)]
    downsample_factor: usize,
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    pool: PoolArgs,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 100)]
    images: usize,
    #[arg(long, default_value_t = 64)]
    height: usize,
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 5)]
    classes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum TccpModeArg {
    Agreement,
    Literal,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConnectivityArg {
    #[value(name = "4")]
    Four,
    #[value(name = "8")]
    Eight,
}

#[derive(Clone, Copy, ValueEnum)]
enum PoolingArg {
    Flat,
    ClassMean,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum ErrorTypeArg {
    Drop,
    Swap,
    Shift,
}

fn proportion(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is not in (0, 1]"))
    }
}

fn positive(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(format!("{e}")),
    }
}

fn unit_interval(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is not in [0, 1]"))
    }
}

fn score(args: ScoreArgs) -> Result<()> {
    let mode = match args.tccp_mode {
        TccpModeArg::Agreement => TccpMode::MembershipAgreement,
        TccpModeArg::Literal => TccpMode::Literal,
    };
    let tccp = match args.tccp_thresholds {
        Some(t) => TccpParams::new(t, mode)?,
        None => TccpParams::new(TccpParams::default().thresholds().to_vec(), mode)?,
    };
    let options = ScoringOptions {
        softmin: SoftminParams::new(args.softmin_tau)?,
        tccp,
        coco: CocoParams {
            connectivity: match args.connectivity {
                ConnectivityArg::Four => Connectivity::Four,
                ConnectivityArg::Eight => Connectivity::Eight,
            },
            pooling: match args.coco_pooling {
                PoolingArg::Flat => CocoPooling::Flat,
                PoolingArg::ClassMean => CocoPooling::ClassMean,
            },
        },
        downsample_factor: args.downsample_factor,
    };
    let registry = ScorerRegistry::with_builtins(&options);
    let scorers = registry.select(&args.methods)?;
    let manifest = DatasetManifest::load(&args.manifest)?;
    let format = match args.format {
        FormatArg::Csv => ReportFormat::Csv,
        FormatArg::Json => ReportFormat::Json,
    };
    with_threads(args.pool.threads, || -> Result<()> {
        let records = pipeline::score_dataset(&manifest, &scorers, options.downsample_factor)?;
        io::write_report(&records, &args.output, format)?;
        if let (Some(threshold), Some(dir)) = (args.overlay_threshold, &args.overlay_dir) {
            let ids: Vec<String> = manifest.entries.iter().map(|e| e.image_id.clone()).collect();
            pipeline::emit_overlays(&manifest, &ids, threshold, options.downsample_factor, dir)?;
        }
        Ok(())
    })?
}

fn inject(args: InjectArgs) -> Result<()> {
    let plan = CorruptionPlan {
        error_type: match args.error_type {
            ErrorTypeArg::Drop => ErrorType::Drop,
            ErrorTypeArg::Swap => ErrorType::Swap,
            ErrorTypeArg::Shift => ErrorType::Shift,
        },
        proportion: args.proportion,
        seed: args.seed,
        shift_radius_range: (args.shift_radius_min, args.shift_radius_max),
    };
    let manifest = DatasetManifest::load(&args.manifest)?;
    plan.validate(manifest.len())?;
    let (_, logs) = with_threads(args.pool.threads, || {
        pipeline::corrupt_dataset(&manifest, &plan, &args.out_dir)
    })??;
    let corrupted = logs.iter().filter(|l| l.is_error()).count();
    eprintln!("corrupted {corrupted} of {} images", logs.len());
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let records = io::read_report(&args.report)?;
    let (_, logs) = io::read_error_log(&args.errors)?;
    let report = metrics::evaluate(&records, &logs)?;
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    match args.output {
        Some(path) => std::fs::write(&path, text).map_err(|e| Error::Io { path, source: e }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn overlay(args: OverlayArgs) -> Result<()> {
    let manifest = DatasetManifest::load(&args.manifest)?;
    let ids = if args.image_ids.is_empty() {
        manifest.entries.iter().map(|e| e.image_id.clone()).collect()
    } else {
        args.image_ids
    };
    let infos = with_threads(args.pool.threads, || {
        pipeline::emit_overlays(&manifest, &ids, args.threshold, args.downsample_factor, &args.out_dir)
    })??;
    for info in infos {
        println!("{}\t{}", info.image_id, info.marked_pixels);
    }
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let config = SyntheticConfig {
        height: args.height,
        width: args.width,
        classes: args.classes,
        seed: args.seed,
        ..SyntheticConfig::default()
    };
    if !(2..=256).contains(&config.classes) {
        return Err(Error::Validation(format!("classes must be in 2..=256, got {}", config.classes)));
    }
    let images = synthetic::generate(args.images, &config)?;
    synthetic::write_dataset(&args.out_dir, &images, config.classes)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Score(args) => score(args),
        Command::Inject(args) => inject(args),
        Command::Evaluate(args) => evaluate(args),
        Command::Overlay(args) => overlay(args),
        Command::Synth(args) => synth(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
