//! `vru` — dataset conversion, statistics, augmentation, evaluation, and
//! late-fusion toolkit for RGB+thermal road-user detection pipelines.
//!
//! Every subcommand writes machine-readable JSON to its output path and a
//! human-readable table to standard output. Exit codes: 0 success, 1 I/O,
//! 2 validation/parse, 3 configuration.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use vru_core::augment::{Level, PipelineSpec};
use vru_core::eval::{evaluate, EvalConfig, EvalError};
use vru_core::fusion::{fuse_stream, FusionAudit, FusionConfig, FusionError};
use vru_core::geometry::{Detection, Modality};
use vru_core::manifest::{emit_experiment_manifest, ExperimentConfig};
use vru_core::mapping::{default_label_map, ClassFilter, FilterName};
use vru_core::stats::{
    compute_class_weights, count_instances, dataset_summary, ClassHistogram, Split, StatsError,
    SummaryTable, WeightScheme,
};
use vru_tools::augment_run::augment_split;
use vru_tools::convert::{convert, ConvertOptions};
use vru_tools::detio::{load_detection_dir, write_fused_dir};
use vru_tools::error::{read_text, write_text, Result, ToolError};
use vru_tools::fixtures::make_fixtures;
use vru_tools::yolo_tree::{load_split_annotations, read_classes, scan_split};

#[derive(Parser)]
#[command(name = "vru", version, about, disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a source dataset (KITTI / BDD100K / COCO) to a YOLO tree.
    Convert(ConvertArgs),
    /// Class histogram and image/label counts for one split of a tree.
    Stats(StatsArgs),
    /// Per-class loss weights from a stats histogram.
    Weights(WeightsArgs),
    /// Write augmented copies of a split's images.
    Augment(AugmentArgs),
    /// Score detections against a converted tree's ground truth.
    Eval(EvalArgs),
    /// Late-fuse RGB and thermal detection directories.
    Fuse(FuseArgs),
    /// Emit a training-run manifest.
    Manifest(ManifestArgs),
    /// Generate the synthetic 30-frame fixture datasets.
    #[command(hide = true)]
    MakeFixtures(MakeFixturesArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Kitti,
    Bdd100k,
    Coco,
}

impl FormatArg {
    fn to_dataset(self) -> vru_core::ingest::SourceDataset {
        match self {
            FormatArg::Kitti => vru_core::ingest::SourceDataset::Kitti,
            FormatArg::Bdd100k => vru_core::ingest::SourceDataset::Bdd100k,
            FormatArg::Coco => vru_core::ingest::SourceDataset::Flir,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModalityArg {
    Rgb,
    Thermal,
}

impl ModalityArg {
    fn to_modality(self) -> Modality {
        match self {
            ModalityArg::Rgb => Modality::Rgb,
            ModalityArg::Thermal => Modality::Thermal,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FilterArg {
    Full,
    SevenClass,
    FourClass,
}

impl FilterArg {
    fn to_filter(self) -> ClassFilter {
        match self {
            FilterArg::Full => ClassFilter::full(),
            FilterArg::SevenClass => ClassFilter::seven_class(),
            FilterArg::FourClass => ClassFilter::four_class(),
        }
    }

    fn to_name(self) -> FilterName {
        match self {
            FilterArg::Full => FilterName::Full,
            FilterArg::SevenClass => FilterName::SevenClass,
            FilterArg::FourClass => FilterName::FourClass,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    None,
    Light,
    Heavy,
}

impl LevelArg {
    fn to_level(self) -> Level {
        match self {
            LevelArg::None => Level::None,
            LevelArg::Light => Level::Light,
            LevelArg::Heavy => Level::Heavy,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    InverseFreq,
    InverseSqrt,
    Uniform,
}

impl SchemeArg {
    fn to_scheme(self) -> WeightScheme {
        match self {
            SchemeArg::InverseFreq => WeightScheme::InverseFreq,
            SchemeArg::InverseSqrt => WeightScheme::InverseSqrt,
            SchemeArg::Uniform => WeightScheme::Uniform,
        }
    }
}

#[derive(clap::Args)]
struct ConvertArgs {
    /// Source dataset root directory.
    #[arg(long)]
    input: PathBuf,
    /// Destination root for the YOLO tree.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum)]
    format: FormatArg,
    #[arg(long, value_enum)]
    modality: ModalityArg,
    #[arg(long, default_value = "train")]
    split: String,
    /// Annotation JSON file (BDD100K/COCO); defaults to the single .json
    /// under the input root.
    #[arg(long)]
    annotations: Option<PathBuf>,
    /// JSON label-map override: {dataset: {source_class: target}}.
    #[arg(long)]
    label_map: Option<PathBuf>,
    /// Drop classes absent from the label map instead of failing.
    #[arg(long)]
    wildcard_drop: bool,
    #[arg(long, value_enum, default_value = "full")]
    filter: FilterArg,
    /// Report JSON path; defaults to <output>/conversion_report.json.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(clap::Args)]
struct StatsArgs {
    /// Converted YOLO-tree root.
    #[arg(long)]
    root: PathBuf,
    #[arg(long, default_value = "train")]
    split: String,
    #[arg(long, value_enum, default_value = "rgb")]
    modality: ModalityArg,
    /// Output JSON path for {histogram, summary}.
    #[arg(long)]
    output: PathBuf,
}

#[derive(clap::Args)]
struct WeightsArgs {
    /// Stats JSON produced by `vru stats`.
    #[arg(long)]
    stats: PathBuf,
    #[arg(long, value_enum, default_value = "inverse-freq")]
    scheme: SchemeArg,
    #[arg(long, default_value_t = 10.0)]
    cap: f64,
    #[arg(long, default_value_t = 1)]
    epsilon: u64,
    /// Output JSON path for {class_name: weight}.
    #[arg(long)]
    output: PathBuf,
}

#[derive(clap::Args)]
struct AugmentArgs {
    /// Converted YOLO-tree root.
    #[arg(long)]
    root: PathBuf,
    #[arg(long, default_value = "train")]
    split: String,
    #[arg(long, value_enum, default_value = "light", conflicts_with = "spec")]
    level: LevelArg,
    /// Custom pipeline spec JSON (overrides --level).
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Augmented copies per original frame.
    #[arg(long, default_value_t = 1)]
    copies: u32,
    /// Master seed; all per-frame randomness derives from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Log JSON path; defaults to <root>/augment_log_<split>.json.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(clap::Args)]
struct EvalArgs {
    /// Directory of per-frame detection files.
    #[arg(long)]
    dets: PathBuf,
    /// Converted YOLO-tree root holding the ground truth.
    #[arg(long)]
    gt_root: PathBuf,
    #[arg(long, default_value = "train")]
    split: String,
    #[arg(long, value_enum, default_value = "rgb")]
    modality: ModalityArg,
    /// Output JSON path for the evaluation report.
    #[arg(long)]
    output: PathBuf,
}

#[derive(clap::Args)]
struct FuseArgs {
    /// Directory of RGB detection files.
    #[arg(long)]
    rgb: PathBuf,
    /// Directory of thermal detection files.
    #[arg(long)]
    tir: PathBuf,
    /// Fusion config JSON; defaults to equal weights.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for fused detection files.
    #[arg(long)]
    output: PathBuf,
    /// Audit JSON path; defaults to <output>/fusion_audit.json.
    #[arg(long)]
    audit: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ManifestArgs {
    #[arg(long, default_value_t = 640)]
    resolution: u32,
    #[arg(long, default_value_t = 6)]
    freeze_layers: u32,
    #[arg(long, default_value_t = 4)]
    batch: u32,
    #[arg(long, default_value_t = 100)]
    epochs: u32,
    #[arg(long, default_value_t = 50)]
    patience: u32,
    #[arg(long, value_enum, default_value = "seven-class")]
    filter: FilterArg,
    #[arg(long)]
    weights_file: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "none")]
    augmentation: LevelArg,
    /// Output JSON path; printed to stdout as well.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(clap::Args)]
struct MakeFixturesArgs {
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

fn split_tag(split: &str) -> Result<Split> {
    match split {
        "train" => Ok(Split::Train),
        "val" => Ok(Split::Val),
        other => Err(ToolError::validation(format!(
            "unknown split '{other}' (expected 'train' or 'val')"
        ))),
    }
}

fn run_convert(args: ConvertArgs) -> Result<()> {
    let mut label_map = default_label_map();
    if let Some(path) = &args.label_map {
        let text = read_text(path)?;
        label_map
            .apply_override_json(&text)
            .map_err(|e| ToolError::config(format!("{}: {e}", path.display())))?;
    }
    label_map.wildcard_drop = args.wildcard_drop;
    let opts = ConvertOptions {
        format: args.format.to_dataset(),
        modality: args.modality.to_modality(),
        split: args.split.clone(),
        annotations: args.annotations.clone(),
        label_map,
        filter: args.filter.to_filter(),
    };
    let report = convert(&args.input, &args.output, &opts)?;
    let report_path = args
        .report
        .unwrap_or_else(|| args.output.join("conversion_report.json"));
    write_text(&report_path, &(report.to_json() + "\n"))?;
    print!("{}", report.to_aligned_text());
    Ok(())
}

fn stats_payload(args: &StatsArgs) -> Result<(ClassHistogram, SummaryTable)> {
    let class_names = read_classes(&args.root)?;
    let modality = args.modality.to_modality();
    let gts = load_split_annotations(&args.root, &args.split, modality)?;
    let annos: Vec<_> = gts.values().flatten().cloned().collect();
    let histogram = count_instances(&annos, &class_names, split_tag(&args.split)?, modality);
    let index = scan_split(&args.root, &args.split, modality)?;
    let summary = dataset_summary(&[index]);
    Ok((histogram, summary))
}

fn run_stats(args: StatsArgs) -> Result<()> {
    let (histogram, summary) = stats_payload(&args)?;
    let doc = serde_json::json!({
        "histogram": histogram,
        "summary": summary,
    });
    write_text(
        &args.output,
        &(serde_json::to_string_pretty(&doc).expect("stats serialize") + "\n"),
    )?;
    print!("{}", summary.to_aligned_text());
    println!("{:<16} {:>10}", "Class", "Instances");
    for (name, n) in &histogram.counts {
        println!("{name:<16} {n:>10}");
    }
    Ok(())
}

fn run_weights(args: WeightsArgs) -> Result<()> {
    let text = read_text(&args.stats)?;
    let doc: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| ToolError::validation(format!("{}: {e}", args.stats.display())))?;
    let histogram: ClassHistogram = serde_json::from_value(
        doc.get("histogram")
            .cloned()
            .ok_or_else(|| ToolError::validation("stats JSON lacks a 'histogram' field"))?,
    )
    .map_err(|e| ToolError::validation(format!("{}: {e}", args.stats.display())))?;
    let weights =
        compute_class_weights(&histogram, args.scheme.to_scheme(), args.cap, args.epsilon)
            .map_err(|e| match e {
                StatsError::AllZero => ToolError::validation(e.to_string()),
                StatsError::BadCap(_) | StatsError::BadEpsilon(_) => {
                    ToolError::config(e.to_string())
                }
            })?;
    write_text(&args.output, &(weights.to_json() + "\n"))?;
    println!("{:<16} {:>10}", "Class", "Weight");
    for (name, w) in weights.class_names.iter().zip(&weights.weights) {
        println!("{name:<16} {w:>10.4}");
    }
    Ok(())
}

fn run_augment(args: AugmentArgs) -> Result<()> {
    let spec = match &args.spec {
        Some(path) => {
            let text = read_text(path)?;
            PipelineSpec::from_json(&text)
                .map_err(|e| ToolError::config(format!("{}: {e}", path.display())))?
        }
        None => PipelineSpec::for_level(args.level.to_level(), args.seed),
    };
    let log = augment_split(&args.root, &args.split, &spec, args.copies)?;
    let log_path = args
        .log
        .unwrap_or_else(|| args.root.join(format!("augment_log_{}.json", args.split)));
    write_text(&log_path, &(log.to_json() + "\n"))?;
    println!(
        "augmented {} frame(s) x {} copies at level {:?} (master seed {})",
        log.frames.len() / args.copies.max(1) as usize,
        args.copies,
        log.level,
        log.master_seed
    );
    Ok(())
}

fn run_eval(args: EvalArgs) -> Result<()> {
    let modality = args.modality.to_modality();
    let class_names = read_classes(&args.gt_root)?;
    let gts = load_split_annotations(&args.gt_root, &args.split, modality)?;
    let dets = load_detection_dir(&args.dets, modality)?;
    let config = EvalConfig::new(class_names);
    let report = evaluate(&dets, &gts, &config).map_err(|e| match e {
        EvalError::NoThresholds => ToolError::config(e.to_string()),
        _ => ToolError::validation(e.to_string()),
    })?;
    write_text(&args.output, &(report.to_json() + "\n"))?;
    print!("{}", report.to_aligned_text());
    Ok(())
}

fn run_fuse(args: FuseArgs) -> Result<()> {
    let cfg = match &args.config {
        Some(path) => {
            let text = read_text(path)?;
            serde_json::from_str::<FusionConfig>(&text)
                .map_err(|e| ToolError::config(format!("{}: {e}", path.display())))?
        }
        None => FusionConfig::default(),
    };
    let to_frames = |m: BTreeMap<String, Vec<Detection>>| -> Vec<(String, Vec<Detection>)> {
        m.into_iter().collect()
    };
    let rgb = to_frames(load_detection_dir(&args.rgb, Modality::Rgb)?);
    let tir = to_frames(load_detection_dir(&args.tir, Modality::Thermal)?);
    let fused = fuse_stream(&rgb, &tir, &cfg).map_err(|e| match e {
        FusionError::DuplicateFrame(_) => ToolError::validation(e.to_string()),
        _ => ToolError::config(e.to_string()),
    })?;
    write_fused_dir(&args.output, &fused)?;

    let mut totals = FusionAudit::default();
    let frames: Vec<serde_json::Value> = fused
        .iter()
        .map(|(frame_id, result)| {
            totals.matched_pairs += result.audit.matched_pairs;
            totals.unmatched_rgb += result.audit.unmatched_rgb;
            totals.unmatched_tir += result.audit.unmatched_tir;
            totals.floor_dropped += result.audit.floor_dropped;
            totals.nms_suppressed += result.audit.nms_suppressed;
            serde_json::json!({
                "frame_id": frame_id,
                "detections": result.detections.len(),
                "audit": result.audit,
            })
        })
        .collect();
    let audit_doc = serde_json::json!({
        "config": cfg,
        "frames": frames,
        "totals": totals,
    });
    let audit_path = args
        .audit
        .unwrap_or_else(|| args.output.join("fusion_audit.json"));
    write_text(
        &audit_path,
        &(serde_json::to_string_pretty(&audit_doc).expect("audit serializes") + "\n"),
    )?;
    println!(
        "fused {} frame(s): {} matched pair(s), {} rgb-only, {} tir-only, {} floor-dropped, {} nms-suppressed",
        fused.len(),
        totals.matched_pairs,
        totals.unmatched_rgb,
        totals.unmatched_tir,
        totals.floor_dropped,
        totals.nms_suppressed
    );
    Ok(())
}

fn run_manifest(args: ManifestArgs) -> Result<()> {
    let config = ExperimentConfig {
        resolution: args.resolution,
        freeze_layers: args.freeze_layers,
        batch: args.batch,
        epochs: args.epochs,
        patience: args.patience,
        class_filter: args.filter.to_name(),
        weights_file: args.weights_file.as_ref().map(|p| p.display().to_string()),
        augmentation_level: args.augmentation.to_level(),
    };
    let manifest =
        emit_experiment_manifest(&config).map_err(|e| ToolError::config(e.to_string()))?;
    if let Some(path) = &args.output {
        write_text(path, &(manifest.clone() + "\n"))?;
    }
    println!("{manifest}");
    Ok(())
}

fn run_make_fixtures(args: MakeFixturesArgs) -> Result<()> {
    let summary = make_fixtures(&args.output, args.seed)?;
    write_text(
        &args.output.join("fixture_summary.json"),
        &(summary.to_json() + "\n"),
    )?;
    println!("{}", summary.to_json());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Convert(args) => run_convert(args),
        Command::Stats(args) => run_stats(args),
        Command::Weights(args) => run_weights(args),
        Command::Augment(args) => run_augment(args),
        Command::Eval(args) => run_eval(args),
        Command::Fuse(args) => run_fuse(args),
        Command::Manifest(args) => run_manifest(args),
        Command::MakeFixtures(args) => run_make_fixtures(args),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        let mut source = std::error::Error::source(&err);
        while let Some(cause) = source {
            eprintln!("  caused by: {cause}");
            source = cause.source();
        }
        std::process::exit(err.exit_code());
    }
}
