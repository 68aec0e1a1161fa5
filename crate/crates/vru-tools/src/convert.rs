//! Source-dataset to YOLO-tree conversion.
//!
//! Output layout:
//!   dst/classes.txt             one dense class name per line
//!   dst/images/<split>/         source images, copied unmodified
//!   dst/labels/<split>/         "class cx cy w h" label files; a file is
//!                               written only when the frame has at least
//!                               one retained object
//!   dst/ignores/<split>/        "cx cy w h" sidecar files for ignore
//!                               regions, kept out of the label files so
//!                               trainers never see them as objects
//!
//! Conversion is two-phase: everything is parsed, mapped, and normalized in
//! memory first, so parse and mapping errors leave the destination
//! untouched. A mid-write I/O failure leaves a CONVERSION_FAILED marker.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vru_core::geometry::{to_normalized, Modality, NormalizedBox};
use vru_core::ingest::{
    parse_bdd100k_json, parse_coco_json, parse_kitti_label_file, write_yolo_label_file,
    SourceAnnotation, SourceDataset,
};
use vru_core::mapping::{apply_class_filter, apply_label_map, ClassFilter, LabelMap};
use walkdir::WalkDir;

use crate::error::{read_text, write_text, Result, ToolError};
use crate::imageio::image_dims;
use crate::scan::scan_dataset;

pub struct ConvertOptions {
    pub format: SourceDataset,
    pub modality: Modality,
    pub split: String,
    /// Explicit annotation JSON for BDD100K/COCO sources; when absent, a
    /// single .json file under the source root is expected.
    pub annotations: Option<PathBuf>,
    pub label_map: LabelMap,
    pub filter: ClassFilter,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConversionReport {
    pub format: String,
    pub modality: Modality,
    pub split: String,
    pub images: u64,
    pub label_files: u64,
    pub ignore_files: u64,
    pub input_annotations: u64,
    /// Retained instances per dense class name.
    pub instances: BTreeMap<String, u64>,
    pub ignore_regions: u64,
    /// Dropped instances per (case-folded) source class name.
    pub dropped: BTreeMap<String, u64>,
    /// Source records without a 2D box (BDD100K lane/area labels).
    pub skipped_boxless: u64,
    pub errors: u64,
}

struct SourceFrame {
    frame_id: String,
    image_path: PathBuf,
    annotations: Vec<SourceAnnotation>,
    /// Image dimensions when the annotation file carries them.
    dims: Option<(f64, f64)>,
}

/// A frame fully prepared for writing.
struct PreparedFrame {
    frame_id: String,
    image_path: PathBuf,
    image_ext: String,
    labels: Vec<(usize, NormalizedBox)>,
    ignores: Vec<NormalizedBox>,
}

fn find_annotation_file(src_root: &Path, explicit: &Option<PathBuf>) -> Result<PathBuf> {
    if let Some(path) = explicit {
        return Ok(path.clone());
    }
    let mut found: Vec<PathBuf> = Vec::new();
    for entry in WalkDir::new(src_root).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let p = e.path().unwrap_or(src_root).to_path_buf();
            ToolError::io(p, e.into())
        })?;
        if entry.file_type().is_file() && entry.path().extension().is_some_and(|e| e == "json") {
            found.push(entry.path().to_path_buf());
        }
    }
    match found.len() {
        0 => Err(ToolError::validation(format!(
            "no annotation .json found under {}",
            src_root.display()
        ))),
        1 => Ok(found.remove(0)),
        _ => Err(ToolError::validation(format!(
            "multiple .json files under {}; pass the annotation file explicitly",
            src_root.display()
        ))),
    }
}

/// Maps each frame name from a multi-frame annotation file to an on-disk
/// image path, matching by file stem.
fn image_paths_by_stem(src_root: &Path, modality: Modality) -> Result<BTreeMap<String, PathBuf>> {
    let index = scan_dataset(src_root, "scan", modality)?;
    Ok(index
        .frames
        .into_iter()
        .map(|f| (f.frame_id, PathBuf::from(f.image_path)))
        .collect())
}

fn gather_frames(src_root: &Path, opts: &ConvertOptions) -> Result<(Vec<SourceFrame>, u64)> {
    let mut skipped_boxless = 0u64;
    let frames = match opts.format {
        SourceDataset::Kitti => {
            let index = scan_dataset(src_root, &opts.split, opts.modality)?;
            let mut out = Vec::with_capacity(index.frames.len());
            for frame in index.frames {
                let annotations = match &frame.label_path {
                    Some(path) => {
                        let text = read_text(Path::new(path))?;
                        parse_kitti_label_file(&text, &frame.frame_id, opts.modality)
                            .map_err(|e| ToolError::validation(format!("{path}: {e}")))?
                    }
                    None => Vec::new(),
                };
                out.push(SourceFrame {
                    frame_id: frame.frame_id,
                    image_path: PathBuf::from(frame.image_path),
                    annotations,
                    dims: None,
                });
            }
            out
        }
        SourceDataset::Bdd100k => {
            let anno_path = find_annotation_file(src_root, &opts.annotations)?;
            let text = read_text(&anno_path)?;
            let parsed = parse_bdd100k_json(&text, opts.modality)
                .map_err(|e| ToolError::validation(format!("{}: {e}", anno_path.display())))?;
            skipped_boxless = parsed.skipped_boxless;
            frames_from_named(parsed.frames, &BTreeMap::new(), src_root, opts)?
        }
        SourceDataset::Flir => {
            let anno_path = find_annotation_file(src_root, &opts.annotations)?;
            let text = read_text(&anno_path)?;
            let parsed = parse_coco_json(&text, opts.modality)
                .map_err(|e| ToolError::validation(format!("{}: {e}", anno_path.display())))?;
            frames_from_named(parsed.frames, &parsed.dimensions, src_root, opts)?
        }
    };
    Ok((frames, skipped_boxless))
}

fn frames_from_named(
    named: Vec<(String, Vec<SourceAnnotation>)>,
    dimensions: &BTreeMap<String, (f64, f64)>,
    src_root: &Path,
    opts: &ConvertOptions,
) -> Result<Vec<SourceFrame>> {
    let by_stem = image_paths_by_stem(src_root, opts.modality)?;
    let mut out = Vec::with_capacity(named.len());
    for (name, annotations) in named {
        let stem = Path::new(&name)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| name.clone());
        let image_path = by_stem.get(&stem).cloned().ok_or_else(|| {
            ToolError::validation(format!(
                "annotated frame '{name}' has no image under {}",
                src_root.display()
            ))
        })?;
        out.push(SourceFrame {
            frame_id: stem,
            image_path,
            annotations,
            dims: dimensions.get(&name).copied(),
        });
    }
    out.sort_by(|a, b| a.frame_id.cmp(&b.frame_id));
    Ok(out)
}

/// Converts a source dataset into a YOLO-format tree at `dst_root` and
/// returns the conversion report. The report is not written to disk here.
pub fn convert(
    src_root: &Path,
    dst_root: &Path,
    opts: &ConvertOptions,
) -> Result<ConversionReport> {
    let class_names = opts.filter.class_names();
    let (frames, skipped_boxless) = gather_frames(src_root, opts)?;

    // Phase 1: pure — parse, map, filter, and normalize everything.
    let mut report = ConversionReport {
        format: opts.format.to_string(),
        modality: opts.modality,
        split: opts.split.clone(),
        images: frames.len() as u64,
        label_files: 0,
        ignore_files: 0,
        input_annotations: 0,
        instances: class_names.iter().map(|n| (n.clone(), 0)).collect(),
        ignore_regions: 0,
        dropped: BTreeMap::new(),
        skipped_boxless,
        errors: 0,
    };
    let mut prepared = Vec::with_capacity(frames.len());
    for frame in &frames {
        report.input_annotations += frame.annotations.len() as u64;
        let (mapped, skips) = apply_label_map(&frame.annotations, &opts.label_map)
            .map_err(|e| ToolError::validation(e.to_string()))?;
        for (class, n) in &skips.dropped {
            *report.dropped.entry(class.clone()).or_insert(0) += n;
        }
        let filtered = apply_class_filter(&mapped, &opts.filter)
            .map_err(|e| ToolError::validation(e.to_string()))?;
        for (class, n) in count_filter_drops(&mapped, &filtered, &opts.filter) {
            *report.dropped.entry(class).or_insert(0) += n;
        }

        let (w, h) = match frame.dims {
            Some(dims) => dims,
            None => {
                let (w, h) = image_dims(&frame.image_path)?;
                (w as f64, h as f64)
            }
        };
        let mut labels = Vec::new();
        let mut ignores = Vec::new();
        for a in &filtered {
            let nbox = to_normalized(&a.bbox, w, h)
                .map_err(|e| ToolError::validation(format!("frame '{}': {e}", frame.frame_id)))?;
            match a.class {
                Some(dense) => {
                    labels.push((dense, nbox));
                    *report
                        .instances
                        .entry(class_names[dense].clone())
                        .or_insert(0) += 1;
                }
                None => {
                    ignores.push(nbox);
                    report.ignore_regions += 1;
                }
            }
        }
        if !labels.is_empty() {
            report.label_files += 1;
        }
        if !ignores.is_empty() {
            report.ignore_files += 1;
        }
        let image_ext = frame
            .image_path
            .extension()
            .map(|e| e.to_string_lossy().into_owned())
            .unwrap_or_else(|| "png".to_string());
        prepared.push(PreparedFrame {
            frame_id: frame.frame_id.clone(),
            image_path: frame.image_path.clone(),
            image_ext,
            labels,
            ignores,
        });
    }

    // Phase 2: writes only.
    write_tree(dst_root, opts, &class_names, &prepared).inspect_err(|_| {
        let _ = std::fs::write(
            dst_root.join("CONVERSION_FAILED"),
            "conversion aborted mid-write; tree is incomplete\n",
        );
    })?;
    Ok(report)
}

/// Annotations removed by the class filter, keyed by unified class name.
fn count_filter_drops(
    mapped: &[vru_core::mapping::Annotation],
    filtered: &[vru_core::mapping::Annotation],
    filter: &ClassFilter,
) -> BTreeMap<String, u64> {
    let mut out = BTreeMap::new();
    if mapped.len() == filtered.len() {
        return out;
    }
    for a in mapped {
        if let Some(id) = a.class {
            if filter.dense_id(id).is_none() {
                let name = vru_core::mapping::UnifiedClass::ALL
                    .get(id)
                    .map(|c| c.name().to_lowercase())
                    .unwrap_or_else(|| format!("class_{id}"));
                *out.entry(name).or_insert(0) += 1;
            }
        }
    }
    out
}

fn write_tree(
    dst_root: &Path,
    opts: &ConvertOptions,
    class_names: &[String],
    frames: &[PreparedFrame],
) -> Result<()> {
    let images_dir = dst_root.join("images").join(&opts.split);
    let labels_dir = dst_root.join("labels").join(&opts.split);
    let ignores_dir = dst_root.join("ignores").join(&opts.split);
    std::fs::create_dir_all(&images_dir).map_err(|e| ToolError::io(&images_dir, e))?;
    std::fs::create_dir_all(&labels_dir).map_err(|e| ToolError::io(&labels_dir, e))?;

    write_text(
        &dst_root.join("classes.txt"),
        &(class_names.join("\n") + "\n"),
    )?;

    for frame in frames {
        let image_dst = images_dir.join(format!("{}.{}", frame.frame_id, frame.image_ext));
        std::fs::copy(&frame.image_path, &image_dst)
            .map_err(|e| ToolError::io(&frame.image_path, e))?;
        if !frame.labels.is_empty() {
            write_text(
                &labels_dir.join(format!("{}.txt", frame.frame_id)),
                &write_yolo_label_file(&frame.labels),
            )?;
        }
        if !frame.ignores.is_empty() {
            let mut text = String::new();
            for n in &frame.ignores {
                text.push_str(&format!("{:.6} {:.6} {:.6} {:.6}\n", n.cx, n.cy, n.w, n.h));
            }
            std::fs::create_dir_all(&ignores_dir).map_err(|e| ToolError::io(&ignores_dir, e))?;
            write_text(&ignores_dir.join(format!("{}.txt", frame.frame_id)), &text)?;
        }
    }
    Ok(())
}

impl ConversionReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_aligned_text(&self) -> String {
        let mut out = format!(
            "Converted {} {} {} split: {} images, {} label files, {} ignore files\n",
            self.format,
            self.modality_name(),
            self.split,
            self.images,
            self.label_files,
            self.ignore_files,
        );
        out.push_str(&format!("{:<16} {:>10}\n", "Class", "Instances"));
        for (name, n) in &self.instances {
            out.push_str(&format!("{name:<16} {n:>10}\n"));
        }
        if self.ignore_regions > 0 {
            out.push_str(&format!(
                "{:<16} {:>10}\n",
                "(ignore regions)", self.ignore_regions
            ));
        }
        for (name, n) in &self.dropped {
            out.push_str(&format!("{:<16} {:>10}  dropped\n", name, n));
        }
        if self.skipped_boxless > 0 {
            out.push_str(&format!(
                "{:<16} {:>10}  skipped (no 2D box)\n",
                "", self.skipped_boxless
            ));
        }
        out
    }

    fn modality_name(&self) -> &'static str {
        match self.modality {
            Modality::Rgb => "rgb",
            Modality::Thermal => "thermal",
        }
    }
}
