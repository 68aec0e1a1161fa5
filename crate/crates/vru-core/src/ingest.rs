//! Readers for KITTI label files, BDD100K JSON, and COCO-style JSON (FLIR),
//! plus the reader/writer pair for unified YOLO-format labels.
//!
//! Parsers are total over their error type and never invent annotations:
//! every skipped record is accounted for in the returned skip counts. Class
//! strings are preserved verbatim; case folding happens in the mapping stage.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::Deserialize;
use thiserror::Error;

use crate::geometry::{BoundingBox, GeometryError, Modality, NormalizedBox};

/// Supported source datasets.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, Deserialize,
)]
#[serde(rename_all = "UPPERCASE")]
pub enum SourceDataset {
    Kitti,
    Bdd100k,
    Flir,
}

impl core::fmt::Display for SourceDataset {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SourceDataset::Kitti => write!(f, "KITTI"),
            SourceDataset::Bdd100k => write!(f, "BDD100K"),
            SourceDataset::Flir => write!(f, "FLIR"),
        }
    }
}

/// A ground-truth object before label unification. `source_class` is the
/// raw class string exactly as it appears in the source file.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceAnnotation {
    pub source_dataset: SourceDataset,
    pub source_class: String,
    pub bbox: BoundingBox,
    pub frame_id: String,
    pub modality: Modality,
    /// KITTI truncation field, retained but unused downstream.
    pub truncation: Option<f64>,
    /// KITTI occlusion field, retained but unused downstream.
    pub occlusion: Option<i32>,
}

/// Frame inventory produced by scanning a dataset tree.
#[derive(Debug, Clone, PartialEq, serde::Serialize, Deserialize)]
pub struct DatasetIndex {
    pub split: String,
    pub modality: Modality,
    pub image_count: u64,
    pub label_file_count: u64,
    pub frames: Vec<FrameEntry>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, Deserialize)]
pub struct FrameEntry {
    pub frame_id: String,
    pub image_path: String,
    pub label_path: Option<String>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("line {line}: expected {expected} fields, found {found}")]
    FieldCount {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: non-numeric value '{value}'")]
    NonNumeric { line: usize, value: String },
    #[error("line {line}: {source}")]
    BadBox {
        line: usize,
        #[source]
        source: GeometryError,
    },
    #[error("frame '{frame}': {source}")]
    BadFrameBox {
        frame: String,
        #[source]
        source: GeometryError,
    },
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("annotation {id} references unknown image_id {image_id}")]
    UnknownImage { id: u64, image_id: u64 },
    #[error("annotation {id} references unknown category_id {category_id}")]
    UnknownCategory { id: u64, category_id: u64 },
    #[error("annotation {id}: negative bbox extent {w}x{h}")]
    NegativeExtent { id: u64, w: f64, h: f64 },
    #[error("line {line}: class id {value} is negative")]
    NegativeClass { line: usize, value: i64 },
    #[error("line {line}: coordinate {value} outside [-0.01, 1.01]")]
    CoordinateRange { line: usize, value: f64 },
}

fn parse_f64(tok: &str, line: usize) -> Result<f64, ParseError> {
    tok.parse::<f64>().map_err(|_| ParseError::NonNumeric {
        line,
        value: tok.to_string(),
    })
}

/// Parses one KITTI object-label file (15+ whitespace-separated fields per
/// line). Fields 5..8 (1-indexed: left, top, right, bottom) become the box;
/// field 1 is the class string; 3D fields are ignored.
pub fn parse_kitti_label_file(
    text: &str,
    frame_id: &str,
    modality: Modality,
) -> Result<Vec<SourceAnnotation>, ParseError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.len() < 15 {
            return Err(ParseError::FieldCount {
                line,
                expected: 15,
                found: fields.len(),
            });
        }
        let truncation = parse_f64(fields[1], line)?;
        let occlusion = parse_f64(fields[2], line)? as i32;
        let left = parse_f64(fields[4], line)?;
        let top = parse_f64(fields[5], line)?;
        let right = parse_f64(fields[6], line)?;
        let bottom = parse_f64(fields[7], line)?;
        let bbox = BoundingBox::new(left, top, right, bottom)
            .map_err(|source| ParseError::BadBox { line, source })?;
        out.push(SourceAnnotation {
            source_dataset: SourceDataset::Kitti,
            source_class: fields[0].to_string(),
            bbox,
            frame_id: frame_id.to_string(),
            modality,
            truncation: Some(truncation),
            occlusion: Some(occlusion),
        });
    }
    Ok(out)
}

#[derive(Deserialize)]
struct BddFrame {
    name: String,
    #[serde(default)]
    labels: Vec<BddLabel>,
}

#[derive(Deserialize)]
struct BddLabel {
    category: String,
    #[serde(default)]
    box2d: Option<BddBox2d>,
}

#[derive(Deserialize)]
struct BddBox2d {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
}

/// Result of parsing a multi-frame label file: per-frame annotations plus a
/// count of records skipped because they carry no 2D box.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameAnnotations {
    pub frames: Vec<(String, Vec<SourceAnnotation>)>,
    pub skipped_boxless: u64,
}

/// Parses a BDD100K per-split detection label JSON. Labels without a
/// `box2d` entry (lanes, drivable areas) are skipped and counted.
pub fn parse_bdd100k_json(text: &str, modality: Modality) -> Result<FrameAnnotations, ParseError> {
    let parsed: Vec<BddFrame> =
        serde_json::from_str(text).map_err(|e| ParseError::Json(format!("{e}")))?;
    let mut frames = Vec::with_capacity(parsed.len());
    let mut skipped = 0u64;
    for frame in parsed {
        let mut annos = Vec::new();
        for label in frame.labels {
            let Some(b) = label.box2d else {
                skipped += 1;
                continue;
            };
            let bbox = BoundingBox::new(b.x1, b.y1, b.x2, b.y2).map_err(|source| {
                ParseError::BadFrameBox {
                    frame: frame.name.clone(),
                    source,
                }
            })?;
            annos.push(SourceAnnotation {
                source_dataset: SourceDataset::Bdd100k,
                source_class: label.category,
                bbox,
                frame_id: frame.name.clone(),
                modality,
                truncation: None,
                occlusion: None,
            });
        }
        frames.push((frame.name, annos));
    }
    Ok(FrameAnnotations {
        frames,
        skipped_boxless: skipped,
    })
}

#[derive(Deserialize)]
struct CocoRoot {
    images: Vec<CocoImage>,
    annotations: Vec<CocoAnnotation>,
    categories: Vec<CocoCategory>,
}

#[derive(Deserialize)]
struct CocoImage {
    id: u64,
    file_name: String,
    #[serde(default)]
    width: Option<f64>,
    #[serde(default)]
    height: Option<f64>,
}

#[derive(Deserialize)]
struct CocoAnnotation {
    id: u64,
    image_id: u64,
    category_id: u64,
    bbox: [f64; 4],
}

#[derive(Deserialize)]
struct CocoCategory {
    id: u64,
    name: String,
}

/// Parsed COCO file: frames in image order with their annotations, plus the
/// per-image dimensions when the file carries them.
#[derive(Debug, Clone, PartialEq)]
pub struct CocoFrames {
    pub frames: Vec<(String, Vec<SourceAnnotation>)>,
    pub dimensions: BTreeMap<String, (f64, f64)>,
}

/// Parses a COCO-style annotation JSON (FLIR ships this format). `bbox` is
/// `[x, y, width, height]` and is converted to corner form. Images without
/// annotations are still present with an empty list.
pub fn parse_coco_json(text: &str, modality: Modality) -> Result<CocoFrames, ParseError> {
    let root: CocoRoot =
        serde_json::from_str(text).map_err(|e| ParseError::Json(format!("{e}")))?;
    let categories: BTreeMap<u64, String> = root
        .categories
        .into_iter()
        .map(|c| (c.id, c.name))
        .collect();
    let mut by_image: BTreeMap<u64, Vec<SourceAnnotation>> = BTreeMap::new();
    let image_names: BTreeMap<u64, String> = root
        .images
        .iter()
        .map(|i| (i.id, i.file_name.clone()))
        .collect();
    for ann in root.annotations {
        let frame_id = image_names
            .get(&ann.image_id)
            .ok_or(ParseError::UnknownImage {
                id: ann.id,
                image_id: ann.image_id,
            })?
            .clone();
        let class = categories
            .get(&ann.category_id)
            .ok_or(ParseError::UnknownCategory {
                id: ann.id,
                category_id: ann.category_id,
            })?
            .clone();
        let [x, y, w, h] = ann.bbox;
        if w < 0.0 || h < 0.0 {
            return Err(ParseError::NegativeExtent { id: ann.id, w, h });
        }
        let bbox =
            BoundingBox::new(x, y, x + w, y + h).map_err(|source| ParseError::BadFrameBox {
                frame: frame_id.clone(),
                source,
            })?;
        by_image
            .entry(ann.image_id)
            .or_default()
            .push(SourceAnnotation {
                source_dataset: SourceDataset::Flir,
                source_class: class,
                bbox,
                frame_id: frame_id.clone(),
                modality,
                truncation: None,
                occlusion: None,
            });
    }
    let mut frames = Vec::with_capacity(root.images.len());
    let mut dimensions = BTreeMap::new();
    for img in &root.images {
        frames.push((
            img.file_name.clone(),
            by_image.remove(&img.id).unwrap_or_default(),
        ));
        if let (Some(w), Some(h)) = (img.width, img.height) {
            dimensions.insert(img.file_name.clone(), (w, h));
        }
    }
    Ok(CocoFrames { frames, dimensions })
}

/// Serializes YOLO-format labels: one `class cx cy w h` line per annotation
/// with six decimal places, in input order.
pub fn write_yolo_label_file(annotations: &[(usize, NormalizedBox)]) -> String {
    let mut out = String::new();
    for (class_id, b) in annotations {
        out.push_str(&format!(
            "{} {:.6} {:.6} {:.6} {:.6}\n",
            class_id, b.cx, b.cy, b.w, b.h
        ));
    }
    out
}

/// Parses a YOLO-format label file. Coordinates slightly outside the unit
/// range (within ±0.01) are clamped per the `NormalizedBox` contract.
pub fn read_yolo_label_file(text: &str) -> Result<Vec<(usize, NormalizedBox)>, ParseError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(ParseError::FieldCount {
                line,
                expected: 5,
                found: fields.len(),
            });
        }
        let class_id: i64 = fields[0].parse().map_err(|_| ParseError::NonNumeric {
            line,
            value: fields[0].to_string(),
        })?;
        if class_id < 0 {
            return Err(ParseError::NegativeClass {
                line,
                value: class_id,
            });
        }
        let mut vals = [0.0f64; 4];
        for (i, tok) in fields[1..].iter().enumerate() {
            let v = parse_f64(tok, line)?;
            if !(-0.01..=1.01).contains(&v) {
                return Err(ParseError::CoordinateRange { line, value: v });
            }
            vals[i] = v;
        }
        let nbox = NormalizedBox::new(vals[0], vals[1], vals[2], vals[3])
            .map_err(|source| ParseError::BadBox { line, source })?;
        out.push((class_id as usize, nbox));
    }
    Ok(out)
}
