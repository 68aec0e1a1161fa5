//! Readers for the converted YOLO-format tree produced by `convert`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use vru_core::geometry::{from_normalized, Modality, NormalizedBox};
use vru_core::ingest::{read_yolo_label_file, DatasetIndex, SourceDataset};
use vru_core::mapping::Annotation;

use crate::error::{read_text, Result, ToolError};
use crate::scan::scan_dataset;

/// Reads the dense class-name list from `<root>/classes.txt`.
pub fn read_classes(root: &Path) -> Result<Vec<String>> {
    let path = root.join("classes.txt");
    let text = read_text(&path)?;
    let names: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect();
    if names.is_empty() {
        return Err(ToolError::validation(format!(
            "{}: no class names",
            path.display()
        )));
    }
    Ok(names)
}

/// Parses an ignore sidecar file: lines of "cx cy w h", normalized.
pub fn read_ignore_file(text: &str, path: &Path) -> Result<Vec<NormalizedBox>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(ToolError::validation(format!(
                "{}:{line}: expected 4 fields, found {}",
                path.display(),
                fields.len()
            )));
        }
        let mut vals = [0.0f64; 4];
        for (i, tok) in fields.iter().enumerate() {
            vals[i] = tok.parse().map_err(|_| {
                ToolError::validation(format!(
                    "{}:{line}: non-numeric value '{tok}'",
                    path.display()
                ))
            })?;
        }
        let nbox = NormalizedBox::new(vals[0], vals[1], vals[2], vals[3])
            .map_err(|e| ToolError::validation(format!("{}:{line}: {e}", path.display())))?;
        out.push(nbox);
    }
    Ok(out)
}

/// Loads all ground-truth annotations for one split of a converted tree,
/// keyed by frame id. Every image yields a frame entry, object-free frames
/// included; boxes are in unit-square corner form. The converted tree does
/// not record which source dataset a frame came from, so annotations carry
/// a fixed source tag.
pub fn load_split_annotations(
    root: &Path,
    split: &str,
    modality: Modality,
) -> Result<BTreeMap<String, Vec<Annotation>>> {
    let images_root = root.join("images").join(split);
    let index = scan_dataset(&images_root, split, modality)?;
    let labels_dir = root.join("labels").join(split);
    let ignores_dir = root.join("ignores").join(split);

    let mut out = BTreeMap::new();
    for frame in &index.frames {
        let mut annos = Vec::new();
        let label_path = labels_dir.join(format!("{}.txt", frame.frame_id));
        if label_path.is_file() {
            let text = read_text(&label_path)?;
            let parsed = read_yolo_label_file(&text)
                .map_err(|e| ToolError::validation(format!("{}: {e}", label_path.display())))?;
            for (class, nbox) in parsed {
                annos.push(annotation(Some(class), &nbox, frame, modality)?);
            }
        }
        let ignore_path = ignores_dir.join(format!("{}.txt", frame.frame_id));
        if ignore_path.is_file() {
            let text = read_text(&ignore_path)?;
            for nbox in read_ignore_file(&text, &ignore_path)? {
                annos.push(annotation(None, &nbox, frame, modality)?);
            }
        }
        out.insert(frame.frame_id.clone(), annos);
    }
    Ok(out)
}

fn annotation(
    class: Option<usize>,
    nbox: &NormalizedBox,
    frame: &vru_core::ingest::FrameEntry,
    modality: Modality,
) -> Result<Annotation> {
    let bbox = from_normalized(nbox, 1.0, 1.0)
        .map_err(|e| ToolError::validation(format!("frame '{}': {e}", frame.frame_id)))?;
    Ok(Annotation {
        class,
        bbox,
        source: SourceDataset::Kitti,
        frame_id: frame.frame_id.clone(),
        modality,
    })
}

/// Indexes one split of a converted tree: frames come from
/// `<root>/images/<split>`, and each frame's label file is
/// `<root>/labels/<split>/<stem>.txt` when present.
pub fn scan_split(root: &Path, split: &str, modality: Modality) -> Result<DatasetIndex> {
    let mut index = scan_dataset(&root.join("images").join(split), split, modality)?;
    let labels_dir = root.join("labels").join(split);
    for frame in &mut index.frames {
        let label = labels_dir.join(format!("{}.txt", frame.frame_id));
        if label.is_file() {
            frame.label_path = Some(label.display().to_string());
        }
    }
    index.label_file_count = index
        .frames
        .iter()
        .filter(|f| f.label_path.is_some())
        .count() as u64;
    Ok(index)
}

/// Lists all split names present under `<root>/images`.
pub fn list_splits(root: &Path) -> Result<Vec<String>> {
    let images = root.join("images");
    let mut splits = Vec::new();
    let entries = std::fs::read_dir(&images).map_err(|e| ToolError::io(&images, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| ToolError::io(&images, e))?;
        if entry.path().is_dir() {
            splits.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    splits.sort_unstable();
    Ok(splits)
}

/// Paths of the label and ignore files belonging to a frame, if present.
pub fn sidecar_paths(root: &Path, split: &str, stem: &str) -> (PathBuf, PathBuf) {
    (
        root.join("labels").join(split).join(format!("{stem}.txt")),
        root.join("ignores").join(split).join(format!("{stem}.txt")),
    )
}
