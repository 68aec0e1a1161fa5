//! Directory scanning: discovers image files, pairs them with label files
//! by stem, and produces a deterministic, sorted dataset index. No pixel
//! data is decoded.

use std::collections::BTreeMap;
use std::path::Path;

use vru_core::geometry::Modality;
use vru_core::ingest::{DatasetIndex, FrameEntry};
use walkdir::WalkDir;

use crate::error::{Result, ToolError};

const IMAGE_EXTENSIONS: [&str; 3] = ["jpg", "jpeg", "png"];

/// Directories whose .txt contents are auxiliary, not labels.
const NON_LABEL_DIRS: [&str; 2] = ["ignores", "dets"];

fn extension_lower(path: &Path) -> Option<String> {
    path.extension().map(|e| e.to_string_lossy().to_lowercase())
}

fn stem_of(path: &Path) -> Option<String> {
    path.file_stem().map(|s| s.to_string_lossy().into_owned())
}

fn under_non_label_dir(path: &Path) -> bool {
    path.components().any(|c| {
        NON_LABEL_DIRS
            .iter()
            .any(|d| c.as_os_str().to_string_lossy() == *d)
    })
}

/// Recursively indexes `root`: every .jpg/.jpeg/.png becomes a frame, and a
/// .txt file with the same stem (anywhere under `root`, outside auxiliary
/// directories) becomes its label file. Results are sorted by frame id and
/// independent of traversal order.
pub fn scan_dataset(root: &Path, split: &str, modality: Modality) -> Result<DatasetIndex> {
    if !root.is_dir() {
        return Err(ToolError::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
        ));
    }

    let mut images: BTreeMap<String, String> = BTreeMap::new();
    let mut labels: BTreeMap<String, String> = BTreeMap::new();

    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(root).to_path_buf();
            ToolError::io(path, e.into())
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let path = entry.path();
        let Some(ext) = extension_lower(path) else {
            continue;
        };
        let Some(stem) = stem_of(path) else {
            continue;
        };
        let display = path.display().to_string();
        if IMAGE_EXTENSIONS.contains(&ext.as_str()) {
            if let Some(previous) = images.insert(stem.clone(), display.clone()) {
                return Err(ToolError::validation(format!(
                    "ambiguous frame stem '{stem}': {previous} and {display}"
                )));
            }
        } else if ext == "txt" && !under_non_label_dir(path.strip_prefix(root).unwrap_or(path)) {
            if let Some(previous) = labels.insert(stem.clone(), display.clone()) {
                return Err(ToolError::validation(format!(
                    "ambiguous label stem '{stem}': {previous} and {display}"
                )));
            }
        }
    }

    let frames: Vec<FrameEntry> = images
        .iter()
        .map(|(stem, image_path)| FrameEntry {
            frame_id: stem.clone(),
            image_path: image_path.clone(),
            label_path: labels.get(stem).cloned(),
        })
        .collect();
    let label_file_count = frames.iter().filter(|f| f.label_path.is_some()).count() as u64;

    Ok(DatasetIndex {
        split: split.to_string(),
        modality,
        image_count: frames.len() as u64,
        label_file_count,
        frames,
    })
}
