//! Detection-file directory IO: per-frame text files of
//! "class_id confidence cx cy w h" lines, one file per frame, stem = frame
//! id.

use std::collections::BTreeMap;
use std::path::Path;

use vru_core::eval::parse_detection_file;
use vru_core::fusion::FusionResult;
use vru_core::geometry::{to_normalized, Detection, Modality};
use walkdir::WalkDir;

use crate::error::{read_text, write_text, Result, ToolError};

/// Loads every .txt file in `dir` as one frame's detections.
pub fn load_detection_dir(
    dir: &Path,
    modality: Modality,
) -> Result<BTreeMap<String, Vec<Detection>>> {
    if !dir.is_dir() {
        return Err(ToolError::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
        ));
    }
    let mut out = BTreeMap::new();
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let p = e.path().unwrap_or(dir).to_path_buf();
            ToolError::io(p, e.into())
        })?;
        let path = entry.path();
        if !entry.file_type().is_file() || path.extension().is_none_or(|e| e != "txt") {
            continue;
        }
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let text = read_text(path)?;
        let dets = parse_detection_file(&text, modality)
            .map_err(|e| ToolError::validation(format!("{}: {e}", path.display())))?;
        if out.insert(stem.clone(), dets).is_some() {
            return Err(ToolError::validation(format!(
                "duplicate detection frame stem '{stem}' under {}",
                dir.display()
            )));
        }
    }
    Ok(out)
}

/// Writes fused frames as detection files (one per frame) into `dir`.
pub fn write_fused_dir(dir: &Path, frames: &[(String, FusionResult)]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| ToolError::io(dir, e))?;
    for (frame_id, result) in frames {
        let mut text = String::new();
        for d in &result.detections {
            let n = to_normalized(&d.bbox, 1.0, 1.0)
                .map_err(|e| ToolError::validation(format!("frame '{frame_id}': {e}")))?;
            text.push_str(&format!(
                "{} {:.6} {:.6} {:.6} {:.6} {:.6}\n",
                d.class_id, d.confidence, n.cx, n.cy, n.w, n.h
            ));
        }
        write_text(&dir.join(format!("{frame_id}.txt")), &text)?;
    }
    Ok(())
}
