//! Applies an augmentation pipeline across one split of a converted tree.
//!
//! Augmented copies are written alongside the originals with an
//! "_aug{n}" stem suffix (always PNG); label and ignore files are
//! duplicated under the new stem so the split remains self-consistent.
//! Frame seeds are derived from the frame stem and copy index, so results
//! are independent of processing order.

use std::path::Path;

use serde::{Deserialize, Serialize};
use vru_core::augment::{apply_pipeline, AppliedTransform, Level, PipelineSpec};
use vru_core::geometry::Modality;

use crate::error::{Result, ToolError};
use crate::imageio::{load_image, save_png};
use crate::scan::scan_dataset;
use crate::yolo_tree::sidecar_paths;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameLog {
    pub frame_id: String,
    pub copy: u32,
    pub image: String,
    pub transforms: Vec<AppliedTransform>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AugmentLog {
    pub level: Level,
    pub master_seed: u64,
    pub copies: u32,
    pub frames: Vec<FrameLog>,
}

impl AugmentLog {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("log serializes")
    }
}

/// FNV-1a hash of the stem and copy index; the stable per-frame seed.
pub fn frame_seed(stem: &str, copy: u32) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for byte in stem
        .as_bytes()
        .iter()
        .chain(b"#")
        .chain(&copy.to_le_bytes())
    {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Augments every original image in `<root>/images/<split>`, writing
/// `copies` augmented variants per frame. Previously augmented frames
/// (stems containing "_aug") are skipped, so reruns do not compound.
pub fn augment_split(
    root: &Path,
    split: &str,
    spec: &PipelineSpec,
    copies: u32,
) -> Result<AugmentLog> {
    spec.validate()
        .map_err(|e| ToolError::config(e.to_string()))?;
    if copies == 0 {
        return Err(ToolError::config("copies must be at least 1".to_string()));
    }
    let images_root = root.join("images").join(split);
    let index = scan_dataset(&images_root, split, Modality::Rgb)?;

    let mut log = AugmentLog {
        level: spec.level,
        master_seed: spec.master_seed,
        copies,
        frames: Vec::new(),
    };
    for frame in &index.frames {
        if frame.frame_id.contains("_aug") {
            continue;
        }
        let img = load_image(Path::new(&frame.image_path))?;
        for copy in 1..=copies {
            let seed = frame_seed(&frame.frame_id, copy);
            let (out_img, _, transforms) = apply_pipeline(&img, &[], spec, seed)
                .map_err(|e| ToolError::config(e.to_string()))?;
            let out_stem = format!("{}_aug{}", frame.frame_id, copy);
            let out_path = images_root.join(format!("{out_stem}.png"));
            save_png(&out_path, &out_img)?;
            duplicate_sidecars(root, split, &frame.frame_id, &out_stem)?;
            log.frames.push(FrameLog {
                frame_id: frame.frame_id.clone(),
                copy,
                image: format!("{out_stem}.png"),
                transforms,
            });
        }
    }
    Ok(log)
}

fn duplicate_sidecars(root: &Path, split: &str, stem: &str, out_stem: &str) -> Result<()> {
    let (label_src, ignore_src) = sidecar_paths(root, split, stem);
    let (label_dst, ignore_dst) = sidecar_paths(root, split, out_stem);
    for (src, dst) in [(label_src, label_dst), (ignore_src, ignore_dst)] {
        if src.is_file() {
            std::fs::copy(&src, &dst).map_err(|e| ToolError::io(&src, e))?;
        }
    }
    Ok(())
}
