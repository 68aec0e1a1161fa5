//! Late fusion of per-frame RGB and thermal detection sets by weighted
//! confidence combination.
//!
//! Matching is greedy by descending IoU over same-class cross-modality
//! pairs. Matched pairs fuse confidence as the weighted mean and the box as
//! a confidence-weighted coordinate average; unmatched detections pass
//! through with a configurable penalty. Registration of the two image
//! planes is a precondition, not performed here.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{iou, nms_indices, BoundingBox, Detection};

#[derive(Debug, Error, PartialEq)]
pub enum FusionError {
    #[error("fusion weights are both zero")]
    ZeroWeights,
    #[error("config value out of range: {0}")]
    BadConfig(String),
    #[error("duplicate frame id '{0}' within one modality")]
    DuplicateFrame(String),
}

/// How the fused box is built from a matched pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxMode {
    /// Confidence-weighted average of the two boxes' coordinates.
    WeightedAverage,
    /// Keep the box of the higher-weighted-confidence detection.
    KeepBest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub w_rgb: f64,
    pub w_tir: f64,
    pub iou_match_threshold: f64,
    pub unmatched_penalty_rgb: f64,
    pub unmatched_penalty_tir: f64,
    pub final_nms_iou: f64,
    pub confidence_floor: f64,
    pub box_mode: BoxMode,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            w_rgb: 0.5,
            w_tir: 0.5,
            iou_match_threshold: 0.55,
            unmatched_penalty_rgb: 1.0,
            unmatched_penalty_tir: 1.0,
            final_nms_iou: 0.65,
            confidence_floor: 0.05,
            box_mode: BoxMode::WeightedAverage,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<(), FusionError> {
        if self.w_rgb < 0.0 || self.w_tir < 0.0 {
            return Err(FusionError::BadConfig("negative modality weight".into()));
        }
        if self.w_rgb + self.w_tir <= 0.0 {
            return Err(FusionError::ZeroWeights);
        }
        if !(self.iou_match_threshold > 0.0 && self.iou_match_threshold < 1.0) {
            return Err(FusionError::BadConfig(
                "iou_match_threshold not in (0, 1)".into(),
            ));
        }
        if !(self.final_nms_iou > 0.0 && self.final_nms_iou < 1.0) {
            return Err(FusionError::BadConfig("final_nms_iou not in (0, 1)".into()));
        }
        for p in [self.unmatched_penalty_rgb, self.unmatched_penalty_tir] {
            if !(p > 0.0 && p <= 1.0) {
                return Err(FusionError::BadConfig(
                    "unmatched penalty not in (0, 1]".into(),
                ));
            }
        }
        if !(0.0..1.0).contains(&self.confidence_floor) {
            return Err(FusionError::BadConfig(
                "confidence_floor not in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Which modalities contributed to a fused detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    RgbOnly,
    TirOnly,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedDetection {
    pub class_id: usize,
    pub bbox: BoundingBox,
    pub confidence: f64,
    pub support: Support,
    pub conf_rgb: Option<f64>,
    pub conf_tir: Option<f64>,
}

/// Accounting of what happened to every input detection.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FusionAudit {
    pub matched_pairs: u64,
    pub unmatched_rgb: u64,
    pub unmatched_tir: u64,
    pub floor_dropped: u64,
    pub nms_suppressed: u64,
}

impl FusionAudit {
    /// Total input detections accounted for.
    pub fn accounted(&self) -> u64 {
        2 * self.matched_pairs + self.unmatched_rgb + self.unmatched_tir
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionResult {
    pub detections: Vec<FusedDetection>,
    pub audit: FusionAudit,
}

fn canonical_sort(dets: &mut [Detection]) {
    dets.sort_by(|a, b| {
        crate::geometry::detection_order(
            (a.class_id, &a.bbox, a.confidence),
            (b.class_id, &b.bbox, b.confidence),
        )
    });
}

/// Fuses one frame's RGB and thermal detection sets.
pub fn fuse_frame(
    dets_rgb: &[Detection],
    dets_tir: &[Detection],
    cfg: &FusionConfig,
) -> Result<FusionResult, FusionError> {
    cfg.validate()?;
    let mut rgb: Vec<Detection> = dets_rgb.to_vec();
    let mut tir: Vec<Detection> = dets_tir.to_vec();
    canonical_sort(&mut rgb);
    canonical_sort(&mut tir);

    // candidate same-class pairs above the match threshold, greedy by IoU
    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    for (i, r) in rgb.iter().enumerate() {
        for (j, t) in tir.iter().enumerate() {
            if r.class_id == t.class_id {
                let ov = iou(&r.bbox, &t.bbox);
                if ov >= cfg.iou_match_threshold {
                    pairs.push((i, j, ov));
                }
            }
        }
    }
    pairs.sort_by(|a, b| {
        b.2.partial_cmp(&a.2)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
            .then_with(|| a.1.cmp(&b.1))
    });
    let mut rgb_used = alloc::vec![false; rgb.len()];
    let mut tir_used = alloc::vec![false; tir.len()];
    let mut audit = FusionAudit::default();
    let mut fused: Vec<FusedDetection> = Vec::new();

    let weight_sum = cfg.w_rgb + cfg.w_tir;
    for (i, j, _) in pairs {
        if rgb_used[i] || tir_used[j] {
            continue;
        }
        rgb_used[i] = true;
        tir_used[j] = true;
        audit.matched_pairs += 1;
        let (r, t) = (&rgb[i], &tir[j]);
        let confidence = (cfg.w_rgb * r.confidence + cfg.w_tir * t.confidence) / weight_sum;
        let (bw_r, bw_t) = (cfg.w_rgb * r.confidence, cfg.w_tir * t.confidence);
        let bbox = match cfg.box_mode {
            BoxMode::KeepBest => {
                if bw_r >= bw_t {
                    r.bbox
                } else {
                    t.bbox
                }
            }
            BoxMode::WeightedAverage => {
                let denom = bw_r + bw_t;
                if denom <= 0.0 {
                    BoundingBox::new(
                        (r.bbox.x_min + t.bbox.x_min) / 2.0,
                        (r.bbox.y_min + t.bbox.y_min) / 2.0,
                        (r.bbox.x_max + t.bbox.x_max) / 2.0,
                        (r.bbox.y_max + t.bbox.y_max) / 2.0,
                    )
                    .expect("midpoint of valid boxes is valid")
                } else {
                    BoundingBox::new(
                        (bw_r * r.bbox.x_min + bw_t * t.bbox.x_min) / denom,
                        (bw_r * r.bbox.y_min + bw_t * t.bbox.y_min) / denom,
                        (bw_r * r.bbox.x_max + bw_t * t.bbox.x_max) / denom,
                        (bw_r * r.bbox.y_max + bw_t * t.bbox.y_max) / denom,
                    )
                    .expect("weighted average of valid boxes is valid")
                }
            }
        };
        fused.push(FusedDetection {
            class_id: r.class_id,
            bbox,
            confidence,
            support: Support::Both,
            conf_rgb: Some(r.confidence),
            conf_tir: Some(t.confidence),
        });
    }

    for (i, r) in rgb.iter().enumerate() {
        if !rgb_used[i] {
            audit.unmatched_rgb += 1;
            fused.push(FusedDetection {
                class_id: r.class_id,
                bbox: r.bbox,
                confidence: r.confidence * cfg.unmatched_penalty_rgb,
                support: Support::RgbOnly,
                conf_rgb: Some(r.confidence),
                conf_tir: None,
            });
        }
    }
    for (j, t) in tir.iter().enumerate() {
        if !tir_used[j] {
            audit.unmatched_tir += 1;
            fused.push(FusedDetection {
                class_id: t.class_id,
                bbox: t.bbox,
                confidence: t.confidence * cfg.unmatched_penalty_tir,
                support: Support::TirOnly,
                conf_tir: Some(t.confidence),
                conf_rgb: None,
            });
        }
    }

    let before_floor = fused.len();
    fused.retain(|d| d.confidence >= cfg.confidence_floor);
    audit.floor_dropped = (before_floor - fused.len()) as u64;

    let items: Vec<(usize, BoundingBox, f64)> = fused
        .iter()
        .map(|d| (d.class_id, d.bbox, d.confidence))
        .collect();
    let kept = nms_indices(&items, cfg.final_nms_iou, true);
    audit.nms_suppressed = (fused.len() - kept.len()) as u64;
    let detections: Vec<FusedDetection> = kept.into_iter().map(|i| fused[i].clone()).collect();

    Ok(FusionResult { detections, audit })
}

/// Per-frame fusion over a paired stream. A frame missing one modality is
/// fused against an empty list (penalties still apply to the present side).
pub fn fuse_stream(
    frames_rgb: &[(String, Vec<Detection>)],
    frames_tir: &[(String, Vec<Detection>)],
    cfg: &FusionConfig,
) -> Result<Vec<(String, FusionResult)>, FusionError> {
    cfg.validate()?;
    let mut rgb_map: BTreeMap<&str, &Vec<Detection>> = BTreeMap::new();
    for (id, dets) in frames_rgb {
        if rgb_map.insert(id, dets).is_some() {
            return Err(FusionError::DuplicateFrame(id.clone()));
        }
    }
    let mut tir_map: BTreeMap<&str, &Vec<Detection>> = BTreeMap::new();
    for (id, dets) in frames_tir {
        if tir_map.insert(id, dets).is_some() {
            return Err(FusionError::DuplicateFrame(id.clone()));
        }
    }
    let empty: Vec<Detection> = Vec::new();
    let mut ids: Vec<&str> = rgb_map.keys().chain(tir_map.keys()).copied().collect();
    ids.sort_unstable();
    ids.dedup();
    let mut out = Vec::with_capacity(ids.len());
    for id in ids {
        let rgb = rgb_map.get(id).copied().unwrap_or(&empty);
        let tir = tir_map.get(id).copied().unwrap_or(&empty);
        out.push((String::from(id), fuse_frame(rgb, tir, cfg)?));
    }
    Ok(out)
}
