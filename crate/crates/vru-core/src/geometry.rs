//! Axis-aligned box representations, IoU, and non-maximum suppression.
//!
//! Corner-form boxes use half-open pixel semantics: the area of a box is
//! `(x_max - x_min) * (y_max - y_min)`. Zero-area boxes are legal inputs to
//! [`iou`] (they yield 0); parsers reject them at ingestion instead.

use alloc::vec::Vec;
use core::cmp::Ordering;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sensor modality a detection originates from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Rgb,
    Thermal,
}

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error(
        "box coordinates must be finite and non-negative: ({x_min}, {y_min}, {x_max}, {y_max})"
    )]
    InvalidCoordinates {
        x_min: f64,
        y_min: f64,
        x_max: f64,
        y_max: f64,
    },
    #[error("box corners are inverted: x {x_min}..{x_max}, y {y_min}..{y_max}")]
    InvertedCorners {
        x_min: f64,
        y_min: f64,
        x_max: f64,
        y_max: f64,
    },
    #[error("image dimensions must be positive, got {width}x{height}")]
    BadImageDimensions { width: f64, height: f64 },
    #[error("normalized box extent is empty or negative: w={w}, h={h}")]
    EmptyNormalizedBox { w: f64, h: f64 },
    #[error("confidence must lie in [0, 1], got {0}")]
    BadConfidence(f64),
    #[error("iou threshold must lie in (0, 1), got {0}")]
    BadIouThreshold(f64),
}

/// Absolute-corner box in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, GeometryError> {
        let coords = [x_min, y_min, x_max, y_max];
        if coords.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(GeometryError::InvalidCoordinates {
                x_min,
                y_min,
                x_max,
                y_max,
            });
        }
        if x_min > x_max || y_min > y_max {
            return Err(GeometryError::InvertedCorners {
                x_min,
                y_min,
                x_max,
                y_max,
            });
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

/// Center-size box normalized by image dimensions (YOLO label convention).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

const CLAMP_EPS: f64 = 1e-6;

impl NormalizedBox {
    /// Builds a normalized box, clamping extents that overshoot the unit
    /// square by up to `1e-6` per side. Empty extents are rejected.
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self, GeometryError> {
        if [cx, cy, w, h].iter().any(|v| !v.is_finite()) || w <= 0.0 || h <= 0.0 {
            return Err(GeometryError::EmptyNormalizedBox { w, h });
        }
        let x0 = (cx - w / 2.0).clamp(0.0, 1.0);
        let x1 = (cx + w / 2.0).clamp(0.0, 1.0);
        let y0 = (cy - h / 2.0).clamp(0.0, 1.0);
        let y1 = (cy + h / 2.0).clamp(0.0, 1.0);
        let (w, h) = (x1 - x0, y1 - y0);
        if w <= CLAMP_EPS * CLAMP_EPS || h <= CLAMP_EPS * CLAMP_EPS {
            return Err(GeometryError::EmptyNormalizedBox { w, h });
        }
        Ok(Self {
            cx: (x0 + x1) / 2.0,
            cy: (y0 + y1) / 2.0,
            w,
            h,
        })
    }
}

/// A single model output: class, box, confidence, and source modality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub class_id: usize,
    pub bbox: BoundingBox,
    pub confidence: f64,
    pub modality: Modality,
}

impl Detection {
    pub fn new(
        class_id: usize,
        bbox: BoundingBox,
        confidence: f64,
        modality: Modality,
    ) -> Result<Self, GeometryError> {
        if !(0.0..=1.0).contains(&confidence) || !confidence.is_finite() {
            return Err(GeometryError::BadConfidence(confidence));
        }
        Ok(Self {
            class_id,
            bbox,
            confidence,
            modality,
        })
    }
}

/// Intersection-over-union of two corner-form boxes. Returns 0 when the
/// union has zero area.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let ix = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let iy = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = ix * iy;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Converts an absolute-corner box to normalized center-size form.
pub fn to_normalized(
    bbox: &BoundingBox,
    img_w: f64,
    img_h: f64,
) -> Result<NormalizedBox, GeometryError> {
    if img_w <= 0.0 || img_h <= 0.0 || !img_w.is_finite() || !img_h.is_finite() {
        return Err(GeometryError::BadImageDimensions {
            width: img_w,
            height: img_h,
        });
    }
    NormalizedBox::new(
        (bbox.x_min + bbox.x_max) / (2.0 * img_w),
        (bbox.y_min + bbox.y_max) / (2.0 * img_h),
        bbox.width() / img_w,
        bbox.height() / img_h,
    )
}

/// Inverse of [`to_normalized`] up to clamping.
pub fn from_normalized(
    nbox: &NormalizedBox,
    img_w: f64,
    img_h: f64,
) -> Result<BoundingBox, GeometryError> {
    if img_w <= 0.0 || img_h <= 0.0 || !img_w.is_finite() || !img_h.is_finite() {
        return Err(GeometryError::BadImageDimensions {
            width: img_w,
            height: img_h,
        });
    }
    BoundingBox::new(
        ((nbox.cx - nbox.w / 2.0) * img_w).max(0.0),
        ((nbox.cy - nbox.h / 2.0) * img_h).max(0.0),
        (nbox.cx + nbox.w / 2.0) * img_w,
        (nbox.cy + nbox.h / 2.0) * img_h,
    )
}

/// Deterministic ordering used wherever suppression and fusion need a
/// reproducible sort: descending confidence, then (class_id, x_min, y_min,
/// x_max, y_max) ascending.
pub(crate) fn detection_order(
    a: (usize, &BoundingBox, f64),
    b: (usize, &BoundingBox, f64),
) -> Ordering {
    b.2.partial_cmp(&a.2)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.0.cmp(&b.0))
        .then_with(|| a.1.x_min.partial_cmp(&b.1.x_min).unwrap_or(Ordering::Equal))
        .then_with(|| a.1.y_min.partial_cmp(&b.1.y_min).unwrap_or(Ordering::Equal))
        .then_with(|| a.1.x_max.partial_cmp(&b.1.x_max).unwrap_or(Ordering::Equal))
        .then_with(|| a.1.y_max.partial_cmp(&b.1.y_max).unwrap_or(Ordering::Equal))
}

/// Greedy NMS over (class, box, confidence) triples; returns indices of the
/// survivors in descending-confidence order.
pub(crate) fn nms_indices(
    items: &[(usize, BoundingBox, f64)],
    iou_threshold: f64,
    class_aware: bool,
) -> Vec<usize> {
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&i, &j| {
        detection_order(
            (items[i].0, &items[i].1, items[i].2),
            (items[j].0, &items[j].1, items[j].2),
        )
    });
    let mut kept: Vec<usize> = Vec::new();
    for &i in &order {
        let suppressed = kept.iter().any(|&k| {
            (!class_aware || items[k].0 == items[i].0)
                && iou(&items[k].1, &items[i].1) > iou_threshold
        });
        if !suppressed {
            kept.push(i);
        }
    }
    kept
}

/// Greedy non-maximum suppression in descending confidence. When
/// `class_aware` is set only same-class pairs suppress each other. Ties on
/// confidence break by (class_id, x_min, y_min), so the result does not
/// depend on input order.
pub fn nms(
    dets: &[Detection],
    iou_threshold: f64,
    class_aware: bool,
) -> Result<Vec<Detection>, GeometryError> {
    if !(iou_threshold > 0.0 && iou_threshold < 1.0) {
        return Err(GeometryError::BadIouThreshold(iou_threshold));
    }
    let items: Vec<(usize, BoundingBox, f64)> = dets
        .iter()
        .map(|d| (d.class_id, d.bbox, d.confidence))
        .collect();
    Ok(nms_indices(&items, iou_threshold, class_aware)
        .into_iter()
        .map(|i| dets[i].clone())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bb(x0: f64, y0: f64, x1: f64, y1: f64) -> BoundingBox {
        BoundingBox::new(x0, y0, x1, y1).unwrap()
    }

    #[test]
    fn iou_identical_boxes() {
        let a = bb(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &a), 1.0);
    }

    #[test]
    fn iou_disjoint_boxes() {
        let a = bb(0.0, 0.0, 10.0, 10.0);
        let b = bb(20.0, 20.0, 30.0, 30.0);
        assert_eq!(iou(&a, &b), 0.0);
    }

    #[test]
    fn iou_partial_overlap() {
        // inter = 2, union = 6
        let a = bb(0.0, 0.0, 2.0, 2.0);
        let b = bb(1.0, 0.0, 3.0, 2.0);
        assert!((iou(&a, &b) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn iou_zero_area_box() {
        let a = bb(5.0, 5.0, 5.0, 5.0);
        assert_eq!(iou(&a, &a), 0.0);
    }

    #[test]
    fn rejects_inverted_and_negative() {
        assert!(BoundingBox::new(10.0, 0.0, 5.0, 5.0).is_err());
        assert!(BoundingBox::new(-1.0, 0.0, 5.0, 5.0).is_err());
        assert!(BoundingBox::new(0.0, 0.0, f64::NAN, 5.0).is_err());
    }

    #[test]
    fn normalize_full_frame() {
        let n = to_normalized(&bb(0.0, 0.0, 100.0, 100.0), 100.0, 100.0).unwrap();
        assert_eq!((n.cx, n.cy, n.w, n.h), (0.5, 0.5, 1.0, 1.0));
    }

    #[test]
    fn normalize_centered_half_box() {
        let n = to_normalized(&bb(25.0, 25.0, 75.0, 75.0), 100.0, 100.0).unwrap();
        assert_eq!((n.cx, n.cy, n.w, n.h), (0.5, 0.5, 0.5, 0.5));
    }

    #[test]
    fn normalize_small_box_in_640x480() {
        let n = to_normalized(&bb(0.0, 0.0, 10.0, 10.0), 640.0, 480.0).unwrap();
        assert!((n.cx - 0.0078125).abs() < 1e-12);
        assert!((n.cy - 10.0 / 960.0).abs() < 1e-12);
        assert!((n.w - 0.015625).abs() < 1e-12);
        assert!((n.h - 10.0 / 480.0).abs() < 1e-12);
    }

    #[test]
    fn denormalize_inverts() {
        let b = from_normalized(
            &NormalizedBox::new(0.5, 0.5, 0.5, 0.5).unwrap(),
            100.0,
            100.0,
        )
        .unwrap();
        assert_eq!(b, bb(25.0, 25.0, 75.0, 75.0));
    }

    #[test]
    fn zero_image_dims_rejected() {
        assert!(to_normalized(&bb(0.0, 0.0, 1.0, 1.0), 0.0, 100.0).is_err());
        assert!(from_normalized(
            &NormalizedBox::new(0.5, 0.5, 0.5, 0.5).unwrap(),
            100.0,
            -1.0
        )
        .is_err());
    }

    #[test]
    fn nms_suppresses_full_overlap() {
        let a = Detection::new(0, bb(0.0, 0.0, 10.0, 10.0), 0.9, Modality::Rgb).unwrap();
        let b = Detection::new(0, bb(0.0, 0.0, 10.0, 10.0), 0.8, Modality::Rgb).unwrap();
        let kept = nms(&[b, a], 0.5, true).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].confidence, 0.9);
    }

    #[test]
    fn nms_keeps_disjoint() {
        let a = Detection::new(0, bb(0.0, 0.0, 10.0, 10.0), 0.9, Modality::Rgb).unwrap();
        let b = Detection::new(0, bb(50.0, 50.0, 60.0, 60.0), 0.8, Modality::Rgb).unwrap();
        assert_eq!(nms(&[a, b], 0.5, true).unwrap().len(), 2);
    }

    #[test]
    fn nms_class_aware_keeps_cross_class_overlap() {
        let a = Detection::new(0, bb(0.0, 0.0, 10.0, 10.0), 0.9, Modality::Rgb).unwrap();
        let b = Detection::new(1, bb(0.0, 0.0, 10.0, 10.0), 0.8, Modality::Rgb).unwrap();
        assert_eq!(nms(&[a.clone(), b.clone()], 0.5, true).unwrap().len(), 2);
        assert_eq!(nms(&[a, b], 0.5, false).unwrap().len(), 1);
    }

    #[test]
    fn nms_rejects_bad_threshold() {
        assert!(nms(&[], 0.0, true).is_err());
        assert!(nms(&[], 1.0, true).is_err());
    }
}
