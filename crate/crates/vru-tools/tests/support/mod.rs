//! Shared helpers for the acceptance suite, including a brute-force
//! reference evaluator written directly from the metric definitions,
//! independent of the library implementation.

use std::collections::BTreeMap;

use vru_core::geometry::{BoundingBox, Detection, Modality};
use vru_core::ingest::SourceDataset;
use vru_core::mapping::Annotation;

pub fn bb(x0: f64, y0: f64, x1: f64, y1: f64) -> BoundingBox {
    BoundingBox::new(x0, y0, x1, y1).unwrap()
}

pub fn det(class: usize, bbox: BoundingBox, conf: f64) -> Detection {
    Detection {
        class_id: class,
        bbox,
        confidence: conf,
        modality: Modality::Rgb,
    }
}

pub fn gt(class: Option<usize>, bbox: BoundingBox) -> Annotation {
    Annotation {
        class,
        bbox,
        source: SourceDataset::Kitti,
        frame_id: String::new(),
        modality: Modality::Rgb,
    }
}

fn iou_ref(a: &BoundingBox, b: &BoundingBox) -> f64 {
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

/// Greedy matching restated from the definition: detections in descending
/// confidence (ties by class then coordinates) each take the highest-IoU
/// still-unmatched real ground truth at or above the threshold; otherwise a
/// detection overlapping an ignore region at the threshold is excluded from
/// scoring; anything else is a false positive.
fn match_one_frame(
    dets: &[Detection],
    gts: &[Annotation],
    threshold: f64,
) -> (Vec<(f64, bool)>, usize) {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&i, &j| {
        let key = |d: &Detection| {
            (
                -d.confidence,
                d.class_id as f64,
                d.bbox.x_min,
                d.bbox.y_min,
                d.bbox.x_max,
                d.bbox.y_max,
            )
        };
        key(&dets[i]).partial_cmp(&key(&dets[j])).unwrap()
    });
    let real: Vec<&Annotation> = gts.iter().filter(|g| !g.ignore()).collect();
    let ignores: Vec<&Annotation> = gts.iter().filter(|g| g.ignore()).collect();
    let mut used = vec![false; real.len()];
    let mut scored = Vec::new();
    for &i in &order {
        let d = &dets[i];
        let mut best: Option<(usize, f64)> = None;
        for (gi, g) in real.iter().enumerate() {
            if used[gi] {
                continue;
            }
            let ov = iou_ref(&d.bbox, &g.bbox);
            if ov >= threshold && best.is_none_or(|(_, b)| ov > b) {
                best = Some((gi, ov));
            }
        }
        if let Some((gi, _)) = best {
            used[gi] = true;
            scored.push((d.confidence, true));
        } else if ignores
            .iter()
            .any(|g| iou_ref(&d.bbox, &g.bbox) >= threshold)
        {
            // excluded from scoring entirely
        } else {
            scored.push((d.confidence, false));
        }
    }
    (scored, real.len())
}

/// AP directly from the 101-point definition: at each recall level, the
/// maximum precision over every ranked prefix reaching that recall.
fn ap_by_definition(scored: &[(f64, bool)], num_gt: usize) -> Option<f64> {
    if num_gt == 0 {
        return None;
    }
    if scored.is_empty() {
        return Some(0.0);
    }
    let mut sorted = scored.to_vec();
    sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut total = 0.0;
    for step in 0..=100u32 {
        let r = step as f64 / 100.0;
        let mut best = 0.0f64;
        let mut tp = 0usize;
        for (k, (_, is_tp)) in sorted.iter().enumerate() {
            if *is_tp {
                tp += 1;
            }
            if tp as f64 / num_gt as f64 >= r - 1e-12 {
                best = best.max(tp as f64 / (k + 1) as f64);
            }
        }
        total += best;
    }
    Some(total / 101.0)
}

pub struct RefReport {
    pub ap50: Vec<Option<f64>>,
    pub ap50_95: Vec<Option<f64>>,
    pub map50: f64,
    pub map50_95: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Full reference evaluation: per-class AP at each threshold, mAPs, and the
/// pooled maximum-F1 precision/recall at IoU 0.5.
pub fn reference_evaluate(
    dets_by_frame: &BTreeMap<String, Vec<Detection>>,
    gts_by_frame: &BTreeMap<String, Vec<Annotation>>,
    num_classes: usize,
) -> RefReport {
    let thresholds: Vec<f64> = (0..10).map(|i| 0.5 + 0.05 * i as f64).collect();
    let mut ap = vec![vec![None; thresholds.len()]; num_classes];
    let mut gt_counts = vec![0usize; num_classes];
    let mut pooled_primary: Vec<(f64, bool)> = Vec::new();

    for class in 0..num_classes {
        for (ti, &t) in thresholds.iter().enumerate() {
            let mut scored = Vec::new();
            let mut num_gt = 0usize;
            for (frame, gts) in gts_by_frame {
                let empty = Vec::new();
                let dets = dets_by_frame.get(frame).unwrap_or(&empty);
                let class_dets: Vec<Detection> = dets
                    .iter()
                    .filter(|d| d.class_id == class)
                    .cloned()
                    .collect();
                let class_gts: Vec<Annotation> = gts
                    .iter()
                    .filter(|g| g.ignore() || g.class == Some(class))
                    .cloned()
                    .collect();
                let (s, n) = match_one_frame(&class_dets, &class_gts, t);
                scored.extend(s);
                num_gt += n;
            }
            if ti == 0 {
                gt_counts[class] = num_gt;
                pooled_primary.extend(scored.iter().copied());
            }
            ap[class][ti] = ap_by_definition(&scored, num_gt);
        }
    }

    let ap50: Vec<Option<f64>> = ap.iter().map(|row| row[0]).collect();
    let ap50_95: Vec<Option<f64>> = ap
        .iter()
        .zip(&gt_counts)
        .map(|(row, &n)| {
            if n == 0 {
                None
            } else {
                let vals: Vec<f64> = row.iter().filter_map(|a| *a).collect();
                Some(vals.iter().sum::<f64>() / vals.len() as f64)
            }
        })
        .collect();
    let mean = |vals: &[Option<f64>]| {
        let defined: Vec<f64> = vals.iter().filter_map(|a| *a).collect();
        if defined.is_empty() {
            0.0
        } else {
            defined.iter().sum::<f64>() / defined.len() as f64
        }
    };

    // pooled maximum-F1 search, cutting only where confidence changes
    pooled_primary.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let total_gt: usize = gt_counts.iter().sum();
    let mut best = (0.0f64, 0.0f64, 0.0f64);
    let mut tp = 0usize;
    for k in 0..pooled_primary.len() {
        if pooled_primary[k].1 {
            tp += 1;
        }
        if k + 1 < pooled_primary.len() && pooled_primary[k + 1].0 == pooled_primary[k].0 {
            continue;
        }
        let p = tp as f64 / (k + 1) as f64;
        let r = if total_gt == 0 {
            0.0
        } else {
            tp as f64 / total_gt as f64
        };
        let f1 = if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        };
        if f1 > best.0 {
            best = (f1, p, r);
        }
    }

    RefReport {
        map50: mean(&ap50),
        map50_95: mean(&ap50_95),
        ap50,
        ap50_95,
        precision: best.1,
        recall: best.2,
    }
}
