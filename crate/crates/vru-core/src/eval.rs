//! Detection scoring: greedy matching with ignore regions, per-class AP at
//! IoU 0.5 and averaged over 0.50:0.95, and pooled precision/recall at the
//! confidence maximizing F1.
//!
//! AP uses 101-point interpolation of the monotone precision envelope
//! sampled at recall {0.00, 0.01, ..., 1.00}. Classes with zero ground-truth
//! instances have undefined AP and are excluded from the mean (reported as
//! absent, not zero).

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{from_normalized, iou, Detection, Modality, NormalizedBox};
use crate::ingest::ParseError;
use crate::mapping::Annotation;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("detection frames missing from ground truth: {0:?}")]
    FrameMismatch(Vec<String>),
    #[error("no IoU thresholds configured")]
    NoThresholds,
    #[error(transparent)]
    Parse(#[from] ParseError),
}

/// Evaluation parameters. The default IoU range is 0.50:0.95 in steps of
/// 0.05 with 0.50 as the primary threshold; both are configurable.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub class_names: Vec<String>,
    pub iou_thresholds: Vec<f64>,
    pub primary_threshold: f64,
}

impl EvalConfig {
    pub fn new(class_names: Vec<String>) -> Self {
        Self {
            class_names,
            iou_thresholds: (0..10).map(|i| 0.5 + 0.05 * i as f64).collect(),
            primary_threshold: 0.5,
        }
    }
}

/// Outcome of one scored detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchOutcome {
    TruePositive,
    FalsePositive,
    /// Overlapped an ignore region; excluded from scoring entirely.
    Ignored,
}

/// Per-frame, per-class matching result at one IoU threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// (confidence, outcome) per detection, in descending confidence order.
    pub detections: Vec<(f64, MatchOutcome)>,
    /// Number of non-ignore ground-truth instances.
    pub num_gt: usize,
}

/// Greedy matching for a single frame and class slice. Each detection, in
/// descending confidence, matches the highest-IoU unmatched non-ignore GT
/// with IoU >= threshold; otherwise it is excluded if it overlaps an ignore
/// region at the threshold, else counted as a false positive.
pub fn match_detections(dets: &[Detection], gts: &[Annotation], iou_threshold: f64) -> MatchResult {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&i, &j| {
        crate::geometry::detection_order(
            (dets[i].class_id, &dets[i].bbox, dets[i].confidence),
            (dets[j].class_id, &dets[j].bbox, dets[j].confidence),
        )
    });
    let real_gts: Vec<&Annotation> = gts.iter().filter(|g| !g.ignore()).collect();
    let ignore_gts: Vec<&Annotation> = gts.iter().filter(|g| g.ignore()).collect();
    let mut gt_used = alloc::vec![false; real_gts.len()];
    let mut out = Vec::with_capacity(dets.len());
    for &di in &order {
        let det = &dets[di];
        let mut best: Option<(usize, f64)> = None;
        for (gi, gt) in real_gts.iter().enumerate() {
            if gt_used[gi] {
                continue;
            }
            let ov = iou(&det.bbox, &gt.bbox);
            if ov >= iou_threshold && best.is_none_or(|(_, b)| ov > b) {
                best = Some((gi, ov));
            }
        }
        let outcome = if let Some((gi, _)) = best {
            gt_used[gi] = true;
            MatchOutcome::TruePositive
        } else if ignore_gts
            .iter()
            .any(|g| iou(&det.bbox, &g.bbox) >= iou_threshold)
        {
            MatchOutcome::Ignored
        } else {
            MatchOutcome::FalsePositive
        };
        out.push((det.confidence, outcome));
    }
    MatchResult {
        detections: out,
        num_gt: real_gts.len(),
    }
}

/// AP from pooled (confidence, is-TP) pairs and a ground-truth count.
/// Returns `None` when the class has no ground truth.
pub fn average_precision(scored: &[(f64, bool)], num_gt: usize) -> Option<f64> {
    if num_gt == 0 {
        return None;
    }
    if scored.is_empty() {
        return Some(0.0);
    }
    let mut scored: Vec<(f64, bool)> = scored.to_vec();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(core::cmp::Ordering::Equal));
    let mut precisions = Vec::with_capacity(scored.len());
    let mut recalls = Vec::with_capacity(scored.len());
    let mut tp = 0usize;
    for (k, (_, is_tp)) in scored.iter().enumerate() {
        if *is_tp {
            tp += 1;
        }
        precisions.push(tp as f64 / (k + 1) as f64);
        recalls.push(tp as f64 / num_gt as f64);
    }
    // monotone envelope from the right
    for i in (0..precisions.len().saturating_sub(1)).rev() {
        if precisions[i] < precisions[i + 1] {
            precisions[i] = precisions[i + 1];
        }
    }
    let mut total = 0.0;
    for step in 0..=100u32 {
        let r = step as f64 / 100.0;
        // first index with recall >= r
        let p = recalls
            .iter()
            .position(|&rec| rec >= r - 1e-12)
            .map(|i| precisions[i])
            .unwrap_or(0.0);
        total += p;
    }
    Some(total / 101.0)
}

/// Per-class evaluation results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassEval {
    pub name: String,
    pub num_gt: u64,
    pub ap50: Option<f64>,
    pub ap50_95: Option<f64>,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    /// (recall, precision) envelope samples at the primary IoU threshold.
    pub pr_curve: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_class: Vec<ClassEval>,
    pub map50: f64,
    pub map50_95: f64,
    /// Precision at the confidence maximizing pooled F1 (the "Box" column
    /// of detector summaries).
    pub precision: f64,
    pub recall: f64,
    pub f1_confidence: f64,
    /// False when no detections exist and precision defaults to 0.
    pub precision_defined: bool,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned table mirroring detector-summary columns.
    pub fn to_aligned_text(&self) -> String {
        let fmt_opt = |v: Option<f64>| match v {
            Some(x) => format!("{x:.3}"),
            None => "-".to_string(),
        };
        let mut out = format!(
            "{:<14} {:>9} {:>7} {:>7} {:>7} {:>9}\n",
            "Class", "Instances", "Box", "Recall", "mAP50", "mAP50:95"
        );
        out.push_str(&format!(
            "{:<14} {:>9} {:>7.3} {:>7.3} {:>7.3} {:>9.3}\n",
            "all",
            self.per_class.iter().map(|c| c.num_gt).sum::<u64>(),
            self.precision,
            self.recall,
            self.map50,
            self.map50_95,
        ));
        for c in &self.per_class {
            let denom = c.tp + c.fn_;
            let class_recall = if denom == 0 {
                "-".to_string()
            } else {
                format!("{:.3}", c.tp as f64 / denom as f64)
            };
            let class_prec = if c.tp + c.fp == 0 {
                "-".to_string()
            } else {
                format!("{:.3}", c.tp as f64 / (c.tp + c.fp) as f64)
            };
            out.push_str(&format!(
                "{:<14} {:>9} {:>7} {:>7} {:>7} {:>9}\n",
                c.name,
                c.num_gt,
                class_prec,
                class_recall,
                fmt_opt(c.ap50),
                fmt_opt(c.ap50_95),
            ));
        }
        out
    }
}

fn mean_of(values: impl Iterator<Item = f64>) -> (f64, usize) {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in values {
        sum += v;
        n += 1;
    }
    if n == 0 {
        (0.0, 0)
    } else {
        (sum / n as f64, n)
    }
}

/// Scores detections against ground truth over all frames. Detection frames
/// absent from the ground-truth set are an alignment error; ground-truth
/// frames without a detection entry count as zero detections.
pub fn evaluate(
    dets_by_frame: &BTreeMap<String, Vec<Detection>>,
    gts_by_frame: &BTreeMap<String, Vec<Annotation>>,
    config: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    if config.iou_thresholds.is_empty() {
        return Err(EvalError::NoThresholds);
    }
    let offenders: Vec<String> = dets_by_frame
        .keys()
        .filter(|f| !gts_by_frame.contains_key(*f))
        .cloned()
        .collect();
    if !offenders.is_empty() {
        return Err(EvalError::FrameMismatch(offenders));
    }

    let num_classes = config.class_names.len();
    let empty: Vec<Detection> = Vec::new();

    // scored[class][threshold] = pooled (conf, is_tp); gt_counts per class
    let mut scored: Vec<Vec<Vec<(f64, bool)>>> =
        alloc::vec![alloc::vec![Vec::new(); config.iou_thresholds.len()]; num_classes];
    let mut gt_counts = alloc::vec![0usize; num_classes];

    for (frame, gts) in gts_by_frame {
        let dets = dets_by_frame.get(frame).unwrap_or(&empty);
        for class in 0..num_classes {
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
            for (ti, &threshold) in config.iou_thresholds.iter().enumerate() {
                let result = match_detections(&class_dets, &class_gts, threshold);
                if ti == 0 {
                    gt_counts[class] += result.num_gt;
                }
                scored[class][ti].extend(result.detections.iter().filter_map(|(conf, outcome)| {
                    match outcome {
                        MatchOutcome::TruePositive => Some((*conf, true)),
                        MatchOutcome::FalsePositive => Some((*conf, false)),
                        MatchOutcome::Ignored => None,
                    }
                }));
            }
        }
    }

    let primary_idx = config
        .iou_thresholds
        .iter()
        .position(|&t| (t - config.primary_threshold).abs() < 1e-9)
        .unwrap_or(0);

    // pooled max-F1 search at the primary threshold
    let mut pooled: Vec<(f64, bool)> = Vec::new();
    for class_scored in &scored {
        pooled.extend(class_scored[primary_idx].iter().copied());
    }
    pooled.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(core::cmp::Ordering::Equal));
    let total_gt: usize = gt_counts.iter().sum();
    let mut best = (0.0f64, 0.0f64, 0.0f64, 0.0f64); // (f1, precision, recall, confidence)
    let precision_defined = !pooled.is_empty();
    let mut tp = 0usize;
    for k in 0..pooled.len() {
        if pooled[k].1 {
            tp += 1;
        }
        // only cut at confidence-group boundaries
        if k + 1 < pooled.len() && pooled[k + 1].0 == pooled[k].0 {
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
            best = (f1, p, r, pooled[k].0);
        }
    }

    // per-class confusion counts at the max-F1 confidence
    let conf_star = best.3;
    let mut confusion = alloc::vec![(0u64, 0u64, 0u64); num_classes];
    for (frame, gts) in gts_by_frame {
        let dets = dets_by_frame.get(frame).unwrap_or(&empty);
        for (class, counts) in confusion.iter_mut().enumerate() {
            let class_dets: Vec<Detection> = dets
                .iter()
                .filter(|d| d.class_id == class && d.confidence >= conf_star)
                .cloned()
                .collect();
            let class_gts: Vec<Annotation> = gts
                .iter()
                .filter(|g| g.ignore() || g.class == Some(class))
                .cloned()
                .collect();
            let result = match_detections(&class_dets, &class_gts, config.primary_threshold);
            let tp = result
                .detections
                .iter()
                .filter(|(_, o)| *o == MatchOutcome::TruePositive)
                .count() as u64;
            let fp = result
                .detections
                .iter()
                .filter(|(_, o)| *o == MatchOutcome::FalsePositive)
                .count() as u64;
            counts.0 += tp;
            counts.1 += fp;
            counts.2 += result.num_gt as u64 - tp;
        }
    }

    let mut per_class = Vec::with_capacity(num_classes);
    for class in 0..num_classes {
        let ap_per_threshold: Vec<Option<f64>> = (0..config.iou_thresholds.len())
            .map(|ti| average_precision(&scored[class][ti], gt_counts[class]))
            .collect();
        let ap50 = ap_per_threshold[primary_idx];
        let ap50_95 = if gt_counts[class] == 0 {
            None
        } else {
            let (mean, _) = mean_of(ap_per_threshold.iter().filter_map(|a| *a));
            Some(mean)
        };
        per_class.push(ClassEval {
            name: config.class_names[class].clone(),
            num_gt: gt_counts[class] as u64,
            ap50,
            ap50_95,
            tp: confusion[class].0,
            fp: confusion[class].1,
            fn_: confusion[class].2,
            pr_curve: pr_curve_samples(&scored[class][primary_idx], gt_counts[class]),
        });
    }

    let (map50, _) = mean_of(per_class.iter().filter_map(|c| c.ap50));
    let (map50_95, _) = mean_of(per_class.iter().filter_map(|c| c.ap50_95));

    Ok(EvalReport {
        per_class,
        map50,
        map50_95,
        precision: best.1,
        recall: best.2,
        f1_confidence: best.3,
        precision_defined,
    })
}

/// 101-point (recall, envelope precision) samples for one class.
fn pr_curve_samples(scored: &[(f64, bool)], num_gt: usize) -> Vec<(f64, f64)> {
    if num_gt == 0 {
        return Vec::new();
    }
    let mut scored: Vec<(f64, bool)> = scored.to_vec();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(core::cmp::Ordering::Equal));
    let mut precisions = Vec::with_capacity(scored.len());
    let mut recalls = Vec::with_capacity(scored.len());
    let mut tp = 0usize;
    for (k, (_, is_tp)) in scored.iter().enumerate() {
        if *is_tp {
            tp += 1;
        }
        precisions.push(tp as f64 / (k + 1) as f64);
        recalls.push(tp as f64 / num_gt as f64);
    }
    for i in (0..precisions.len().saturating_sub(1)).rev() {
        if precisions[i] < precisions[i + 1] {
            precisions[i] = precisions[i + 1];
        }
    }
    (0..=100u32)
        .map(|step| {
            let r = step as f64 / 100.0;
            let p = recalls
                .iter()
                .position(|&rec| rec >= r - 1e-12)
                .map(|i| precisions[i])
                .unwrap_or(0.0);
            (r, p)
        })
        .collect()
}

/// Parses a per-frame detection text file: lines of
/// `class_id confidence cx cy w h` with normalized coordinates. The boxes
/// come back in corner form on the unit square, which preserves IoU.
pub fn parse_detection_file(text: &str, modality: Modality) -> Result<Vec<Detection>, ParseError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(ParseError::FieldCount {
                line,
                expected: 6,
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
        let mut vals = [0.0f64; 5];
        for (i, tok) in fields[1..].iter().enumerate() {
            vals[i] = tok.parse::<f64>().map_err(|_| ParseError::NonNumeric {
                line,
                value: tok.to_string(),
            })?;
        }
        let confidence = vals[0];
        if !(0.0..=1.0).contains(&confidence) {
            return Err(ParseError::CoordinateRange {
                line,
                value: confidence,
            });
        }
        for v in &vals[1..] {
            if !(-0.01..=1.01).contains(v) {
                return Err(ParseError::CoordinateRange { line, value: *v });
            }
        }
        let nbox = NormalizedBox::new(vals[1], vals[2], vals[3], vals[4])
            .map_err(|source| ParseError::BadBox { line, source })?;
        let bbox = from_normalized(&nbox, 1.0, 1.0)
            .map_err(|source| ParseError::BadBox { line, source })?;
        out.push(Detection {
            class_id: class_id as usize,
            bbox,
            confidence,
            modality,
        });
    }
    Ok(out)
}

/// Writes detections in the per-frame text format, boxes normalized against
/// the given image dimensions, six decimal places.
pub fn write_detection_file(dets: &[Detection], img_w: f64, img_h: f64) -> String {
    let mut out = String::new();
    for d in dets {
        if let Ok(n) = crate::geometry::to_normalized(&d.bbox, img_w, img_h) {
            out.push_str(&format!(
                "{} {:.6} {:.6} {:.6} {:.6} {:.6}\n",
                d.class_id, d.confidence, n.cx, n.cy, n.w, n.h
            ));
        }
    }
    out
}
