//! Dataset statistics and class-imbalance weights.
//!
//! Instance histograms reproduce the combined-dataset statistics tables;
//! weights implement inverse-frequency re-weighting with a cap so extreme
//! minority classes cannot blow up the loss scale.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::DatasetIndex;
use crate::mapping::{Annotation, DONT_CARE};

/// Dataset split tag carried by histograms and summaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
}

/// Per-class instance counts. Ignore regions are tallied under the
/// dedicated "Don't care" bucket and excluded from weight computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassHistogram {
    pub counts: BTreeMap<String, u64>,
    pub split: Split,
    pub modality: crate::geometry::Modality,
}

impl ClassHistogram {
    pub fn empty(
        class_names: &[String],
        split: Split,
        modality: crate::geometry::Modality,
    ) -> Self {
        let mut counts: BTreeMap<String, u64> =
            class_names.iter().map(|n| (n.clone(), 0)).collect();
        counts.insert(DONT_CARE.to_string(), 0);
        Self {
            counts,
            split,
            modality,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Elementwise sum; merge order never affects the result.
    pub fn merge(&mut self, other: &ClassHistogram) {
        for (name, n) in &other.counts {
            *self.counts.entry(name.clone()).or_insert(0) += n;
        }
    }
}

/// Counts instances per class name. `class_names` gives the dense-id to
/// name mapping for the annotations' class ids.
pub fn count_instances<'a>(
    annos: impl IntoIterator<Item = &'a Annotation>,
    class_names: &[String],
    split: Split,
    modality: crate::geometry::Modality,
) -> ClassHistogram {
    let mut hist = ClassHistogram::empty(class_names, split, modality);
    for a in annos {
        let bucket = match a.class {
            Some(id) => class_names
                .get(id)
                .cloned()
                .unwrap_or_else(|| format!("class_{id}")),
            None => DONT_CARE.to_string(),
        };
        *hist.counts.entry(bucket).or_insert(0) += 1;
    }
    hist
}

/// Weighting scheme for imbalance-aware loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    InverseFreq,
    InverseSqrt,
    Uniform,
}

/// Per-class loss weights, normalized to mean 1 over classes with nonzero
/// counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub class_names: Vec<String>,
    pub weights: Vec<f64>,
    pub scheme: WeightScheme,
    pub cap: f64,
}

impl ClassWeights {
    /// JSON object `{class_name: weight}` for external trainers.
    pub fn to_json(&self) -> String {
        let map: BTreeMap<&str, f64> = self
            .class_names
            .iter()
            .map(|n| n.as_str())
            .zip(self.weights.iter().copied())
            .collect();
        serde_json::to_string_pretty(&map).expect("weight map serializes")
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("all class counts are zero")]
    AllZero,
    #[error("cap must be >= 1, got {0}")]
    BadCap(f64),
    #[error("epsilon must be >= 1, got {0}")]
    BadEpsilon(u64),
}

/// Computes per-class weights from a histogram. The "Don't care" bucket is
/// excluded. Inverse frequency uses `N / (K * max(n_c, epsilon))`, clipped
/// to `cap` and renormalized to mean 1 over nonzero-count classes;
/// zero-count classes receive the cap weight.
pub fn compute_class_weights(
    hist: &ClassHistogram,
    scheme: WeightScheme,
    cap: f64,
    epsilon: u64,
) -> Result<ClassWeights, StatsError> {
    if cap < 1.0 || !cap.is_finite() {
        return Err(StatsError::BadCap(cap));
    }
    if epsilon < 1 {
        return Err(StatsError::BadEpsilon(epsilon));
    }
    let classes: Vec<(String, u64)> = hist
        .counts
        .iter()
        .filter(|(name, _)| name.as_str() != DONT_CARE)
        .map(|(name, &n)| (name.clone(), n))
        .collect();
    let total: u64 = classes.iter().map(|(_, n)| n).sum();
    if total == 0 {
        return Err(StatsError::AllZero);
    }
    let nonzero = classes.iter().filter(|(_, n)| *n > 0).count() as f64;

    let mut weights: Vec<f64> = classes
        .iter()
        .map(|(_, n)| match scheme {
            WeightScheme::Uniform => 1.0,
            _ if *n == 0 => cap,
            WeightScheme::InverseFreq => {
                (total as f64 / (nonzero * (*n).max(epsilon) as f64)).min(cap)
            }
            WeightScheme::InverseSqrt => {
                libm::sqrt(total as f64 / (nonzero * (*n).max(epsilon) as f64)).min(cap)
            }
        })
        .collect();

    // Renormalize over nonzero-count classes to mean 1, re-clipping until
    // the cap and the mean contract both hold.
    for _ in 0..1000 {
        let (sum, k) = classes
            .iter()
            .zip(&weights)
            .filter(|((_, n), _)| *n > 0)
            .fold((0.0, 0u32), |(s, k), (_, w)| (s + w, k + 1));
        let mean = sum / k as f64;
        let mut clipped = false;
        for ((_, n), w) in classes.iter().zip(weights.iter_mut()) {
            if *n > 0 {
                *w /= mean;
                if *w > cap {
                    *w = cap;
                    clipped = true;
                }
            }
        }
        if !clipped {
            break;
        }
    }

    Ok(ClassWeights {
        class_names: classes.into_iter().map(|(n, _)| n).collect(),
        weights,
        scheme,
        cap,
    })
}

/// One (split, modality) row of the dataset summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub split: String,
    pub modality: crate::geometry::Modality,
    pub images: u64,
    pub labels: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
    pub total_images: u64,
    pub total_labels: u64,
}

/// Aggregates dataset indexes into the image/label-count summary table.
pub fn dataset_summary(indexes: &[DatasetIndex]) -> SummaryTable {
    let rows: Vec<SummaryRow> = indexes
        .iter()
        .map(|ix| SummaryRow {
            split: ix.split.clone(),
            modality: ix.modality,
            images: ix.image_count,
            labels: ix.label_file_count,
        })
        .collect();
    let total_images = rows.iter().map(|r| r.images).sum();
    let total_labels = rows.iter().map(|r| r.labels).sum();
    SummaryTable {
        rows,
        total_images,
        total_labels,
    }
}

impl SummaryTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("split,modality,images,labels\n");
        for r in &self.rows {
            let modality = match r.modality {
                crate::geometry::Modality::Rgb => "rgb",
                crate::geometry::Modality::Thermal => "thermal",
            };
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.split, modality, r.images, r.labels
            ));
        }
        out.push_str(&format!(
            "total,,{},{}\n",
            self.total_images, self.total_labels
        ));
        out
    }

    pub fn to_aligned_text(&self) -> String {
        let mut out = format!(
            "{:<12} {:<8} {:>10} {:>10}\n",
            "Split", "Modality", "Images", "Labels"
        );
        for r in &self.rows {
            let modality = match r.modality {
                crate::geometry::Modality::Rgb => "rgb",
                crate::geometry::Modality::Thermal => "thermal",
            };
            out.push_str(&format!(
                "{:<12} {:<8} {:>10} {:>10}\n",
                r.split, modality, r.images, r.labels
            ));
        }
        out.push_str(&format!(
            "{:<12} {:<8} {:>10} {:>10}\n",
            "total", "", self.total_images, self.total_labels
        ));
        out
    }
}
