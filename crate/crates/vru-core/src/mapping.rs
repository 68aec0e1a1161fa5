//! Label unification: raw source classes are mapped to a 10-class unified
//! set, then optionally filtered down to the 7-class or 4-class subsets used
//! for VRU-focused training.
//!
//! Class-name matching is case-folded and whitespace-trimmed; the source
//! tables mix "Truck"/"truck" and "Bike"/"bike" without semantic intent.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{BoundingBox, Modality};
use crate::ingest::{SourceAnnotation, SourceDataset};

/// The unified class set, in canonical id order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum UnifiedClass {
    Car,
    Pedestrian,
    Cyclist,
    Bus,
    Truck,
    Animal,
    Motorcycle,
    Scooter,
    OtherVehicle,
}

impl UnifiedClass {
    pub const ALL: [UnifiedClass; 9] = [
        UnifiedClass::Car,
        UnifiedClass::Pedestrian,
        UnifiedClass::Cyclist,
        UnifiedClass::Bus,
        UnifiedClass::Truck,
        UnifiedClass::Animal,
        UnifiedClass::Motorcycle,
        UnifiedClass::Scooter,
        UnifiedClass::OtherVehicle,
    ];

    pub fn id(self) -> usize {
        Self::ALL.iter().position(|&c| c == self).unwrap()
    }

    pub fn name(self) -> &'static str {
        match self {
            UnifiedClass::Car => "Car",
            UnifiedClass::Pedestrian => "Pedestrian",
            UnifiedClass::Cyclist => "Cyclist",
            UnifiedClass::Bus => "Bus",
            UnifiedClass::Truck => "Truck",
            UnifiedClass::Animal => "Animal",
            UnifiedClass::Motorcycle => "Motorcycle",
            UnifiedClass::Scooter => "Scooter",
            UnifiedClass::OtherVehicle => "OtherVehicle",
        }
    }

    pub fn from_name(name: &str) -> Option<UnifiedClass> {
        let folded = name.trim().to_lowercase();
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.name().to_lowercase() == folded)
    }
}

/// Bucket name used for ignore regions in histograms and reports.
pub const DONT_CARE: &str = "Don't care";

/// Where a (dataset, source class) pair lands in the unified ontology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MapTarget {
    Unified(UnifiedClass),
    /// Keep the region but exclude it from training labels and evaluation
    /// penalties (KITTI DontCare semantics).
    Ignore,
    /// Remove the annotation entirely, counted in the skip report.
    Drop,
}

/// A ground-truth object carrying a unified class. `class` is `None` for
/// ignore regions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub class: Option<usize>,
    pub bbox: BoundingBox,
    pub source: SourceDataset,
    pub frame_id: String,
    pub modality: Modality,
}

impl Annotation {
    pub fn ignore(&self) -> bool {
        self.class.is_none()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MappingError {
    #[error("unmapped class '{class}' from {dataset} in frame '{frame}'")]
    UnmappedClass {
        dataset: SourceDataset,
        class: String,
        frame: String,
    },
    #[error("unknown target '{0}' in label-map override (expected a unified class name, 'Ignore', or 'Drop')")]
    UnknownTarget(String),
    #[error("unknown dataset '{0}' in label-map override (expected KITTI, BDD100K, or FLIR)")]
    UnknownDataset(String),
    #[error("class filter keeps no classes")]
    EmptyFilter,
}

/// Total mapping from (source dataset, case-folded class string) to a
/// unified class, ignore, or drop.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    entries: BTreeMap<(SourceDataset, String), MapTarget>,
    /// When set, class strings absent from the map are dropped instead of
    /// raising an error.
    pub wildcard_drop: bool,
}

impl LabelMap {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
            wildcard_drop: false,
        }
    }

    fn fold(class: &str) -> String {
        class.trim().to_lowercase()
    }

    pub fn insert(&mut self, dataset: SourceDataset, class: &str, target: MapTarget) {
        self.entries.insert((dataset, Self::fold(class)), target);
    }

    pub fn lookup(&self, dataset: SourceDataset, class: &str) -> Option<MapTarget> {
        self.entries.get(&(dataset, Self::fold(class))).copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(SourceDataset, String), &MapTarget)> {
        self.entries.iter()
    }

    /// Applies a JSON override of shape `{dataset: {source_class: target}}`
    /// on top of the existing entries. Targets are unified class names,
    /// `"Ignore"`, or `"Drop"`.
    pub fn apply_override_json(&mut self, text: &str) -> Result<(), MappingError> {
        let parsed: BTreeMap<String, BTreeMap<String, String>> = serde_json::from_str(text)
            .map_err(|e| MappingError::UnknownTarget(format!("invalid JSON: {e}")))?;
        for (dataset, classes) in parsed {
            let ds = match dataset.trim().to_lowercase().as_str() {
                "kitti" => SourceDataset::Kitti,
                "bdd100k" => SourceDataset::Bdd100k,
                "flir" => SourceDataset::Flir,
                _ => return Err(MappingError::UnknownDataset(dataset)),
            };
            for (class, target) in classes {
                let target = match target.trim().to_lowercase().as_str() {
                    "ignore" => MapTarget::Ignore,
                    "drop" => MapTarget::Drop,
                    _ => MapTarget::Unified(
                        UnifiedClass::from_name(&target)
                            .ok_or_else(|| MappingError::UnknownTarget(target.clone()))?,
                    ),
                };
                self.insert(ds, &class, target);
            }
        }
        Ok(())
    }
}

/// The default unification table.
///
/// KITTI's ignore class appears both as the literal file token "DontCare"
/// and the human-readable "Don't care"; both are mapped.
pub fn default_label_map() -> LabelMap {
    use MapTarget::{Ignore, Unified};
    use SourceDataset::{Bdd100k, Flir, Kitti};
    use UnifiedClass::*;

    let mut map = LabelMap::empty();
    let unified = |map: &mut LabelMap, ds, classes: &[&str], target| {
        for c in classes {
            map.insert(ds, c, Unified(target));
        }
    };

    unified(&mut map, Kitti, &["Car", "Van"], Car);
    unified(
        &mut map,
        Kitti,
        &["Pedestrian", "Person_sitting"],
        Pedestrian,
    );
    unified(&mut map, Kitti, &["Cyclist"], Cyclist);
    unified(&mut map, Kitti, &["Bus"], Bus);
    unified(&mut map, Kitti, &["Truck"], Truck);
    unified(&mut map, Kitti, &["Animal"], Animal);
    unified(&mut map, Kitti, &["Motorcycle"], Motorcycle);
    unified(&mut map, Kitti, &["Scooter"], Scooter);
    unified(&mut map, Kitti, &["Tram", "Misc"], OtherVehicle);
    map.insert(Kitti, "Don't care", Ignore);
    map.insert(Kitti, "DontCare", Ignore);

    unified(&mut map, Bdd100k, &["car"], Car);
    unified(&mut map, Bdd100k, &["person", "rider"], Pedestrian);
    unified(&mut map, Bdd100k, &["bike"], Cyclist);
    unified(&mut map, Bdd100k, &["bus"], Bus);
    unified(&mut map, Bdd100k, &["truck"], Truck);
    unified(&mut map, Bdd100k, &["motor"], Motorcycle);
    unified(&mut map, Bdd100k, &["train"], OtherVehicle);
    map.insert(Bdd100k, "traffic sign", Ignore);
    map.insert(Bdd100k, "traffic light", Ignore);

    unified(&mut map, Flir, &["car"], Car);
    unified(
        &mut map,
        Flir,
        &["person", "people", "stroller"],
        Pedestrian,
    );
    unified(&mut map, Flir, &["bike"], Cyclist);
    unified(&mut map, Flir, &["bus"], Bus);
    unified(&mut map, Flir, &["truck"], Truck);
    unified(&mut map, Flir, &["dog"], Animal);
    unified(&mut map, Flir, &["motor"], Motorcycle);
    unified(&mut map, Flir, &["scooter"], Scooter);
    unified(&mut map, Flir, &["train", "other vehicle"], OtherVehicle);
    for c in ["skateboard", "light", "hydrant", "sign"] {
        map.insert(Flir, c, Ignore);
    }

    map
}

/// Per-class record of annotations removed by `Drop` targets or the
/// wildcard rule.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SkipReport {
    pub dropped: BTreeMap<String, u64>,
}

impl SkipReport {
    pub fn total(&self) -> u64 {
        self.dropped.values().sum()
    }
}

/// Maps raw source annotations into the unified class set. Fails on the
/// first unmapped class unless the map's wildcard-drop rule is enabled;
/// on error no partial output is returned.
pub fn apply_label_map(
    annos: &[SourceAnnotation],
    map: &LabelMap,
) -> Result<(Vec<Annotation>, SkipReport), MappingError> {
    let mut out = Vec::with_capacity(annos.len());
    let mut report = SkipReport::default();
    for a in annos {
        let target = match map.lookup(a.source_dataset, &a.source_class) {
            Some(t) => t,
            None if map.wildcard_drop => MapTarget::Drop,
            None => {
                return Err(MappingError::UnmappedClass {
                    dataset: a.source_dataset,
                    class: a.source_class.clone(),
                    frame: a.frame_id.clone(),
                })
            }
        };
        match target {
            MapTarget::Unified(c) => out.push(Annotation {
                class: Some(c.id()),
                bbox: a.bbox,
                source: a.source_dataset,
                frame_id: a.frame_id.clone(),
                modality: a.modality,
            }),
            MapTarget::Ignore => out.push(Annotation {
                class: None,
                bbox: a.bbox,
                source: a.source_dataset,
                frame_id: a.frame_id.clone(),
                modality: a.modality,
            }),
            MapTarget::Drop => {
                *report
                    .dropped
                    .entry(LabelMap::fold(&a.source_class))
                    .or_insert(0) += 1;
            }
        }
    }
    Ok((out, report))
}

/// Named experiment subsets of the unified class set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterName {
    Full,
    SevenClass,
    FourClass,
    Custom,
}

/// A subset of unified classes retained for an experiment, in dense-id
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassFilter {
    pub name: FilterName,
    pub kept: Vec<UnifiedClass>,
}

impl ClassFilter {
    pub fn full() -> Self {
        Self {
            name: FilterName::Full,
            kept: UnifiedClass::ALL.to_vec(),
        }
    }

    pub fn seven_class() -> Self {
        use UnifiedClass::*;
        Self {
            name: FilterName::SevenClass,
            kept: [Car, Pedestrian, Cyclist, Truck, Bus, Motorcycle, Scooter].to_vec(),
        }
    }

    pub fn four_class() -> Self {
        use UnifiedClass::*;
        Self {
            name: FilterName::FourClass,
            kept: [Pedestrian, Cyclist, Motorcycle, Scooter].to_vec(),
        }
    }

    pub fn custom(kept: Vec<UnifiedClass>) -> Result<Self, MappingError> {
        if kept.is_empty() {
            return Err(MappingError::EmptyFilter);
        }
        Ok(Self {
            name: FilterName::Custom,
            kept,
        })
    }

    /// Dense class names in filtered-id order.
    pub fn class_names(&self) -> Vec<String> {
        self.kept.iter().map(|c| c.name().to_string()).collect()
    }

    /// Maps a unified class id to its dense id under this filter.
    pub fn dense_id(&self, unified_id: usize) -> Option<usize> {
        self.kept.iter().position(|c| c.id() == unified_id)
    }
}

/// Removes annotations outside the kept set and re-indexes the survivors
/// densely in kept-set order. Ignore regions are always retained.
pub fn apply_class_filter(
    annos: &[Annotation],
    filter: &ClassFilter,
) -> Result<Vec<Annotation>, MappingError> {
    if filter.kept.is_empty() {
        return Err(MappingError::EmptyFilter);
    }
    Ok(annos
        .iter()
        .filter_map(|a| match a.class {
            None => Some(a.clone()),
            Some(id) => filter.dense_id(id).map(|dense| {
                let mut a = a.clone();
                a.class = Some(dense);
                a
            }),
        })
        .collect())
}
