//! Core machinery for a multimodal (RGB + thermal) road-user detection
//! pipeline: annotation parsing and unification, class-imbalance statistics,
//! deterministic image augmentation, detection scoring, and late fusion.
//!
//! The crate is `no_std`-compatible (with `alloc`); file-system and image
//! codec concerns live in the companion `vru-tools` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod augment;
pub mod eval;
pub mod fusion;
pub mod geometry;
pub mod ingest;
pub mod manifest;
pub mod mapping;
pub mod stats;

pub use geometry::{BoundingBox, Detection, Modality, NormalizedBox};
pub use mapping::{Annotation, ClassFilter, LabelMap, MapTarget, UnifiedClass};
