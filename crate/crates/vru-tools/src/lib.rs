//! File-format and filesystem companions to `vru-core`: dataset scanning,
//! source-to-YOLO conversion, image IO, detection-directory IO, the
//! augmentation runner, and the synthetic fixture generator backing the
//! `vru` command-line tool.

pub mod augment_run;
pub mod convert;
pub mod detio;
pub mod error;
pub mod fixtures;
pub mod imageio;
pub mod scan;
pub mod yolo_tree;

pub use error::{Result, ToolError};
