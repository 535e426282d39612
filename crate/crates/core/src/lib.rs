//! Metadata-calibrated method factor for common method variance.
//!
//! The pipeline fits a trait-only CFA/SEM, turns the residual correlation
//! pattern into an item-level signal, ridge-regresses that signal on encoded
//! questionnaire metadata, and refits the model with an orthogonal method
//! factor whose loadings are fixed to the calibrated weights.

pub mod calibrate;
pub mod error;
pub mod export;
pub mod features;
pub mod ingest;
pub mod linalg;
pub mod pipeline;
pub mod report;
pub mod sem;
pub mod simulate;

pub use error::{FamfError, Result};
