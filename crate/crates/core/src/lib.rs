//! Gaze-based evaluation of reader studies on real versus synthetic images.
//!
//! The pipeline runs from raw binocular eye-tracking samples to study tables:
//!
//! * [`ingest`] parses gaze CSVs, session manifests and stimulus catalogs.
//! * [`fixation`] turns sample streams into fixations.
//! * [`saliency`] builds attention maps and gaze masks from fixations.
//! * [`metrics`] compares maps, masks and scanpaths, including inter-observer
//!   congruency.
//! * [`study`] scores the diagnostic and real-or-synthetic tasks and provides
//!   the statistics used in the report.
//! * [`report`] drives the whole pipeline and writes the report tables.
//! * [`sim`] generates seeded synthetic studies for testing.

pub mod cli;
pub mod config;
pub mod error;
pub mod fixation;
pub mod ingest;
pub mod metrics;
pub mod report;
pub mod saliency;
pub mod sim;
pub mod study;

pub use error::{Error, ErrorKind, Result};
