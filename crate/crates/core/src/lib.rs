//! Analysis and simulation toolkit for chick-robot interaction experiments.
//!
//! The pipeline runs from pose-tracking CSV files to preference metrics and
//! Beta mixed-model inference:
//!
//! - [`ingest`]: tracking CSV parsing, likelihood QC, 1 Hz downsampling and gap filling.
//! - [`arena`]: arena layouts, stimulus zones, pixel calibration and chance levels.
//! - [`metrics`]: zone occupancy and binned preference proportions.
//! - [`betamm`]: Beta mixed-effects regression, Wald tests and marginal means.
//! - [`protocol`]: simulation of the pneumatic breathing and heating controller.
//! - [`synth`]: synthetic chick trajectories with known preferences.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arena;
pub mod betamm;
pub mod ingest;
pub mod metrics;
pub mod protocol;
pub mod synth;

pub use arena::{ArenaLayout, Metric, Side, Zone};
