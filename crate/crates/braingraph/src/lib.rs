//! Benchmarking graph neural networks on functional-connectivity
//! classification.
//!
//! The crate covers the full pipeline: loading or synthesizing ROI
//! timeseries, estimating connectivity, thresholding and diffusing
//! adjacency, training graph/baseline models with a hand-rolled
//! reverse-mode tape, and nested-validation experiment drivers with
//! CSV reporting.

pub mod datasets;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod models;
pub mod numerics;
pub mod parallel;
pub mod plot;

pub use error::{Error, Result};
