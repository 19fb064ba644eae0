//! The evaluation protocol: metric computation, the shared training
//! loop, exhaustive grid search on a held-out slice, outer k-fold
//! cross-validation, the sample-scaling study, and the threshold x
//! diffusion sweep — every family measured the same way.

pub mod config;
pub mod cv;
pub mod hypergrid;
pub mod inputs;
pub mod metrics;
pub mod report;
pub mod scaling;
pub mod search;
pub mod sweep;
pub mod train;

pub use config::ExperimentConfig;
pub use cv::{cross_validate, search_then_cv, ExperimentReport, FoldResult, MetricSummary, ProtocolAudit, StudyOutcome};
pub use hypergrid::HyperGrid;
pub use inputs::{Candidate, InputFactory, Predictor, Prepared};
pub use metrics::{compute_metrics, mean_std};
pub use scaling::{scaling_study, ScalePoint, ScalingReport};
pub use search::{grid_search, GridPoint, SearchOutcome};
pub use sweep::{threshold_sweep, SweepArms, SweepCell, SweepTable};
pub use train::{fit_candidate, train_model, FitOutcome, TrainOutcome, TrainSettings};
