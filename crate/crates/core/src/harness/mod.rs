//! Orchestration: configuration, training, evaluation, ablation and reports.

pub mod ablate;
pub mod args;
pub mod bundle;
pub mod config;
pub mod eval;
pub mod metrics;
pub mod report;
pub mod train;
pub mod variant;

pub use ablate::{ablate, ablate_seeds, run_variant, AblationRun};
pub use bundle::{ModelBundle, Normalizer};
pub use config::{Profile, RunConfig};
pub use eval::{evaluate, Evaluation, MetricsReport};
pub use metrics::{accuracy, binary_auc, compute_auc, AucResult};
pub use report::ReportFormat;
pub use train::{train, EpochLosses, TrainOutcome};
pub use variant::Variant;
