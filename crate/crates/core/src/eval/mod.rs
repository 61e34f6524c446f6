//! Forgetting and retention metrics.

mod metrics;
mod mia;
mod report;

pub use metrics::{accuracy, h_mean, predictions, prediction_change_rate, Classifier};
pub use mia::{confidence_features, mia, mia_rate, ConfidenceAttack, MiaConfig, MiaFeature};
pub use report::{full_report, Fingerprints, MetricsReport};
