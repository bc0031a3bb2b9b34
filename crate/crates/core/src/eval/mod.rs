//! Scoring predictions against gold records.

mod discrimination;
mod metrics;
mod table;
mod taxonomy;

pub use discrimination::{confidence_discrimination, Bucket, Discrimination};
pub use metrics::{
    classification_metrics, classification_metrics_with, extraction_metrics, label_all,
    metrics_from_labels, Averaging, ClassStats, ClassificationMetrics, ExtractionMetrics,
    LabelCounts, MetricsError,
};
pub use table::EvalReport;
pub use taxonomy::{classify_field, label_record, ErrorLabel, INEXACT_BAND, TAXONOMY_TOL};
