//! Batch CLI and HTTP service around `cmrx-core`.

pub mod batch;
pub mod commands;
pub mod config;
pub mod lines;
pub mod service;

use cmrx_core::confidence::ConfidenceBundle;
use cmrx_core::eval::{
    classification_metrics, confidence_discrimination, label_all, metrics_from_labels, EvalReport, MetricsError,
};
use cmrx_core::report::{CmrRecord, DiagnosisCategory, ParseError};

pub use config::PipelineConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, config file or environment. Exit code 2.
    #[error("config error: {0}")]
    Config(String),
    /// Unreadable or inconsistent input data. Exit code 1.
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 1,
        }
    }
}

/// Extraction, category and (when every prediction carries scores)
/// discrimination metrics for aligned gold/prediction lists.
pub fn evaluate(
    golds: &[CmrRecord],
    preds: &[Result<CmrRecord, ParseError>],
    bundles: Option<&[ConfidenceBundle]>,
    threshold: f64,
) -> Result<EvalReport, MetricsError> {
    let labels = label_all(golds, preds)?;
    let extraction = metrics_from_labels(&labels);
    let gold_cats: Vec<DiagnosisCategory> = golds.iter().map(|g| g.category).collect();
    let pred_cats: Vec<DiagnosisCategory> = preds
        .iter()
        .map(|p| p.as_ref().map_or(DiagnosisCategory::Unspecified, |r| r.category))
        .collect();
    let classification = Some(classification_metrics(&gold_cats, &pred_cats)?);
    let discrimination = match bundles {
        Some(b) if b.len() == labels.len() => {
            let flat_labels: Vec<_> = labels.iter().flatten().copied().collect();
            let scores: Vec<f64> = b.iter().flat_map(|b| b.iter().map(|(_, s)| s.final_score)).collect();
            Some(confidence_discrimination(&flat_labels, &scores, threshold)?)
        }
        _ => None,
    };
    Ok(EvalReport { extraction, classification, discrimination })
}
