//! Scrub, sample, vote and score one report.

use serde::{Deserialize, Serialize};

use crate::confidence::{AggregateError, ConfidenceBundle, Scorer};
use crate::gateway::{extract_sampled, CompletionBackend, SampleSet, SamplingConfig, TransportError};
use crate::report::{scrub_phi, CmrRecord, FieldId};

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub report_id: String,
    pub scrubbed_text: String,
    pub samples: SampleSet,
    pub outcome: Result<(CmrRecord, ConfidenceBundle), AggregateError>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionStatus {
    Ok,
    AllInvalid,
}

/// Wire form of an [`Extraction`]; every record carries all 52 keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionOutput {
    pub report_id: String,
    pub status: ExtractionStatus,
    pub record: Option<CmrRecord>,
    pub confidence_bundle: Option<ConfidenceBundle>,
    pub flagged_fields: Vec<FieldId>,
    pub failed_samples: usize,
}

impl Extraction {
    pub fn output(&self) -> ExtractionOutput {
        let (status, record, bundle) = match &self.outcome {
            Ok((r, b)) => (ExtractionStatus::Ok, Some(r.clone()), Some(b.clone())),
            Err(AggregateError::AllInvalid(_)) => (ExtractionStatus::AllInvalid, None, None),
        };
        ExtractionOutput {
            report_id: self.report_id.clone(),
            status,
            flagged_fields: bundle.as_ref().map(ConfidenceBundle::flagged_fields).unwrap_or_default(),
            record,
            confidence_bundle: bundle,
            failed_samples: self.samples.failures(),
        }
    }
}

/// Runs the whole pipeline on one raw report. Identifier lines are
/// scrubbed before anything reaches the backend.
pub fn run_report(
    report_id: &str,
    raw_text: &str,
    backend: &dyn CompletionBackend,
    sampling: &SamplingConfig,
    scorer: &Scorer,
) -> Result<Extraction, TransportError> {
    let scrubbed_text = scrub_phi(raw_text);
    let samples = extract_sampled(report_id, &scrubbed_text, backend, sampling)?;
    let outcome = scorer.aggregate(&samples);
    Ok(Extraction { report_id: report_id.to_string(), scrubbed_text, samples, outcome })
}
