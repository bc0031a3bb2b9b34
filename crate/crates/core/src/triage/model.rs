use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::confidence::ConfidenceBundle;
use crate::report::{CmrRecord, FieldId, FieldValue};

/// Field marker used in the id of a whole-report item.
pub const WHOLE_REPORT: &str = "*";

pub fn item_id(report_id: &str, field: Option<FieldId>) -> String {
    match field {
        Some(f) => format!("{report_id}:{f}"),
        None => format!("{report_id}:{WHOLE_REPORT}"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemStatus {
    Pending,
    Accepted,
    Corrected,
}

impl std::str::FromStr for ItemStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pending" => Ok(ItemStatus::Pending),
            "accepted" => Ok(ItemStatus::Accepted),
            "corrected" => Ok(ItemStatus::Corrected),
            other => Err(format!("unknown status `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub dist: f64,
    pub stab: f64,
    pub cons: f64,
}

/// One value awaiting a reviewer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub item_id: String,
    pub report_id: String,
    /// `None` for the item covering a report none of whose samples parsed.
    pub field: Option<FieldId>,
    pub extracted: FieldValue,
    pub confidence: f64,
    pub score_breakdown: ScoreBreakdown,
    pub status: ItemStatus,
    /// The full scrubbed report.
    pub report_excerpt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    /// Keep the extracted value. On a whole-report item this rejects the
    /// report.
    Accept,
    /// Replace the value of a field item.
    Correct { new_value: FieldValue },
    /// Supply the full record for a whole-report item.
    Replace { record: CmrRecord },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewDecision {
    pub item_id: String,
    #[serde(flatten)]
    pub verdict: Verdict,
    pub reviewer: String,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportState {
    /// Aggregation produced a record.
    Extracted,
    /// No sample parsed; waiting on the whole-report item.
    Unparsed,
    /// A reviewer rejected an unparseable report.
    Rejected,
}

/// A report as ingested, plus its current reviewed record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredReport {
    pub report_id: String,
    pub text: String,
    pub state: ReportState,
    /// The aggregated record exactly as produced by extraction.
    pub extracted: Option<CmrRecord>,
    /// The record with all decisions so far applied.
    pub current: Option<CmrRecord>,
    pub bundle: Option<ConfidenceBundle>,
    /// Reference record, only held in evaluation runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<CmrRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewState {
    /// No field was ever flagged.
    Clean,
    /// Every flagged field has a decision.
    Reviewed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFilter {
    CleanOnly,
    #[default]
    AllReviewed,
}

impl std::str::FromStr for ExportFilter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "clean_only" | "clean" => Ok(ExportFilter::CleanOnly),
            "all_reviewed" | "reviewed" | "all" => Ok(ExportFilter::AllReviewed),
            other => Err(format!("unknown export filter `{other}`")),
        }
    }
}

/// One line of the training corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub report_id: String,
    pub prompt: String,
    /// Canonical serialized record, `CATEGORY` last.
    pub target: String,
    pub review_state: ReviewState,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decision_wire_shape() {
        let d = ReviewDecision {
            item_id: "R1:LVEF".into(),
            verdict: Verdict::Correct { new_value: FieldValue::Present(65.0) },
            reviewer: "a".into(),
            timestamp: "2024-05-01T00:00:00Z".parse().unwrap(),
        };
        let v = serde_json::to_value(&d).unwrap();
        assert_eq!(v["verdict"], "correct");
        assert_eq!(v["new_value"], 65.0);
        let back: ReviewDecision = serde_json::from_value(v).unwrap();
        assert_eq!(back, d);
        assert_eq!(item_id("R1", None), "R1:*");
    }
}
