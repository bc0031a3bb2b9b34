use serde::{Deserialize, Serialize};

use super::taxonomy::{label_record, ErrorLabel};
use crate::report::{CmrRecord, DiagnosisCategory, FieldId, ParseError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("{gold} gold items but {pred} predictions")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("no items to evaluate")]
    EmptyInput,
}

/// Count of each label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LabelCounts {
    pub correct: usize,
    pub omission: usize,
    pub inexact: usize,
    pub confusion: usize,
    pub invalid: usize,
    pub other: usize,
}

impl LabelCounts {
    pub fn add(&mut self, label: ErrorLabel) {
        *self.slot(label) += 1;
    }

    fn slot(&mut self, label: ErrorLabel) -> &mut usize {
        match label {
            ErrorLabel::Correct => &mut self.correct,
            ErrorLabel::Omission => &mut self.omission,
            ErrorLabel::Inexact => &mut self.inexact,
            ErrorLabel::Confusion => &mut self.confusion,
            ErrorLabel::Invalid => &mut self.invalid,
            ErrorLabel::Other => &mut self.other,
        }
    }

    pub fn get(&self, label: ErrorLabel) -> usize {
        let mut c = *self;
        *c.slot(label)
    }

    pub fn total(&self) -> usize {
        ErrorLabel::ALL.iter().map(|&l| self.get(l)).sum()
    }

    pub fn errors(&self) -> usize {
        self.total() - self.correct
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionMetrics {
    pub n_reports: usize,
    pub variable_accuracy: f64,
    pub report_accuracy: f64,
    pub counts: LabelCounts,
    /// Every non-correct label, `Other` included.
    pub total_errors: usize,
}

/// Variable- and report-level accuracy with the error breakdown.
pub fn extraction_metrics(
    golds: &[CmrRecord],
    preds: &[Result<CmrRecord, ParseError>],
) -> Result<ExtractionMetrics, MetricsError> {
    let labels = label_all(golds, preds)?;
    Ok(metrics_from_labels(&labels))
}

/// Per-report labels, in input order.
pub fn label_all(
    golds: &[CmrRecord],
    preds: &[Result<CmrRecord, ParseError>],
) -> Result<Vec<[ErrorLabel; FieldId::COUNT]>, MetricsError> {
    if golds.len() != preds.len() {
        return Err(MetricsError::LengthMismatch { gold: golds.len(), pred: preds.len() });
    }
    if golds.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    Ok(golds.iter().zip(preds).map(|(g, p)| label_record(g, p.as_ref())).collect())
}

pub fn metrics_from_labels(labels: &[[ErrorLabel; FieldId::COUNT]]) -> ExtractionMetrics {
    let mut counts = LabelCounts::default();
    let mut perfect = 0;
    for report in labels {
        report.iter().for_each(|&l| counts.add(l));
        if report.iter().all(|&l| l == ErrorLabel::Correct) {
            perfect += 1;
        }
    }
    let n = labels.len();
    ExtractionMetrics {
        n_reports: n,
        variable_accuracy: counts.correct as f64 / (n * FieldId::COUNT) as f64,
        report_accuracy: perfect as f64 / n as f64,
        total_errors: counts.errors(),
        counts,
    }
}

/// How per-class scores are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Unweighted mean over classes seen in gold or prediction.
    #[default]
    Macro,
    /// Mean weighted by gold support.
    Weighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub category: DiagnosisCategory,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub n: usize,
    pub averaging: Averaging,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class: Vec<ClassStats>,
    /// `confusion[gold][pred]`, indexed by category order.
    pub confusion: [[usize; 6]; 6],
}

pub fn classification_metrics(
    golds: &[DiagnosisCategory],
    preds: &[DiagnosisCategory],
) -> Result<ClassificationMetrics, MetricsError> {
    classification_metrics_with(golds, preds, Averaging::Macro)
}

/// Accuracy plus one-vs-rest precision, recall and F1 per class, averaged.
/// Classes absent from both gold and prediction are left out. A class
/// never predicted has precision 0, one never in gold has recall 0; the
/// averaged F1 is the mean of per-class F1.
pub fn classification_metrics_with(
    golds: &[DiagnosisCategory],
    preds: &[DiagnosisCategory],
    averaging: Averaging,
) -> Result<ClassificationMetrics, MetricsError> {
    if golds.len() != preds.len() {
        return Err(MetricsError::LengthMismatch { gold: golds.len(), pred: preds.len() });
    }
    if golds.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut confusion = [[0usize; 6]; 6];
    for (g, p) in golds.iter().zip(preds) {
        confusion[g.index()][p.index()] += 1;
    }
    let n = golds.len();
    let correct: usize = (0..6).map(|i| confusion[i][i]).sum();

    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let per_class: Vec<ClassStats> = DiagnosisCategory::ALL
        .iter()
        .filter_map(|&c| {
            let i = c.index();
            let support: usize = confusion[i].iter().sum();
            let predicted: usize = (0..6).map(|g| confusion[g][i]).sum();
            if support == 0 && predicted == 0 {
                return None;
            }
            let tp = confusion[i][i];
            let (precision, recall) = (ratio(tp, predicted), ratio(tp, support));
            let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
            Some(ClassStats { category: c, precision, recall, f1, support })
        })
        .collect();

    let avg = |get: fn(&ClassStats) -> f64| match averaging {
        Averaging::Macro => per_class.iter().map(get).sum::<f64>() / per_class.len() as f64,
        Averaging::Weighted => per_class.iter().map(|s| get(s) * s.support as f64).sum::<f64>() / n as f64,
    };
    Ok(ClassificationMetrics {
        n,
        averaging,
        accuracy: correct as f64 / n as f64,
        precision: avg(|s| s.precision),
        recall: avg(|s| s.recall),
        f1: avg(|s| s.f1),
        per_class,
        confusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use DiagnosisCategory::*;

    #[test]
    fn single_omission_in_two_reports() {
        let g = CmrRecord::empty().with(FieldId::Lvef, 60.0);
        let mut miss = g.clone();
        miss.set(FieldId::Lvef, crate::report::FieldValue::Null);
        let m = extraction_metrics(&[g.clone(), g.clone()], &[Ok(g), Ok(miss)]).unwrap();
        assert_eq!(m.counts.correct, 103);
        assert_eq!(m.counts.omission, 1);
        assert_eq!(m.variable_accuracy, 103.0 / 104.0);
        assert_eq!(m.report_accuracy, 0.5);
        assert_eq!(m.total_errors, 1);
    }

    #[test]
    fn parse_error_is_52_invalid() {
        let g = CmrRecord::empty();
        let m = extraction_metrics(&[g], &[Err(ParseError::Invalid { message: "x".into() })]).unwrap();
        assert_eq!(m.counts.invalid, 52);
        assert_eq!(m.report_accuracy, 0.0);
        assert_eq!(m.variable_accuracy, 0.0);
    }

    #[test]
    fn length_mismatch() {
        assert_eq!(
            extraction_metrics(&[CmrRecord::empty()], &[]),
            Err(MetricsError::LengthMismatch { gold: 1, pred: 0 })
        );
        assert_eq!(classification_metrics(&[], &[]), Err(MetricsError::EmptyInput));
    }

    #[test]
    fn weighted_averaging() {
        let m = classification_metrics_with(&[Cad, Cad, Hcm, Dcm], &[Cad, Hcm, Hcm, Dcm], Averaging::Weighted)
            .unwrap();
        // CAD R=0.5 (2), HCM R=1 (1), DCM R=1 (1): weighted recall = accuracy.
        assert!((m.recall - 0.75).abs() < 1e-12);
    }
}
