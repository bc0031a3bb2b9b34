use serde::{Deserialize, Serialize};

use crate::report::{approx_eq_rel, CmrRecord, FieldId, FieldValue, ParseError};

/// Relative tolerance for calling two values equal.
pub const TAXONOMY_TOL: f64 = 1e-6;
/// Largest relative deviation from gold still counted as inexact.
pub const INEXACT_BAND: f64 = 0.10;

/// Outcome of comparing one predicted field with gold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorLabel {
    Correct,
    /// Present in gold, missing from the prediction.
    Omission,
    /// Within the inexact band of gold.
    Inexact,
    /// Equal to a different gold field's value.
    Confusion,
    /// The prediction could not be parsed at all.
    Invalid,
    /// Any other mismatch, including a value where gold is null.
    Other,
}

impl ErrorLabel {
    pub const ALL: [ErrorLabel; 6] = [
        ErrorLabel::Correct,
        ErrorLabel::Omission,
        ErrorLabel::Inexact,
        ErrorLabel::Confusion,
        ErrorLabel::Invalid,
        ErrorLabel::Other,
    ];

    pub fn is_error(self) -> bool {
        self != ErrorLabel::Correct
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorLabel::Correct => "Correct",
            ErrorLabel::Omission => "Omission",
            ErrorLabel::Inexact => "Inexact",
            ErrorLabel::Confusion => "Confusion",
            ErrorLabel::Invalid => "Invalid",
            ErrorLabel::Other => "Other",
        }
    }
}

/// Labels one field of a prediction.
///
/// Precedence: Invalid, Correct, Omission, Confusion, Inexact, Other.
pub fn classify_field(gold: &CmrRecord, pred: Result<&CmrRecord, &ParseError>, field: FieldId) -> ErrorLabel {
    let Ok(pred) = pred else {
        return ErrorLabel::Invalid;
    };
    let (g, p) = (gold.get(field), pred.get(field));
    if g.approx_eq(p, TAXONOMY_TOL) {
        return ErrorLabel::Correct;
    }
    let FieldValue::Present(p) = p else {
        return ErrorLabel::Omission;
    };
    let confused = gold
        .iter()
        .filter(|&(f, _)| f != field)
        .filter_map(|(_, v)| v.value())
        .any(|v| approx_eq_rel(p, v, TAXONOMY_TOL));
    if confused {
        return ErrorLabel::Confusion;
    }
    match g {
        FieldValue::Present(g) if (p - g).abs() <= INEXACT_BAND * g.abs() => ErrorLabel::Inexact,
        _ => ErrorLabel::Other,
    }
}

/// Labels all 52 fields of one prediction.
pub fn label_record(gold: &CmrRecord, pred: Result<&CmrRecord, &ParseError>) -> [ErrorLabel; FieldId::COUNT] {
    FieldId::ALL.map(|f| classify_field(gold, pred, f))
}
