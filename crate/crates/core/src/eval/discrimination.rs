use serde::{Deserialize, Serialize};

use super::metrics::MetricsError;
use super::taxonomy::ErrorLabel;

/// Error counts for the fields on one side of the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Bucket {
    pub fields: usize,
    pub errors: usize,
}

impl Bucket {
    /// `None` for an empty bucket.
    pub fn rate(&self) -> Option<f64> {
        (self.fields > 0).then(|| self.errors as f64 / self.fields as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discrimination {
    pub threshold: f64,
    pub below: Bucket,
    pub above: Bucket,
}

impl Discrimination {
    pub fn err_below(&self) -> Option<f64> {
        self.below.rate()
    }

    pub fn err_above(&self) -> Option<f64> {
        self.above.rate()
    }

    /// How many times more error-prone flagged fields are. `None` when
    /// either bucket is empty or no unflagged field is wrong.
    pub fn ratio(&self) -> Option<f64> {
        match (self.err_below(), self.err_above()) {
            (Some(b), Some(a)) if a > 0.0 => Some(b / a),
            _ => None,
        }
    }

    pub fn merge(&mut self, other: &Discrimination) {
        self.below.fields += other.below.fields;
        self.below.errors += other.below.errors;
        self.above.fields += other.above.fields;
        self.above.errors += other.above.errors;
    }
}

/// Error rate among fields scored below `threshold` versus at or above it.
pub fn confidence_discrimination(
    labels: &[ErrorLabel],
    scores: &[f64],
    threshold: f64,
) -> Result<Discrimination, MetricsError> {
    if labels.len() != scores.len() {
        return Err(MetricsError::LengthMismatch { gold: labels.len(), pred: scores.len() });
    }
    let mut d = Discrimination { threshold, below: Bucket::default(), above: Bucket::default() };
    for (&l, &s) in labels.iter().zip(scores) {
        let b = if s < threshold { &mut d.below } else { &mut d.above };
        b.fields += 1;
        b.errors += usize::from(l.is_error());
    }
    Ok(d)
}
