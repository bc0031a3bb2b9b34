use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::eval::{ErrorLabel, TAXONOMY_TOL};
use crate::gateway::mix_seed;
use crate::report::{
    approx_eq_rel, parse_record, serialize_record, CmrRecord, FieldId, FieldValue, ParseError,
};

/// Per-kind corruption rates.
///
/// Kinds applicable to a present gold value (omission, inexact, confusion)
/// compete for one draw per field in that order, so their rates should sum
/// to at most 1. Fabrication applies to null gold values only.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorruptionPlan {
    pub omission: f64,
    pub inexact: f64,
    pub confusion: f64,
    pub fabrication: f64,
    pub truncation: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("corruption rate `{kind}` = {value} is outside [0, 1]")]
pub struct PlanError {
    pub kind: &'static str,
    pub value: f64,
}

impl CorruptionPlan {
    pub fn none(seed: u64) -> Self {
        CorruptionPlan { seed, ..Default::default() }
    }

    /// Spreads `rate` evenly over omission, inexact and confusion.
    pub fn mixed(rate: f64, seed: u64) -> Self {
        CorruptionPlan {
            omission: rate / 3.0,
            inexact: rate / 3.0,
            confusion: rate / 3.0,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        for (kind, value) in [
            ("omission", self.omission),
            ("inexact", self.inexact),
            ("confusion", self.confusion),
            ("fabrication", self.fabrication),
            ("truncation", self.truncation),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(PlanError { kind, value });
            }
        }
        Ok(())
    }

    /// The same rates with a seed derived from `stream`.
    pub fn reseeded(&self, stream: u64) -> Self {
        CorruptionPlan { seed: mix_seed(self.seed, stream), ..*self }
    }

    pub fn is_identity(&self) -> bool {
        self.omission == 0.0
            && self.inexact == 0.0
            && self.confusion == 0.0
            && self.fabrication == 0.0
            && self.truncation == 0.0
    }
}

/// Outcome of corrupting one record.
pub type Corrupted = (Result<CmrRecord, ParseError>, [ErrorLabel; FieldId::COUNT]);

fn collides(v: f64, gold: &CmrRecord) -> bool {
    gold.iter()
        .filter_map(|(_, g)| g.value())
        .any(|g| approx_eq_rel(v, g, TAXONOMY_TOL))
}

/// Applies `plan` to `record` and reports the label each field is meant to
/// receive from the error taxonomy.
///
/// Values are chosen so that the intended label is unambiguous: inexact
/// values stay between 1% and 9% off and never coincide with another gold
/// value, and fabricated values coincide with none.
pub fn corrupt(record: &CmrRecord, plan: &CorruptionPlan) -> Corrupted {
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    if rng.random::<f64>() < plan.truncation {
        let text = serialize_record(record);
        let cut = &text[..text.len() / 2];
        let err = parse_record(cut).expect_err("half a record never parses");
        return (Err(err), [ErrorLabel::Invalid; FieldId::COUNT]);
    }

    let mut out = record.clone();
    let mut labels = [ErrorLabel::Correct; FieldId::COUNT];
    for f in FieldId::ALL {
        let u: f64 = rng.random();
        let stream = rng.random::<u64>();
        let mut sub = ChaCha8Rng::seed_from_u64(stream);
        match record.get(f) {
            FieldValue::Present(g) => {
                if u < plan.omission {
                    out.set(f, FieldValue::Null);
                    labels[f.index()] = ErrorLabel::Omission;
                } else if u < plan.omission + plan.inexact {
                    if let Some(v) = inexact_value(g, record, &mut sub) {
                        out.set(f, FieldValue::Present(v));
                        labels[f.index()] = ErrorLabel::Inexact;
                    }
                } else if u < plan.omission + plan.inexact + plan.confusion {
                    if let Some(v) = confusion_value(f, g, record, &mut sub) {
                        out.set(f, FieldValue::Present(v));
                        labels[f.index()] = ErrorLabel::Confusion;
                    }
                }
            }
            FieldValue::Null => {
                if u < plan.fabrication {
                    if let Some(v) = fabricated_value(f, record, &mut sub) {
                        out.set(f, FieldValue::Present(v));
                        labels[f.index()] = ErrorLabel::Other;
                    }
                }
            }
        }
    }
    (Ok(out), labels)
}

fn inexact_value(g: f64, gold: &CmrRecord, rng: &mut ChaCha8Rng) -> Option<f64> {
    if g == 0.0 {
        return None;
    }
    (0..32).find_map(|_| {
        let mag: f64 = rng.random_range(0.01..=0.09);
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let v = g * (1.0 + sign * mag);
        (!collides(v, gold)).then_some(v)
    })
}

fn confusion_value(field: FieldId, g: f64, gold: &CmrRecord, rng: &mut ChaCha8Rng) -> Option<f64> {
    let donors: Vec<f64> = gold
        .iter()
        .filter(|&(d, _)| d != field)
        .filter_map(|(_, v)| v.value())
        .filter(|&v| !approx_eq_rel(v, g, TAXONOMY_TOL))
        // Hematocrit numbers above 1 are read back as percentages.
        .filter(|&v| field != FieldId::Hct || v <= 1.0)
        .collect();
    (!donors.is_empty()).then(|| donors[rng.random_range(0..donors.len())])
}

fn fabricated_value(field: FieldId, gold: &CmrRecord, rng: &mut ChaCha8Rng) -> Option<f64> {
    let hi = field.spec().value_bounds.map_or(100.0, |(_, max)| max.min(1000.0));
    (0..32).find_map(|_| {
        let v = (rng.random_range(0.0..hi) * 10.0).round() / 10.0;
        (v > 0.0 && !collides(v, gold)).then_some(v)
    })
}
