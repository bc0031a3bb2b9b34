use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::kernels::{consistency_score, distribution_score, stability_score, vote};
use super::ledger::Ledger;
use super::params::ScoreParams;
use super::ranges::ReferenceTable;
use crate::gateway::SampleSet;
use crate::report::{CmrRecord, DiagnosisCategory, FieldId, FieldValue};

/// The three sub-scores of one field and their mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldScores {
    pub dist: f64,
    pub stab: f64,
    pub cons: f64,
    #[serde(rename = "final")]
    pub final_score: f64,
    pub flagged: bool,
}

impl FieldScores {
    pub fn new(dist: f64, stab: f64, cons: f64, review_threshold: f64) -> Self {
        let final_score = (dist + stab + cons) / 3.0;
        FieldScores {
            dist,
            stab,
            cons,
            final_score,
            flagged: final_score < review_threshold,
        }
    }
}

/// Scores for all 52 fields of one record.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceBundle {
    scores: [FieldScores; FieldId::COUNT],
}

impl ConfidenceBundle {
    pub fn from_fn(f: impl FnMut(FieldId) -> FieldScores) -> Self {
        ConfidenceBundle {
            scores: FieldId::ALL.map(f),
        }
    }

    pub fn get(&self, field: FieldId) -> &FieldScores {
        &self.scores[field.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (FieldId, &FieldScores)> {
        FieldId::ALL.into_iter().zip(self.scores.iter())
    }

    pub fn flagged_fields(&self) -> Vec<FieldId> {
        self.iter().filter(|(_, s)| s.flagged).map(|(f, _)| f).collect()
    }
}

impl Serialize for ConfidenceBundle {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(FieldId::COUNT))?;
        for (f, s) in self.iter() {
            map.serialize_entry(f.as_str(), s)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for ConfidenceBundle {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let mut map = BTreeMap::<FieldId, FieldScores>::deserialize(deserializer)?;
        let mut missing = None;
        let bundle = ConfidenceBundle::from_fn(|f| {
            map.remove(&f).unwrap_or_else(|| {
                missing.get_or_insert(f);
                FieldScores::new(0.0, 0.0, 0.0, 0.0)
            })
        });
        match missing {
            Some(f) => Err(serde::de::Error::custom(format!("missing scores for {f}"))),
            None => Ok(bundle),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AggregateError {
    #[error("all {0} samples failed to parse")]
    AllInvalid(usize),
}

/// Reference ranges, formula ledger and parameters, loaded once and shared.
#[derive(Debug, Clone)]
pub struct Scorer {
    pub ranges: ReferenceTable,
    pub ledger: Ledger,
    pub params: ScoreParams,
}

impl Default for Scorer {
    fn default() -> Self {
        Scorer {
            ranges: ReferenceTable::builtin(),
            ledger: Ledger::builtin(),
            params: ScoreParams::default(),
        }
    }
}

impl Scorer {
    pub fn new(ranges: ReferenceTable, ledger: Ledger, params: ScoreParams) -> Self {
        Scorer { ranges, ledger, params }
    }

    pub fn score_record(&self, record: &CmrRecord, stab: &[f64; FieldId::COUNT]) -> ConfidenceBundle {
        score_record(record, stab, &self.ranges, &self.ledger, &self.params)
    }

    pub fn aggregate(&self, samples: &SampleSet) -> Result<(CmrRecord, ConfidenceBundle), AggregateError> {
        aggregate(samples, &self.ranges, &self.ledger, &self.params)
    }
}

/// Votes a final record from the samples and scores every field.
///
/// A sample that failed to parse counts as all-null for voting and
/// stability, and casts no category vote. Distribution and consistency are
/// computed on the voted record.
pub fn aggregate(
    samples: &SampleSet,
    ranges: &ReferenceTable,
    ledger: &Ledger,
    p: &ScoreParams,
) -> Result<(CmrRecord, ConfidenceBundle), AggregateError> {
    let parsed: Vec<Option<&CmrRecord>> = samples.attempts.iter().map(|a| a.as_ref().ok()).collect();
    if parsed.iter().all(Option::is_none) {
        return Err(AggregateError::AllInvalid(parsed.len()));
    }

    let mut record = CmrRecord::empty();
    let mut stab = [0.0; FieldId::COUNT];
    for field in FieldId::ALL {
        let values: Vec<FieldValue> = parsed
            .iter()
            .map(|r| r.map_or(FieldValue::Null, |r| r.get(field)))
            .collect();
        record.set(field, vote(&values));
        stab[field.index()] = stability_score(&values, p);
    }
    record.category = vote_category(parsed.iter().flatten().map(|r| r.category));

    let bundle = score_record(&record, &stab, ranges, ledger, p);
    Ok((record, bundle))
}

/// Scores a finalized record given its per-field stability scores.
pub fn score_record(
    record: &CmrRecord,
    stab: &[f64; FieldId::COUNT],
    ranges: &ReferenceTable,
    ledger: &Ledger,
    p: &ScoreParams,
) -> ConfidenceBundle {
    let cons = consistency_score(record, ledger, p);
    ConfidenceBundle::from_fn(|f| {
        FieldScores::new(
            distribution_score(f, record.get(f), ranges, p),
            stab[f.index()],
            cons[f.index()],
            p.review_threshold,
        )
    })
}

/// Plurality vote; a tie for first place yields `Unspecified`.
pub fn vote_category(votes: impl IntoIterator<Item = DiagnosisCategory>) -> DiagnosisCategory {
    let mut counts = [0usize; 6];
    for c in votes {
        counts[c.index()] += 1;
    }
    let max = counts.iter().copied().max().unwrap_or(0);
    let mut winners = DiagnosisCategory::ALL.into_iter().filter(|c| max > 0 && counts[c.index()] == max);
    match (winners.next(), winners.next()) {
        (Some(c), None) => c,
        _ => DiagnosisCategory::Unspecified,
    }
}
