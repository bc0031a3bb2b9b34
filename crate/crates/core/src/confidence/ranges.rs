use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::report::FieldId;

const BUILTIN_RANGES: &str = include_str!("../../data/reference_ranges.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Male,
    Female,
}

/// Normal-population mean and standard deviation for one field and sex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRange {
    pub field: FieldId,
    pub sex: Sex,
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum RangeError {
    #[error("reference table row {row}: {message}")]
    Invalid { row: usize, message: String },
    #[error("reading reference table: {0}")]
    Csv(#[from] csv::Error),
    #[error("reading reference table: {0}")]
    Io(#[from] std::io::Error),
}

/// Reference ranges keyed by `(field, sex)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReferenceTable {
    rows: BTreeMap<(FieldId, Sex), ReferenceRange>,
}

impl ReferenceTable {
    pub fn new(rows: impl IntoIterator<Item = ReferenceRange>) -> Result<Self, RangeError> {
        let mut table = ReferenceTable::default();
        for (i, r) in rows.into_iter().enumerate() {
            if !(r.sigma > 0.0 && r.sigma.is_finite() && r.mu.is_finite()) {
                return Err(RangeError::Invalid {
                    row: i + 1,
                    message: format!("{} {:?}: sigma must be positive and finite", r.field, r.sex),
                });
            }
            if table.rows.insert((r.field, r.sex), r).is_some() {
                return Err(RangeError::Invalid {
                    row: i + 1,
                    message: format!("duplicate row for {} {:?}", r.field, r.sex),
                });
            }
        }
        Ok(table)
    }

    pub fn builtin() -> ReferenceTable {
        ReferenceTable::from_csv(BUILTIN_RANGES.as_bytes()).expect("builtin ranges are valid")
    }

    pub fn load(path: &Path) -> Result<ReferenceTable, RangeError> {
        ReferenceTable::from_csv(std::fs::File::open(path)?)
    }

    /// Reads `field,sex,mu,sigma` rows with a header line.
    pub fn from_csv<R: std::io::Read>(reader: R) -> Result<ReferenceTable, RangeError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let rows = rdr
            .deserialize::<ReferenceRange>()
            .collect::<Result<Vec<_>, _>>()?;
        ReferenceTable::new(rows)
    }

    pub fn get(&self, field: FieldId, sex: Sex) -> Option<&ReferenceRange> {
        self.rows.get(&(field, sex))
    }

    /// All rows for `field` (zero, one or two).
    pub fn for_field(&self, field: FieldId) -> impl Iterator<Item = &ReferenceRange> {
        self.rows.range((field, Sex::Male)..=(field, Sex::Female)).map(|(_, r)| r)
    }

    pub fn rows(&self) -> impl Iterator<Item = &ReferenceRange> {
        self.rows.values()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_loads_both_sexes() {
        let t = ReferenceTable::builtin();
        assert_eq!(t.for_field(FieldId::Lvef).count(), 2);
        assert_eq!(t.get(FieldId::Lvef, Sex::Male).unwrap().mu, 65.0);
        assert_eq!(t.for_field(FieldId::Ral2ch).count(), 0);
        assert_eq!(t.for_field(FieldId::Raa2ch).count(), 0);
    }

    #[test]
    fn rejects_bad_sigma_and_duplicates() {
        let bad = "field,sex,mu,sigma\nLVEF,male,60,0\n";
        assert!(matches!(
            ReferenceTable::from_csv(bad.as_bytes()),
            Err(RangeError::Invalid { .. })
        ));
        let dup = "field,sex,mu,sigma\nLVEF,male,60,5\nLVEF,male,61,5\n";
        assert!(ReferenceTable::from_csv(dup.as_bytes()).is_err());
        let unknown = "field,sex,mu,sigma\nFOO,male,60,5\n";
        assert!(ReferenceTable::from_csv(unknown.as_bytes()).is_err());
    }
}
