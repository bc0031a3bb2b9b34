use std::fmt;
use std::ops::{Index, IndexMut};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use super::field::FieldId;
use super::normalize::{normalize_value, NormalizeError};

/// Relative tolerance used when comparing two records.
pub const RECORD_REL_TOL: f64 = 1e-9;

/// `|a - b| <= tol * max(|a|, |b|)`; two zeros compare equal.
pub fn approx_eq_rel(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// One extracted value in its field's canonical unit.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum FieldValue {
    #[default]
    Null,
    Present(f64),
}

impl FieldValue {
    pub fn is_null(self) -> bool {
        matches!(self, FieldValue::Null)
    }

    pub fn value(self) -> Option<f64> {
        match self {
            FieldValue::Present(v) => Some(v),
            FieldValue::Null => None,
        }
    }

    /// Null equals Null; two present values compare with [`approx_eq_rel`].
    pub fn approx_eq(self, other: FieldValue, tol: f64) -> bool {
        match (self, other) {
            (FieldValue::Null, FieldValue::Null) => true,
            (FieldValue::Present(a), FieldValue::Present(b)) => approx_eq_rel(a, b, tol),
            _ => false,
        }
    }
}

impl From<Option<f64>> for FieldValue {
    fn from(v: Option<f64>) -> Self {
        v.map_or(FieldValue::Null, FieldValue::Present)
    }
}

impl fmt::Display for FieldValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldValue::Null => f.write_str("null"),
            FieldValue::Present(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for FieldValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            FieldValue::Null => serializer.serialize_none(),
            FieldValue::Present(v) => serializer.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for FieldValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Ok(Option::<f64>::deserialize(deserializer)?.into())
    }
}

/// Report-level diagnostic class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum DiagnosisCategory {
    Cad,
    Hcm,
    Dcm,
    Ebstein,
    Pah,
    #[default]
    Unspecified,
}

impl DiagnosisCategory {
    pub const NAMED: [DiagnosisCategory; 5] = [
        DiagnosisCategory::Cad,
        DiagnosisCategory::Hcm,
        DiagnosisCategory::Dcm,
        DiagnosisCategory::Ebstein,
        DiagnosisCategory::Pah,
    ];

    pub const ALL: [DiagnosisCategory; 6] = [
        DiagnosisCategory::Cad,
        DiagnosisCategory::Hcm,
        DiagnosisCategory::Dcm,
        DiagnosisCategory::Ebstein,
        DiagnosisCategory::Pah,
        DiagnosisCategory::Unspecified,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DiagnosisCategory::Cad => "CAD",
            DiagnosisCategory::Hcm => "HCM",
            DiagnosisCategory::Dcm => "DCM",
            DiagnosisCategory::Ebstein => "Ebstein",
            DiagnosisCategory::Pah => "PAH",
            DiagnosisCategory::Unspecified => "Unspecified",
        }
    }

    pub fn long_name(self) -> &'static str {
        match self {
            DiagnosisCategory::Cad => "coronary artery disease",
            DiagnosisCategory::Hcm => "hypertrophic cardiomyopathy",
            DiagnosisCategory::Dcm => "dilated cardiomyopathy",
            DiagnosisCategory::Ebstein => "Ebstein's anomaly",
            DiagnosisCategory::Pah => "pulmonary arterial hypertension",
            DiagnosisCategory::Unspecified => "unspecified",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for DiagnosisCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DiagnosisCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        DiagnosisCategory::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(t) || c.long_name().eq_ignore_ascii_case(t))
            .ok_or_else(|| s.to_string())
    }
}

impl Serialize for DiagnosisCategory {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for DiagnosisCategory {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = Option::<String>::deserialize(deserializer)?;
        match s {
            None => Ok(DiagnosisCategory::Unspecified),
            Some(s) => s
                .parse()
                .map_err(|s| serde::de::Error::custom(format!("unknown category `{s}`"))),
        }
    }
}

/// A structured report: a total map from [`FieldId`] to [`FieldValue`] plus
/// the diagnostic category.
///
/// Equality (`==`) is exact. Use [`CmrRecord::approx_eq`] for the
/// tolerance-based comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct CmrRecord {
    values: [FieldValue; FieldId::COUNT],
    pub category: DiagnosisCategory,
}

impl Default for CmrRecord {
    fn default() -> Self {
        Self {
            values: [FieldValue::Null; FieldId::COUNT],
            category: DiagnosisCategory::Unspecified,
        }
    }
}

impl CmrRecord {
    /// A record with every field null and no category.
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn get(&self, field: FieldId) -> FieldValue {
        self.values[field.index()]
    }

    pub fn set(&mut self, field: FieldId, value: FieldValue) {
        self.values[field.index()] = value;
    }

    pub fn with(mut self, field: FieldId, value: f64) -> Self {
        self.set(field, FieldValue::Present(value));
        self
    }

    pub fn iter(&self) -> impl Iterator<Item = (FieldId, FieldValue)> + '_ {
        FieldId::ALL.into_iter().map(|f| (f, self.get(f)))
    }

    pub fn present_count(&self) -> usize {
        self.values.iter().filter(|v| !v.is_null()).count()
    }

    pub fn approx_eq(&self, other: &CmrRecord) -> bool {
        self.category == other.category
            && self
                .values
                .iter()
                .zip(other.values.iter())
                .all(|(a, b)| a.approx_eq(*b, RECORD_REL_TOL))
    }

    /// Every present value is finite and non-negative.
    pub fn is_valid(&self) -> bool {
        self.values
            .iter()
            .all(|v| v.value().is_none_or(|x| x.is_finite() && x >= 0.0))
    }
}

impl Index<FieldId> for CmrRecord {
    type Output = FieldValue;

    fn index(&self, field: FieldId) -> &FieldValue {
        &self.values[field.index()]
    }
}

impl IndexMut<FieldId> for CmrRecord {
    fn index_mut(&mut self, field: FieldId) -> &mut FieldValue {
        &mut self.values[field.index()]
    }
}

pub const CATEGORY_KEY: &str = "CATEGORY";

/// Canonical JSON: the 52 keys in dictionary order, then `CATEGORY`.
/// `Unspecified` is written as `null`.
pub fn serialize_record(record: &CmrRecord) -> String {
    let mut out = String::with_capacity(1400);
    out.push('{');
    for (field, value) in record.iter() {
        out.push('"');
        out.push_str(field.as_str());
        out.push_str("\":");
        match value {
            FieldValue::Null => out.push_str("null"),
            // finite by construction; serde_json writes the shortest round-trip form
            FieldValue::Present(v) => out.push_str(
                &serde_json::to_string(&v).expect("finite f64 always serializes"),
            ),
        }
        out.push(',');
    }
    out.push('"');
    out.push_str(CATEGORY_KEY);
    out.push_str("\":");
    match record.category {
        DiagnosisCategory::Unspecified => out.push_str("null"),
        c => {
            out.push('"');
            out.push_str(c.as_str());
            out.push('"');
        }
    }
    out.push('}');
    out
}

/// Why a well-formed JSON document is not a record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, thiserror::Error)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum SchemaViolation {
    #[error("document is not a JSON object")]
    NotAnObject,
    #[error("missing key `{0}`")]
    MissingKey(FieldId),
    #[error("unexpected key `{0}`")]
    UnexpectedKey(String),
    #[error("value of `{0}` is not numeric")]
    NonNumeric(FieldId),
    #[error("value of `{0}` is negative")]
    Negative(FieldId),
    #[error("unknown category `{0}`")]
    BadCategory(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, thiserror::Error)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum ParseError {
    /// Not well-formed JSON.
    #[error("invalid JSON: {message}")]
    Invalid { message: String },
    #[error("schema violation: {violation}")]
    SchemaViolation { violation: SchemaViolation },
}

impl From<SchemaViolation> for ParseError {
    fn from(violation: SchemaViolation) -> Self {
        ParseError::SchemaViolation { violation }
    }
}

/// Parses candidate model output into a record.
///
/// All 52 keys must be present. Values may be numbers, `null`, or strings
/// that normalize to a number (`"60"`, `"150 mL"`). `CATEGORY` is optional.
/// HCT given as a percentage (`42`) is converted to a fraction.
pub fn parse_record(doc: &str) -> Result<CmrRecord, ParseError> {
    let value: Value = serde_json::from_str(doc).map_err(|e| ParseError::Invalid {
        message: e.to_string(),
    })?;
    let Value::Object(map) = value else {
        return Err(SchemaViolation::NotAnObject.into());
    };

    let mut record = CmrRecord::empty();
    for field in FieldId::ALL {
        let raw = map.get(field.as_str()).ok_or(SchemaViolation::MissingKey(field))?;
        record.set(field, coerce_value(field, raw)?);
    }

    let mut extra: Vec<&String> = map
        .keys()
        .filter(|k| k.as_str() != CATEGORY_KEY && !FieldId::ALL.iter().any(|f| f.as_str() == k.as_str()))
        .collect();
    extra.sort();
    if let Some(k) = extra.first() {
        return Err(SchemaViolation::UnexpectedKey((*k).clone()).into());
    }

    record.category = match map.get(CATEGORY_KEY) {
        None | Some(Value::Null) => DiagnosisCategory::Unspecified,
        Some(Value::String(s)) => s
            .parse()
            .map_err(|_| SchemaViolation::BadCategory(s.clone()))?,
        Some(other) => return Err(SchemaViolation::BadCategory(other.to_string()).into()),
    };
    Ok(record)
}

fn coerce_value(field: FieldId, raw: &Value) -> Result<FieldValue, SchemaViolation> {
    match raw {
        Value::Null => Ok(FieldValue::Null),
        Value::Number(n) => {
            let v = n.as_f64().ok_or(SchemaViolation::NonNumeric(field))?;
            if v < 0.0 {
                return Err(SchemaViolation::Negative(field));
            }
            if field == FieldId::Hct && v > 1.0 {
                return Ok(FieldValue::Present(v / 100.0));
            }
            Ok(FieldValue::Present(v))
        }
        Value::String(s) => match normalize_value(field, s) {
            Ok(v) => Ok(v),
            Err(NormalizeError::Negative { .. }) => Err(SchemaViolation::Negative(field)),
            Err(NormalizeError::OutOfBounds { value, .. }) => Ok(FieldValue::Present(value)),
            Err(_) => Err(SchemaViolation::NonNumeric(field)),
        },
        _ => Err(SchemaViolation::NonNumeric(field)),
    }
}

impl Serialize for CmrRecord {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(FieldId::COUNT + 1))?;
        for (field, value) in self.iter() {
            map.serialize_entry(field.as_str(), &value)?;
        }
        match self.category {
            DiagnosisCategory::Unspecified => map.serialize_entry(CATEGORY_KEY, &Value::Null)?,
            c => map.serialize_entry(CATEGORY_KEY, c.as_str())?,
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for CmrRecord {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = Value::deserialize(deserializer)?;
        // Round through the canonical parser so embedded records obey the
        // same schema rules as model output.
        parse_record(&value.to_string()).map_err(serde::de::Error::custom)
    }
}
