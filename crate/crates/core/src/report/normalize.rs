use std::sync::LazyLock;

use regex::Regex;

use super::field::FieldId;
use super::record::FieldValue;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NormalizeError {
    #[error("`{raw}` is not a number for {field}")]
    NotNumeric { field: FieldId, raw: String },
    #[error("{field} value {value} is negative")]
    Negative { field: FieldId, value: f64 },
    #[error("{field} value {value} is outside [{min}, {max}]")]
    OutOfBounds {
        field: FieldId,
        value: f64,
        min: f64,
        max: f64,
    },
}

static NUMBER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^([+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)\s*(.*)$").unwrap()
});

const NULL_TOKENS: [&str; 7] = ["", "null", "--", "-", "n/a", "na", "none"];

/// Converts a raw token captured from a report into the field's canonical
/// unit.
///
/// Unit text after the number is stripped. Hematocrit is stored as a
/// fraction, so `"42%"` and `"42"` both become `0.42`; values already in
/// `[0, 1]` pass through. Values outside the field's hard bounds are
/// rejected.
pub fn normalize_value(field: FieldId, raw: &str) -> Result<FieldValue, NormalizeError> {
    let token = raw.trim();
    if NULL_TOKENS.iter().any(|t| t.eq_ignore_ascii_case(token)) {
        return Ok(FieldValue::Null);
    }
    let not_numeric = || NormalizeError::NotNumeric {
        field,
        raw: raw.to_string(),
    };
    let caps = NUMBER.captures(token).ok_or_else(not_numeric)?;
    let unit = caps[2].trim();
    // A unit suffix may contain digits (m2) but must not start with one.
    if unit.starts_with(|c: char| c.is_ascii_digit() || c == '.' || c == '+' || c == '-') {
        return Err(not_numeric());
    }
    let mut value: f64 = caps[1].parse().map_err(|_| not_numeric())?;
    if !value.is_finite() {
        return Err(not_numeric());
    }
    if value < 0.0 {
        return Err(NormalizeError::Negative { field, value });
    }
    if field == FieldId::Hct && (unit.starts_with('%') || value > 1.0) {
        value /= 100.0;
    }
    check_bounds(field, value)?;
    Ok(FieldValue::Present(value))
}

/// Rejects values outside the field's hard sanity limits.
pub fn check_bounds(field: FieldId, value: f64) -> Result<(), NormalizeError> {
    if !value.is_finite() {
        return Err(NormalizeError::NotNumeric {
            field,
            raw: value.to_string(),
        });
    }
    if value < 0.0 {
        return Err(NormalizeError::Negative { field, value });
    }
    if let Some((min, max)) = field.spec().value_bounds {
        if value < min || value > max {
            return Err(NormalizeError::OutOfBounds {
                field,
                value,
                min,
                max,
            });
        }
    }
    Ok(())
}
