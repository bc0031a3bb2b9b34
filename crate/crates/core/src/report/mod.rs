//! Report model: the field dictionary, structured records, value
//! normalization and PHI scrubbing.

mod field;
mod normalize;
mod record;
mod scrub;

pub use field::{field_specs, FieldId, FieldSpec, Section, UnknownField};
pub use normalize::{check_bounds, normalize_value, NormalizeError};
pub use record::{
    approx_eq_rel, parse_record, serialize_record, CmrRecord, DiagnosisCategory, FieldValue,
    ParseError, SchemaViolation, CATEGORY_KEY, RECORD_REL_TOL,
};
pub use scrub::{is_phi_line, scrub_phi, PHI_KEYWORDS};
