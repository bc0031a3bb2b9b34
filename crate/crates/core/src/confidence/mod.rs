//! Per-field confidence: distribution plausibility against reference
//! ranges, stability across repeated samples, and consistency with the
//! physiologic formula ledger. The final score is their mean.

mod aggregate;
mod expr;
mod kernels;
mod ledger;
mod params;
mod ranges;

pub use aggregate::{
    aggregate, score_record, vote_category, AggregateError, ConfidenceBundle, FieldScores, Scorer,
};
pub use expr::{Expr, ExprError};
pub use kernels::{
    consistency_score, distribution_score, formula_checks, pair_score, stability_score, vote,
    FormulaCheck,
};
pub use ledger::{Formula, Ledger, LedgerError};
pub use params::{ParamError, ScoreParams};
pub use ranges::{RangeError, ReferenceRange, ReferenceTable, Sex};
