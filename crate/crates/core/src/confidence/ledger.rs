use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use super::expr::{Expr, ExprError};
use crate::report::{CmrRecord, FieldId};

const BUILTIN_LEDGER: &str = include_str!("../../data/formulas.ledger");

/// One physiologic identity `lhs = expression(operands)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Formula {
    pub id: String,
    pub lhs: FieldId,
    pub operands: Vec<FieldId>,
    pub expr: Expr,
    pub source: String,
}

impl Formula {
    pub fn new(id: &str, lhs: FieldId, operands: Vec<FieldId>, source: &str) -> Result<Self, LedgerError> {
        let err = |message: String| LedgerError::Invalid {
            line: 0,
            id: id.to_string(),
            message,
        };
        let expr = Expr::parse(source).map_err(|e: ExprError| err(e.to_string()))?;
        let declared: BTreeSet<FieldId> = operands.iter().copied().collect();
        if declared.len() != operands.len() {
            return Err(err("duplicate operand".into()));
        }
        if declared.contains(&lhs) {
            return Err(err(format!("{lhs} is both lhs and operand")));
        }
        let used = expr.fields();
        if used != declared {
            return Err(err(format!(
                "operand list {declared:?} does not match expression fields {used:?}"
            )));
        }
        Ok(Formula {
            id: id.to_string(),
            lhs,
            operands,
            expr,
            source: source.to_string(),
        })
    }

    /// The lhs value and the computed right-hand side, when the lhs and
    /// every operand are present and the expression is defined.
    pub fn evaluate(&self, record: &CmrRecord) -> Option<(f64, f64)> {
        let lhs = record.get(self.lhs).value()?;
        let rhs = self.expr.eval(&|f| record.get(f).value())?;
        Some((lhs, rhs))
    }

    /// Right-hand side only; used to derive the lhs from its operands.
    pub fn compute(&self, record: &CmrRecord) -> Option<f64> {
        self.expr.eval(&|f| record.get(f).value())
    }

    pub fn involves(&self, field: FieldId) -> bool {
        self.lhs == field || self.operands.contains(&field)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LedgerError {
    #[error("ledger line {line} ({id}): {message}")]
    Invalid {
        line: usize,
        id: String,
        message: String,
    },
    #[error("reading ledger: {0}")]
    Io(#[from] std::io::Error),
}

/// The set of consistency formulas.
#[derive(Debug, Clone, PartialEq)]
pub struct Ledger {
    formulas: Vec<Formula>,
}

impl Ledger {
    pub fn new(formulas: Vec<Formula>) -> Result<Self, LedgerError> {
        let mut seen = HashSet::new();
        for f in &formulas {
            if !seen.insert(f.id.clone()) {
                return Err(LedgerError::Invalid {
                    line: 0,
                    id: f.id.clone(),
                    message: "duplicate formula id".into(),
                });
            }
        }
        Ok(Ledger { formulas })
    }

    /// The 22-formula ledger shipped with the crate.
    pub fn builtin() -> Ledger {
        Ledger::parse(BUILTIN_LEDGER).expect("builtin ledger is valid")
    }

    pub fn load(path: &Path) -> Result<Ledger, LedgerError> {
        Ledger::parse(&std::fs::read_to_string(path)?)
    }

    /// Parses `id | lhs | op1, op2 | expression` lines. Blank lines and
    /// `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Ledger, LedgerError> {
        let mut formulas = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('|').map(str::trim).collect();
            let bad = |message: String| LedgerError::Invalid {
                line: i + 1,
                id: cols.first().unwrap_or(&"").to_string(),
                message,
            };
            if cols.len() != 4 {
                return Err(bad(format!("expected 4 columns, found {}", cols.len())));
            }
            let lhs: FieldId = cols[1].parse().map_err(|e| bad(format!("{e}")))?;
            let operands = cols[2]
                .split(',')
                .map(|s| s.parse::<FieldId>().map_err(|e| bad(format!("{e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            let formula = Formula::new(cols[0], lhs, operands, cols[3]).map_err(|e| match e {
                LedgerError::Invalid { message, .. } => bad(message),
                other => other,
            })?;
            formulas.push(formula);
        }
        Ledger::new(formulas)
    }

    pub fn formulas(&self) -> &[Formula] {
        &self.formulas
    }

    pub fn len(&self) -> usize {
        self.formulas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.formulas.is_empty()
    }

    pub fn touching(&self, field: FieldId) -> impl Iterator<Item = &Formula> {
        self.formulas.iter().filter(move |f| f.involves(field))
    }

    /// Fields that appear in no formula at all.
    pub fn uncovered_fields(&self) -> Vec<FieldId> {
        FieldId::ALL
            .into_iter()
            .filter(|f| self.touching(*f).next().is_none())
            .collect()
    }

    /// Fields that are the lhs of some formula.
    pub fn derived_fields(&self) -> BTreeSet<FieldId> {
        self.formulas.iter().map(|f| f.lhs).collect()
    }

    /// Fills every derivable lhs from its operands, repeating until no
    /// formula makes progress. Only null lhs values are written.
    pub fn derive_missing(&self, record: &mut CmrRecord) {
        loop {
            let mut progressed = false;
            for f in &self.formulas {
                if record.get(f.lhs).is_null() {
                    if let Some(v) = f.compute(record) {
                        record.set(f.lhs, crate::report::FieldValue::Present(v));
                        progressed = true;
                    }
                }
            }
            if !progressed {
                return;
            }
        }
    }
}
