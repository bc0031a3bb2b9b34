use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::discrimination::Discrimination;
use super::metrics::{ClassificationMetrics, ExtractionMetrics};

/// Everything `eval` reports for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub extraction: ExtractionMetrics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classification: Option<ClassificationMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discrimination: Option<Discrimination>,
}

fn pct(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}

impl EvalReport {
    /// Aligned plain-text table.
    pub fn render_table(&self) -> String {
        let e = &self.extraction;
        let c = &e.counts;
        let header = ["Reports", "Var. acc.", "Rep. acc.", "Omission", "Inexact", "Confusion", "Invalid", "Other", "Total"];
        let row = [
            e.n_reports.to_string(),
            pct(e.variable_accuracy),
            pct(e.report_accuracy),
            c.omission.to_string(),
            c.inexact.to_string(),
            c.confusion.to_string(),
            c.invalid.to_string(),
            c.other.to_string(),
            e.total_errors.to_string(),
        ];
        let mut out = String::new();
        let widths: Vec<usize> = header.iter().zip(&row).map(|(h, r)| h.len().max(r.len())).collect();
        for cells in [header.map(str::to_string).to_vec(), row.to_vec()] {
            let line: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
            let _ = writeln!(out, "{}", line.join("  "));
        }

        if let Some(m) = &self.classification {
            let _ = writeln!(
                out,
                "\nClassification ({:?}, n={}): acc {}  prec {}  rec {}  F1 {}",
                m.averaging,
                m.n,
                pct(m.accuracy),
                pct(m.precision),
                pct(m.recall),
                pct(m.f1)
            );
        }
        if let Some(d) = &self.discrimination {
            let rate = |r: Option<f64>| r.map_or_else(|| "n/a".to_string(), pct);
            let _ = writeln!(
                out,
                "\nBelow {:.2}: {} fields, error rate {}\nAt or above: {} fields, error rate {}",
                d.threshold,
                d.below.fields,
                rate(d.err_below()),
                d.above.fields,
                rate(d.err_above())
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{extraction_metrics, ErrorLabel};
    use crate::report::{CmrRecord, FieldId, ParseError};

    #[test]
    fn table_has_all_columns() {
        let g = CmrRecord::empty().with(FieldId::Lvef, 60.0);
        let m = extraction_metrics(&[g.clone(), g], &[Ok(CmrRecord::empty()), Err(ParseError::Invalid { message: "x".into() })])
            .unwrap();
        let t = EvalReport { extraction: m, classification: None, discrimination: None }.render_table();
        for col in ErrorLabel::ALL.iter().skip(1) {
            assert!(t.contains(col.as_str()), "{col:?}");
        }
        assert!(t.contains("Var. acc.") && t.contains("Rep. acc.") && t.contains("Total"));
        assert!(t.lines().nth(1).unwrap().contains("53"));
    }
}
