use crate::report::{FieldSpec, CATEGORY_KEY};

pub const REPORT_OPEN: &str = "<<<REPORT";
pub const REPORT_CLOSE: &str = "REPORT>>>";
const FIELD_MARKER: &str = "Requested variable: ";

/// Whole-report extraction prompt.
///
/// Contains the task instruction, every field with unit and description in
/// the given order, the report verbatim between markers, and the output
/// key order ending with `CATEGORY`.
pub fn build_prompt(report_text: &str, specs: &[FieldSpec]) -> String {
    let mut out = String::with_capacity(6000 + report_text.len());
    out.push_str(
        "Extract the quantitative measurements from the cardiac MR report below.\n\
         Return one JSON object and nothing else. Use a number in the stated unit for each \
         variable, or null when the report does not state it. Do not compute values that the \
         report does not state.\n\nVariables:\n",
    );
    for spec in specs {
        out.push_str(&format!("- {} ({}): {}\n", spec.id, spec.unit, spec.description));
    }
    out.push_str(&format!(
        "- {CATEGORY_KEY}: diagnostic category, one of CAD, HCM, DCM, Ebstein, PAH, or null.\n\n"
    ));
    push_report(&mut out, report_text);
    out.push_str("\nOutput keys, in this order: ");
    for spec in specs {
        out.push_str(spec.id.as_str());
        out.push_str(", ");
    }
    out.push_str(CATEGORY_KEY);
    out.push('\n');
    out
}

/// Single-variable prompt used in per-field mode. The answer is a bare
/// value or `null`.
pub fn build_field_prompt(report_text: &str, spec: &FieldSpec) -> String {
    let mut out = format!(
        "Extract one measurement from the cardiac MR report below. Answer with the number in \
         {unit} only, or null when the report does not state it.\n{FIELD_MARKER}{id}\n\
         Description: {desc}\n\n",
        unit = spec.unit,
        id = spec.id,
        desc = spec.description,
    );
    push_report(&mut out, report_text);
    out
}

/// Prompt asking only for the diagnostic category in per-field mode.
pub fn build_category_prompt(report_text: &str) -> String {
    let mut out = format!(
        "Classify the cardiac MR report below. Answer with one of CAD, HCM, DCM, Ebstein, PAH, \
         or null.\n{FIELD_MARKER}{CATEGORY_KEY}\n\n"
    );
    push_report(&mut out, report_text);
    out
}

fn push_report(out: &mut String, report_text: &str) {
    out.push_str(REPORT_OPEN);
    out.push('\n');
    out.push_str(report_text);
    out.push('\n');
    out.push_str(REPORT_CLOSE);
    out.push('\n');
}

/// Recovers the verbatim report from a prompt built by this module.
pub fn report_from_prompt(prompt: &str) -> Option<&str> {
    let start = prompt.find(REPORT_OPEN)? + REPORT_OPEN.len() + 1;
    let end = prompt.rfind(REPORT_CLOSE)?;
    let body = prompt.get(start..end)?;
    Some(body.strip_suffix('\n').unwrap_or(body))
}

/// The variable key a per-field prompt asks for.
pub fn requested_key(prompt: &str) -> Option<&str> {
    let head = &prompt[..prompt.find(REPORT_OPEN).unwrap_or(prompt.len())];
    let start = head.find(FIELD_MARKER)? + FIELD_MARKER.len();
    head[start..].lines().next().map(str::trim)
}

/// Removes a surrounding markdown code fence, if any.
pub fn strip_code_fence(text: &str) -> &str {
    let t = text.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    let body = rest.split_once('\n').map_or("", |(_, b)| b);
    body.trim_end().strip_suffix("```").unwrap_or(body).trim()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::{field_specs, FieldId};

    #[test]
    fn contains_every_description_and_the_report() {
        let report = "LVEF 60 %\nLVEDV 150 mL";
        let p = build_prompt(report, field_specs());
        for spec in field_specs() {
            assert!(p.contains(spec.description), "{}", spec.id);
        }
        assert!(p.contains(report));
        assert!(p.trim_end().ends_with("CATEGORY"));
        assert_eq!(report_from_prompt(&p), Some(report));
    }

    #[test]
    fn deterministic() {
        assert_eq!(build_prompt("x", field_specs()), build_prompt("x", field_specs()));
    }

    #[test]
    fn empty_report_still_lists_all_fields() {
        let p = build_prompt("", field_specs());
        let listed = field_specs().iter().filter(|s| p.contains(s.description)).count();
        assert_eq!(listed, 52);
        assert_eq!(report_from_prompt(&p), Some(""));
    }

    #[test]
    fn descriptions_listed_in_dictionary_order() {
        let p = build_prompt("", field_specs());
        let positions: Vec<usize> = field_specs()
            .iter()
            .map(|s| p.find(&format!("- {} (", s.id)).unwrap())
            .collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn field_prompt_round_trip() {
        let spec = FieldId::Lvef.spec();
        let p = build_field_prompt("LVEF 60", spec);
        assert_eq!(requested_key(&p), Some("LVEF"));
        assert_eq!(report_from_prompt(&p), Some("LVEF 60"));
        assert_eq!(requested_key(&build_category_prompt("r")), Some("CATEGORY"));
        assert_eq!(requested_key(&build_prompt("r", field_specs())), None);
    }

    #[test]
    fn fences() {
        assert_eq!(strip_code_fence("```json\n{\"a\":1}\n```"), "{\"a\":1}");
        assert_eq!(strip_code_fence("  {\"a\":1} "), "{\"a\":1}");
        assert_eq!(strip_code_fence("```\n{}\n```\n"), "{}");
    }
}
