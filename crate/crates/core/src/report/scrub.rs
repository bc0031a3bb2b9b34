use std::sync::LazyLock;

use regex::Regex;

/// Line keywords that mark protected health information.
pub const PHI_KEYWORDS: [&str; 8] = [
    "MRN",
    "Name",
    "DOB",
    "Date",
    "Account",
    "Physician",
    "Nurse",
    "Technologist",
];

static PHI_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(r"(?i)\b(?:{})\b", PHI_KEYWORDS.join("|"))).unwrap()
});

/// True when the line mentions a PHI keyword as a whole word, ignoring case.
pub fn is_phi_line(line: &str) -> bool {
    PHI_LINE.is_match(line)
}

/// Drops every line that mentions a PHI keyword. Kept lines, including their
/// line terminators, are copied byte for byte.
pub fn scrub_phi(report_text: &str) -> String {
    let mut out = String::with_capacity(report_text.len());
    for line in report_text.split_inclusive('\n') {
        if !is_phi_line(line) {
            out.push_str(line);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent line filter: tokenizes on non-alphanumerics instead of
    /// using a regex word boundary.
    fn oracle(text: &str) -> String {
        text.split_inclusive('\n')
            .filter(|line| {
                !line
                    .split(|c: char| !(c.is_alphanumeric() || c == '_'))
                    .any(|tok| PHI_KEYWORDS.iter().any(|k| k.eq_ignore_ascii_case(tok)))
            })
            .collect()
    }

    #[test]
    fn drops_mrn_line() {
        assert_eq!(scrub_phi("MRN: 12345\nLVEF: 60%"), "LVEF: 60%");
    }

    #[test]
    fn empty_input() {
        assert_eq!(scrub_phi(""), "");
    }

    #[test]
    fn drops_technologist_line() {
        let text = "LVEDV 150 ml\nTechnologist: J.\nLVESV 60 ml";
        assert_eq!(scrub_phi(text), "LVEDV 150 ml\nLVESV 60 ml");
        assert_eq!(scrub_phi(text), oracle(text));
    }

    #[test]
    fn whole_word_and_case_insensitive() {
        assert_eq!(scrub_phi("candidate for surgery\n"), "candidate for surgery\n");
        assert_eq!(scrub_phi("study date: today\nok\n"), "ok\n");
        assert_eq!(scrub_phi("Names listed\nREFERRING PHYSICIAN: x\n"), "Names listed\n");
    }

    #[test]
    fn crlf_lines_preserved() {
        assert_eq!(scrub_phi("a\r\nDOB 1/1\r\nb\r\n"), "a\r\nb\r\n");
    }

    fn text_strategy() -> impl Strategy<Value = String> {
        let word = prop_oneof![
            Just("MRN".to_string()),
            Just("name".to_string()),
            Just("Dates".to_string()),
            Just("update".to_string()),
            Just("NURSE:".to_string()),
            "[a-zA-Z0-9:%.]{0,8}",
        ];
        let line = prop::collection::vec(word, 0..5).prop_map(|w| w.join(" "));
        prop::collection::vec(line, 0..8).prop_map(|l| l.join("\n"))
    }

    proptest! {
        #[test]
        fn idempotent_and_sound(text in text_strategy()) {
            let once = scrub_phi(&text);
            prop_assert_eq!(scrub_phi(&once), once.clone());
            prop_assert!(once.lines().all(|l| !is_phi_line(l)));
            prop_assert_eq!(once, oracle(&text));
        }
    }
}
