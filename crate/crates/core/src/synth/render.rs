use std::fmt::Write as _;
use std::sync::LazyLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::report::{CmrRecord, DiagnosisCategory, FieldId, FieldValue, Section};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateStyle {
    Tabular,
    Narrative,
}

impl TemplateStyle {
    pub const ALL: [TemplateStyle; 2] = [TemplateStyle::Tabular, TemplateStyle::Narrative];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateStyle::Tabular => "tabular",
            TemplateStyle::Narrative => "narrative",
        }
    }
}

impl std::str::FromStr for TemplateStyle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tabular" => Ok(TemplateStyle::Tabular),
            "narrative" => Ok(TemplateStyle::Narrative),
            other => Err(format!("unknown template style `{other}`")),
        }
    }
}

/// Plain-language name of each field as it appears in report prose.
pub fn label(field: FieldId) -> &'static str {
    use FieldId::*;
    match field {
        Height => "patient height",
        Weight => "patient weight",
        Bsa => "body surface area",
        Sbp => "systolic blood pressure",
        Dbp => "diastolic blood pressure",
        Bhr => "baseline heart rate",
        Lvedv => "left ventricular end-diastolic volume",
        Lvesv => "left ventricular end-systolic volume",
        Lvco => "left ventricular cardiac output",
        Lvmass => "left ventricular mass",
        Lvsv => "left ventricular stroke volume",
        Lvef => "left ventricular ejection fraction",
        Rvedv => "right ventricular end-diastolic volume",
        Rvesv => "right ventricular end-systolic volume",
        Rvco => "right ventricular cardiac output",
        Rvmass => "right ventricular mass",
        Rvsv => "right ventricular stroke volume",
        Rvef => "right ventricular ejection fraction",
        Lvedvi => "left ventricular end-diastolic volume index",
        Lvesvi => "left ventricular end-systolic volume index",
        Lvcoi => "left ventricular cardiac index",
        Lvmassi => "left ventricular mass index",
        Lvsvi => "left ventricular stroke volume index",
        Rvedvi => "right ventricular end-diastolic volume index",
        Rvesvi => "right ventricular end-systolic volume index",
        Rvcoi => "right ventricular cardiac index",
        Rvmassi => "right ventricular mass index",
        Rvsvi => "right ventricular stroke volume index",
        Lvedd => "left ventricular end-diastolic diameter",
        Rvedd => "right ventricular end-diastolic diameter",
        Lvesd => "left ventricular end-systolic diameter",
        Rvesd => "right ventricular end-systolic diameter",
        Lvawt => "anteroseptal wall thickness",
        Lviwt => "inferolateral wall thickness",
        Lav => "left atrial volume",
        Lavi => "left atrial volume index",
        Laa2ch => "two-chamber left atrial area",
        Laa4ch => "four-chamber left atrial area",
        Lal2ch => "two-chamber left atrial length",
        Lal4ch => "four-chamber left atrial length",
        Rav => "right atrial volume",
        Ravi => "right atrial volume index",
        Raa2ch => "two-chamber right atrial area",
        Raa4ch => "four-chamber right atrial area",
        Ral2ch => "two-chamber right atrial length",
        Ral4ch => "four-chamber right atrial length",
        Hct => "hematocrit",
        Pret1m => "native myocardial T1",
        Pret1b => "native blood pool T1",
        Postt1m => "post-contrast myocardial T1",
        Postt1b => "post-contrast blood pool T1",
        Ecv => "extracellular volume fraction",
    }
}

const VERBS: [&str; 3] = ["measures", "is", "was measured at"];

fn section_heading(s: Section) -> &'static str {
    match s {
        Section::Vitals => "Vitals",
        Section::LvFunction => "Left ventricle",
        Section::RvFunction => "Right ventricle",
        Section::IndexedFunction => "Indexed volumes",
        Section::VentricularStructure => "Ventricular dimensions",
        Section::AtrialStructure => "Atria",
        Section::Tissue => "Tissue characterization",
    }
}

/// Unit as printed after a value. Hematocrit is reported bare.
fn display_unit(field: FieldId) -> &'static str {
    match field {
        FieldId::Hct => "",
        f => f.unit(),
    }
}

fn push_value(out: &mut String, field: FieldId, v: f64) {
    let unit = display_unit(field);
    if unit.is_empty() {
        let _ = write!(out, "{v}");
    } else {
        let _ = write!(out, "{v} {unit}");
    }
}

const FIRST: [&str; 6] = ["Alex", "Sam", "Jordan", "Casey", "Riley", "Morgan"];
const LAST: [&str; 6] = ["Smith", "Lee", "Garcia", "Novak", "Okafor", "Brown"];

/// Renders a report whose header carries synthetic identifiers on lines
/// the PHI scrubber removes.
pub fn render_report(record: &CmrRecord, style: TemplateStyle, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::with_capacity(4096);
    let pick = |rng: &mut ChaCha8Rng, xs: &[&'static str]| xs[rng.random_range(0..xs.len())];

    out.push_str("CARDIAC MRI REPORT\n");
    let _ = writeln!(out, "Patient Name: {} {}", pick(&mut rng, &FIRST), pick(&mut rng, &LAST));
    let _ = writeln!(out, "MRN: {:08}", rng.random_range(0..100_000_000u32));
    let _ = writeln!(
        out,
        "DOB: {}-{:02}-{:02}",
        rng.random_range(1930..2005),
        rng.random_range(1..=12),
        rng.random_range(1..=28)
    );
    let _ = writeln!(out, "Exam Date: 2024-{:02}-{:02}", rng.random_range(1..=12), rng.random_range(1..=28));
    let _ = writeln!(out, "Referring Physician: Dr. {}", pick(&mut rng, &LAST));
    let _ = writeln!(out, "Technologist: {}", pick(&mut rng, &FIRST));
    out.push_str("\nTechnique: Cine SSFP imaging with native and post-contrast T1 mapping.\n\n");

    match style {
        TemplateStyle::Tabular => {
            for section in Section::ALL {
                let mut lines = section
                    .fields()
                    .filter_map(|f| record.get(f).value().map(|v| (f, v)))
                    .peekable();
                if lines.peek().is_none() {
                    continue;
                }
                let _ = writeln!(out, "{}", section_heading(section).to_uppercase());
                for (f, v) in lines {
                    let l = label(f);
                    let mut name = l[..1].to_uppercase();
                    name.push_str(&l[1..]);
                    let _ = write!(out, "{name} ({f}): ");
                    push_value(&mut out, f, v);
                    out.push('\n');
                }
                out.push('\n');
            }
        }
        TemplateStyle::Narrative => {
            for section in Section::ALL {
                let mut sentences = Vec::new();
                for f in section.fields() {
                    let FieldValue::Present(v) = record.get(f) else { continue };
                    let mut s = format!("The {} {} ", label(f), pick(&mut rng, &VERBS));
                    push_value(&mut s, f, v);
                    s.push('.');
                    sentences.push(s);
                }
                if !sentences.is_empty() {
                    let _ = writeln!(out, "{}: {}\n", section_heading(section), sentences.join(" "));
                }
            }
        }
    }

    match record.category {
        DiagnosisCategory::Unspecified => out.push_str("IMPRESSION: No specific diagnostic category.\n"),
        c => {
            let _ = writeln!(out, "IMPRESSION: Findings consistent with {}.", c.long_name());
        }
    }
    out
}

static TABULAR: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?m)^[^\n(]*\(([A-Z0-9]+)\):\s*(\d+(?:\.\d+)?)").unwrap());

static NARRATIVE: LazyLock<Vec<(FieldId, Regex)>> = LazyLock::new(|| {
    FieldId::ALL
        .iter()
        .map(|&f| {
            let pattern = format!(
                r"\bThe {} (?:{}) (\d+(?:\.\d+)?)",
                regex::escape(label(f)),
                VERBS.map(regex::escape).join("|")
            );
            (f, Regex::new(&pattern).unwrap())
        })
        .collect()
});

static IMPRESSION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"consistent with ([^.\n]+?)\.\s*$").unwrap());

/// Recovers a record from text produced by [`render_report`], in either
/// style, with or without the identifier header.
pub fn rule_extract(text: &str) -> CmrRecord {
    let mut rec = CmrRecord::empty();
    for caps in TABULAR.captures_iter(text) {
        if let (Ok(f), Ok(v)) = (caps[1].parse::<FieldId>(), caps[2].parse::<f64>()) {
            rec.set(f, FieldValue::Present(v));
        }
    }
    for (f, re) in NARRATIVE.iter() {
        if let Some(v) = re.captures(text).and_then(|c| c[1].parse::<f64>().ok()) {
            rec.set(*f, FieldValue::Present(v));
        }
    }
    rec.category = text
        .lines()
        .filter(|l| l.starts_with("IMPRESSION:"))
        .find_map(|l| IMPRESSION.captures(l).and_then(|c| c[1].parse().ok()))
        .unwrap_or(DiagnosisCategory::Unspecified);
    rec
}
