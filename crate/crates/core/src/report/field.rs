//! The 52-field value dictionary.
//!
//! Every structured record answers exactly one value for each [`FieldId`].
//! Dictionary order (the order of [`FieldId::ALL`]) is the canonical order
//! used for serialization, prompts and review tie-breaks.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Group a field belongs to in the value dictionary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Section {
    Vitals,
    LvFunction,
    RvFunction,
    IndexedFunction,
    VentricularStructure,
    AtrialStructure,
    Tissue,
}

impl Section {
    pub const ALL: [Section; 7] = [
        Section::Vitals,
        Section::LvFunction,
        Section::RvFunction,
        Section::IndexedFunction,
        Section::VentricularStructure,
        Section::AtrialStructure,
        Section::Tissue,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Section::Vitals => "vitals",
            Section::LvFunction => "lv_function",
            Section::RvFunction => "rv_function",
            Section::IndexedFunction => "indexed_function",
            Section::VentricularStructure => "ventricular_structure",
            Section::AtrialStructure => "atrial_structure",
            Section::Tissue => "tissue",
        }
    }

    pub fn fields(self) -> impl Iterator<Item = FieldId> {
        FieldId::ALL.into_iter().filter(move |f| f.section() == self)
    }
}

/// Static description of one dictionary entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSpec {
    pub id: FieldId,
    pub unit: &'static str,
    pub description: &'static str,
    /// Hard sanity limits `(min, max)` in the canonical unit. Used when
    /// normalizing raw tokens and validating reviewer corrections, never
    /// for scoring.
    pub value_bounds: Option<(f64, f64)>,
}

macro_rules! dictionary {
    ($( $variant:ident => $key:literal, $section:ident, $unit:literal, $bounds:expr, $desc:literal; )*) => {
        /// Symbolic identifier of one of the 52 extracted variables.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum FieldId {
            $( $variant, )*
        }

        const SPECS: &[FieldSpec] = &[
            $( FieldSpec {
                id: FieldId::$variant,
                unit: $unit,
                description: $desc,
                value_bounds: $bounds,
            }, )*
        ];

        impl FieldId {
            pub const ALL: [FieldId; 52] = [ $( FieldId::$variant, )* ];

            /// Wire key, e.g. `"LVEF"`.
            pub const fn as_str(self) -> &'static str {
                match self {
                    $( FieldId::$variant => $key, )*
                }
            }

            pub const fn section(self) -> Section {
                match self {
                    $( FieldId::$variant => Section::$section, )*
                }
            }
        }
    };
}

dictionary! {
    Height => "HEIGHT", Vitals, "cm", Some((30.0, 250.0)),
        "Patient height.";
    Weight => "WEIGHT", Vitals, "kg", Some((2.0, 400.0)),
        "Patient body weight.";
    Bsa => "BSA", Vitals, "m²", Some((0.1, 4.0)),
        "Body surface area used to index volumes and mass.";
    Sbp => "SBP", Vitals, "mmHg", Some((30.0, 300.0)),
        "Systolic blood pressure recorded at the exam.";
    Dbp => "DBP", Vitals, "mmHg", Some((10.0, 200.0)),
        "Diastolic blood pressure recorded at the exam.";
    Bhr => "BHR", Vitals, "bpm", Some((20.0, 250.0)),
        "Baseline heart rate during the scan.";

    Lvedv => "LVEDV", LvFunction, "mL", Some((0.0, 1500.0)),
        "Left ventricular end-diastolic volume (absolute, not indexed).";
    Lvesv => "LVESV", LvFunction, "mL", Some((0.0, 1500.0)),
        "Left ventricular end-systolic volume (absolute, not indexed).";
    Lvco => "LVCO", LvFunction, "L/min", Some((0.0, 30.0)),
        "Left ventricular cardiac output.";
    Lvmass => "LVMASS", LvFunction, "g", Some((0.0, 1000.0)),
        "Total left ventricular myocardial mass.";
    Lvsv => "LVSV", LvFunction, "mL", Some((0.0, 1000.0)),
        "Left ventricular stroke volume.";
    Lvef => "LVEF", LvFunction, "%", Some((0.0, 100.0)),
        "Left ventricular ejection fraction.";

    Rvedv => "RVEDV", RvFunction, "mL", Some((0.0, 1500.0)),
        "Right ventricular end-diastolic volume (absolute, not indexed).";
    Rvesv => "RVESV", RvFunction, "mL", Some((0.0, 1500.0)),
        "Right ventricular end-systolic volume (absolute, not indexed).";
    Rvco => "RVCO", RvFunction, "L/min", Some((0.0, 30.0)),
        "Right ventricular cardiac output.";
    Rvmass => "RVMASS", RvFunction, "g", Some((0.0, 500.0)),
        "Total right ventricular myocardial mass.";
    Rvsv => "RVSV", RvFunction, "mL", Some((0.0, 1000.0)),
        "Right ventricular stroke volume.";
    Rvef => "RVEF", RvFunction, "%", Some((0.0, 100.0)),
        "Right ventricular ejection fraction.";

    Lvedvi => "LVEDVI", IndexedFunction, "mL/m²", Some((0.0, 800.0)),
        "Left ventricular end-diastolic volume indexed to body surface area.";
    Lvesvi => "LVESVI", IndexedFunction, "mL/m²", Some((0.0, 800.0)),
        "Left ventricular end-systolic volume indexed to body surface area.";
    Lvcoi => "LVCOI", IndexedFunction, "L/min/m²", Some((0.0, 15.0)),
        "Left ventricular cardiac index (cardiac output per body surface area).";
    Lvmassi => "LVMASSI", IndexedFunction, "g/m²", Some((0.0, 500.0)),
        "Left ventricular mass indexed to body surface area.";
    Lvsvi => "LVSVI", IndexedFunction, "mL/m²", Some((0.0, 500.0)),
        "Left ventricular stroke volume indexed to body surface area.";
    Rvedvi => "RVEDVI", IndexedFunction, "mL/m²", Some((0.0, 800.0)),
        "Right ventricular end-diastolic volume indexed to body surface area.";
    Rvesvi => "RVESVI", IndexedFunction, "mL/m²", Some((0.0, 800.0)),
        "Right ventricular end-systolic volume indexed to body surface area.";
    Rvcoi => "RVCOI", IndexedFunction, "L/min/m²", Some((0.0, 15.0)),
        "Right ventricular cardiac index (cardiac output per body surface area).";
    Rvmassi => "RVMASSI", IndexedFunction, "g/m²", Some((0.0, 250.0)),
        "Right ventricular mass indexed to body surface area.";
    Rvsvi => "RVSVI", IndexedFunction, "mL/m²", Some((0.0, 500.0)),
        "Right ventricular stroke volume indexed to body surface area.";

    Lvedd => "LVEDD", VentricularStructure, "mm", Some((0.0, 150.0)),
        "Left ventricular end-diastolic diameter.";
    Rvedd => "RVEDD", VentricularStructure, "mm", Some((0.0, 150.0)),
        "Right ventricular end-diastolic diameter.";
    Lvesd => "LVESD", VentricularStructure, "mm", Some((0.0, 150.0)),
        "Left ventricular end-systolic diameter.";
    Rvesd => "RVESD", VentricularStructure, "mm", Some((0.0, 150.0)),
        "Right ventricular end-systolic diameter.";
    Lvawt => "LVAWT", VentricularStructure, "mm", Some((0.0, 60.0)),
        "Left ventricular anteroseptal wall thickness.";
    Lviwt => "LVIWT", VentricularStructure, "mm", Some((0.0, 60.0)),
        "Left ventricular inferolateral wall thickness.";

    Lav => "LAV", AtrialStructure, "mL", Some((0.0, 500.0)),
        "Left atrial volume.";
    Lavi => "LAVI", AtrialStructure, "mL/m²", Some((0.0, 300.0)),
        "Left atrial volume indexed to body surface area.";
    Laa2ch => "LAA2CH", AtrialStructure, "cm²", Some((0.0, 100.0)),
        "Left atrial area in the two-chamber view.";
    Laa4ch => "LAA4CH", AtrialStructure, "cm²", Some((0.0, 100.0)),
        "Left atrial area in the four-chamber view.";
    Lal2ch => "LAL2CH", AtrialStructure, "cm", Some((0.0, 20.0)),
        "Left atrial length in the two-chamber view.";
    Lal4ch => "LAL4CH", AtrialStructure, "cm", Some((0.0, 20.0)),
        "Left atrial length in the four-chamber view.";
    Rav => "RAV", AtrialStructure, "mL", Some((0.0, 500.0)),
        "Right atrial volume.";
    Ravi => "RAVI", AtrialStructure, "mL/m²", Some((0.0, 300.0)),
        "Right atrial volume indexed to body surface area.";
    Raa2ch => "RAA2CH", AtrialStructure, "cm²", Some((0.0, 100.0)),
        "Right atrial area in the two-chamber view.";
    Raa4ch => "RAA4CH", AtrialStructure, "cm²", Some((0.0, 100.0)),
        "Right atrial area in the four-chamber view.";
    Ral2ch => "RAL2CH", AtrialStructure, "cm", Some((0.0, 20.0)),
        "Right atrial length in the two-chamber view.";
    Ral4ch => "RAL4CH", AtrialStructure, "cm", Some((0.0, 20.0)),
        "Right atrial length in the four-chamber view.";

    Hct => "HCT", Tissue, "fraction", Some((0.0, 1.0)),
        "Hematocrit expressed as a fraction between 0 and 1.";
    Pret1m => "PRET1M", Tissue, "ms", Some((0.0, 3000.0)),
        "Native (pre-contrast) T1 of the myocardium.";
    Pret1b => "PRET1B", Tissue, "ms", Some((0.0, 3000.0)),
        "Native (pre-contrast) T1 of the blood pool.";
    Postt1m => "POSTT1M", Tissue, "ms", Some((0.0, 3000.0)),
        "Post-contrast T1 of the myocardium.";
    Postt1b => "POSTT1B", Tissue, "ms", Some((0.0, 3000.0)),
        "Post-contrast T1 of the blood pool.";
    Ecv => "ECV", Tissue, "%", Some((0.0, 100.0)),
        "Myocardial extracellular volume fraction.";
}

impl FieldId {
    pub const COUNT: usize = 52;

    /// Position in dictionary order.
    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn spec(self) -> &'static FieldSpec {
        &SPECS[self.index()]
    }

    pub fn unit(self) -> &'static str {
        self.spec().unit
    }

    pub fn from_index(i: usize) -> Option<FieldId> {
        FieldId::ALL.get(i).copied()
    }
}

/// Every dictionary entry in canonical order.
pub fn field_specs() -> &'static [FieldSpec] {
    SPECS
}

impl fmt::Display for FieldId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown field `{0}`")]
pub struct UnknownField(pub String);

impl FromStr for FieldId {
    type Err = UnknownField;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FieldId::ALL
            .into_iter()
            .find(|f| f.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| UnknownField(s.to_string()))
    }
}

impl Serialize for FieldId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for FieldId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
