use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::corrupt::{corrupt, CorruptionPlan};
use super::generate::{sample_gold, GenConfig};
use super::render::{render_report, TemplateStyle};
use crate::confidence::{Ledger, ReferenceTable};
use crate::eval::ErrorLabel;
use crate::gateway::mix_seed;
use crate::report::{serialize_record, CmrRecord, DiagnosisCategory, FieldId};

/// One generated report with its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub report_id: String,
    pub text: String,
    pub gold_record: CmrRecord,
    pub style: TemplateStyle,
    /// Intended taxonomy label per field, present when a corruption plan
    /// was applied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corruption_labels: Option<BTreeMap<FieldId, ErrorLabel>>,
    /// What a faulty extractor would have returned: the serialized
    /// corrupted record, or half of it when truncated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corrupted_output: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusConfig {
    pub n: usize,
    pub seed: u64,
    pub styles: Vec<TemplateStyle>,
    pub gen: GenConfig,
    pub plan: Option<CorruptionPlan>,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            n: 100,
            seed: 0,
            styles: TemplateStyle::ALL.to_vec(),
            gen: GenConfig::default(),
            plan: None,
        }
    }
}

pub fn report_id(i: usize) -> String {
    format!("R{:06}", i + 1)
}

/// Generates `cfg.n` reports. Styles cycle in the given order; categories
/// are drawn uniformly, `Unspecified` included.
pub fn generate_corpus(cfg: &CorpusConfig, ranges: &ReferenceTable, ledger: &Ledger) -> Vec<CorpusRecord> {
    let styles = if cfg.styles.is_empty() { TemplateStyle::ALL.to_vec() } else { cfg.styles.clone() };
    (0..cfg.n)
        .map(|i| {
            let seed = mix_seed(cfg.seed, i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let category = DiagnosisCategory::ALL[rng.random_range(0..DiagnosisCategory::ALL.len())];
            let gold = sample_gold(rng.random(), category, ranges, ledger, &cfg.gen);
            let style = styles[i % styles.len()];
            let text = render_report(&gold, style, rng.random());

            let (corruption_labels, corrupted_output) = match &cfg.plan {
                None => (None, None),
                Some(plan) => {
                    let (out, labels) = corrupt(&gold, &plan.reseeded(i as u64));
                    let output = match out {
                        Ok(rec) => serialize_record(&rec),
                        Err(_) => {
                            let full = serialize_record(&gold);
                            full[..full.len() / 2].to_string()
                        }
                    };
                    let labels = FieldId::ALL.iter().map(|&f| (f, labels[f.index()])).collect();
                    (Some(labels), Some(output))
                }
            };
            CorpusRecord {
                report_id: report_id(i),
                text,
                gold_record: gold,
                style,
                corruption_labels,
                corrupted_output,
            }
        })
        .collect()
}

pub fn write_corpus(records: &[CorpusRecord], mut w: impl Write) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn read_corpus(r: impl BufRead) -> io::Result<Vec<CorpusRecord>> {
    r.lines()
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|l| serde_json::from_str(&l?).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e)))
        .collect()
}
