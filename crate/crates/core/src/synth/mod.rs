//! Seeded synthetic reports with known ground truth, and labeled
//! corruption of extraction output.

mod corpus;
mod corrupt;
mod generate;
mod render;

pub use corpus::{generate_corpus, read_corpus, report_id, write_corpus, CorpusConfig, CorpusRecord};
pub use corrupt::{corrupt, Corrupted, CorruptionPlan, PlanError};
pub use generate::{sample_gold, GenConfig};
pub use render::{label, render_report, rule_extract, TemplateStyle};
