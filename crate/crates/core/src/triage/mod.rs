//! Review queue for low-confidence values, the decision log, and export
//! of the reviewed training corpus.

mod model;
mod store;

pub use model::{
    item_id, CorpusEntry, ExportFilter, ItemStatus, ReportState, ReviewDecision, ReviewItem,
    ReviewState, ScoreBreakdown, StoredReport, Verdict, WHOLE_REPORT,
};
pub use store::{
    render_corpus, write_atomic, write_corpus_file, QueueCounts, StorageError, TriageError,
    TriageStore, DECISIONS_FILE, QUEUE_FILE, REPORTS_FILE,
};
