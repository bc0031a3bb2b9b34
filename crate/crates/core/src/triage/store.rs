use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::model::{
    item_id, CorpusEntry, ExportFilter, ItemStatus, ReportState, ReviewDecision, ReviewItem,
    ReviewState, ScoreBreakdown, StoredReport, Verdict,
};
use crate::confidence::{AggregateError, ConfidenceBundle};
use crate::gateway::build_prompt;
use crate::report::{check_bounds, field_specs, serialize_record, CmrRecord, FieldId, FieldValue, ParseError};

pub const REPORTS_FILE: &str = "reports.ndjson";
pub const DECISIONS_FILE: &str = "decisions.ndjson";
pub const QUEUE_FILE: &str = "queue.ndjson";

#[derive(Debug, thiserror::Error)]
#[error("{path}: {message}")]
pub struct StorageError {
    pub path: PathBuf,
    pub message: String,
}

#[derive(Debug, thiserror::Error)]
pub enum TriageError {
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error("no review item `{0}`")]
    NotFound(String),
    #[error("item `{item_id}` is already {status:?}")]
    AlreadyDecided { item_id: String, status: ItemStatus },
    #[error("invalid decision: {0}")]
    InvalidValue(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct QueueCounts {
    pub pending: usize,
    pub accepted: usize,
    pub corrected: usize,
}

/// Reports, review items and the decision log, mirrored to three ndjson
/// files under one directory. Every mutation rewrites the touched files
/// through a temporary file and a rename.
#[derive(Debug)]
pub struct TriageStore {
    dir: PathBuf,
    reports: BTreeMap<String, StoredReport>,
    items: BTreeMap<String, ReviewItem>,
    decisions: Vec<ReviewDecision>,
}

fn storage_err(path: &Path, e: impl std::fmt::Display) -> StorageError {
    StorageError { path: path.to_path_buf(), message: e.to_string() }
}

fn read_ndjson<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, StorageError> {
    let file = match fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(storage_err(path, e)),
    };
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| storage_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| storage_err(path, format!("line {}: {e}", n + 1)))?);
    }
    Ok(out)
}

/// Writes `bytes` to `path` atomically.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StorageError> {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        storage_err(path, e)
    })
}

fn ndjson<'a, T: Serialize + 'a>(rows: impl IntoIterator<Item = &'a T>) -> Vec<u8> {
    let mut buf = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut buf, r).expect("store rows serialize");
        buf.push(b'\n');
    }
    buf
}

fn field_rank(f: Option<FieldId>) -> usize {
    f.map_or(0, |f| f.index() + 1)
}

fn queue_order(a: &ReviewItem, b: &ReviewItem) -> std::cmp::Ordering {
    a.confidence
        .total_cmp(&b.confidence)
        .then_with(|| a.report_id.cmp(&b.report_id))
        .then_with(|| field_rank(a.field).cmp(&field_rank(b.field)))
}

impl TriageStore {
    /// Opens the store in `dir`, creating it if needed, and loads the
    /// persisted state as is.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StorageError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| storage_err(&dir, e))?;
        let reports: Vec<StoredReport> = read_ndjson(&dir.join(REPORTS_FILE))?;
        let items: Vec<ReviewItem> = read_ndjson(&dir.join(QUEUE_FILE))?;
        let decisions = read_ndjson(&dir.join(DECISIONS_FILE))?;
        Ok(TriageStore {
            reports: reports.into_iter().map(|r| (r.report_id.clone(), r)).collect(),
            items: items.into_iter().map(|i| (i.item_id.clone(), i)).collect(),
            decisions,
            dir,
        })
    }

    /// Reconstructs reports and queue from the ingested extractions and the
    /// decision log alone, ignoring the persisted queue and current records.
    /// Nothing is written.
    pub fn rebuild(dir: impl Into<PathBuf>) -> Result<Self, TriageError> {
        let dir = dir.into();
        let ingested: Vec<StoredReport> = read_ndjson(&dir.join(REPORTS_FILE))?;
        let log: Vec<ReviewDecision> = read_ndjson(&dir.join(DECISIONS_FILE))?;
        let mut store = TriageStore { dir, reports: BTreeMap::new(), items: BTreeMap::new(), decisions: Vec::new() };
        for mut r in ingested {
            r.current = r.extracted.clone();
            r.state = if r.extracted.is_some() { ReportState::Extracted } else { ReportState::Unparsed };
            let id = r.report_id.clone();
            store.insert_items(&r);
            store.reports.insert(id, r);
        }
        for d in log {
            store.apply(d)?;
        }
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Writes the full state into the store directory.
    pub fn persist(&self) -> Result<(), StorageError> {
        self.persist_reports()?;
        self.persist_queue()?;
        self.persist_decisions()
    }

    /// Writes the full state into another directory.
    pub fn persist_to(&self, dir: &Path) -> Result<(), StorageError> {
        fs::create_dir_all(dir).map_err(|e| storage_err(dir, e))?;
        write_atomic(&dir.join(REPORTS_FILE), &ndjson(self.reports.values()))?;
        write_atomic(&dir.join(QUEUE_FILE), &ndjson(self.items.values()))?;
        write_atomic(&dir.join(DECISIONS_FILE), &ndjson(&self.decisions))
    }

    fn persist_reports(&self) -> Result<(), StorageError> {
        write_atomic(&self.dir.join(REPORTS_FILE), &ndjson(self.reports.values()))
    }

    fn persist_queue(&self) -> Result<(), StorageError> {
        write_atomic(&self.dir.join(QUEUE_FILE), &ndjson(self.items.values()))
    }

    fn persist_decisions(&self) -> Result<(), StorageError> {
        write_atomic(&self.dir.join(DECISIONS_FILE), &ndjson(&self.decisions))
    }

    /// Adds a pending item for each flagged field of an extracted report.
    /// Re-enqueueing a known report or field is a no-op. Returns the newly
    /// created items in queue order.
    pub fn enqueue(
        &mut self,
        record: &CmrRecord,
        bundle: &ConfidenceBundle,
        report_id: &str,
        report_text: &str,
    ) -> Result<Vec<ReviewItem>, TriageError> {
        let report = self.reports.get(report_id).cloned().unwrap_or_else(|| StoredReport {
            report_id: report_id.to_string(),
            text: report_text.to_string(),
            state: ReportState::Extracted,
            extracted: Some(record.clone()),
            current: Some(record.clone()),
            bundle: Some(bundle.clone()),
            gold: None,
        });
        self.commit_report(report)
    }

    /// Records a report none of whose samples parsed, with one item
    /// covering the whole report.
    pub fn enqueue_unparsed(&mut self, report_id: &str, report_text: &str) -> Result<Vec<ReviewItem>, TriageError> {
        let report = self.reports.get(report_id).cloned().unwrap_or_else(|| StoredReport {
            report_id: report_id.to_string(),
            text: report_text.to_string(),
            state: ReportState::Unparsed,
            extracted: None,
            current: None,
            bundle: None,
            gold: None,
        });
        self.commit_report(report)
    }

    /// Enqueues the outcome of aggregating one report.
    pub fn ingest(
        &mut self,
        report_id: &str,
        report_text: &str,
        outcome: &Result<(CmrRecord, ConfidenceBundle), AggregateError>,
    ) -> Result<Vec<ReviewItem>, TriageError> {
        match outcome {
            Ok((record, bundle)) => self.enqueue(record, bundle, report_id, report_text),
            Err(AggregateError::AllInvalid(_)) => self.enqueue_unparsed(report_id, report_text),
        }
    }

    fn commit_report(&mut self, report: StoredReport) -> Result<Vec<ReviewItem>, TriageError> {
        let fresh = self.insert_items(&report);
        let known = self.reports.contains_key(&report.report_id);
        if !known {
            self.reports.insert(report.report_id.clone(), report);
            self.persist_reports()?;
        }
        if !fresh.is_empty() {
            self.persist_queue()?;
        }
        Ok(fresh)
    }

    fn insert_items(&mut self, report: &StoredReport) -> Vec<ReviewItem> {
        let mut candidates = Vec::new();
        match (&report.current, &report.bundle) {
            (Some(record), Some(bundle)) => {
                for (f, s) in bundle.iter().filter(|(_, s)| s.flagged) {
                    candidates.push(ReviewItem {
                        item_id: item_id(&report.report_id, Some(f)),
                        report_id: report.report_id.clone(),
                        field: Some(f),
                        extracted: record.get(f),
                        confidence: s.final_score,
                        score_breakdown: ScoreBreakdown { dist: s.dist, stab: s.stab, cons: s.cons },
                        status: ItemStatus::Pending,
                        report_excerpt: report.text.clone(),
                    });
                }
            }
            _ => candidates.push(ReviewItem {
                item_id: item_id(&report.report_id, None),
                report_id: report.report_id.clone(),
                field: None,
                extracted: FieldValue::Null,
                confidence: 0.0,
                score_breakdown: ScoreBreakdown { dist: 0.0, stab: 0.0, cons: 0.0 },
                status: ItemStatus::Pending,
                report_excerpt: report.text.clone(),
            }),
        }
        let mut fresh: Vec<ReviewItem> = candidates
            .into_iter()
            .filter(|i| !self.items.contains_key(&i.item_id))
            .collect();
        fresh.sort_by(queue_order);
        for i in &fresh {
            self.items.insert(i.item_id.clone(), i.clone());
        }
        fresh
    }

    /// Attaches a reference record to a stored report.
    pub fn set_gold(&mut self, report_id: &str, gold: CmrRecord) -> Result<(), TriageError> {
        let r = self
            .reports
            .get_mut(report_id)
            .ok_or_else(|| TriageError::NotFound(report_id.to_string()))?;
        r.gold = Some(gold);
        self.persist_reports()?;
        Ok(())
    }

    /// Applies and logs one decision. Returns the report's record after the
    /// change, or `None` when the report was rejected.
    pub fn apply_decision(&mut self, d: ReviewDecision) -> Result<Option<CmrRecord>, TriageError> {
        let out = self.apply(d)?;
        self.persist_decisions()?;
        self.persist_queue()?;
        self.persist_reports()?;
        Ok(out)
    }

    fn apply(&mut self, d: ReviewDecision) -> Result<Option<CmrRecord>, TriageError> {
        let item = self.items.get(&d.item_id).ok_or_else(|| TriageError::NotFound(d.item_id.clone()))?;
        if item.status != ItemStatus::Pending {
            return Err(TriageError::AlreadyDecided { item_id: d.item_id.clone(), status: item.status });
        }
        let report = self
            .reports
            .get(&item.report_id)
            .ok_or_else(|| TriageError::NotFound(item.report_id.clone()))?;
        let mut report = report.clone();

        let status = match (item.field, &d.verdict) {
            (Some(_), Verdict::Accept) => ItemStatus::Accepted,
            (Some(f), Verdict::Correct { new_value }) => {
                if let FieldValue::Present(v) = *new_value {
                    check_bounds(f, v).map_err(|e| TriageError::InvalidValue(e.to_string()))?;
                }
                let current = report.current.as_mut().expect("extracted report has a record");
                current.set(f, *new_value);
                ItemStatus::Corrected
            }
            (None, Verdict::Accept) => {
                report.state = ReportState::Rejected;
                ItemStatus::Accepted
            }
            (None, Verdict::Replace { record }) => {
                for (f, v) in record.iter() {
                    if let FieldValue::Present(x) = v {
                        check_bounds(f, x).map_err(|e| TriageError::InvalidValue(e.to_string()))?;
                    }
                }
                report.current = Some(record.clone());
                report.state = ReportState::Extracted;
                ItemStatus::Corrected
            }
            (Some(_), Verdict::Replace { .. }) => {
                return Err(TriageError::InvalidValue("a full record only replaces a whole-report item".into()))
            }
            (None, Verdict::Correct { .. }) => {
                return Err(TriageError::InvalidValue(
                    "a whole-report item takes accept or a full replacement record".into(),
                ))
            }
        };
        let out = report.current.clone().filter(|_| report.state != ReportState::Rejected);
        self.items.get_mut(&d.item_id).expect("checked above").status = status;
        self.reports.insert(report.report_id.clone(), report);
        self.decisions.push(d);
        Ok(out)
    }

    pub fn item(&self, item_id: &str) -> Option<&ReviewItem> {
        self.items.get(item_id)
    }

    pub fn report(&self, report_id: &str) -> Option<&StoredReport> {
        self.reports.get(report_id)
    }

    pub fn reports(&self) -> impl Iterator<Item = &StoredReport> {
        self.reports.values()
    }

    pub fn decisions(&self) -> &[ReviewDecision] {
        &self.decisions
    }

    /// Items in queue order: ascending confidence, ties by report id then
    /// dictionary order of the field.
    pub fn queue(&self, status: Option<ItemStatus>) -> Vec<ReviewItem> {
        let mut v: Vec<ReviewItem> = self
            .items
            .values()
            .filter(|i| status.is_none_or(|s| i.status == s))
            .cloned()
            .collect();
        v.sort_by(queue_order);
        v
    }

    pub fn items_for(&self, report_id: &str) -> Vec<&ReviewItem> {
        self.items.values().filter(|i| i.report_id == report_id).collect()
    }

    pub fn counts(&self) -> QueueCounts {
        let mut c = QueueCounts::default();
        for i in self.items.values() {
            match i.status {
                ItemStatus::Pending => c.pending += 1,
                ItemStatus::Accepted => c.accepted += 1,
                ItemStatus::Corrected => c.corrected += 1,
            }
        }
        c
    }

    /// Training pairs for every exportable report, ordered by report id.
    /// Reports with a pending item, rejected reports and, for
    /// `CleanOnly`, reports that needed review are left out.
    pub fn export_corpus(&self, filter: ExportFilter) -> Vec<CorpusEntry> {
        self.reports
            .values()
            .filter_map(|r| {
                let current = r.current.as_ref().filter(|_| r.state == ReportState::Extracted)?;
                let items = self.items_for(&r.report_id);
                if items.iter().any(|i| i.status == ItemStatus::Pending) {
                    return None;
                }
                let review_state = if items.is_empty() { ReviewState::Clean } else { ReviewState::Reviewed };
                if filter == ExportFilter::CleanOnly && review_state != ReviewState::Clean {
                    return None;
                }
                Some(CorpusEntry {
                    report_id: r.report_id.clone(),
                    prompt: build_prompt(&r.text, field_specs()),
                    target: serialize_record(current),
                    review_state,
                })
            })
            .collect()
    }

    /// Reports that carry a reference record, paired with what extraction
    /// produced for them.
    pub fn gold_pairs(&self) -> (Vec<CmrRecord>, Vec<Result<CmrRecord, ParseError>>) {
        self.reports
            .values()
            .filter_map(|r| {
                let gold = r.gold.clone()?;
                let pred = r.extracted.clone().ok_or_else(|| ParseError::Invalid {
                    message: "no sample parsed".into(),
                });
                Some((gold, pred))
            })
            .unzip()
    }
}

/// Serializes corpus entries as ndjson.
pub fn render_corpus(entries: &[CorpusEntry]) -> Vec<u8> {
    ndjson(entries)
}

pub fn write_corpus_file(entries: &[CorpusEntry], path: &Path) -> Result<(), StorageError> {
    write_atomic(path, &render_corpus(entries))
}
