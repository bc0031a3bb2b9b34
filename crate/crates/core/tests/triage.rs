use cmrx_core::confidence::{ConfidenceBundle, FieldScores};
use cmrx_core::report::{parse_record, CmrRecord, FieldId, FieldValue};
use cmrx_core::triage::{
    ExportFilter, ItemStatus, ReviewDecision, ReviewState, TriageError, TriageStore, Verdict,
};

fn bundle(low: &[(FieldId, f64)]) -> ConfidenceBundle {
    ConfidenceBundle::from_fn(|f| match low.iter().find(|(g, _)| *g == f) {
        Some(&(_, s)) => FieldScores::new(s, s, s, 0.7),
        None => FieldScores::new(0.95, 1.0, 1.0, 0.7),
    })
}

fn record() -> CmrRecord {
    CmrRecord::empty().with(FieldId::Lvef, 60.0).with(FieldId::Lvedv, 150.0).with(FieldId::Bhr, 70.0)
}

fn decide(item_id: &str, verdict: Verdict) -> ReviewDecision {
    ReviewDecision {
        item_id: item_id.into(),
        verdict,
        reviewer: "tester".into(),
        timestamp: "2024-06-01T12:00:00Z".parse().unwrap(),
    }
}

#[test]
fn no_flags_no_items() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = TriageStore::open(dir.path()).unwrap();
    assert!(store.enqueue(&record(), &bundle(&[]), "R1", "text").unwrap().is_empty());
    assert_eq!(store.export_corpus(ExportFilter::CleanOnly).len(), 1);
}

#[test]
fn flagged_fields_queue_in_ascending_confidence() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = TriageStore::open(dir.path()).unwrap();
    let b = bundle(&[(FieldId::Lvef, 0.5), (FieldId::Bhr, 0.2), (FieldId::Lvedv, 0.6)]);
    let items = store.enqueue(&record(), &b, "R1", "text").unwrap();
    let fields: Vec<_> = items.iter().map(|i| i.field.unwrap()).collect();
    assert_eq!(fields, [FieldId::Bhr, FieldId::Lvef, FieldId::Lvedv]);
    assert!(items.iter().all(|i| i.confidence < 0.7 && i.status == ItemStatus::Pending));
    assert_eq!(items[1].extracted, FieldValue::Present(60.0));
    assert_eq!(items[0].report_excerpt, "text");
}

#[test]
fn enqueue_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = TriageStore::open(dir.path()).unwrap();
    let b = bundle(&[(FieldId::Lvef, 0.5)]);
    assert_eq!(store.enqueue(&record(), &b, "R1", "t").unwrap().len(), 1);
    assert!(store.enqueue(&record(), &b, "R1", "t").unwrap().is_empty());
    let reopened = TriageStore::open(dir.path()).unwrap();
    assert_eq!(reopened.queue(None).len(), 1);
    let rows = std::fs::read_to_string(dir.path().join("queue.ndjson")).unwrap();
    assert_eq!(rows.lines().count(), 1);
}

#[test]
fn queue_ties_break_on_report_then_field() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = TriageStore::open(dir.path()).unwrap();
    let b = bundle(&[(FieldId::Lvef, 0.5), (FieldId::Lvedv, 0.5)]);
    store.enqueue(&record(), &b, "R2", "t").unwrap();
    store.enqueue(&record(), &b, "R1", "t").unwrap();
    let ids: Vec<_> = store.queue(Some(ItemStatus::Pending)).into_iter().map(|i| i.item_id).collect();
    assert_eq!(ids, ["R1:LVEDV", "R1:LVEF", "R2:LVEDV", "R2:LVEF"]);
}

#[test]
fn accept_correct_and_guard() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = TriageStore::open(dir.path()).unwrap();
    let b = bundle(&[(FieldId::Lvef, 0.5), (FieldId::Bhr, 0.4)]);
    store.enqueue(&record(), &b, "R1", "t").unwrap();

    let after = store.apply_decision(decide("R1:BHR", Verdict::Accept)).unwrap().unwrap();
    assert_eq!(after, record());
    let after = store
        .apply_decision(decide("R1:LVEF", Verdict::Correct { new_value: FieldValue::Present(65.0) }))
        .unwrap()
        .unwrap();
    assert_eq!(after.get(FieldId::Lvef), FieldValue::Present(65.0));
    assert_eq!(store.report("R1").unwrap().extracted.as_ref().unwrap().get(FieldId::Lvef), FieldValue::Present(60.0));

    assert!(matches!(
        store.apply_decision(decide("R1:LVEF", Verdict::Accept)),
        Err(TriageError::AlreadyDecided { status: ItemStatus::Corrected, .. })
    ));
    assert!(matches!(store.apply_decision(decide("R9:LVEF", Verdict::Accept)), Err(TriageError::NotFound(_))));
    assert_eq!(store.decisions().len(), 2);

    let c = store.counts();
    assert_eq!((c.pending, c.accepted, c.corrected), (0, 1, 1));

    let corpus = store.export_corpus(ExportFilter::AllReviewed);
    assert_eq!(corpus.len(), 1);
    assert_eq!(corpus[0].review_state, ReviewState::Reviewed);
    let target = parse_record(&corpus[0].target).unwrap();
    assert_eq!(target.get(FieldId::Lvef), FieldValue::Present(65.0));
    assert!(store.export_corpus(ExportFilter::CleanOnly).is_empty());
}

#[test]
fn out_of_bounds_correction_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = TriageStore::open(dir.path()).unwrap();
    store.enqueue(&record(), &bundle(&[(FieldId::Lvef, 0.5)]), "R1", "t").unwrap();
    let bad = decide("R1:LVEF", Verdict::Correct { new_value: FieldValue::Present(140.0) });
    assert!(matches!(store.apply_decision(bad), Err(TriageError::InvalidValue(_))));
    assert_eq!(store.item("R1:LVEF").unwrap().status, ItemStatus::Pending);
    assert!(store.decisions().is_empty());
}

#[test]
fn pending_reports_are_not_exported() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = TriageStore::open(dir.path()).unwrap();
    store.enqueue(&record(), &bundle(&[]), "R1", "a").unwrap();
    store.enqueue(&record(), &bundle(&[]), "R2", "b").unwrap();
    store.enqueue(&record(), &bundle(&[(FieldId::Lvef, 0.1)]), "R3", "c").unwrap();
    let ids: Vec<_> = store.export_corpus(ExportFilter::AllReviewed).into_iter().map(|e| e.report_id).collect();
    assert_eq!(ids, ["R1", "R2"]);
}

#[test]
fn empty_store_exports_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let store = TriageStore::open(dir.path()).unwrap();
    assert!(store.export_corpus(ExportFilter::AllReviewed).is_empty());
    assert!(cmrx_core::triage::render_corpus(&[]).is_empty());
}

#[test]
fn unparsed_report_gets_one_whole_report_item() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = TriageStore::open(dir.path()).unwrap();
    let items = store.enqueue_unparsed("R5", "raw").unwrap();
    assert_eq!(items.len(), 1);
    assert_eq!(items[0].item_id, "R5:*");
    assert!(store.export_corpus(ExportFilter::AllReviewed).is_empty());

    let bad = decide("R5:*", Verdict::Correct { new_value: FieldValue::Null });
    assert!(matches!(store.apply_decision(bad), Err(TriageError::InvalidValue(_))));
    let fixed = record().with(FieldId::Rvef, 55.0);
    store.apply_decision(decide("R5:*", Verdict::Replace { record: fixed.clone() })).unwrap();
    let corpus = store.export_corpus(ExportFilter::AllReviewed);
    assert_eq!(parse_record(&corpus[0].target).unwrap(), fixed);
}

#[test]
fn rejected_unparsed_report_stays_out() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = TriageStore::open(dir.path()).unwrap();
    store.enqueue_unparsed("R5", "raw").unwrap();
    assert_eq!(store.apply_decision(decide("R5:*", Verdict::Accept)).unwrap(), None);
    assert!(store.export_corpus(ExportFilter::AllReviewed).is_empty());
}

#[test]
fn reopen_and_rebuild_agree() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = TriageStore::open(dir.path()).unwrap();
    store.enqueue(&record(), &bundle(&[(FieldId::Lvef, 0.5)]), "R1", "t").unwrap();
    store.enqueue(&record(), &bundle(&[(FieldId::Bhr, 0.5)]), "R2", "t").unwrap();
    store
        .apply_decision(decide("R1:LVEF", Verdict::Correct { new_value: FieldValue::Present(63.0) }))
        .unwrap();
    let reopened = TriageStore::open(dir.path()).unwrap();
    let rebuilt = TriageStore::rebuild(dir.path()).unwrap();
    for other in [&reopened, &rebuilt] {
        assert_eq!(other.queue(None), store.queue(None));
        assert_eq!(other.export_corpus(ExportFilter::AllReviewed), store.export_corpus(ExportFilter::AllReviewed));
        assert_eq!(other.report("R1"), store.report("R1"));
    }
}
