use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use formatkit::data_io::{self, DataError};
use formatkit::metrics::{EvalReport, TaskSummary};
use formatkit::model::{TaskInstance, TaskKind};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

#[test]
fn golden_records_round_trip_byte_for_byte() {
    let text = fs::read_to_string(fixture("golden.jsonl")).unwrap();
    for line in text.lines() {
        let inst: TaskInstance = serde_json::from_str(line).unwrap();
        assert_eq!(serde_json::to_string(&inst).unwrap(), line);
    }
}

#[test]
fn load_then_write_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let ds = data_io::load_jsonl(&fixture("golden.jsonl")).unwrap();
    assert_eq!(ds.records.len(), 13);
    let first = dir.path().join("a.jsonl");
    let second = dir.path().join("b.jsonl");
    data_io::write_jsonl(&ds.records, &first).unwrap();
    let again = data_io::load_jsonl(&first).unwrap();
    data_io::write_jsonl(&again.records, &second).unwrap();
    assert_eq!(fs::read(&first).unwrap(), fs::read(&second).unwrap());
    assert_eq!(fs::read(&first).unwrap(), fs::read(fixture("golden.jsonl")).unwrap());
}

#[test]
fn unknown_task_and_unknown_field_are_schema_errors() {
    let bad_task = r#"{"task":"Poem","id":"p","query":{},"references":[]}"#;
    assert!(matches!(data_io::parse_jsonl(bad_task, "t"), Err(DataError::Schema { line: 1, .. })));
    let extra = r#"{"task":"AcroW","id":"a","query":{"word":"cat","colour":"red"}}"#;
    assert!(matches!(data_io::parse_jsonl(extra, "t"), Err(DataError::Schema { line: 1, .. })));
}

fn summary(n: usize, passes: usize) -> TaskSummary {
    TaskSummary {
        n,
        passes,
        ffr: passes as f64 / n as f64,
        first_attempt_ffr: None,
        gq: None,
        gq_metric: None,
    }
}

#[test]
fn summary_uses_the_macro_average() {
    let dir = tempfile::tempdir().unwrap();
    let report = EvalReport {
        tasks: BTreeMap::from([(TaskKind::FTime, summary(4, 3))]),
    };
    data_io::write_report::<()>(&report, None, dir.path()).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(doc["tasks"]["FTime"]["ffr"], 0.75);
    assert_eq!(doc["overall_ffr"], 0.75);

    let report = EvalReport {
        tasks: BTreeMap::from([(TaskKind::FTime, summary(2, 2)), (TaskKind::Ner, summary(100, 50))]),
    };
    data_io::write_report::<()>(&report, None, dir.path()).unwrap();
    let back = data_io::read_summary(&dir.path().join("summary.json")).unwrap();
    assert_eq!(back, report);
    assert_eq!(back.overall_ffr(), Some(0.75));
}

#[test]
fn empty_report_writes_a_header() {
    let dir = tempfile::tempdir().unwrap();
    data_io::write_report::<()>(&EvalReport::default(), None, dir.path()).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(doc["format_version"], 1);
    assert!(doc["overall_ffr"].is_null());
    assert_eq!(doc["tasks"].as_object().unwrap().len(), 0);
}

#[test]
fn responses_and_scripts_reject_duplicates() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("r.jsonl");
    fs::write(&p, "{\"id\":\"a\",\"response\":\"x\"}\n{\"id\":\"a\",\"response\":\"y\"}\n").unwrap();
    assert!(matches!(data_io::load_responses(&p), Err(DataError::DuplicateId { .. })));
    let scripts = data_io::load_scripts(&fixture("refine_scripts.jsonl")).unwrap();
    assert_eq!(scripts["ftime-1"], vec!["2002-10-19 14:20".to_string(), "20021019T142000".to_string()]);
}
