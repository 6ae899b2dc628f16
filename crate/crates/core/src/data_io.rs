//! Dataset ingestion, seeded sampling and report files.
//!
//! Datasets are JSON Lines: one object per line with the fields `task`, `id`,
//! `query`, `references` and optional `meta`. Reports go to a directory:
//! `summary.json` plus optional `verdicts.jsonl` and `traces.jsonl`.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::metrics::{EvalReport, TaskSummary};
use crate::model::{ModelError, TaskInstance, TaskKind};

pub const REPORT_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_SAMPLE_CAP: usize = 4000;

pub const SUMMARY_FILE: &str = "summary.json";
pub const VERDICTS_FILE: &str = "verdicts.jsonl";
pub const TRACES_FILE: &str = "traces.jsonl";

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}:{line}: not valid JSON: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("{path}:{line}: schema violation at `{field}`: {reason}")]
    Schema {
        path: String,
        line: usize,
        field: String,
        reason: String,
    },
    #[error("{path}: duplicate id {id:?} on lines {first} and {second}")]
    DuplicateId {
        path: String,
        id: String,
        first: usize,
        second: usize,
    },
    #[error("sample cap must be at least 1")]
    InvalidCap,
    #[error("I/O error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl DataError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        DataError::Io { path: path.to_path_buf(), source }
    }
}

/// A loaded dataset. Ids are unique and every record is valid.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFile {
    pub path: PathBuf,
    pub records: Vec<TaskInstance>,
}

fn read_text(path: &Path) -> Result<String, DataError> {
    fs::read_to_string(path).map_err(|e| DataError::io(path, e))
}

/// Non-blank lines as `(1-based line number, parsed JSON)`.
fn json_lines(text: &str, path: &str) -> Result<Vec<(usize, Value)>, DataError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map(|v| (i + 1, v))
                .map_err(|e| DataError::Parse {
                    path: path.to_string(),
                    line: i + 1,
                    message: e.to_string(),
                })
        })
        .collect()
}

fn schema(path: &str, line: usize, field: impl Into<String>, reason: impl Into<String>) -> DataError {
    DataError::Schema {
        path: path.to_string(),
        line,
        field: field.into(),
        reason: reason.into(),
    }
}

fn check_unique<'a>(path: &str, ids: impl Iterator<Item = (usize, &'a str)>) -> Result<(), DataError> {
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for (line, id) in ids {
        if let Some(&first) = seen.get(id) {
            return Err(DataError::DuplicateId {
                path: path.to_string(),
                id: id.to_string(),
                first,
                second: line,
            });
        }
        seen.insert(id, line);
    }
    Ok(())
}

/// Parses dataset text; `origin` names the source in diagnostics.
pub fn parse_jsonl(text: &str, origin: &str) -> Result<Vec<TaskInstance>, DataError> {
    let mut records = Vec::new();
    let mut lines = Vec::new();
    for (line, value) in json_lines(text, origin)? {
        let inst = TaskInstance::from_value(value).map_err(|e| match e {
            ModelError::SchemaViolation { path, reason } => schema(origin, line, path, reason),
            other => schema(origin, line, "record", other.to_string()),
        })?;
        lines.push(line);
        records.push(inst);
    }
    check_unique(origin, lines.iter().copied().zip(records.iter().map(|r| r.id.as_str())))?;
    Ok(records)
}

pub fn load_jsonl(path: &Path) -> Result<DatasetFile, DataError> {
    let records = parse_jsonl(&read_text(path)?, &path.display().to_string())?;
    Ok(DatasetFile {
        path: path.to_path_buf(),
        records,
    })
}

fn write_lines<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<(), DataError> {
    let file = fs::File::create(path).map_err(|e| DataError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut out, &item).map_err(|e| DataError::io(path, e.into()))?;
        out.write_all(b"\n").map_err(|e| DataError::io(path, e))?;
    }
    out.flush().map_err(|e| DataError::io(path, e))
}

/// Writes records in the dataset format; loading the result gives the same
/// records back.
pub fn write_jsonl(records: &[TaskInstance], path: &Path) -> Result<(), DataError> {
    write_lines(path, records)
}

/// Seeded selection of at most `cap` instances.
///
/// With `n <= cap` the result is a seeded shuffle of everything; otherwise a
/// seeded uniform sample of `cap` instances without replacement.
pub fn sample_queries(records: &[TaskInstance], cap: usize, seed: u64) -> Result<Vec<TaskInstance>, DataError> {
    if cap == 0 {
        return Err(DataError::InvalidCap);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if records.len() <= cap {
        let mut all = records.to_vec();
        all.shuffle(&mut rng);
        Ok(all)
    } else {
        Ok(index::sample(&mut rng, records.len(), cap)
            .into_iter()
            .map(|i| records[i].clone())
            .collect())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ResponseLine {
    id: String,
    response: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScriptLine {
    id: String,
    responses: Vec<String>,
}

fn load_keyed<T: DeserializeOwned, V>(path: &Path, key: impl Fn(T) -> (String, V)) -> Result<BTreeMap<String, V>, DataError> {
    let origin = path.display().to_string();
    let mut out = BTreeMap::new();
    let mut lines = Vec::new();
    for (line, value) in json_lines(&read_text(path)?, &origin)? {
        let item: T = serde_json::from_value(value).map_err(|e| schema(&origin, line, "record", e.to_string()))?;
        let (id, v) = key(item);
        lines.push((line, id.clone()));
        out.entry(id).or_insert(v);
    }
    check_unique(&origin, lines.iter().map(|(l, id)| (*l, id.as_str())))?;
    Ok(out)
}

/// Reads `{"id": ..., "response": ...}` lines.
pub fn load_responses(path: &Path) -> Result<BTreeMap<String, String>, DataError> {
    load_keyed(path, |r: ResponseLine| (r.id, r.response))
}

/// Reads `{"id": ..., "responses": [...]}` lines for scripted mock runs.
pub fn load_scripts(path: &Path) -> Result<BTreeMap<String, Vec<String>>, DataError> {
    load_keyed(path, |r: ScriptLine| (r.id, r.responses))
}

#[derive(Serialize, Deserialize)]
struct SummaryDoc {
    format_version: u32,
    overall_ffr: Option<f64>,
    tasks: BTreeMap<TaskKind, TaskSummary>,
}

/// Summary document as written to `summary.json`.
pub fn summary_json(report: &EvalReport) -> String {
    let doc = SummaryDoc {
        format_version: REPORT_FORMAT_VERSION,
        overall_ffr: report.overall_ffr(),
        tasks: report.tasks.clone(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("summaries always serialize");
    s.push('\n');
    s
}

/// Reads a `summary.json` back into a report.
pub fn read_summary(path: &Path) -> Result<EvalReport, DataError> {
    let origin = path.display().to_string();
    let doc: SummaryDoc =
        serde_json::from_str(&read_text(path)?).map_err(|e| schema(&origin, e.line(), "summary", e.to_string()))?;
    Ok(EvalReport { tasks: doc.tasks })
}

/// Writes `summary.json` into `dir`, plus `traces.jsonl` when traces are
/// given. The directory is created if needed.
pub fn write_report<T: Serialize>(report: &EvalReport, traces: Option<&[T]>, dir: &Path) -> Result<(), DataError> {
    fs::create_dir_all(dir).map_err(|e| DataError::io(dir, e))?;
    let summary = dir.join(SUMMARY_FILE);
    fs::write(&summary, summary_json(report)).map_err(|e| DataError::io(&summary, e))?;
    if let Some(traces) = traces {
        write_lines(&dir.join(TRACES_FILE), traces)?;
    }
    Ok(())
}

/// Writes per-item verdict records to `verdicts.jsonl` in `dir`.
pub fn write_verdicts<T: Serialize>(records: &[T], dir: &Path) -> Result<(), DataError> {
    fs::create_dir_all(dir).map_err(|e| DataError::io(dir, e))?;
    write_lines(&dir.join(VERDICTS_FILE), records)
}
