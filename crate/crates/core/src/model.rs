//! Domain types shared by checkers, metrics, the refinement harness and the
//! dataset loader.
//!
//! A [`TaskInstance`] carries its task implicitly through its
//! [`QueryPayload`] variant, so the "payload tag equals task" invariant holds
//! by construction. On the wire an instance is a flat JSON object with the
//! fields `task`, `id`, `query`, `references` and `meta`, in that order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Errors raised while constructing or validating domain values.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    /// A record violates a type invariant; `path` names the offending field.
    #[error("SCHEMA_VIOLATION at {path}: {reason}")]
    SchemaViolation { path: String, reason: String },
    /// A verdict whose score disagrees with its error list.
    #[error("invalid verdict: score {score} with {n_errors} error(s)")]
    InvalidVerdict { score: i8, n_errors: usize },
}

impl ModelError {
    pub(crate) fn schema(path: impl Into<String>, reason: impl Into<String>) -> Self {
        ModelError::SchemaViolation {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

/// The ten benchmark tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TaskKind {
    #[serde(rename = "MCQ")]
    Mcq,
    #[serde(rename = "EQA")]
    Eqa,
    #[serde(rename = "NER")]
    Ner,
    Parse,
    CapSeg,
    #[serde(rename = "MTT")]
    Mtt,
    AcroW,
    FTime,
    Agent,
    #[serde(rename = "XDL")]
    Xdl,
}

impl TaskKind {
    pub const ALL: [TaskKind; 10] = [
        TaskKind::Mcq,
        TaskKind::Eqa,
        TaskKind::Ner,
        TaskKind::Parse,
        TaskKind::CapSeg,
        TaskKind::Mtt,
        TaskKind::AcroW,
        TaskKind::FTime,
        TaskKind::Agent,
        TaskKind::Xdl,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Mcq => "MCQ",
            TaskKind::Eqa => "EQA",
            TaskKind::Ner => "NER",
            TaskKind::Parse => "Parse",
            TaskKind::CapSeg => "CapSeg",
            TaskKind::Mtt => "MTT",
            TaskKind::AcroW => "AcroW",
            TaskKind::FTime => "FTime",
            TaskKind::Agent => "Agent",
            TaskKind::Xdl => "XDL",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = TaskKind::ALL.iter().map(|k| k.as_str()).collect();
                ModelError::schema(
                    "task",
                    format!("unknown task {s:?}; expected one of {}", names.join(", ")),
                )
            })
    }
}

// ---------------------------------------------------------------------------
// Time values
// ---------------------------------------------------------------------------

/// A naive (zone-less) proleptic Gregorian datetime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp {
    year: u16,
    month: u8,
    day: u8,
    hour: u8,
    minute: u8,
    second: u8,
}

pub fn is_leap_year(year: u32) -> bool {
    (year.is_multiple_of(4) && !year.is_multiple_of(100)) || year.is_multiple_of(400)
}

pub fn days_in_month(year: u32, month: u32) -> u32 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if is_leap_year(year) => 29,
        2 => 28,
        _ => 0,
    }
}

/// Why a compact timestamp string was refused.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TimestampError {
    #[error("expected YYYYMMDDTHHMMSS (15 characters, digits and a literal T)")]
    Grammar,
    #[error("{0}")]
    IllegalDate(String),
}

impl Timestamp {
    pub fn new(
        year: u32,
        month: u32,
        day: u32,
        hour: u32,
        minute: u32,
        second: u32,
    ) -> Result<Self, TimestampError> {
        if year > 9999 {
            return Err(TimestampError::IllegalDate(format!("year {year} has more than four digits")));
        }
        if !(1..=12).contains(&month) {
            return Err(TimestampError::IllegalDate(format!("month {month:02} is not in 01-12")));
        }
        let max_day = days_in_month(year, month);
        if day < 1 || day > max_day {
            return Err(TimestampError::IllegalDate(format!(
                "day {day:02} is not valid for {year:04}-{month:02} (which has {max_day} days)"
            )));
        }
        if hour > 23 {
            return Err(TimestampError::IllegalDate(format!("hour {hour:02} is not in 00-23")));
        }
        if minute > 59 {
            return Err(TimestampError::IllegalDate(format!("minute {minute:02} is not in 00-59")));
        }
        if second > 59 {
            return Err(TimestampError::IllegalDate(format!("second {second:02} is not in 00-59")));
        }
        Ok(Timestamp {
            year: year as u16,
            month: month as u8,
            day: day as u8,
            hour: hour as u8,
            minute: minute as u8,
            second: second as u8,
        })
    }

    /// Parses the compact `YYYYMMDDTHHMMSS` form.
    pub fn parse_compact(s: &str) -> Result<Self, TimestampError> {
        let b = s.as_bytes();
        if b.len() != 15 {
            return Err(TimestampError::Grammar);
        }
        for (i, &c) in b.iter().enumerate() {
            let ok = if i == 8 { c == b'T' } else { c.is_ascii_digit() };
            if !ok {
                return Err(TimestampError::Grammar);
            }
        }
        let num = |r: std::ops::Range<usize>| -> u32 { s[r].parse().expect("ascii digits") };
        Timestamp::new(num(0..4), num(4..6), num(6..8), num(9..11), num(11..13), num(13..15))
    }

    pub fn year(&self) -> u32 {
        self.year.into()
    }
    pub fn month(&self) -> u32 {
        self.month.into()
    }
    pub fn day(&self) -> u32 {
        self.day.into()
    }
    pub fn hour(&self) -> u32 {
        self.hour.into()
    }
    pub fn minute(&self) -> u32 {
        self.minute.into()
    }
    pub fn second(&self) -> u32 {
        self.second.into()
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:04}{:02}{:02}T{:02}{:02}{:02}",
            self.year, self.month, self.day, self.hour, self.minute, self.second
        )
    }
}

impl Serialize for Timestamp {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Timestamp::parse_compact(&s).map_err(serde::de::Error::custom)
    }
}

/// Calendar period `PnYnMnDTnHnMnS`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Period {
    pub years: u64,
    pub months: u64,
    pub days: u64,
    pub hours: u64,
    pub minutes: u64,
    pub seconds: u64,
}

impl Period {
    pub fn is_zero(&self) -> bool {
        *self == Period::default()
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "P{}Y{}M{}DT{}H{}M{}S",
            self.years, self.months, self.days, self.hours, self.minutes, self.seconds
        )
    }
}

/// `Rn/START/PERIOD`; a count of −1 means unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Recurrence {
    count: i64,
    start: Timestamp,
    period: Period,
}

impl Recurrence {
    pub fn new(count: i64, start: Timestamp, period: Period) -> Result<Self, ModelError> {
        if count != -1 && count < 1 {
            return Err(ModelError::schema(
                "count",
                format!("repetition count {count} must be -1 (unbounded) or at least 1"),
            ));
        }
        if period.is_zero() {
            return Err(ModelError::schema("period", "period must not be all zero"));
        }
        Ok(Recurrence { count, start, period })
    }

    pub fn count(&self) -> i64 {
        self.count
    }
    pub fn start(&self) -> Timestamp {
        self.start
    }
    pub fn period(&self) -> Period {
        self.period
    }
    pub fn is_unbounded(&self) -> bool {
        self.count == -1
    }
}

impl fmt::Display for Recurrence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R{}/{}/{}", self.count, self.start, self.period)
    }
}

// ---------------------------------------------------------------------------
// Queries and instances
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeCategory {
    Interval,
    Absolute,
    Recurring,
}

fn default_max_line_chars() -> u32 {
    42
}

fn default_max_lines_per_block() -> u32 {
    2
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McqQuery {
    pub question: String,
    pub options: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EqaQuery {
    pub passage: String,
    pub question: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NerQuery {
    pub sentence: String,
    pub tagset: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParseQuery {
    pub sentence: String,
    pub word_labels: BTreeSet<String>,
    pub span_labels: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapSegQuery {
    pub text: String,
    #[serde(default = "default_max_line_chars")]
    pub max_line_chars: u32,
    #[serde(default = "default_max_lines_per_block")]
    pub max_lines_per_block: u32,
}

/// A terminology rule: `source` must be rendered as `target`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermRule {
    pub source: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MttQuery {
    pub source: String,
    pub rules: Vec<TermRule>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcroWQuery {
    pub word: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FTimeQuery {
    pub reference_time: Timestamp,
    pub weekday: String,
    pub category: TimeCategory,
    #[serde(default)]
    pub instruction: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentQuery {
    pub session_id: String,
    pub observation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub legal_action_hint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XdlQuery {
    pub description: String,
}

/// Task-specific query content.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueryPayload {
    Mcq(McqQuery),
    Eqa(EqaQuery),
    Ner(NerQuery),
    Parse(ParseQuery),
    CapSeg(CapSegQuery),
    Mtt(MttQuery),
    AcroW(AcroWQuery),
    FTime(FTimeQuery),
    Agent(AgentQuery),
    Xdl(XdlQuery),
}

impl QueryPayload {
    pub fn kind(&self) -> TaskKind {
        match self {
            QueryPayload::Mcq(_) => TaskKind::Mcq,
            QueryPayload::Eqa(_) => TaskKind::Eqa,
            QueryPayload::Ner(_) => TaskKind::Ner,
            QueryPayload::Parse(_) => TaskKind::Parse,
            QueryPayload::CapSeg(_) => TaskKind::CapSeg,
            QueryPayload::Mtt(_) => TaskKind::Mtt,
            QueryPayload::AcroW(_) => TaskKind::AcroW,
            QueryPayload::FTime(_) => TaskKind::FTime,
            QueryPayload::Agent(_) => TaskKind::Agent,
            QueryPayload::Xdl(_) => TaskKind::Xdl,
        }
    }

    fn from_value(task: TaskKind, value: Value) -> Result<Self, ModelError> {
        fn decode<T: serde::de::DeserializeOwned>(v: Value) -> Result<T, ModelError> {
            serde_json::from_value(v).map_err(|e| ModelError::schema("query", e.to_string()))
        }
        Ok(match task {
            TaskKind::Mcq => QueryPayload::Mcq(decode(value)?),
            TaskKind::Eqa => QueryPayload::Eqa(decode(value)?),
            TaskKind::Ner => QueryPayload::Ner(decode(value)?),
            TaskKind::Parse => QueryPayload::Parse(decode(value)?),
            TaskKind::CapSeg => QueryPayload::CapSeg(decode(value)?),
            TaskKind::Mtt => QueryPayload::Mtt(decode(value)?),
            TaskKind::AcroW => QueryPayload::AcroW(decode(value)?),
            TaskKind::FTime => QueryPayload::FTime(decode(value)?),
            TaskKind::Agent => QueryPayload::Agent(decode(value)?),
            TaskKind::Xdl => QueryPayload::Xdl(decode(value)?),
        })
    }

    fn to_value(&self) -> Value {
        let v = match self {
            QueryPayload::Mcq(q) => serde_json::to_value(q),
            QueryPayload::Eqa(q) => serde_json::to_value(q),
            QueryPayload::Ner(q) => serde_json::to_value(q),
            QueryPayload::Parse(q) => serde_json::to_value(q),
            QueryPayload::CapSeg(q) => serde_json::to_value(q),
            QueryPayload::Mtt(q) => serde_json::to_value(q),
            QueryPayload::AcroW(q) => serde_json::to_value(q),
            QueryPayload::FTime(q) => serde_json::to_value(q),
            QueryPayload::Agent(q) => serde_json::to_value(q),
            QueryPayload::Xdl(q) => serde_json::to_value(q),
        };
        v.expect("query payloads always serialize")
    }
}

/// One benchmark item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawInstance", into = "RawInstance")]
pub struct TaskInstance {
    pub id: String,
    pub query: QueryPayload,
    pub references: Vec<String>,
    pub meta: BTreeMap<String, String>,
}

impl TaskInstance {
    /// Builds and validates an instance.
    pub fn new(
        id: impl Into<String>,
        query: QueryPayload,
        references: Vec<String>,
    ) -> Result<Self, ModelError> {
        let inst = TaskInstance {
            id: id.into(),
            query,
            references,
            meta: BTreeMap::new(),
        };
        validate_instance(&inst)?;
        Ok(inst)
    }

    pub fn task(&self) -> TaskKind {
        self.query.kind()
    }

    /// Decodes one record, keeping the structured [`ModelError`] that
    /// `serde_json::from_value` would flatten into a message.
    pub fn from_value(value: Value) -> Result<Self, ModelError> {
        let raw: RawInstance = serde_json::from_value(value).map_err(|e| ModelError::schema("record", e.to_string()))?;
        TaskInstance::try_from(raw)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstance {
    task: String,
    id: String,
    query: Value,
    #[serde(default)]
    references: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    meta: BTreeMap<String, String>,
}

impl TryFrom<RawInstance> for TaskInstance {
    type Error = ModelError;

    fn try_from(raw: RawInstance) -> Result<Self, Self::Error> {
        let task: TaskKind = raw.task.parse()?;
        let query = QueryPayload::from_value(task, raw.query)?;
        let inst = TaskInstance {
            id: raw.id,
            query,
            references: raw.references,
            meta: raw.meta,
        };
        validate_instance(&inst)?;
        Ok(inst)
    }
}

impl From<TaskInstance> for RawInstance {
    fn from(inst: TaskInstance) -> Self {
        RawInstance {
            task: inst.task().as_str().to_string(),
            id: inst.id,
            query: inst.query.to_value(),
            references: inst.references,
            meta: inst.meta,
        }
    }
}

/// Checks every invariant of an instance and its payload.
pub fn validate_instance(inst: &TaskInstance) -> Result<(), ModelError> {
    if inst.id.trim().is_empty() {
        return Err(ModelError::schema("id", "id must be nonempty"));
    }
    match &inst.query {
        QueryPayload::Mcq(q) => {
            if q.options.is_empty() {
                return Err(ModelError::schema("query.options", "options must be nonempty"));
            }
            let mut seen = BTreeSet::new();
            for (i, opt) in q.options.iter().enumerate() {
                if opt.trim().is_empty() {
                    return Err(ModelError::schema(
                        format!("query.options[{i}]"),
                        "option must be nonempty",
                    ));
                }
                // Options are compared trimmed and case-folded by the checker.
                if !seen.insert(opt.trim().to_lowercase()) {
                    return Err(ModelError::schema(
                        format!("query.options[{i}]"),
                        format!("duplicate option {opt:?}"),
                    ));
                }
            }
        }
        QueryPayload::Ner(q) => {
            if q.tagset.is_empty() {
                return Err(ModelError::schema("query.tagset", "tagset must be nonempty"));
            }
            for (i, tag) in q.tagset.iter().enumerate() {
                if !is_tag_name(tag) {
                    return Err(ModelError::schema(
                        format!("query.tagset[{i}]"),
                        format!("{tag:?} is not a valid tag name"),
                    ));
                }
            }
        }
        QueryPayload::Parse(q) => {
            for label in q.word_labels.iter().chain(&q.span_labels) {
                if label.is_empty() || label.chars().any(|c| c.is_whitespace() || c == '(' || c == ')') {
                    return Err(ModelError::schema(
                        "query.labels",
                        format!("{label:?} cannot be used as a bracket label"),
                    ));
                }
            }
        }
        QueryPayload::CapSeg(q) => {
            if q.max_line_chars == 0 {
                return Err(ModelError::schema("query.max_line_chars", "must be positive"));
            }
            if q.max_lines_per_block == 0 {
                return Err(ModelError::schema("query.max_lines_per_block", "must be positive"));
            }
        }
        QueryPayload::Mtt(q) => {
            for (i, rule) in q.rules.iter().enumerate() {
                if rule.source.trim().is_empty() {
                    return Err(ModelError::schema(format!("query.rules[{i}].source"), "term must be nonempty"));
                }
                if rule.target.trim().is_empty() {
                    return Err(ModelError::schema(format!("query.rules[{i}].target"), "term must be nonempty"));
                }
            }
        }
        QueryPayload::AcroW(q) => {
            if q.word.is_empty() || !q.word.chars().all(char::is_alphabetic) {
                return Err(ModelError::schema(
                    "query.word",
                    format!("{:?} must be a nonempty string of letters", q.word),
                ));
            }
        }
        QueryPayload::Agent(q) => {
            if q.session_id.is_empty() {
                return Err(ModelError::schema("query.session_id", "session id must be nonempty"));
            }
        }
        QueryPayload::Eqa(_) | QueryPayload::FTime(_) | QueryPayload::Xdl(_) => {}
    }
    Ok(())
}

pub(crate) fn is_tag_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

// ---------------------------------------------------------------------------
// Verdicts
// ---------------------------------------------------------------------------

/// Closed registry of checker error codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    /// The checker was handed an instance of another task.
    TaskMismatch,
    IllegalOption,
    NotASpan,
    TagMismatch,
    IllegalLabel,
    ContentAltered,
    UnbalancedParens,
    /// Balanced brackets that still do not form a single labelled tree.
    MalformedTree,
    EmptyConstituent,
    TooManyLines,
    LineTooLong,
    RuleViolated,
    SpellingMismatch,
    WrongLineCount,
    GrammarMismatch,
    IllegalDate,
    IllegalRecurrence,
    IllegalAction,
    CompileFail,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::TaskMismatch => "TASK_MISMATCH",
            ErrorCode::IllegalOption => "ILLEGAL_OPTION",
            ErrorCode::NotASpan => "NOT_A_SPAN",
            ErrorCode::TagMismatch => "TAG_MISMATCH",
            ErrorCode::IllegalLabel => "ILLEGAL_LABEL",
            ErrorCode::ContentAltered => "CONTENT_ALTERED",
            ErrorCode::UnbalancedParens => "UNBALANCED_PARENS",
            ErrorCode::MalformedTree => "MALFORMED_TREE",
            ErrorCode::EmptyConstituent => "EMPTY_CONSTITUENT",
            ErrorCode::TooManyLines => "TOO_MANY_LINES",
            ErrorCode::LineTooLong => "LINE_TOO_LONG",
            ErrorCode::RuleViolated => "RULE_VIOLATED",
            ErrorCode::SpellingMismatch => "SPELLING_MISMATCH",
            ErrorCode::WrongLineCount => "WRONG_LINE_COUNT",
            ErrorCode::GrammarMismatch => "GRAMMAR_MISMATCH",
            ErrorCode::IllegalDate => "ILLEGAL_DATE",
            ErrorCode::IllegalRecurrence => "ILLEGAL_RECURRENCE",
            ErrorCode::IllegalAction => "ILLEGAL_ACTION",
            ErrorCode::CompileFail => "COMPILE_FAIL",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One format violation. `span` is a half-open character range into the response.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FormatError {
    pub code: ErrorCode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<(usize, usize)>,
    pub message: String,
}

impl FormatError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        let message = message.into();
        assert!(!message.is_empty(), "format error messages must be nonempty");
        FormatError { code, span: None, message }
    }

    pub fn with_span(mut self, start: usize, end: usize) -> Self {
        self.span = Some((start, end));
        self
    }
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.code, self.message)
    }
}

/// Checker output: `score` is 1 exactly when `errors` is empty, else −1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Verdict {
    score: i8,
    errors: Vec<FormatError>,
}

impl Verdict {
    pub fn new(score: i8, errors: Vec<FormatError>) -> Result<Self, ModelError> {
        match (score, errors.is_empty()) {
            (1, true) | (-1, false) => Ok(Verdict { score, errors }),
            _ => Err(ModelError::InvalidVerdict {
                score,
                n_errors: errors.len(),
            }),
        }
    }

    pub fn pass() -> Self {
        Verdict { score: 1, errors: Vec::new() }
    }

    /// Passes when `errors` is empty, fails otherwise.
    pub fn from_errors(errors: Vec<FormatError>) -> Self {
        let score = if errors.is_empty() { 1 } else { -1 };
        Verdict { score, errors }
    }

    pub fn score(&self) -> i8 {
        self.score
    }

    pub fn passed(&self) -> bool {
        self.score == 1
    }

    pub fn errors(&self) -> &[FormatError] {
        &self.errors
    }

    pub fn has_code(&self, code: ErrorCode) -> bool {
        self.errors.iter().any(|e| e.code == code)
    }
}

impl<'de> Deserialize<'de> for Verdict {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            score: i8,
            #[serde(default)]
            errors: Vec<FormatError>,
        }
        let raw = Raw::deserialize(d)?;
        Verdict::new(raw.score, raw.errors).map_err(serde::de::Error::custom)
    }
}
