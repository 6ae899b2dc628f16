//! Text generation backends and prompt assembly.
//!
//! [`GeneratorClient`] is the seam between the evaluation harness and
//! whatever produces text: a completions-style HTTP service
//! ([`HttpGenerator`]) or a scripted mock ([`ScriptedGenerator`]).

use std::collections::{BTreeMap, VecDeque};
use std::io::Write;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::model::{FormatError, QueryPayload, TaskInstance, TaskKind};

/// Environment variable holding the API credential.
pub const API_KEY_ENV: &str = "FORMATKIT_API_KEY";

#[derive(Debug, thiserror::Error)]
pub enum GeneratorError {
    #[error("AUTH_MISSING: set {API_KEY_ENV} to call the completion endpoint")]
    AuthMissing,
    #[error("BACKEND_ERROR: status {status}: {body}")]
    Backend { status: u16, body: String },
    #[error("TIMEOUT: no response after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("malformed completion response: {0}")]
    MalformedResponse(String),
    #[error("scripted generator exhausted after {0} response(s)")]
    ScriptExhausted(usize),
    #[error("no mock script for instance {0:?}")]
    ScriptMissing(String),
    #[error("invalid generation parameters: {0}")]
    InvalidParams(String),
}

/// Decoding parameters. Temperature 0 means greedy decoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub temperature: f64,
    pub max_new_tokens: u32,
    pub stop_sequences: Vec<String>,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            temperature: 0.0,
            max_new_tokens: 512,
            stop_sequences: Vec::new(),
        }
    }
}

impl GenParams {
    pub fn validate(&self) -> Result<(), GeneratorError> {
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(GeneratorError::InvalidParams(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// Anything that turns a prompt into a completion.
pub trait GeneratorClient: Send + Sync {
    fn generate(&self, prompt: &str, params: &GenParams) -> Result<String, GeneratorError>;
}

/// Replays a fixed list of responses and fails once it runs out, so a test
/// that consumes more than it scripted cannot pass silently.
#[derive(Debug)]
pub struct ScriptedGenerator {
    script: Mutex<VecDeque<String>>,
    served: Mutex<Vec<String>>,
}

impl ScriptedGenerator {
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ScriptedGenerator {
            script: Mutex::new(responses.into_iter().map(Into::into).collect()),
            served: Mutex::new(Vec::new()),
        }
    }

    /// Prompts received so far, in order.
    pub fn prompts(&self) -> Vec<String> {
        self.served.lock().expect("poisoned").clone()
    }

    pub fn remaining(&self) -> usize {
        self.script.lock().expect("poisoned").len()
    }
}

impl GeneratorClient for ScriptedGenerator {
    fn generate(&self, prompt: &str, params: &GenParams) -> Result<String, GeneratorError> {
        params.validate()?;
        let mut served = self.served.lock().expect("poisoned");
        let next = self.script.lock().expect("poisoned").pop_front();
        match next {
            Some(r) => {
                served.push(prompt.to_string());
                Ok(r)
            }
            None => Err(GeneratorError::ScriptExhausted(served.len())),
        }
    }
}

/// Always returns the same text.
#[derive(Debug, Clone)]
pub struct ConstantGenerator(pub String);

impl GeneratorClient for ConstantGenerator {
    fn generate(&self, _prompt: &str, params: &GenParams) -> Result<String, GeneratorError> {
        params.validate()?;
        Ok(self.0.clone())
    }
}

/// Hands out a generator for each instance. Remote backends share one
/// client; mocks can script per instance.
pub trait Backend: Send + Sync {
    fn client_for(&self, instance: &TaskInstance) -> Result<Arc<dyn GeneratorClient>, GeneratorError>;
}

/// One client for every instance.
pub struct SharedBackend(pub Arc<dyn GeneratorClient>);

impl Backend for SharedBackend {
    fn client_for(&self, _instance: &TaskInstance) -> Result<Arc<dyn GeneratorClient>, GeneratorError> {
        Ok(Arc::clone(&self.0))
    }
}

/// Offline backends for tests and dry runs.
#[derive(Debug, Clone)]
pub enum MockBackend {
    /// Answers with the instance's first reference (empty if none).
    EchoReferences,
    /// Answers every prompt with the same text.
    Constant(String),
    /// Replays a per-instance script keyed by instance id.
    Scripts(BTreeMap<String, Vec<String>>),
}

impl Backend for MockBackend {
    fn client_for(&self, instance: &TaskInstance) -> Result<Arc<dyn GeneratorClient>, GeneratorError> {
        Ok(match self {
            MockBackend::EchoReferences => Arc::new(ConstantGenerator(
                instance.references.first().cloned().unwrap_or_default(),
            )),
            MockBackend::Constant(text) => Arc::new(ConstantGenerator(text.clone())),
            MockBackend::Scripts(scripts) => {
                let script = scripts
                    .get(&instance.id)
                    .ok_or_else(|| GeneratorError::ScriptMissing(instance.id.clone()))?;
                Arc::new(ScriptedGenerator::new(script.iter().cloned()))
            }
        })
    }
}

// ---------------------------------------------------------------------------
// HTTP
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    temperature: f64,
    max_tokens: u32,
    #[serde(skip_serializing_if = "<[String]>::is_empty")]
    stop: &'a [String],
}

#[derive(Deserialize)]
struct CompletionResponse {
    #[serde(default)]
    id: Option<String>,
    choices: Vec<CompletionChoice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct CompletionChoice {
    text: String,
}

#[derive(Deserialize, Default)]
struct Usage {
    #[serde(default)]
    prompt_tokens: Option<u64>,
    #[serde(default)]
    completion_tokens: Option<u64>,
}

#[derive(Serialize)]
struct RequestLogRecord<'a> {
    model: &'a str,
    attempt: u32,
    status: Option<u16>,
    request_id: Option<&'a str>,
    latency_ms: u128,
    prompt_tokens: Option<u64>,
    completion_tokens: Option<u64>,
    error: Option<String>,
}

/// Client for an OpenAI-style `/completions` endpoint.
///
/// Transient failures (timeouts, connection errors, 429 and 5xx) are retried
/// with exponential backoff up to `max_attempts` total attempts. Every attempt
/// is logged, and optionally appended as a JSON line to a request log.
pub struct HttpGenerator {
    endpoint: String,
    model: String,
    api_key: String,
    agent: ureq::Agent,
    max_attempts: u32,
    backoff: Duration,
    request_log: Option<Mutex<Box<dyn Write + Send>>>,
}

impl HttpGenerator {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        api_key: Option<String>,
    ) -> Result<Self, GeneratorError> {
        let api_key = api_key.filter(|k| !k.trim().is_empty()).ok_or(GeneratorError::AuthMissing)?;
        Ok(HttpGenerator {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key,
            agent: Self::build_agent(Duration::from_secs(120)),
            max_attempts: 3,
            backoff: Duration::from_millis(500),
            request_log: None,
        })
    }

    /// Reads the credential from [`API_KEY_ENV`].
    pub fn from_env(endpoint: impl Into<String>, model: impl Into<String>) -> Result<Self, GeneratorError> {
        HttpGenerator::new(endpoint, model, std::env::var(API_KEY_ENV).ok())
    }

    fn build_agent(timeout: Duration) -> ureq::Agent {
        ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into()
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.agent = Self::build_agent(timeout);
        self
    }

    /// Delay before the first retry; doubles for each further retry.
    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    pub fn with_max_attempts(mut self, attempts: u32) -> Self {
        self.max_attempts = attempts.max(1);
        self
    }

    pub fn with_request_log(mut self, sink: Box<dyn Write + Send>) -> Self {
        self.request_log = Some(Mutex::new(sink));
        self
    }

    fn log_attempt(&self, record: &RequestLogRecord<'_>) {
        log::info!(
            "completion attempt {} status={:?} request_id={:?} latency={}ms tokens={:?}/{:?}",
            record.attempt,
            record.status,
            record.request_id,
            record.latency_ms,
            record.prompt_tokens,
            record.completion_tokens
        );
        if let Some(sink) = &self.request_log {
            let mut sink = sink.lock().expect("poisoned");
            let line = serde_json::to_string(record).expect("log records serialize");
            if let Err(e) = writeln!(sink, "{line}").and_then(|_| sink.flush()) {
                log::warn!("cannot write request log: {e}");
            }
        }
    }
}

enum Attempt {
    Done(String),
    Retry(GeneratorError),
    Fatal(GeneratorError),
}

impl HttpGenerator {
    fn attempt(&self, n: u32, prompt: &str, params: &GenParams) -> Attempt {
        let body = CompletionRequest {
            model: &self.model,
            prompt,
            temperature: params.temperature,
            max_tokens: params.max_new_tokens,
            stop: &params.stop_sequences,
        };
        let started = Instant::now();
        let sent = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&body);
        let latency_ms = started.elapsed().as_millis();
        let mut record = RequestLogRecord {
            model: &self.model,
            attempt: n,
            status: None,
            request_id: None,
            latency_ms,
            prompt_tokens: None,
            completion_tokens: None,
            error: None,
        };

        let mut resp = match sent {
            Ok(resp) => resp,
            Err(e) => {
                record.error = Some(e.to_string());
                self.log_attempt(&record);
                return match e {
                    ureq::Error::Timeout(_) => Attempt::Retry(GeneratorError::Timeout { attempts: n }),
                    other => Attempt::Retry(GeneratorError::Transport {
                        attempts: n,
                        message: other.to_string(),
                    }),
                };
            }
        };
        let status = resp.status().as_u16();
        record.status = Some(status);
        let header_id = resp
            .headers()
            .get("x-request-id")
            .and_then(|v| v.to_str().ok())
            .map(String::from);

        if status != 200 {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            record.request_id = header_id.as_deref();
            record.error = Some(format!("status {status}"));
            self.log_attempt(&record);
            let err = GeneratorError::Backend { status, body: text };
            return if status == 429 || status >= 500 {
                Attempt::Retry(err)
            } else {
                Attempt::Fatal(err)
            };
        }

        let parsed: Result<CompletionResponse, _> = resp.body_mut().read_json();
        match parsed {
            Ok(c) => {
                let usage = c.usage.unwrap_or_default();
                let request_id = c.id.or(header_id);
                record.request_id = request_id.as_deref();
                record.prompt_tokens = usage.prompt_tokens;
                record.completion_tokens = usage.completion_tokens;
                match c.choices.into_iter().next() {
                    Some(choice) => {
                        self.log_attempt(&record);
                        Attempt::Done(choice.text)
                    }
                    None => {
                        record.error = Some("no choices".into());
                        self.log_attempt(&record);
                        Attempt::Fatal(GeneratorError::MalformedResponse("response has no choices".into()))
                    }
                }
            }
            Err(e) => {
                record.error = Some(e.to_string());
                self.log_attempt(&record);
                Attempt::Fatal(GeneratorError::MalformedResponse(e.to_string()))
            }
        }
    }
}

impl GeneratorClient for HttpGenerator {
    fn generate(&self, prompt: &str, params: &GenParams) -> Result<String, GeneratorError> {
        params.validate()?;
        let mut last = None;
        for n in 1..=self.max_attempts {
            match self.attempt(n, prompt, params) {
                Attempt::Done(text) => return Ok(text),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(e) => {
                    last = Some(e);
                    if n < self.max_attempts {
                        std::thread::sleep(self.backoff * 2u32.pow(n - 1));
                    }
                }
            }
        }
        Err(match last.expect("at least one attempt") {
            GeneratorError::Timeout { .. } => GeneratorError::Timeout { attempts: self.max_attempts },
            GeneratorError::Transport { message, .. } => GeneratorError::Transport {
                attempts: self.max_attempts,
                message,
            },
            other => other,
        })
    }
}

// ---------------------------------------------------------------------------
// Prompts
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("MISSING_TEMPLATE_FIELD: template has no {0} placeholder")]
    MissingTemplateField(&'static str),
    #[error("builder is configured for {builder} but the instance is {instance}")]
    TaskMismatch { builder: TaskKind, instance: TaskKind },
}

pub const DEFAULT_RAW_TEMPLATE: &str = "{description}\n\n{examples}{query}";

pub const DEFAULT_REFINE_TEMPLATE: &str = "{description}\n\n{examples}{query}{prior_response}\n\n\
### Format check\nThe output above violates the format requirements:\n{errors}\n{reflection}\
Rewrite the output so that it satisfies every requirement.\n### Corrected output\n";

/// Instruction added to refinement prompts that ask for a reflection first.
pub const REFLECTION_INSTRUCTION: &str = "Before answering, briefly reflect on what caused these errors after \"Thoughts:\", \
then give only the corrected output after \"Answer:\".\n";

const RAW_FIELDS: [&str; 3] = ["{description}", "{examples}", "{query}"];
const REFINE_FIELDS: [&str; 6] = [
    "{description}",
    "{examples}",
    "{query}",
    "{prior_response}",
    "{errors}",
    "{reflection}",
];

/// Bundled task description (definition plus format specification).
pub fn default_description(task: TaskKind) -> &'static str {
    match task {
        TaskKind::Mcq => "Classify the question by choosing one of the given options. Answer with the option text only, exactly as written.",
        TaskKind::Eqa => "Answer the question by copying a span of text from the passage. The answer must appear in the passage verbatim; do not rephrase it.",
        TaskKind::Ner => "Mark the named entities in the sentence by wrapping each one in tags such as <PER>Name</PER>. Use only the listed entity types, close every tag with the matching closing tag, do not nest tags, and do not change any words of the sentence.",
        TaskKind::Parse => "Give the constituency parse of the sentence as a bracketed tree. Wrap every word as (TAG word) with a word-level label, wrap every phrase as (LABEL ...) with a phrase-level label, close every parenthesis, and keep the words unchanged and in order.",
        TaskKind::CapSeg => "Split the text into subtitle lines and blocks. Insert <eol> between lines of the same block and <eob> at the end of each block. Do not change the text; respect the line-length and lines-per-block limits.",
        TaskKind::Mtt => "Translate the source sentence into English. Every source term listed in the terminology rules must be translated into its given target term.",
        TaskKind::AcroW => "Write an acrostic poem for the given word: one line per letter, where the first letter of each line spells the word.",
        TaskKind::FTime => "Convert the instruction into a time expression relative to the reference time. Answer with YYYYMMDDTHHMMSS for a single event or Rn/YYYYMMDDTHHMMSS/PnYnMnDTnHnMnS for a recurring event (R-1 means it repeats forever). The date must be a legal calendar date.",
        TaskKind::Agent => "You are playing a text adventure. Reply with exactly one action that the game can execute in the current situation.",
        TaskKind::Xdl => "Write an XDL program for the described chemical procedure. The program must compile: well-formed XML with an <XDL> root, known elements only, and all required attributes.",
    }
}

/// The task-specific query block.
pub fn render_query(instance: &TaskInstance) -> String {
    match &instance.query {
        QueryPayload::Mcq(q) => format!("Question: {}\nOptions: {}", q.question, q.options.join(" | ")),
        QueryPayload::Eqa(q) => format!("Passage: {}\nQuestion: {}", q.passage, q.question),
        QueryPayload::Ner(q) => format!("Sentence: {}\nEntity types: {}", q.sentence, q.tagset.join(", ")),
        QueryPayload::Parse(q) => {
            let words: Vec<&str> = q.word_labels.iter().map(String::as_str).collect();
            let spans: Vec<&str> = q.span_labels.iter().map(String::as_str).collect();
            format!(
                "Sentence: {}\nWord-level labels: {}\nPhrase-level labels: {}",
                q.sentence,
                words.join(" "),
                spans.join(" ")
            )
        }
        QueryPayload::CapSeg(q) => format!(
            "Text: {}\nLimits: at most {} characters per line and {} lines per block",
            q.text, q.max_line_chars, q.max_lines_per_block
        ),
        QueryPayload::Mtt(q) => {
            let mut s = format!("Source: {}\nTerminology rules:", q.source);
            for r in &q.rules {
                s.push_str(&format!("\n- \"{}\" should be translated into \"{}\"", r.source, r.target));
            }
            s
        }
        QueryPayload::AcroW(q) => format!("Word: {}", q.word),
        QueryPayload::FTime(q) => {
            let category = match q.category {
                crate::model::TimeCategory::Interval => "interval",
                crate::model::TimeCategory::Absolute => "absolute",
                crate::model::TimeCategory::Recurring => "recurring",
            };
            format!(
                "Reference time: {}:{}\nCategory: {category}\nInstruction: {}",
                q.reference_time, q.weekday, q.instruction
            )
        }
        QueryPayload::Agent(q) => match &q.legal_action_hint {
            Some(hint) => format!("Observation: {}\nHint: {hint}", q.observation),
            None => format!("Observation: {}", q.observation),
        },
        QueryPayload::Xdl(q) => format!("Description: {}", q.description),
    }
}

fn io_block(input: &str, output: Option<&str>) -> String {
    match output {
        Some(out) => format!("### Input\n{input}\n### Output\n{out}\n\n"),
        None => format!("### Input\n{input}\n### Output\n"),
    }
}

/// Single-pass `{name}` substitution: inserted values are never rescanned.
fn substitute(template: &str, fields: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let tail = &rest[open..];
        match fields.iter().find(|(name, _)| tail.starts_with(name)) {
            Some((name, value)) => {
                out.push_str(value);
                rest = &tail[name.len()..];
            }
            None => {
                out.push('{');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

/// Renders raw and refinement prompts for one task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptBuilder {
    pub task: TaskKind,
    pub description: String,
    pub few_shot: Vec<(String, String)>,
    pub raw_template: String,
    pub refine_template: String,
}

impl PromptBuilder {
    pub fn new(task: TaskKind) -> Self {
        PromptBuilder {
            task,
            description: default_description(task).to_string(),
            few_shot: Vec::new(),
            raw_template: DEFAULT_RAW_TEMPLATE.to_string(),
            refine_template: DEFAULT_REFINE_TEMPLATE.to_string(),
        }
    }

    pub fn with_example(mut self, query: impl Into<String>, answer: impl Into<String>) -> Self {
        self.few_shot.push((query.into(), answer.into()));
        self
    }

    fn examples_block(&self) -> String {
        self.few_shot.iter().map(|(q, a)| io_block(q, Some(a))).collect()
    }

    fn ensure_task(&self, instance: &TaskInstance) -> Result<(), PromptError> {
        if instance.task() != self.task {
            return Err(PromptError::TaskMismatch { builder: self.task, instance: instance.task() });
        }
        Ok(())
    }

    pub fn build_raw_prompt(&self, instance: &TaskInstance) -> Result<String, PromptError> {
        self.ensure_task(instance)?;
        if let Some(missing) = RAW_FIELDS.iter().find(|f| !self.raw_template.contains(*f)) {
            return Err(PromptError::MissingTemplateField(missing));
        }
        let examples = self.examples_block();
        let query = io_block(&render_query(instance), None);
        Ok(substitute(
            &self.raw_template,
            &[("{description}", &self.description), ("{examples}", &examples), ("{query}", &query)],
        ))
    }

    pub fn build_refine_prompt(
        &self,
        instance: &TaskInstance,
        prior_response: &str,
        errors: &[FormatError],
        with_thoughts: bool,
    ) -> Result<String, PromptError> {
        self.ensure_task(instance)?;
        if let Some(missing) = REFINE_FIELDS.iter().find(|f| !self.refine_template.contains(*f)) {
            return Err(PromptError::MissingTemplateField(missing));
        }
        let examples = self.examples_block();
        let query = io_block(&render_query(instance), None);
        let errors: String = errors.iter().map(|e| format!("- {}\n", e.message)).collect();
        let reflection = if with_thoughts { REFLECTION_INSTRUCTION } else { "" };
        Ok(substitute(
            &self.refine_template,
            &[
                ("{description}", &self.description),
                ("{examples}", &examples),
                ("{query}", &query),
                ("{prior_response}", prior_response),
                ("{errors}", &errors),
                ("{reflection}", reflection),
            ],
        ))
    }
}

/// Pulls the answer out of a "Thoughts: ... Answer: ..." reply. Replies
/// without an `Answer:` marker are returned unchanged.
pub fn extract_answer(response: &str) -> &str {
    match response.rfind("Answer:") {
        Some(i) => response[i + "Answer:".len()..].trim_start_matches([' ', '\t']).trim_start_matches('\n'),
        None => response,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AcroWQuery, ErrorCode};

    fn inst() -> TaskInstance {
        TaskInstance::new("a", QueryPayload::AcroW(AcroWQuery { word: "Hi".into() }), vec!["Hello\nIt".into()]).unwrap()
    }

    #[test]
    fn raw_prompt_without_examples() {
        let b = PromptBuilder::new(TaskKind::AcroW);
        let p = b.build_raw_prompt(&inst()).unwrap();
        assert_eq!(
            p,
            format!("{}\n\n### Input\nWord: Hi\n### Output\n", default_description(TaskKind::AcroW))
        );
    }

    #[test]
    fn examples_keep_insertion_order() {
        let b = PromptBuilder::new(TaskKind::AcroW)
            .with_example("Word: Ox", "Over\nXylophones")
            .with_example("Word: Be", "Bees\nEverywhere");
        let p = b.build_raw_prompt(&inst()).unwrap();
        let first = p.find("Word: Ox").unwrap();
        let second = p.find("Word: Be").unwrap();
        let query = p.find("Word: Hi").unwrap();
        assert!(first < second && second < query);
        assert!(p.starts_with(default_description(TaskKind::AcroW)));
    }

    #[test]
    fn missing_query_placeholder() {
        let mut b = PromptBuilder::new(TaskKind::AcroW);
        b.raw_template = "{description}{examples}".into();
        assert_eq!(b.build_raw_prompt(&inst()), Err(PromptError::MissingTemplateField("{query}")));
    }

    #[test]
    fn builder_must_match_task() {
        let b = PromptBuilder::new(TaskKind::Mcq);
        assert!(matches!(b.build_raw_prompt(&inst()), Err(PromptError::TaskMismatch { .. })));
    }

    #[test]
    fn refine_prompt_carries_errors_and_response() {
        let b = PromptBuilder::new(TaskKind::AcroW);
        let errs = vec![
            FormatError::new(ErrorCode::WrongLineCount, "first problem"),
            FormatError::new(ErrorCode::SpellingMismatch, "second problem"),
            FormatError::new(ErrorCode::SpellingMismatch, "third problem"),
        ];
        let p = b.build_refine_prompt(&inst(), "Yo\nthere", &errs[..1], false).unwrap();
        assert_eq!(p.matches("first problem").count(), 1);
        assert!(p.contains("Yo\nthere"));
        assert!(!p.contains(REFLECTION_INSTRUCTION));

        let p = b.build_refine_prompt(&inst(), "Yo", &errs, true).unwrap();
        let a = p.find("first problem").unwrap();
        let bpos = p.find("second problem").unwrap();
        let c = p.find("third problem").unwrap();
        assert!(a < bpos && bpos < c);
        assert!(p.contains(REFLECTION_INSTRUCTION));
    }

    #[test]
    fn substitution_does_not_rescan_values() {
        let out = substitute("{a}-{b}-{c", &[("{a}", "{b}"), ("{b}", "x")]);
        assert_eq!(out, "{b}-x-{c");
    }

    #[test]
    fn scripted_generator_refuses_to_run_past_its_script() {
        let g = ScriptedGenerator::new(["one"]);
        assert_eq!(g.generate("p", &GenParams::default()).unwrap(), "one");
        assert!(matches!(g.generate("p", &GenParams::default()), Err(GeneratorError::ScriptExhausted(1))));
        assert_eq!(g.prompts(), vec!["p"]);
    }

    #[test]
    fn negative_temperature_is_rejected() {
        let params = GenParams { temperature: -0.1, ..GenParams::default() };
        assert!(ConstantGenerator("x".into()).generate("p", &params).is_err());
    }

    #[test]
    fn missing_credential_fails_before_network() {
        let err = HttpGenerator::new("http://127.0.0.1:9", "m", None).err().unwrap();
        assert!(matches!(err, GeneratorError::AuthMissing));
        let err = HttpGenerator::new("http://127.0.0.1:9", "m", Some("  ".into())).err().unwrap();
        assert!(matches!(err, GeneratorError::AuthMissing));
    }

    #[test]
    fn answer_extraction() {
        assert_eq!(extract_answer("Thoughts: too short.\nAnswer: Hello\nIt"), "Hello\nIt");
        assert_eq!(extract_answer("Hello"), "Hello");
    }
}
