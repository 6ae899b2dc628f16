use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use super::config::{self, ConfigError};
use super::{payload_or_mismatch, quote_list, Checker, ExternalValidator};
use crate::model::{ErrorCode, FormatError, TaskInstance, TaskKind, Verdict};

/// A stand-in for a text game engine: a fixed table of legal actions per
/// session. Actions are matched trimmed and case-insensitively.
///
/// Configuration format, one session per line:
///
/// ```text
/// # session = action | action | ...
/// kitchen-1 = go north | take key | open fridge
/// ```
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ToyTextEnv {
    sessions: BTreeMap<String, BTreeSet<String>>,
}

fn normalize_action(s: &str) -> String {
    s.trim().to_lowercase()
}

impl ToyTextEnv {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_session<I, S>(mut self, session: impl Into<String>, actions: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.sessions
            .entry(session.into())
            .or_default()
            .extend(actions.into_iter().map(|a| normalize_action(a.as_ref())));
        self
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut env = ToyTextEnv::default();
        for (line, session, actions) in config::parse_pairs(text)? {
            let actions: Vec<&str> = actions.split('|').map(str::trim).filter(|a| !a.is_empty()).collect();
            if actions.is_empty() {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("session {session:?} lists no actions"),
                });
            }
            env = env.with_session(session, actions);
        }
        Ok(env)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        ToyTextEnv::parse(&config::read(path)?)
    }

    pub fn legal_actions(&self, session: &str) -> Option<&BTreeSet<String>> {
        self.sessions.get(session)
    }
}

impl ExternalValidator for ToyTextEnv {
    fn validate(&self, payload: &str, context: &TaskInstance) -> Verdict {
        let q = payload_or_mismatch!(context, Agent, TaskKind::Agent);
        let Some(legal) = self.sessions.get(&q.session_id) else {
            return Verdict::from_errors(vec![FormatError::new(
                ErrorCode::IllegalAction,
                format!("the environment has no session \"{}\"; no action can be executed", q.session_id),
            )]);
        };
        if legal.contains(&normalize_action(payload)) {
            return Verdict::pass();
        }
        let options: Vec<String> = legal.iter().cloned().collect();
        Verdict::from_errors(vec![FormatError::new(
            ErrorCode::IllegalAction,
            format!(
                "\"{}\" is not an action the game can execute; legal actions are: {}",
                payload.trim(),
                quote_list(&options)
            ),
        )])
    }
}

/// Delegates to the configured environment.
pub fn check_agent(instance: &TaskInstance, response: &str, validator: &dyn ExternalValidator) -> Verdict {
    let _ = payload_or_mismatch!(instance, Agent, TaskKind::Agent);
    validator.validate(response, instance)
}

pub struct AgentChecker {
    validator: Arc<dyn ExternalValidator>,
}

impl AgentChecker {
    pub fn new(validator: Arc<dyn ExternalValidator>) -> Self {
        AgentChecker { validator }
    }
}

impl Checker for AgentChecker {
    fn task(&self) -> TaskKind {
        TaskKind::Agent
    }

    fn check(&self, instance: &TaskInstance, response: &str) -> Verdict {
        check_agent(instance, response, self.validator.as_ref())
    }
}
