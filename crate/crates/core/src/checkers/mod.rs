//! Decidable format checkers, one per task.
//!
//! Every checker is a pure function of `(instance, response)` and reports
//! all violations it can find, so the messages can be fed back verbatim into
//! a refinement prompt. Agent and XDL delegate to an [`ExternalValidator`];
//! the shipped validators ([`ToyTextEnv`], [`StructuralXdlValidator`]) are
//! desk-scale stand-ins for a game engine and a chemistry compiler.

mod acrow;
mod agent;
mod capseg;
mod config;
mod eqa;
mod ftime;
mod mcq;
mod mtt;
mod ner;
mod parse;
mod xdl;

use std::sync::Arc;

use crate::model::{ErrorCode, FormatError, TaskInstance, TaskKind, Verdict};

pub use acrow::{check_acrow, AcroWChecker};
pub use agent::{check_agent, AgentChecker, ToyTextEnv};
pub use capseg::{check_capseg, parse_segmentation, CapSegChecker, Segmentation, SegmentTag};
pub use config::ConfigError;
pub use eqa::{check_eqa, EqaChecker};
pub use ftime::{check_ftime, parse_time_expression, FTimeChecker, TimeExpression};
pub use mcq::{check_mcq, McqChecker};
pub use mtt::{check_mtt, contains_term, MttChecker};
pub use ner::{check_ner, scan_entities, Entity, EntityScan, NerChecker};
pub use parse::{check_parse, parse_tree, ParseChecker, Tree, TreeError};
pub use xdl::{check_xdl, StructuralXdlValidator, XdlChecker};

/// A format recognizer for one task.
pub trait Checker: Send + Sync {
    fn task(&self) -> TaskKind;
    fn check(&self, instance: &TaskInstance, response: &str) -> Verdict;
}

/// Validation delegated to an environment outside the checker (a game
/// engine, a compiler). Implementations must be deterministic for a fixed
/// context.
pub trait ExternalValidator: Send + Sync {
    fn validate(&self, payload: &str, context: &TaskInstance) -> Verdict;
}

/// Holds one checker per task.
pub struct CheckerRegistry {
    checkers: Vec<Box<dyn Checker>>,
}

impl CheckerRegistry {
    pub fn new(agent: Arc<dyn ExternalValidator>, xdl: Arc<dyn ExternalValidator>) -> Self {
        let checkers: Vec<Box<dyn Checker>> = vec![
            Box::new(McqChecker),
            Box::new(EqaChecker),
            Box::new(NerChecker),
            Box::new(ParseChecker),
            Box::new(CapSegChecker),
            Box::new(MttChecker),
            Box::new(AcroWChecker),
            Box::new(FTimeChecker),
            Box::new(AgentChecker::new(agent)),
            Box::new(XdlChecker::new(xdl)),
        ];
        debug_assert!(checkers.iter().zip(TaskKind::ALL).all(|(c, k)| c.task() == k));
        CheckerRegistry { checkers }
    }

    /// Empty Agent environment and the default XDL element table.
    pub fn with_defaults() -> Self {
        CheckerRegistry::new(
            Arc::new(ToyTextEnv::default()),
            Arc::new(StructuralXdlValidator::default()),
        )
    }

    pub fn lookup(&self, task: TaskKind) -> &dyn Checker {
        let idx = TaskKind::ALL
            .iter()
            .position(|&k| k == task)
            .expect("TaskKind::ALL is exhaustive");
        self.checkers[idx].as_ref()
    }

    /// Dispatches on the instance's own task.
    pub fn check(&self, instance: &TaskInstance, response: &str) -> Verdict {
        self.lookup(instance.task()).check(instance, response)
    }
}

impl Default for CheckerRegistry {
    fn default() -> Self {
        CheckerRegistry::with_defaults()
    }
}

pub(crate) fn task_mismatch(expected: TaskKind, instance: &TaskInstance) -> Verdict {
    Verdict::from_errors(vec![FormatError::new(
        ErrorCode::TaskMismatch,
        format!("a {expected} checker cannot check a {} instance", instance.task()),
    )])
}

macro_rules! payload_or_mismatch {
    ($inst:expr, $variant:ident, $kind:expr) => {
        match &$inst.query {
            $crate::model::QueryPayload::$variant(q) => q,
            _ => return $crate::checkers::task_mismatch($kind, $inst),
        }
    };
}
pub(crate) use payload_or_mismatch;

/// Collapses every whitespace run to one space and trims both ends.
pub fn normalize_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Converts a byte offset into a character offset.
pub(crate) fn char_offset(s: &str, byte: usize) -> usize {
    s[..byte].chars().count()
}

pub(crate) fn quote_list(items: &[String]) -> String {
    items.iter().map(|s| format!("\"{s}\"")).collect::<Vec<_>>().join(", ")
}
