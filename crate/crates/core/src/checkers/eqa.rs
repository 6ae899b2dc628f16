use super::{payload_or_mismatch, Checker};
use crate::model::{ErrorCode, FormatError, TaskInstance, TaskKind, Verdict};

/// Accepts a nonempty response that occurs verbatim in the passage.
pub fn check_eqa(instance: &TaskInstance, response: &str) -> Verdict {
    let q = payload_or_mismatch!(instance, Eqa, TaskKind::Eqa);
    let answer = response.trim();
    if answer.is_empty() {
        return Verdict::from_errors(vec![FormatError::new(
            ErrorCode::NotASpan,
            "the answer is empty; copy a span of text from the passage",
        )]);
    }
    if q.passage.contains(answer) {
        return Verdict::pass();
    }
    Verdict::from_errors(vec![FormatError::new(
        ErrorCode::NotASpan,
        format!(
            "\"{answer}\" does not occur verbatim in the passage; copy a contiguous span without changing words, spelling or case"
        ),
    )])
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EqaChecker;

impl Checker for EqaChecker {
    fn task(&self) -> TaskKind {
        TaskKind::Eqa
    }

    fn check(&self, instance: &TaskInstance, response: &str) -> Verdict {
        check_eqa(instance, response)
    }
}
