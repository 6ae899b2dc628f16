use super::{payload_or_mismatch, quote_list, Checker};
use crate::model::{ErrorCode, FormatError, TaskInstance, TaskKind, Verdict};

/// Accepts a response that, trimmed and case-folded, names exactly one option.
pub fn check_mcq(instance: &TaskInstance, response: &str) -> Verdict {
    let q = payload_or_mismatch!(instance, Mcq, TaskKind::Mcq);
    let answer = response.trim().to_lowercase();
    let hits = q
        .options
        .iter()
        .filter(|opt| opt.trim().to_lowercase() == answer)
        .count();
    if hits == 1 {
        return Verdict::pass();
    }
    Verdict::from_errors(vec![FormatError::new(
        ErrorCode::IllegalOption,
        format!(
            "the answer \"{}\" is not one of the legal options; answer with exactly one of: {}",
            response.trim(),
            quote_list(&q.options)
        ),
    )])
}

#[derive(Debug, Clone, Copy, Default)]
pub struct McqChecker;

impl Checker for McqChecker {
    fn task(&self) -> TaskKind {
        TaskKind::Mcq
    }

    fn check(&self, instance: &TaskInstance, response: &str) -> Verdict {
        check_mcq(instance, response)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{McqQuery, QueryPayload};

    fn inst(options: &[&str]) -> TaskInstance {
        let q = McqQuery {
            question: "What kind of answer?".into(),
            options: options.iter().map(|s| s.to_string()).collect(),
        };
        TaskInstance::new("m", QueryPayload::Mcq(q), vec![]).unwrap()
    }

    #[test]
    fn exact_member_passes() {
        assert!(check_mcq(&inst(&["LOC", "NUM", "HUM"]), "NUM").passed());
    }

    #[test]
    fn trims_and_case_folds() {
        assert!(check_mcq(&inst(&["LOC", "NUM"]), "  loc ").passed());
    }

    #[test]
    fn non_member_lists_options() {
        let v = check_mcq(&inst(&["LOC", "NUM"]), "location");
        assert_eq!(v.score(), -1);
        assert_eq!(v.errors()[0].code, ErrorCode::IllegalOption);
        assert!(v.errors()[0].message.contains("\"LOC\", \"NUM\""));
    }
}
