use super::{payload_or_mismatch, Checker};
use crate::model::{ErrorCode, FormatError, TaskInstance, TaskKind, Verdict};

/// Case-insensitive whole-word search. A boundary is required only on a side
/// where the term itself starts or ends with an alphanumeric character, so
/// terms such as "C++" still match.
pub fn contains_term(text: &str, term: &str) -> bool {
    let hay: Vec<char> = text.chars().flat_map(char::to_lowercase).collect();
    let needle: Vec<char> = term.trim().chars().flat_map(char::to_lowercase).collect();
    if needle.is_empty() || needle.len() > hay.len() {
        return false;
    }
    let need_left = needle[0].is_alphanumeric();
    let need_right = needle[needle.len() - 1].is_alphanumeric();
    (0..=hay.len() - needle.len()).any(|start| {
        let end = start + needle.len();
        hay[start..end] == needle[..]
            && (!need_left || start == 0 || !hay[start - 1].is_alphanumeric())
            && (!need_right || end == hay.len() || !hay[end].is_alphanumeric())
    })
}

/// Accepts a translation in which every rule's target term appears as a word.
pub fn check_mtt(instance: &TaskInstance, response: &str) -> Verdict {
    let q = payload_or_mismatch!(instance, Mtt, TaskKind::Mtt);
    let errors = q
        .rules
        .iter()
        .filter(|rule| !contains_term(response, &rule.target))
        .map(|rule| {
            FormatError::new(
                ErrorCode::RuleViolated,
                format!(
                    "\"{}\" should be translated into \"{}\", but \"{}\" does not appear in the translation",
                    rule.source, rule.target, rule.target
                ),
            )
        })
        .collect();
    Verdict::from_errors(errors)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MttChecker;

impl Checker for MttChecker {
    fn task(&self) -> TaskKind {
        TaskKind::Mtt
    }

    fn check(&self, instance: &TaskInstance, response: &str) -> Verdict {
        check_mtt(instance, response)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MttQuery, QueryPayload, TermRule};

    fn inst(rules: &[(&str, &str)]) -> TaskInstance {
        let q = MttQuery {
            source: "Das Exanthem des M. Still ist ein Symptom von hoher Sensitivität.".into(),
            rules: rules
                .iter()
                .map(|(s, t)| TermRule { source: s.to_string(), target: t.to_string() })
                .collect(),
        };
        TaskInstance::new("t", QueryPayload::Mtt(q), vec![]).unwrap()
    }

    #[test]
    fn inflected_variant_does_not_count() {
        let v = check_mtt(
            &inst(&[("Exanthem", "rash")]),
            "The exanthema of Still's disease is a symptom of high sensitivity.",
        );
        assert_eq!(v.score(), -1);
        assert_eq!(v.errors()[0].code, ErrorCode::RuleViolated);
        assert!(v.errors()[0].message.contains("\"rash\""));
    }

    #[test]
    fn whole_word_match_passes() {
        let v = check_mtt(
            &inst(&[("Exanthem", "rash")]),
            "The rash of Still's disease is a symptom of high sensitivity.",
        );
        assert!(v.passed());
    }

    #[test]
    fn no_rules_is_vacuous() {
        assert!(check_mtt(&inst(&[]), "anything at all").passed());
    }

    #[test]
    fn word_boundaries() {
        assert!(contains_term("A Rash appeared", "rash"));
        assert!(!contains_term("rashes appeared", "rash"));
        assert!(!contains_term("brash", "rash"));
        assert!(contains_term("rash.", "rash"));
        assert!(contains_term("written in C++ today", "C++"));
        assert!(contains_term("high blood pressure.", "blood pressure"));
    }

    #[test]
    fn reports_each_violated_rule() {
        let v = check_mtt(&inst(&[("a", "rash"), ("b", "fever"), ("c", "symptom")]), "a symptom");
        assert_eq!(v.errors().len(), 2);
    }
}
