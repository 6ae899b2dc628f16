use super::{payload_or_mismatch, Checker};
use crate::model::{ErrorCode, FormatError, TaskInstance, TaskKind, Verdict};

/// Accepts a poem whose non-blank lines begin, letter by letter, with the
/// given word. The first alphabetic character of a line is its initial.
pub fn check_acrow(instance: &TaskInstance, response: &str) -> Verdict {
    let q = payload_or_mismatch!(instance, AcroW, TaskKind::AcroW);
    let letters: Vec<char> = q.word.chars().collect();
    let lines: Vec<&str> = response.lines().filter(|l| !l.trim().is_empty()).collect();
    let mut errors = Vec::new();

    if lines.len() != letters.len() {
        errors.push(FormatError::new(
            ErrorCode::WrongLineCount,
            format!(
                "the poem has {} non-empty line(s) but \"{}\" has {} letter(s); write exactly one line per letter",
                lines.len(),
                q.word,
                letters.len()
            ),
        ));
    }
    for (i, (line, &expected)) in lines.iter().zip(&letters).enumerate() {
        let found = line.chars().find(|c| c.is_alphabetic());
        let ok = found.is_some_and(|c| c.to_lowercase().eq(expected.to_lowercase()));
        if !ok {
            let found_desc = match found {
                Some(c) => format!("\"{c}\""),
                None => "no letter".to_string(),
            };
            errors.push(FormatError::new(
                ErrorCode::SpellingMismatch,
                format!(
                    "line {} should start with \"{}\" but starts with {found_desc}",
                    i + 1,
                    expected
                ),
            ));
        }
    }
    Verdict::from_errors(errors)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AcroWChecker;

impl Checker for AcroWChecker {
    fn task(&self) -> TaskKind {
        TaskKind::AcroW
    }

    fn check(&self, instance: &TaskInstance, response: &str) -> Verdict {
        check_acrow(instance, response)
    }
}
