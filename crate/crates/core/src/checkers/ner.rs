use super::{char_offset, normalize_whitespace, payload_or_mismatch, quote_list, Checker};
use crate::model::{is_tag_name, ErrorCode, FormatError, TaskInstance, TaskKind, Verdict};

/// One closed entity span.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entity {
    pub label: String,
    pub text: String,
}

/// Result of scanning an inline-tagged sentence.
#[derive(Debug, Clone, Default)]
pub struct EntityScan {
    /// Properly opened and closed entities, in order.
    pub entities: Vec<Entity>,
    /// Every label seen in an opening or closing tag, in order.
    pub labels: Vec<(String, (usize, usize))>,
    /// The response with all tags deleted.
    pub stripped: String,
    /// Structural problems (stray, crossing, nested or unclosed tags).
    pub errors: Vec<FormatError>,
}

impl EntityScan {
    pub fn is_well_formed(&self) -> bool {
        self.errors.is_empty()
    }
}

struct Tag<'a> {
    closing: bool,
    name: &'a str,
    start: usize,
    end: usize,
}

fn tag_at(s: &str, start: usize) -> Option<Tag<'_>> {
    let rest = &s[start..];
    let rest = rest.strip_prefix('<')?;
    let (closing, body) = match rest.strip_prefix('/') {
        Some(b) => (true, b),
        None => (false, rest),
    };
    let close = body.find('>')?;
    let name = &body[..close];
    if !is_tag_name(name) {
        return None;
    }
    let end = start + 1 + usize::from(closing) + close + 1;
    Some(Tag { closing, name, start, end })
}

/// Splits a tagged sentence into entities and plain text. Anything that looks
/// like `<NAME>` or `</NAME>` is a tag; other `<` characters are text.
pub fn scan_entities(response: &str) -> EntityScan {
    let mut scan = EntityScan::default();
    let mut open: Option<(Tag<'_>, usize)> = None;
    let mut i = 0;
    while i < response.len() {
        let Some(tag) = tag_at(response, i) else {
            let ch = response[i..].chars().next().expect("in bounds");
            scan.stripped.push(ch);
            i += ch.len_utf8();
            continue;
        };
        let span = (char_offset(response, tag.start), char_offset(response, tag.end));
        scan.labels.push((tag.name.to_string(), span));
        i = tag.end;
        match (open.take(), tag.closing) {
            (None, false) => open = Some((tag, scan.stripped.len())),
            (None, true) => scan.errors.push(
                FormatError::new(
                    ErrorCode::TagMismatch,
                    format!("closing tag </{}> has no matching opening tag", tag.name),
                )
                .with_span(span.0, span.1),
            ),
            (Some((outer, _)), false) => {
                scan.errors.push(
                    FormatError::new(
                        ErrorCode::TagMismatch,
                        format!(
                            "opening tag <{}> appears inside the unclosed entity <{}>; entities must not be nested, close <{}> with </{}> first",
                            tag.name, outer.name, outer.name, outer.name
                        ),
                    )
                    .with_span(span.0, span.1),
                );
                open = Some((tag, scan.stripped.len()));
            }
            (Some((opener, text_start)), true) => {
                if opener.name == tag.name {
                    scan.entities.push(Entity {
                        label: tag.name.to_string(),
                        text: scan.stripped[text_start..].to_string(),
                    });
                } else {
                    let start = char_offset(response, opener.start);
                    scan.errors.push(
                        FormatError::new(
                            ErrorCode::TagMismatch,
                            format!(
                                "opening tag <{}> is closed by </{}>; every opening tag must be closed with the corresponding closing tag </{}>",
                                opener.name, tag.name, opener.name
                            ),
                        )
                        .with_span(start, span.1),
                    );
                }
            }
        }
    }
    if let Some((opener, _)) = open {
        let start = char_offset(response, opener.start);
        let end = char_offset(response, opener.end);
        scan.errors.push(
            FormatError::new(
                ErrorCode::TagMismatch,
                format!("opening tag <{}> is never closed; add </{}>", opener.name, opener.name),
            )
            .with_span(start, end),
        );
    }
    scan
}

/// Flat inline entity tagging over the instance's tagset.
pub fn check_ner(instance: &TaskInstance, response: &str) -> Verdict {
    let q = payload_or_mismatch!(instance, Ner, TaskKind::Ner);
    let scan = scan_entities(response);
    let mut errors = scan.errors;

    let mut reported: Vec<&str> = Vec::new();
    for (label, span) in &scan.labels {
        if !q.tagset.iter().any(|t| t == label) && !reported.contains(&label.as_str()) {
            reported.push(label);
            errors.push(
                FormatError::new(
                    ErrorCode::IllegalLabel,
                    format!("\"{label}\" is not a legal entity type; use only {}", quote_list(&q.tagset)),
                )
                .with_span(span.0, span.1),
            );
        }
    }

    if normalize_whitespace(&scan.stripped) != normalize_whitespace(&q.sentence) {
        errors.push(FormatError::new(
            ErrorCode::ContentAltered,
            "after removing the tags the text differs from the original sentence; insert tags without changing any words",
        ));
    }
    Verdict::from_errors(errors)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NerChecker;

impl Checker for NerChecker {
    fn task(&self) -> TaskKind {
        TaskKind::Ner
    }

    fn check(&self, instance: &TaskInstance, response: &str) -> Verdict {
        check_ner(instance, response)
    }
}
