use super::{normalize_whitespace, payload_or_mismatch, Checker};
use crate::model::{ErrorCode, FormatError, TaskInstance, TaskKind, Verdict};

pub const EOL: &str = "<eol>";
pub const EOB: &str = "<eob>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SegmentTag {
    Eol,
    Eob,
}

/// One caption line: its text (tags removed, trimmed) and where it sits in the
/// response, as a character range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Line {
    pub text: String,
    pub span: (usize, usize),
}

/// A caption segmentation split into blocks of lines.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Segmentation {
    pub blocks: Vec<Vec<Line>>,
    /// Every separator as (character offset into [`Segmentation::text`], kind).
    pub breaks: Vec<(usize, SegmentTag)>,
    /// Whitespace-normalized text with all separators removed.
    pub text: String,
}

/// Splits a response on `<eob>` (blocks) and `<eol>` (lines). A trailing
/// `<eob>` is optional and blank text after the last separator is ignored.
pub fn parse_segmentation(response: &str) -> Segmentation {
    let mut seg = Segmentation::default();
    let mut block: Vec<Line> = Vec::new();
    let mut words: Vec<&str> = Vec::new();
    let mut rest = response;
    let mut consumed_chars = 0usize;

    loop {
        let next = [(rest.find(EOL), SegmentTag::Eol), (rest.find(EOB), SegmentTag::Eob)]
            .into_iter()
            .filter_map(|(pos, tag)| pos.map(|p| (p, tag)))
            .min_by_key(|&(p, _)| p);
        let (chunk, tag) = match next {
            Some((p, tag)) => (&rest[..p], Some(tag)),
            None => (rest, None),
        };
        let chunk_chars = chunk.chars().count();
        words.extend(chunk.split_whitespace());

        if tag.is_some() || !chunk.trim().is_empty() {
            let lead = chunk.len() - chunk.trim_start().len();
            let start = consumed_chars + chunk[..lead].chars().count();
            let text = chunk.trim().to_string();
            let end = start + text.chars().count();
            block.push(Line { text, span: (start, end) });
        }

        let Some(tag) = tag else {
            break;
        };
        let offset = joined_len(&words);
        seg.breaks.push((offset, tag));
        if tag == SegmentTag::Eob {
            seg.blocks.push(std::mem::take(&mut block));
        }
        let tag_len = EOL.len();
        rest = &rest[chunk.len() + tag_len..];
        consumed_chars += chunk_chars + tag_len;
    }
    if !block.is_empty() {
        seg.blocks.push(block);
    }
    seg.text = words.join(" ");
    seg
}

fn joined_len(words: &[&str]) -> usize {
    let chars: usize = words.iter().map(|w| w.chars().count()).sum();
    chars + words.len().saturating_sub(1)
}

/// Caption segmentation: content preserved, at most `max_lines_per_block`
/// lines per block and `max_line_chars` characters per line.
pub fn check_capseg(instance: &TaskInstance, response: &str) -> Verdict {
    let q = payload_or_mismatch!(instance, CapSeg, TaskKind::CapSeg);
    let seg = parse_segmentation(response);
    let mut errors = Vec::new();

    if seg.text != normalize_whitespace(&q.text) {
        errors.push(FormatError::new(
            ErrorCode::ContentAltered,
            "after removing <eol> and <eob> the text differs from the original; only insert separators, do not change the words",
        ));
    }
    let max_lines = q.max_lines_per_block as usize;
    let max_chars = q.max_line_chars as usize;
    for (b, block) in seg.blocks.iter().enumerate() {
        if block.len() > max_lines {
            let span = (block[0].span.0, block[block.len() - 1].span.1);
            errors.push(
                FormatError::new(
                    ErrorCode::TooManyLines,
                    format!(
                        "block {} has {} lines but a block may contain at most {max_lines}; end the block with <eob> sooner",
                        b + 1,
                        block.len()
                    ),
                )
                .with_span(span.0, span.1),
            );
        }
        for (l, line) in block.iter().enumerate() {
            let len = line.text.chars().count();
            if len > max_chars {
                errors.push(
                    FormatError::new(
                        ErrorCode::LineTooLong,
                        format!(
                            "line {} of block {} has {len} characters (\"{}\") but a line may contain at most {max_chars}; split it with <eol> or <eob>",
                            l + 1,
                            b + 1,
                            line.text
                        ),
                    )
                    .with_span(line.span.0, line.span.1),
                );
            }
        }
    }
    Verdict::from_errors(errors)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CapSegChecker;

impl Checker for CapSegChecker {
    fn task(&self) -> TaskKind {
        TaskKind::CapSeg
    }

    fn check(&self, instance: &TaskInstance, response: &str) -> Verdict {
        check_capseg(instance, response)
    }
}
