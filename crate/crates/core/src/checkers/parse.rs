use super::{payload_or_mismatch, Checker};
use crate::model::{ErrorCode, FormatError, TaskInstance, TaskKind, Verdict};

/// A labelled constituency tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tree {
    /// `(TAG word)`
    Leaf { label: String, word: String },
    /// `(LABEL child+)`
    Node { label: String, children: Vec<Tree> },
}

impl Tree {
    pub fn label(&self) -> &str {
        match self {
            Tree::Leaf { label, .. } | Tree::Node { label, .. } => label,
        }
    }

    /// Words in left-to-right order.
    pub fn leaves(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Tree::Leaf { word, .. } => out.push(word),
            Tree::Node { children, .. } => children.iter().for_each(|c| c.collect_leaves(out)),
        }
    }

    /// `(label, start, end)` for every internal node; `end` is exclusive and
    /// counted in words.
    pub fn constituents(&self) -> Vec<(String, usize, usize)> {
        let mut out = Vec::new();
        self.collect_constituents(0, &mut out);
        out
    }

    fn collect_constituents(&self, start: usize, out: &mut Vec<(String, usize, usize)>) -> usize {
        match self {
            Tree::Leaf { .. } => start + 1,
            Tree::Node { label, children } => {
                let slot = out.len();
                out.push((label.clone(), start, start));
                let mut pos = start;
                for c in children {
                    pos = c.collect_constituents(pos, out);
                }
                out[slot].2 = pos;
                pos
            }
        }
    }
}

/// Why a bracketed string is not a single well-formed tree.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{}", .errors.first().map(|e| e.message.as_str()).unwrap_or("malformed tree"))]
pub struct TreeError {
    pub errors: Vec<FormatError>,
}

#[derive(Debug)]
enum Sexpr {
    Atom { text: String, span: (usize, usize) },
    List { items: Vec<Sexpr>, span: (usize, usize) },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tok<'a> {
    Open,
    Close,
    Atom(&'a str),
}

fn tokenize(s: &str) -> Vec<(Tok<'_>, (usize, usize))> {
    let mut out = Vec::new();
    let mut chars = s.char_indices().peekable();
    let mut pos = 0usize; // character offset
    while let Some((b, c)) = chars.next() {
        match c {
            '(' => out.push((Tok::Open, (pos, pos + 1))),
            ')' => out.push((Tok::Close, (pos, pos + 1))),
            c if c.is_whitespace() => {}
            _ => {
                let start_pos = pos;
                let mut end_b = b + c.len_utf8();
                while let Some(&(nb, nc)) = chars.peek() {
                    if nc.is_whitespace() || nc == '(' || nc == ')' {
                        break;
                    }
                    end_b = nb + nc.len_utf8();
                    pos += 1;
                    chars.next();
                }
                out.push((Tok::Atom(&s[b..end_b]), (start_pos, pos + 1)));
            }
        }
        pos += 1;
    }
    out
}

fn read_sexprs(s: &str) -> Result<Vec<Sexpr>, FormatError> {
    let toks = tokenize(s);
    let mut stack: Vec<(Vec<Sexpr>, usize)> = vec![(Vec::new(), 0)];
    for (tok, span) in toks {
        match tok {
            Tok::Open => stack.push((Vec::new(), span.0)),
            Tok::Close => {
                if stack.len() == 1 {
                    return Err(FormatError::new(
                        ErrorCode::UnbalancedParens,
                        format!("the closing parenthesis at position {} has no matching opening parenthesis", span.0),
                    )
                    .with_span(span.0, span.1));
                }
                let (items, start) = stack.pop().expect("nonempty");
                stack
                    .last_mut()
                    .expect("root frame")
                    .0
                    .push(Sexpr::List { items, span: (start, span.1) });
            }
            Tok::Atom(text) => stack
                .last_mut()
                .expect("root frame")
                .0
                .push(Sexpr::Atom { text: text.to_string(), span }),
        }
    }
    if stack.len() > 1 {
        let unclosed = stack.len() - 1;
        let start = stack[1].1;
        return Err(FormatError::new(
            ErrorCode::UnbalancedParens,
            format!("{unclosed} opening parenthes{} never closed", if unclosed == 1 { "is is" } else { "es are" }),
        )
        .with_span(start, start + 1));
    }
    Ok(stack.pop().expect("root frame").0)
}

fn build(sexpr: &Sexpr, errors: &mut Vec<FormatError>) -> Option<Tree> {
    let (items, span) = match sexpr {
        Sexpr::List { items, span } => (items, *span),
        Sexpr::Atom { text, span } => {
            errors.push(
                FormatError::new(
                    ErrorCode::MalformedTree,
                    format!("the word \"{text}\" is not wrapped in a word-level label"),
                )
                .with_span(span.0, span.1),
            );
            return None;
        }
    };
    let label = match items.first() {
        Some(Sexpr::Atom { text, .. }) => text.clone(),
        _ => {
            errors.push(
                FormatError::new(ErrorCode::MalformedTree, "every bracket must start with a label")
                    .with_span(span.0, span.1),
            );
            return None;
        }
    };
    let children = &items[1..];
    match children {
        [] => {
            errors.push(
                FormatError::new(
                    ErrorCode::EmptyConstituent,
                    format!("the constituent ({label}) is empty; every label must cover a word or at least one subtree"),
                )
                .with_span(span.0, span.1),
            );
            None
        }
        [Sexpr::Atom { text, .. }] => Some(Tree::Leaf { label, word: text.clone() }),
        _ => {
            let mut kids = Vec::with_capacity(children.len());
            let mut ok = true;
            for child in children {
                if let Sexpr::Atom { text, span } = child {
                    errors.push(
                        FormatError::new(
                            ErrorCode::MalformedTree,
                            format!(
                                "the word \"{text}\" sits directly under ({label} ...); give every word its own word-level label"
                            ),
                        )
                        .with_span(span.0, span.1),
                    );
                    ok = false;
                } else if let Some(t) = build(child, errors) {
                    kids.push(t);
                } else {
                    ok = false;
                }
            }
            ok.then_some(Tree::Node { label, children: kids })
        }
    }
}

/// Parses a single bracketed tree. Labels are not checked here.
pub fn parse_tree(text: &str) -> Result<Tree, TreeError> {
    let sexprs = read_sexprs(text).map_err(|e| TreeError { errors: vec![e] })?;
    if sexprs.len() != 1 {
        let msg = if sexprs.is_empty() {
            "the response contains no bracketed tree".to_string()
        } else {
            format!("the response contains {} top-level items; wrap everything in a single tree", sexprs.len())
        };
        return Err(TreeError {
            errors: vec![FormatError::new(ErrorCode::MalformedTree, msg)],
        });
    }
    let mut errors = Vec::new();
    match build(&sexprs[0], &mut errors) {
        Some(tree) if errors.is_empty() => Ok(tree),
        _ => Err(TreeError { errors }),
    }
}

fn check_labels(
    tree: &Tree,
    words: &std::collections::BTreeSet<String>,
    spans: &std::collections::BTreeSet<String>,
    errors: &mut Vec<FormatError>,
) {
    match tree {
        Tree::Leaf { label, word } => {
            if !words.contains(label) {
                let why = if spans.contains(label) {
                    "is a phrase-level label and cannot label a single word"
                } else {
                    "is not a legal word-level label"
                };
                errors.push(FormatError::new(
                    ErrorCode::IllegalLabel,
                    format!("\"{label}\" on the word \"{word}\" {why}"),
                ));
            }
        }
        Tree::Node { label, children } => {
            if !spans.contains(label) {
                let why = if words.contains(label) {
                    "is a word-level label and cannot label a span"
                } else {
                    "is not a legal phrase-level label"
                };
                errors.push(FormatError::new(ErrorCode::IllegalLabel, format!("\"{label}\" {why}")));
            }
            for c in children {
                check_labels(c, words, spans, errors);
            }
        }
    }
}

/// Accepts a single labelled tree whose words spell the original sentence.
pub fn check_parse(instance: &TaskInstance, response: &str) -> Verdict {
    let q = payload_or_mismatch!(instance, Parse, TaskKind::Parse);
    let tree = match parse_tree(response) {
        Ok(t) => t,
        Err(e) => return Verdict::from_errors(e.errors),
    };
    let mut errors = Vec::new();
    check_labels(&tree, &q.word_labels, &q.span_labels, &mut errors);
    let expected: Vec<&str> = q.sentence.split_whitespace().collect();
    if tree.leaves() != expected {
        errors.push(FormatError::new(
            ErrorCode::ContentAltered,
            format!(
                "the words of the tree read \"{}\" but the sentence is \"{}\"; keep every word unchanged and in order",
                tree.leaves().join(" "),
                expected.join(" ")
            ),
        ));
    }
    Verdict::from_errors(errors)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseChecker;

impl Checker for ParseChecker {
    fn task(&self) -> TaskKind {
        TaskKind::Parse
    }

    fn check(&self, instance: &TaskInstance, response: &str) -> Verdict {
        check_parse(instance, response)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ParseQuery, QueryPayload};

    fn set(items: &[&str]) -> std::collections::BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    fn inst(sentence: &str) -> TaskInstance {
        let q = ParseQuery {
            sentence: sentence.into(),
            word_labels: set(&["DT", "NN", "VBD", "IN", "JJ", "."]),
            span_labels: set(&["S", "NP", "VP", "PP"]),
        };
        TaskInstance::new("p", QueryPayload::Parse(q), vec![]).unwrap()
    }

    #[test]
    fn well_formed_tree_passes() {
        let v = check_parse(&inst("The cat sat"), "(S (NP (DT The) (NN cat)) (VP (VBD sat)))");
        assert!(v.passed(), "{:?}", v);
    }

    #[test]
    fn unbalanced() {
        let v = check_parse(&inst("cat"), "((S (NN cat))");
        assert_eq!(v.errors()[0].code, ErrorCode::UnbalancedParens);
        let v = check_parse(&inst("cat"), "(S (NN cat)))");
        assert_eq!(v.errors()[0].code, ErrorCode::UnbalancedParens);
    }

    #[test]
    fn empty_constituent() {
        let v = check_parse(&inst("cat"), "(S (NP))");
        assert_eq!(v.errors()[0].code, ErrorCode::EmptyConstituent);
    }

    #[test]
    fn label_misuse() {
        let v = check_parse(&inst("cat"), "(S (NP cat))");
        assert!(v.has_code(ErrorCode::IllegalLabel));
        let v = check_parse(&inst("cat"), "(NN (NN cat))");
        assert!(v.has_code(ErrorCode::IllegalLabel));
        let v = check_parse(&inst("cat"), "(S (XX cat))");
        assert!(v.has_code(ErrorCode::IllegalLabel));
    }

    #[test]
    fn bare_words_and_forests() {
        assert!(check_parse(&inst("The cat"), "(NP The cat)").has_code(ErrorCode::MalformedTree));
        assert!(check_parse(&inst("cat cat"), "(NN cat) (NN cat)").has_code(ErrorCode::MalformedTree));
        assert!(check_parse(&inst("cat"), "").has_code(ErrorCode::MalformedTree));
    }

    #[test]
    fn altered_words() {
        let v = check_parse(&inst("The cat sat"), "(S (NP (DT A) (NN cat)) (VP (VBD sat)))");
        assert!(v.has_code(ErrorCode::ContentAltered));
    }

    #[test]
    fn constituents_use_word_offsets() {
        let t = parse_tree("(S (NP (DT The) (NN cat)) (VP (VBD sat)))").unwrap();
        assert_eq!(
            t.constituents(),
            vec![("S".into(), 0, 3), ("NP".into(), 0, 2), ("VP".into(), 2, 3)]
        );
        assert_eq!(t.leaves(), vec!["The", "cat", "sat"]);
    }

    #[test]
    fn spans_are_character_offsets() {
        let err = parse_tree("(S (NP (DT é) (NN x)) (NP))").unwrap_err();
        assert_eq!(err.errors[0].code, ErrorCode::EmptyConstituent);
        assert_eq!(err.errors[0].span, Some((22, 26)));
    }
}
