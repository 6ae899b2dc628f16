//! Format faithfulness rate and per-task general-quality scorers.
//!
//! Structure-dependent scorers (`ner_bag_f1`, `bracket_f1`, `break_f1`) give
//! a prediction that is not structurally valid a score of zero.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::checkers::{normalize_whitespace, parse_segmentation, parse_tree, scan_entities};
use crate::model::{TaskKind, Verdict};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("EMPTY_SET: {0}")]
    EmptySet(&'static str),
    #[error("LENGTH_MISMATCH: {hyps} hypotheses but {refs} reference lists")]
    LengthMismatch { hyps: usize, refs: usize },
    #[error("RANGE: score {score} is outside [0, {max_score}]")]
    Range { score: f64, max_score: f64 },
    #[error("invalid gold annotation: {0}")]
    InvalidGold(String),
}

/// Fraction of verdicts that pass.
pub fn ffr(verdicts: &[Verdict]) -> Result<f64, MetricError> {
    if verdicts.is_empty() {
        return Err(MetricError::EmptySet("no verdicts"));
    }
    let passes = verdicts.iter().filter(|v| v.passed()).count();
    Ok(passes as f64 / verdicts.len() as f64)
}

/// 1 if the trimmed prediction equals any trimmed reference, else 0.
/// `case_fold` additionally lower-cases both sides (used for MCQ).
pub fn exact_match_accuracy(pred: &str, refs: &[String], case_fold: bool) -> Result<f64, MetricError> {
    if refs.is_empty() {
        return Err(MetricError::EmptySet("no references"));
    }
    let norm = |s: &str| if case_fold { s.trim().to_lowercase() } else { s.trim().to_string() };
    let p = norm(pred);
    Ok(if refs.iter().any(|r| norm(r) == p) { 1.0 } else { 0.0 })
}

/// SQuAD answer normalization: lower-case, drop ASCII punctuation, drop the
/// articles a/an/the, split on whitespace.
pub fn squad_tokens(s: &str) -> Vec<String> {
    let cleaned: String = s
        .to_lowercase()
        .chars()
        .filter(|c| !c.is_ascii_punctuation())
        .collect();
    cleaned
        .split_whitespace()
        .filter(|w| !matches!(*w, "a" | "an" | "the"))
        .map(String::from)
        .collect()
}

fn counts<T: Eq + Hash + Clone>(items: &[T]) -> HashMap<T, usize> {
    let mut m = HashMap::new();
    for it in items {
        *m.entry(it.clone()).or_insert(0) += 1;
    }
    m
}

/// F1 between two multisets. Two empty bags agree perfectly; one empty bag
/// scores zero.
pub fn multiset_f1<T: Eq + Hash + Clone>(pred: &[T], gold: &[T]) -> f64 {
    match (pred.is_empty(), gold.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let p = counts(pred);
    let g = counts(gold);
    let overlap: usize = p.iter().map(|(k, &n)| n.min(g.get(k).copied().unwrap_or(0))).sum();
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / pred.len() as f64;
    let recall = overlap as f64 / gold.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// SQuAD-style token F1, maximised over references.
pub fn token_f1(pred: &str, refs: &[String]) -> Result<f64, MetricError> {
    if refs.is_empty() {
        return Err(MetricError::EmptySet("no references"));
    }
    let p = squad_tokens(pred);
    Ok(refs
        .iter()
        .map(|r| multiset_f1(&p, &squad_tokens(r)))
        .fold(0.0, f64::max))
}

fn entity_bag(tagged: &str) -> Option<(Vec<(String, String)>, String)> {
    let scan = scan_entities(tagged);
    if !scan.is_well_formed() {
        return None;
    }
    let bag = scan
        .entities
        .iter()
        .flat_map(|e| e.text.split_whitespace().map(|tok| (tok.to_string(), e.label.clone())))
        .collect();
    Some((bag, normalize_whitespace(&scan.stripped)))
}

/// F1 over multisets of `(token, type)` pairs taken from tagged entity spans.
pub fn ner_bag_f1(pred_tagged: &str, gold_tagged: &str) -> Result<f64, MetricError> {
    let (gold, gold_text) =
        entity_bag(gold_tagged).ok_or_else(|| MetricError::InvalidGold("gold NER tagging is malformed".into()))?;
    match entity_bag(pred_tagged) {
        Some((pred, text)) if text == gold_text => Ok(multiset_f1(&pred, &gold)),
        _ => Ok(0.0),
    }
}

/// Labelled bracket F1 over internal nodes (word-level nodes excluded).
pub fn bracket_f1(pred_tree: &str, gold_tree: &str) -> Result<f64, MetricError> {
    let gold = parse_tree(gold_tree).map_err(|e| MetricError::InvalidGold(e.to_string()))?;
    let Ok(pred) = parse_tree(pred_tree) else {
        return Ok(0.0);
    };
    if pred.leaves() != gold.leaves() {
        return Ok(0.0);
    }
    Ok(multiset_f1(&pred.constituents(), &gold.constituents()))
}

/// F1 between `(offset, kind)` break sets. The end of the text is an implicit
/// block boundary, so a separator there is not counted.
pub fn break_f1(pred_segmented: &str, gold_segmented: &str) -> Result<f64, MetricError> {
    let gold = parse_segmentation(gold_segmented);
    let pred = parse_segmentation(pred_segmented);
    if pred.text != gold.text {
        return Ok(0.0);
    }
    let interior = |seg: &crate::checkers::Segmentation| -> Vec<_> {
        let end = seg.text.chars().count();
        let set: BTreeSet<_> = seg.breaks.iter().filter(|(off, _)| *off < end).copied().collect();
        set.into_iter().collect()
    };
    Ok(multiset_f1(&interior(&pred), &interior(&gold)))
}

fn ngram_counts(tokens: &[&str], n: usize) -> HashMap<Vec<String>, usize> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w.iter().map(|s| s.to_string()).collect()).or_insert(0) += 1;
        }
    }
    m
}

/// Corpus-level BLEU-4 with uniform weights, no smoothing and whitespace
/// tokenization. The effective reference length of a sentence is the
/// reference length closest to the hypothesis length (shorter on ties).
pub fn bleu4(hyps: &[String], refs: &[Vec<String>]) -> Result<f64, MetricError> {
    if hyps.len() != refs.len() {
        return Err(MetricError::LengthMismatch { hyps: hyps.len(), refs: refs.len() });
    }
    if hyps.is_empty() {
        return Err(MetricError::EmptySet("empty corpus"));
    }
    let mut matches = [0usize; 4];
    let mut totals = [0usize; 4];
    let mut hyp_len = 0usize;
    let mut ref_len = 0usize;

    for (hyp, rs) in hyps.iter().zip(refs) {
        if rs.is_empty() {
            return Err(MetricError::EmptySet("a hypothesis has no references"));
        }
        let h: Vec<&str> = hyp.split_whitespace().collect();
        let rtoks: Vec<Vec<&str>> = rs.iter().map(|r| r.split_whitespace().collect()).collect();
        hyp_len += h.len();
        ref_len += rtoks
            .iter()
            .map(|r| r.len())
            .min_by_key(|&len| (len.abs_diff(h.len()), len))
            .expect("nonempty");
        for n in 1..=4 {
            let hc = ngram_counts(&h, n);
            let mut max_ref: HashMap<Vec<String>, usize> = HashMap::new();
            for r in &rtoks {
                for (g, c) in ngram_counts(r, n) {
                    let e = max_ref.entry(g).or_insert(0);
                    *e = (*e).max(c);
                }
            }
            matches[n - 1] += hc
                .iter()
                .map(|(g, &c)| c.min(max_ref.get(g).copied().unwrap_or(0)))
                .sum::<usize>();
            totals[n - 1] += h.len().saturating_sub(n - 1);
        }
    }
    if matches.contains(&0) {
        return Ok(0.0);
    }
    let log_precision: f64 = matches
        .iter()
        .zip(&totals)
        .map(|(&m, &t)| (m as f64 / t as f64).ln())
        .sum::<f64>()
        / 4.0;
    let brevity = if hyp_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    Ok(brevity * log_precision.exp())
}

/// Achieved game score as a fraction of the maximum.
pub fn agent_score_ratio(score: f64, max_score: f64) -> Result<f64, MetricError> {
    if max_score.is_nan() || max_score <= 0.0 || !(0.0..=max_score).contains(&score) {
        return Err(MetricError::Range { score, max_score });
    }
    Ok(score / max_score)
}

/// Which general-quality metric a task reports.
pub fn gq_metric_name(task: TaskKind) -> Option<&'static str> {
    match task {
        TaskKind::Mcq | TaskKind::FTime => Some("accuracy"),
        TaskKind::Eqa => Some("token_f1"),
        TaskKind::Ner => Some("ner_bag_f1"),
        TaskKind::Parse => Some("bracket_f1"),
        TaskKind::CapSeg => Some("break_f1"),
        TaskKind::Mtt => Some("bleu4_corpus_unsmoothed"),
        TaskKind::Agent => Some("agent_score_ratio"),
        TaskKind::AcroW | TaskKind::Xdl => None,
    }
}

/// Per-task aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSummary {
    pub n: usize,
    pub passes: usize,
    pub ffr: f64,
    /// FFR of first attempts, for refinement runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_attempt_ffr: Option<f64>,
    pub gq: Option<f64>,
    pub gq_metric: Option<String>,
}

/// Evaluation summary keyed by task.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tasks: BTreeMap<TaskKind, TaskSummary>,
}

impl EvalReport {
    /// Unweighted mean of the per-task FFRs; `None` with no tasks.
    pub fn overall_ffr(&self) -> Option<f64> {
        if self.tasks.is_empty() {
            return None;
        }
        Some(self.tasks.values().map(|t| t.ffr).sum::<f64>() / self.tasks.len() as f64)
    }

    /// `(ffr, gq)` pairs for the tasks that report a quality score.
    pub fn ffr_gq_pairs(&self) -> Vec<(TaskKind, f64, f64)> {
        self.tasks
            .iter()
            .filter_map(|(&k, t)| t.gq.map(|gq| (k, t.ffr, gq)))
            .collect()
    }
}

/// One scored response: what the report aggregates.
#[derive(Debug, Clone)]
pub struct ScoredResponse<'a> {
    pub instance: &'a crate::model::TaskInstance,
    pub response: &'a str,
    pub verdict: &'a Verdict,
    pub first_verdict: Option<&'a Verdict>,
}

/// Aggregates scored responses into a report. Instance order does not affect
/// the result except through floating-point summation order, which follows
/// the slice order.
pub fn build_report(items: &[ScoredResponse<'_>]) -> EvalReport {
    let mut by_task: BTreeMap<TaskKind, Vec<&ScoredResponse<'_>>> = BTreeMap::new();
    for it in items {
        by_task.entry(it.instance.task()).or_default().push(it);
    }
    let tasks = by_task
        .into_iter()
        .map(|(task, group)| {
            let n = group.len();
            let passes = group.iter().filter(|s| s.verdict.passed()).count();
            let first_attempt_ffr = group
                .iter()
                .map(|s| s.first_verdict)
                .collect::<Option<Vec<_>>>()
                .map(|vs| vs.iter().filter(|v| v.passed()).count() as f64 / n as f64);
            let summary = TaskSummary {
                n,
                passes,
                ffr: passes as f64 / n as f64,
                first_attempt_ffr,
                gq: general_quality(task, &group),
                gq_metric: gq_metric_name(task).map(String::from),
            };
            (task, summary)
        })
        .collect();
    EvalReport { tasks }
}

fn general_quality(task: TaskKind, group: &[&ScoredResponse<'_>]) -> Option<f64> {
    let with_refs: Vec<_> = group.iter().filter(|s| !s.instance.references.is_empty()).collect();
    if with_refs.is_empty() {
        return None;
    }
    let mean = |scores: Vec<f64>| Some(scores.iter().sum::<f64>() / scores.len() as f64);
    let gold = |s: &ScoredResponse<'_>| s.instance.references[0].clone();
    match task {
        TaskKind::Mcq => mean(
            with_refs
                .iter()
                .map(|s| exact_match_accuracy(s.response, &s.instance.references, true).unwrap_or(0.0))
                .collect(),
        ),
        TaskKind::FTime => mean(
            with_refs
                .iter()
                .map(|s| exact_match_accuracy(s.response, &s.instance.references, false).unwrap_or(0.0))
                .collect(),
        ),
        TaskKind::Eqa => mean(
            with_refs
                .iter()
                .map(|s| token_f1(s.response, &s.instance.references).unwrap_or(0.0))
                .collect(),
        ),
        TaskKind::Ner | TaskKind::Parse | TaskKind::CapSeg => mean(
            with_refs
                .iter()
                .map(|s| {
                    if !s.verdict.passed() {
                        return 0.0;
                    }
                    let g = gold(s);
                    let r = match task {
                        TaskKind::Ner => ner_bag_f1(s.response, &g),
                        TaskKind::Parse => bracket_f1(s.response, &g),
                        _ => break_f1(s.response, &g),
                    };
                    r.unwrap_or(0.0)
                })
                .collect(),
        ),
        TaskKind::Mtt => {
            let hyps: Vec<String> = with_refs.iter().map(|s| s.response.to_string()).collect();
            let refs: Vec<Vec<String>> = with_refs.iter().map(|s| s.instance.references.clone()).collect();
            bleu4(&hyps, &refs).ok()
        }
        // One step of a game: a reference action earns the full point.
        TaskKind::Agent => mean(
            with_refs
                .iter()
                .map(|s| {
                    let score = exact_match_accuracy(s.response, &s.instance.references, true).unwrap_or(0.0);
                    agent_score_ratio(score, 1.0).unwrap_or(0.0)
                })
                .collect(),
        ),
        TaskKind::AcroW | TaskKind::Xdl => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ErrorCode, FormatError};

    fn v(pass: bool) -> Verdict {
        if pass {
            Verdict::pass()
        } else {
            Verdict::from_errors(vec![FormatError::new(ErrorCode::GrammarMismatch, "bad")])
        }
    }

    fn s(x: &str) -> String {
        x.to_string()
    }

    #[test]
    fn ffr_examples() {
        assert_eq!(ffr(&[v(true), v(true), v(true), v(true)]).unwrap(), 1.0);
        assert_eq!(ffr(&[v(true), v(false), v(false), v(false)]).unwrap(), 0.25);
        assert_eq!(ffr(&[]), Err(MetricError::EmptySet("no verdicts")));
    }

    #[test]
    fn exact_match_examples() {
        let r = vec![s("20021019T142000")];
        assert_eq!(exact_match_accuracy("20021019T142000", &r, false).unwrap(), 1.0);
        assert_eq!(exact_match_accuracy("20021019T142001", &r, false).unwrap(), 0.0);
        assert_eq!(exact_match_accuracy("b", &[s("a"), s("b")], false).unwrap(), 1.0);
        assert_eq!(exact_match_accuracy(" loc", &[s("LOC")], true).unwrap(), 1.0);
        assert_eq!(exact_match_accuracy(" loc", &[s("LOC")], false).unwrap(), 0.0);
    }

    #[test]
    fn token_f1_examples() {
        assert_eq!(token_f1("cat sat", &[s("cat sat")]).unwrap(), 1.0);
        assert!((token_f1("the cat", &[s("cat sat")]).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(token_f1("", &[s("cat")]).unwrap(), 0.0);
        assert_eq!(token_f1("the", &[s("a")]).unwrap(), 1.0);
    }

    #[test]
    fn ner_bag_examples() {
        let gold = "<PER>Sarah</PER> flew to <LOC>Bonn</LOC>.";
        assert_eq!(ner_bag_f1(gold, gold).unwrap(), 1.0);
        assert_eq!(ner_bag_f1("Sarah flew to Bonn.", gold).unwrap(), 0.0);
        let f = ner_bag_f1("<PER>Sarah</PER> flew to Bonn.", gold).unwrap();
        assert!((f - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(ner_bag_f1("<PER>Sarah</ORG> flew to Bonn.", gold).unwrap(), 0.0);
    }

    #[test]
    fn bracket_examples() {
        let gold = "(S (NP (DT The) (NN cat)) (VP (VBD sat)))";
        assert_eq!(bracket_f1(gold, gold).unwrap(), 1.0);
        let gold2 = "(S (NP (DT The) (NN cat)) (VBD sat))";
        let pred2 = "(S (DT The) (NP (NN cat) (VBD sat)))";
        assert!((bracket_f1(pred2, gold2).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(bracket_f1("(S (NP))", gold).unwrap(), 0.0);
    }

    #[test]
    fn break_examples() {
        let gold = "The shimmering lake <eol> reflected the colors <eob> of the setting sun. <eob>";
        assert_eq!(break_f1(gold, gold).unwrap(), 1.0);
        let swapped = "The shimmering lake <eob> reflected the colors <eob> of the setting sun. <eob>";
        assert!((break_f1(swapped, gold).unwrap() - 0.5).abs() < 1e-12);
        let partial = "The shimmering lake reflected the colors <eob> of the setting sun. <eob>";
        assert!((break_f1(partial, gold).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(break_f1("Some other text <eob>", gold).unwrap(), 0.0);
    }

    #[test]
    fn bleu_examples() {
        let refs = vec![vec![s("the quick brown fox jumps")]];
        assert!((bleu4(&[s("the quick brown fox jumps")], &refs).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(bleu4(&[s("the the the the")], &[vec![s("the cat")]]).unwrap(), 0.0);
        assert!(matches!(bleu4(&[s("a")], &[]), Err(MetricError::LengthMismatch { .. })));
    }

    #[test]
    fn agent_ratio_examples() {
        assert_eq!(agent_score_ratio(0.0, 10.0).unwrap(), 0.0);
        assert_eq!(agent_score_ratio(10.0, 10.0).unwrap(), 1.0);
        assert_eq!(agent_score_ratio(3.0, 4.0).unwrap(), 0.75);
        assert!(agent_score_ratio(5.0, 4.0).is_err());
        assert!(agent_score_ratio(1.0, 0.0).is_err());
        assert!(agent_score_ratio(-1.0, 4.0).is_err());
    }

    #[test]
    fn overall_ffr_is_macro_average() {
        let mut report = EvalReport::default();
        for (k, f) in [(TaskKind::Mcq, 1.0), (TaskKind::FTime, 0.5)] {
            report.tasks.insert(
                k,
                TaskSummary { n: 10, passes: 0, ffr: f, first_attempt_ffr: None, gq: None, gq_metric: None },
            );
        }
        assert_eq!(report.overall_ffr(), Some(0.75));
        assert_eq!(EvalReport::default().overall_ffr(), None);
    }
}
