//! Batch drivers over a dataset: check stored responses, or generate (and
//! optionally refine) responses through a backend, then aggregate.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::checkers::CheckerRegistry;
use crate::generator::{Backend, PromptBuilder};
use crate::metrics::{build_report, EvalReport, ScoredResponse};
use crate::model::{TaskInstance, TaskKind, Verdict};
use crate::refine::{refine_loop, Attempt, RefineError, RefineOptions, StopReason};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("no response for instance {0:?}")]
    MissingResponse(String),
    #[error("response for unknown instance {0:?}")]
    UnknownResponse(String),
    #[error("concurrency must be at least 1")]
    InvalidConcurrency,
}

/// One line of `verdicts.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub id: String,
    pub task: TaskKind,
    pub verdict: Verdict,
}

/// One line of `traces.jsonl`. Failed items carry `error` and whatever
/// attempts completed before the failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub id: String,
    pub task: TaskKind,
    pub attempts: Vec<Attempt>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop_reason: Option<StopReason>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_response: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl TraceRecord {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub verdicts: Vec<VerdictRecord>,
    pub report: EvalReport,
}

/// Checks one stored response per instance. Every instance needs a response
/// and every response needs an instance.
pub fn check_responses(
    instances: &[TaskInstance],
    responses: &BTreeMap<String, String>,
    registry: &CheckerRegistry,
) -> Result<CheckOutcome, PipelineError> {
    if let Some(id) = responses.keys().find(|id| !instances.iter().any(|i| &i.id == *id)) {
        return Err(PipelineError::UnknownResponse(id.clone()));
    }
    let mut verdicts = Vec::with_capacity(instances.len());
    for inst in instances {
        let response = responses
            .get(&inst.id)
            .ok_or_else(|| PipelineError::MissingResponse(inst.id.clone()))?;
        verdicts.push(registry.check(inst, response));
    }
    let scored: Vec<ScoredResponse<'_>> = instances
        .iter()
        .zip(&verdicts)
        .map(|(inst, verdict)| ScoredResponse {
            instance: inst,
            response: &responses[&inst.id],
            verdict,
            first_verdict: None,
        })
        .collect();
    let report = build_report(&scored);
    let verdicts = instances
        .iter()
        .zip(verdicts)
        .map(|(inst, verdict)| VerdictRecord {
            id: inst.id.clone(),
            task: inst.task(),
            verdict,
        })
        .collect();
    Ok(CheckOutcome { verdicts, report })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    /// One trace per instance, in dataset order.
    pub traces: Vec<TraceRecord>,
    /// Verdicts of each item's best answer, in dataset order. Items whose
    /// first generation failed have no answer and no verdict.
    pub verdicts: Vec<VerdictRecord>,
    /// Aggregates over the items that produced an answer.
    pub report: EvalReport,
}

impl RunOutcome {
    pub fn failed_ids(&self) -> Vec<&str> {
        self.traces.iter().filter(|t| t.failed()).map(|t| t.id.as_str()).collect()
    }
}

/// Generates a response for every instance, refining up to
/// `options.max_steps` attempts, and aggregates the results.
///
/// With `max_steps = 1` this is plain single-pass evaluation. Up to
/// `concurrency` instances run at once; results are collected by dataset
/// position, so the outcome does not depend on scheduling. A backend failure
/// marks that item as failed, keeps its best answer so far, and the rest
/// still run.
pub fn run_generation(
    instances: &[TaskInstance],
    backend: &dyn Backend,
    registry: &CheckerRegistry,
    builders: &BTreeMap<TaskKind, PromptBuilder>,
    options: &RefineOptions,
    concurrency: usize,
) -> Result<RunOutcome, PipelineError> {
    if concurrency == 0 {
        return Err(PipelineError::InvalidConcurrency);
    }
    let slots: Vec<Mutex<Option<TraceRecord>>> = instances.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let worker = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        let Some(inst) = instances.get(i) else { break };
        let record = run_one(inst, backend, registry, builders, options);
        *slots[i].lock().expect("slot lock") = Some(record);
    };
    std::thread::scope(|s| {
        for _ in 0..concurrency.min(instances.len()).max(1) {
            s.spawn(worker);
        }
    });
    let traces: Vec<TraceRecord> = slots
        .into_iter()
        .map(|m| m.into_inner().expect("slot lock").expect("every slot is filled"))
        .collect();

    let mut verdicts = Vec::new();
    let mut scored_parts = Vec::new();
    for (inst, t) in instances.iter().zip(&traces) {
        let Some(chosen) = best_attempt(&t.attempts) else { continue };
        let first = &t.attempts[0];
        verdicts.push(VerdictRecord {
            id: inst.id.clone(),
            task: inst.task(),
            verdict: chosen.verdict.clone(),
        });
        scored_parts.push((inst, chosen.answer.as_str(), &chosen.verdict, &first.verdict));
    }
    let scored: Vec<ScoredResponse<'_>> = scored_parts
        .iter()
        .map(|&(instance, response, verdict, first)| ScoredResponse {
            instance,
            response,
            verdict,
            first_verdict: Some(first),
        })
        .collect();
    let report = build_report(&scored);
    Ok(RunOutcome { traces, verdicts, report })
}

/// The first passing attempt, else the latest. For a completed loop this is
/// always the last attempt, since a clean verdict ends the loop.
fn best_attempt(attempts: &[Attempt]) -> Option<&Attempt> {
    attempts.iter().find(|a| a.verdict.passed()).or(attempts.last())
}

fn run_one(
    inst: &TaskInstance,
    backend: &dyn Backend,
    registry: &CheckerRegistry,
    builders: &BTreeMap<TaskKind, PromptBuilder>,
    options: &RefineOptions,
) -> TraceRecord {
    let mut record = TraceRecord {
        id: inst.id.clone(),
        task: inst.task(),
        attempts: Vec::new(),
        stop_reason: None,
        final_response: None,
        error: None,
    };
    let client = match backend.client_for(inst) {
        Ok(c) => c,
        Err(e) => {
            record.error = Some(e.to_string());
            return record;
        }
    };
    let default_builder;
    let builder = match builders.get(&inst.task()) {
        Some(b) => b,
        None => {
            default_builder = PromptBuilder::new(inst.task());
            &default_builder
        }
    };
    match refine_loop(inst, client.as_ref(), registry.lookup(inst.task()), builder, options) {
        Ok(trace) => {
            record.attempts = trace.attempts;
            record.stop_reason = Some(trace.stop_reason);
            record.final_response = Some(trace.final_response);
        }
        Err(RefineError::Generator { source, partial }) => {
            log::warn!("instance {}: {source}", inst.id);
            record.attempts = partial.attempts;
            record.final_response = partial.best_response;
            record.error = Some(source.to_string());
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    record
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::MockBackend;
    use crate::model::{FTimeQuery, QueryPayload, TimeCategory, Timestamp};

    fn ftime(id: &str, reference: &str) -> TaskInstance {
        let q = FTimeQuery {
            reference_time: Timestamp::parse_compact("20021019T140000").unwrap(),
            weekday: "Saturday".into(),
            category: TimeCategory::Interval,
            instruction: String::new(),
        };
        TaskInstance::new(id, QueryPayload::FTime(q), vec![reference.into()]).unwrap()
    }

    fn data() -> Vec<TaskInstance> {
        (0..9).map(|i| ftime(&format!("f{i}"), "20021019T142000")).collect()
    }

    #[test]
    fn check_requires_matching_ids() {
        let reg = CheckerRegistry::with_defaults();
        let mut responses: BTreeMap<String, String> = data().iter().map(|i| (i.id.clone(), "nope".into())).collect();
        let out = check_responses(&data(), &responses, &reg).unwrap();
        assert_eq!(out.report.overall_ffr(), Some(0.0));
        responses.remove("f3");
        assert!(matches!(check_responses(&data(), &responses, &reg), Err(PipelineError::MissingResponse(id)) if id == "f3"));
        responses.insert("zz".into(), "x".into());
        assert!(matches!(check_responses(&data(), &responses, &reg), Err(PipelineError::UnknownResponse(id)) if id == "zz"));
    }

    #[test]
    fn concurrency_does_not_change_results() {
        let reg = CheckerRegistry::with_defaults();
        let opts = RefineOptions { max_steps: 1, ..RefineOptions::default() };
        let run = |c| run_generation(&data(), &MockBackend::EchoReferences, &reg, &BTreeMap::new(), &opts, c).unwrap();
        let (a, b) = (run(1), run(4));
        assert_eq!(a, b);
        assert_eq!(a.report.overall_ffr(), Some(1.0));
    }

    #[test]
    fn missing_script_fails_only_that_item() {
        let reg = CheckerRegistry::with_defaults();
        let scripts = BTreeMap::from([("f0".to_string(), vec!["20021019T142000".to_string()])]);
        let out = run_generation(&data()[..2], &MockBackend::Scripts(scripts), &reg, &BTreeMap::new(), &RefineOptions::default(), 2).unwrap();
        assert_eq!(out.failed_ids(), vec!["f1"]);
        assert_eq!(out.report.tasks[&TaskKind::FTime].n, 1);
    }
}
