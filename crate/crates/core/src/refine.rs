//! Iterative format repair: generate, check, and re-prompt with the checker's
//! error messages until the answer is clean or a stop criterion fires.

use serde::{Deserialize, Serialize};

use crate::checkers::Checker;
use crate::generator::{extract_answer, GenParams, GeneratorClient, GeneratorError, PromptBuilder, PromptError};
use crate::model::{TaskInstance, Verdict};

/// Why a refinement loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StopReason {
    /// The checker found no format errors.
    Clean,
    /// `max_steps` attempts were made.
    StepLimit,
    /// The next refinement prompt would exceed the prompt budget.
    PromptOverflow,
    /// The answer repeats an earlier one.
    RepeatedAnswer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub prompt: String,
    /// Raw generator output.
    pub response: String,
    /// The part of `response` that was checked.
    pub answer: String,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementTrace {
    pub attempts: Vec<Attempt>,
    pub stop_reason: StopReason,
    pub final_response: String,
}

impl RefinementTrace {
    pub fn first_verdict(&self) -> &Verdict {
        &self.attempts[0].verdict
    }

    pub fn final_verdict(&self) -> &Verdict {
        &self.attempts.last().expect("traces are nonempty").verdict
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineOptions {
    pub max_steps: usize,
    /// Ask for a short reflection before each corrected answer.
    pub with_thoughts: bool,
    /// Prompt budget in characters, a tokenizer-independent proxy.
    pub max_prompt_chars: usize,
    pub params: GenParams,
}

impl Default for RefineOptions {
    fn default() -> Self {
        RefineOptions {
            max_steps: 5,
            with_thoughts: false,
            max_prompt_chars: 32_000,
            params: GenParams::default(),
        }
    }
}

/// What a loop had produced when the generator failed.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialTrace {
    pub attempts: Vec<Attempt>,
    /// A passing answer if any, else the latest one.
    pub best_response: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum RefineError {
    #[error("max_steps must be at least 1")]
    InvalidOptions,
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("generation failed after {} attempt(s): {source}", .partial.attempts.len())]
    Generator {
        #[source]
        source: GeneratorError,
        partial: PartialTrace,
    },
}

fn generator_failure(source: GeneratorError, attempts: Vec<Attempt>) -> RefineError {
    let best_response = attempts
        .iter()
        .find(|a| a.verdict.passed())
        .or(attempts.last())
        .map(|a| a.answer.clone());
    RefineError::Generator {
        source,
        partial: PartialTrace { attempts, best_response },
    }
}

/// Runs the refinement loop for one instance.
///
/// Attempt 1 uses the raw prompt; every later attempt uses a refinement
/// prompt built from the previous answer and its errors. After each attempt
/// the stop criteria are tested in order: clean verdict, step limit, prompt
/// budget for the next prompt, repeated answer.
pub fn refine_loop(
    instance: &TaskInstance,
    generator: &dyn GeneratorClient,
    checker: &dyn Checker,
    builder: &PromptBuilder,
    options: &RefineOptions,
) -> Result<RefinementTrace, RefineError> {
    if options.max_steps == 0 {
        return Err(RefineError::InvalidOptions);
    }
    let mut attempts: Vec<Attempt> = Vec::new();
    let mut prompt = builder.build_raw_prompt(instance)?;

    loop {
        let response = match generator.generate(&prompt, &options.params) {
            Ok(r) => r,
            Err(e) => return Err(generator_failure(e, attempts)),
        };
        let answer = if attempts.is_empty() || !options.with_thoughts {
            response.clone()
        } else {
            extract_answer(&response).to_string()
        };
        let verdict = checker.check(instance, &answer);
        let repeated = attempts.iter().any(|a| a.answer.trim() == answer.trim());
        attempts.push(Attempt {
            prompt: std::mem::take(&mut prompt),
            response,
            answer,
            verdict,
        });
        let last = attempts.last().expect("just pushed");

        let stop = if last.verdict.passed() {
            Some(StopReason::Clean)
        } else if attempts.len() >= options.max_steps {
            Some(StopReason::StepLimit)
        } else {
            let next = builder.build_refine_prompt(instance, &last.answer, last.verdict.errors(), options.with_thoughts)?;
            if next.chars().count() > options.max_prompt_chars {
                Some(StopReason::PromptOverflow)
            } else if repeated {
                Some(StopReason::RepeatedAnswer)
            } else {
                prompt = next;
                None
            }
        };
        if let Some(stop_reason) = stop {
            let final_response = attempts.last().expect("nonempty").answer.clone();
            return Ok(RefinementTrace {
                attempts,
                stop_reason,
                final_response,
            });
        }
    }
}
