use super::{payload_or_mismatch, Checker};
use crate::model::{
    ErrorCode, FormatError, Period, Recurrence, TaskInstance, TaskKind, Timestamp, TimestampError, Verdict,
};

/// A parsed FTime answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeExpression {
    /// `YYYYMMDDTHHMMSS`
    Single(Timestamp),
    /// `Rn/YYYYMMDDTHHMMSS/PnYnMnDTnHnMnS`
    Recurring(Recurrence),
}

impl std::fmt::Display for TimeExpression {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TimeExpression::Single(t) => t.fmt(f),
            TimeExpression::Recurring(r) => r.fmt(f),
        }
    }
}

const SINGLE_FORMAT: &str = "YYYYMMDDTHHMMSS";
const RECURRING_FORMAT: &str = "Rn/YYYYMMDDTHHMMSS/PnYnMnDTnHnMnS";

fn grammar(found: &str) -> FormatError {
    FormatError::new(
        ErrorCode::GrammarMismatch,
        format!("\"{found}\" does not follow the {SINGLE_FORMAT} or {RECURRING_FORMAT} format"),
    )
}

fn timestamp(s: &str, whole: &str) -> Result<Timestamp, FormatError> {
    Timestamp::parse_compact(s).map_err(|e| match e {
        TimestampError::Grammar => grammar(whole),
        TimestampError::IllegalDate(why) => {
            FormatError::new(ErrorCode::IllegalDate, format!("\"{s}\" is not a legal date: {why}"))
        }
    })
}

/// Splits `s` into a run of ASCII digits and the remainder.
fn digits(s: &str) -> Option<(&str, &str)> {
    let n = s.bytes().take_while(u8::is_ascii_digit).count();
    (n > 0).then(|| s.split_at(n))
}

fn period(s: &str) -> Option<Period> {
    let mut rest = s.strip_prefix('P')?;
    let mut fields = [0u64; 6];
    for (i, unit) in ['Y', 'M', 'D', 'H', 'M', 'S'].into_iter().enumerate() {
        if i == 3 {
            rest = rest.strip_prefix('T')?;
        }
        let (num, tail) = digits(rest)?;
        rest = tail.strip_prefix(unit)?;
        fields[i] = num.parse().ok()?;
    }
    rest.is_empty().then(|| Period {
        years: fields[0],
        months: fields[1],
        days: fields[2],
        hours: fields[3],
        minutes: fields[4],
        seconds: fields[5],
    })
}

/// Parses either accepted FTime form, classifying failures by error code.
pub fn parse_time_expression(s: &str) -> Result<TimeExpression, FormatError> {
    let Some(body) = s.strip_prefix('R') else {
        return timestamp(s, s).map(TimeExpression::Single);
    };
    let mut parts = body.split('/');
    let (Some(count), Some(start), Some(per), None) = (parts.next(), parts.next(), parts.next(), parts.next())
    else {
        return Err(grammar(s));
    };
    let unsigned = count.strip_prefix('-').unwrap_or(count);
    if unsigned.is_empty() || !unsigned.bytes().all(|b| b.is_ascii_digit()) {
        return Err(grammar(s));
    }
    let period = period(per).ok_or_else(|| grammar(s))?;
    let start = timestamp(start, s)?;
    let illegal = |why: String| FormatError::new(ErrorCode::IllegalRecurrence, why);
    let count: i64 = count
        .parse()
        .map_err(|_| illegal(format!("the repetition count {count} is out of range")))?;
    Recurrence::new(count, start, period)
        .map(TimeExpression::Recurring)
        .map_err(|_| {
            if period.is_zero() {
                illegal("the recurrence period must not be zero".into())
            } else {
                illegal(format!(
                    "the repetition count R{count} is illegal; use R-1 for an unbounded recurrence or a count of at least 1"
                ))
            }
        })
}

/// Accepts one of the two FTime grammars with a legal calendar date.
/// Surrounding whitespace is ignored.
pub fn check_ftime(instance: &TaskInstance, response: &str) -> Verdict {
    let _ = payload_or_mismatch!(instance, FTime, TaskKind::FTime);
    match parse_time_expression(response.trim()) {
        Ok(_) => Verdict::pass(),
        Err(e) => Verdict::from_errors(vec![e]),
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FTimeChecker;

impl Checker for FTimeChecker {
    fn task(&self) -> TaskKind {
        TaskKind::FTime
    }

    fn check(&self, instance: &TaskInstance, response: &str) -> Verdict {
        check_ftime(instance, response)
    }
}
