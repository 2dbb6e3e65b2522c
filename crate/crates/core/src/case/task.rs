use serde::{Deserialize, Serialize};

use super::{CaseEntry, CaseError, CaseTree};
use crate::agent::TaskSpec;
use crate::foam::{get_entry, parse_value, FoamValue};

/// Predicate applied to the value at `target`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Check {
    Equals { value: String },
    /// Last token of the value equals the operand (`uniform 320` ends with `320`).
    EndsWith { value: String },
    OneOf { values: Vec<String> },
    /// The operand appears anywhere inside the value.
    Contains { value: String },
    HasAnyKey { keys: Vec<String> },
    InRange { min: f64, max: f64 },
    Exists,
}

/// `target` is `<case file>:<keyword path>`, e.g.
/// `0/U:boundaryField/movingWall/value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub target: String,
    #[serde(flatten)]
    pub check: Check,
}

impl Assertion {
    pub fn new(target: &str, check: Check) -> Self {
        Assertion { target: target.to_string(), check }
    }

    pub fn split_target(&self) -> Result<(&str, &str), CaseError> {
        self.target
            .split_once(':')
            .filter(|(f, p)| !f.is_empty() && !p.is_empty())
            .ok_or_else(|| CaseError::BadTarget(self.target.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedAssertion {
    pub assertion: Assertion,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub passed: bool,
    pub failed_assertions: Vec<FailedAssertion>,
}

pub fn check_task(case: &CaseTree, task: &TaskSpec) -> Result<CheckResult, CaseError> {
    check_assertions(case, &task.assertions)
}

pub fn check_assertions(case: &CaseTree, assertions: &[Assertion]) -> Result<CheckResult, CaseError> {
    if assertions.is_empty() {
        return Err(CaseError::UncheckableTask);
    }
    let mut failed = Vec::new();
    for a in assertions {
        if let Err(reason) = evaluate(case, a)? {
            failed.push(FailedAssertion { assertion: a.clone(), reason });
        }
    }
    Ok(CheckResult { passed: failed.is_empty(), failed_assertions: failed })
}

fn same(actual: &FoamValue, expected: &FoamValue) -> bool {
    actual == expected || matches!((actual.as_word(), expected.as_word()), (Some(a), Some(b)) if a == b)
}

fn operand(text: &str) -> FoamValue {
    parse_value(text).unwrap_or_else(|_| FoamValue::atom(text))
}

/// Outer error: malformed assertion. Inner error: the reason it failed.
fn evaluate(case: &CaseTree, a: &Assertion) -> Result<Result<(), String>, CaseError> {
    let (file, keypath) = a.split_target()?;
    let foam = match case.get(file) {
        None => return Ok(Err(format!("{file} does not exist"))),
        Some(CaseEntry::Blob(_)) => return Ok(Err(format!("{file} is not a parsed dictionary"))),
        Some(CaseEntry::Parsed(f)) => f,
    };
    let actual = match get_entry(foam, keypath) {
        Ok(v) => v,
        Err(e) => return Ok(Err(e.to_string())),
    };
    let ok = match &a.check {
        Check::Exists => true,
        Check::Equals { value } => same(actual, &operand(value)),
        Check::EndsWith { value } => same(actual.last_token(), &operand(value)),
        Check::OneOf { values } => values.iter().any(|v| same(actual, &operand(v))),
        Check::Contains { value } => {
            let needle = operand(value);
            actual.contains(&needle) || same(actual, &needle)
        }
        Check::HasAnyKey { keys } => actual.as_dict().is_some_and(|d| keys.iter().any(|k| d.get(k).is_some())),
        Check::InRange { min, max } => actual.last_token().as_f64().is_some_and(|x| x >= *min && x <= *max),
    };
    Ok(if ok { Ok(()) } else { Err(format!("{keypath} is {actual}")) })
}
