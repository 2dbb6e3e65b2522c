//! The generate → validate → run → repair loop.

mod interpret;
mod plan;
mod retry;
mod run;
mod runner;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::case::{Assertion, CaseError, CaseTree};
use crate::llm::{LlmError, MicroUsd, UsageTotals};

pub use interpret::interpret_files;
pub use plan::{build_plan, default_plan, CommandSpec, ExecutionPlan, PlanSource, ProvidedCopy};
pub use retry::{compose_retry, implicated_file, RetryContext};
pub use run::{run_agent, run_agent_with, AgentOptions, NoRetrieval, Retriever, TrialRun};
pub use runner::{execute_commands, extract_error, CommandResult, MockRunner, RealRunner, RunOutcome, Runner};

pub const FILES_PROMPT: &str = include_str!("../../assets/prompts/files_system.v1.md");
pub const PLAN_PROMPT: &str = include_str!("../../assets/prompts/plan_system.v1.md");
pub const FORMAT_REMINDER: &str = include_str!("../../assets/prompts/format_reminder.v1.md");

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Backend(#[from] LlmError),
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error("no plan possible: the plan reply was unusable and the task has no solver hint")]
    NoPlanPossible,
    #[error("response contains no FILE blocks")]
    NoFilesFound,
    #[error("'{0}' is not available on PATH")]
    RunnerUnavailable(String),
    #[error("even the minimal request (~{needed} tokens) exceeds the budget of {budget}")]
    BudgetImpossible { needed: u64, budget: u64 },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Generate,
    Modify,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IterationLimits {
    pub max_iterations: u32,
    pub per_run_wall_seconds: u64,
    pub token_budget_fraction: f64,
}

impl Default for IterationLimits {
    fn default() -> Self {
        IterationLimits { max_iterations: 20, per_run_wall_seconds: 3600, token_budget_fraction: 0.8 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProvidedFile {
    /// Case-relative destination.
    pub path: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct TaskSpec {
    pub id: String,
    pub kind: TaskKind,
    pub description: String,
    pub baseline_case: Option<CaseTree>,
    pub provided_files: Vec<ProvidedFile>,
    pub assertions: Vec<Assertion>,
    pub solver_hint: Option<String>,
    pub limits: IterationLimits,
    /// Display name for reports, e.g. `Bubble`.
    pub case_name: String,
}

impl TaskSpec {
    pub fn generate(id: &str, description: &str) -> Self {
        TaskSpec {
            id: id.into(),
            kind: TaskKind::Generate,
            description: description.into(),
            baseline_case: None,
            provided_files: Vec::new(),
            assertions: Vec::new(),
            solver_hint: None,
            limits: IterationLimits::default(),
            case_name: id.into(),
        }
    }

    pub fn modify(id: &str, description: &str, baseline: CaseTree) -> Self {
        TaskSpec { kind: TaskKind::Modify, baseline_case: Some(baseline), ..TaskSpec::generate(id, description) }
    }

    /// Basenames of the provided files, comma separated; `-` when none.
    pub fn files_provided_label(&self) -> String {
        let mut names: Vec<&str> = Vec::new();
        for f in &self.provided_files {
            let name = if f.path.starts_with("constant/polyMesh/") {
                "polyMesh"
            } else {
                f.path.rsplit('/').next().unwrap_or(&f.path)
            };
            if !names.contains(&name) {
                names.push(name);
            }
        }
        if names.is_empty() {
            "-".into()
        } else {
            names.join(", ")
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorSource {
    ExitCode,
    FatalPattern,
    Timeout,
    Validation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub source: ErrorSource,
    pub excerpt: String,
    pub command: String,
    pub keyword: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    FailedMaxIterations,
    FailedUnrecoverable,
    /// The loop finished but the task's assertions do not hold.
    FailedCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub task_id: String,
    pub backend_model: String,
    pub iterations_used: u32,
    pub outcome: Outcome,
    pub usage: UsageTotals,
    pub cost: MicroUsd,
    pub final_error: Option<ErrorReport>,
    pub transcript_path: PathBuf,
    #[serde(default)]
    pub case_name: String,
    #[serde(default)]
    pub files_provided: String,
    #[serde(default)]
    pub suite_index: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn provided_label() {
        let mut t = TaskSpec::generate("airfoil", "x");
        assert_eq!(t.files_provided_label(), "-");
        for p in ["constant/polyMesh/boundary", "constant/polyMesh/points", "system/setFieldsDict"] {
            t.provided_files.push(ProvidedFile { path: p.into(), bytes: vec![] });
        }
        assert_eq!(t.files_provided_label(), "polyMesh, setFieldsDict");
    }

    #[test]
    fn prompts_embedded() {
        assert!(FILES_PROMPT.contains("FILE: <path>"));
        assert!(PLAN_PROMPT.contains("\"commands\""));
    }
}
