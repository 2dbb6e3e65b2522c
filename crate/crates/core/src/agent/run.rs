use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::json;

use super::plan::build_plan_with;
use super::retry::{compose, RetryContext};
use super::{
    execute_commands, interpret_files, AgentError, ErrorReport, ErrorSource, ExecutionPlan, Outcome, RunOutcome, Runner,
    TaskSpec, TrialRecord, FILES_PROMPT, FORMAT_REMINDER, PLAN_PROMPT,
};
use crate::case::{required_artifacts, validate_case, write_case, CaseTree, Severity};
use crate::llm::{compute_cost, send_chat, Backend, ChatRequest, ChatResponse, UsageTotals};

/// Source of reference text for prompts. The default returns nothing.
pub trait Retriever: Send + Sync {
    fn retrieve(&self, task: &TaskSpec) -> Vec<String>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct NoRetrieval;

impl Retriever for NoRetrieval {
    fn retrieve(&self, _task: &TaskSpec) -> Vec<String> {
        Vec::new()
    }
}

pub struct AgentOptions<'a> {
    pub files_prompt: String,
    pub plan_prompt: String,
    pub retriever: &'a dyn Retriever,
}

impl Default for AgentOptions<'_> {
    fn default() -> Self {
        AgentOptions { files_prompt: FILES_PROMPT.into(), plan_prompt: PLAN_PROMPT.into(), retriever: &NoRetrieval }
    }
}

/// A finished trial with the case of its last iteration.
#[derive(Debug, Clone)]
pub struct TrialRun {
    pub record: TrialRecord,
    pub final_case: CaseTree,
    pub plan: Option<ExecutionPlan>,
}

struct Transcript {
    out: BufWriter<File>,
}

impl Transcript {
    fn exchange(&mut self, kind: &str, iteration: u32, req: &ChatRequest, resp: &ChatResponse) -> std::io::Result<()> {
        self.line(json!({
            "kind": kind,
            "iteration": iteration,
            "request": req,
            "response": resp,
            "usage": resp.usage,
            "timestamp_ms": now_ms(),
        }))
    }

    fn event(&mut self, kind: &str, iteration: u32, detail: serde_json::Value) -> std::io::Result<()> {
        self.line(json!({ "kind": kind, "iteration": iteration, "detail": detail, "timestamp_ms": now_ms() }))
    }

    fn line(&mut self, v: serde_json::Value) -> std::io::Result<()> {
        serde_json::to_writer(&mut self.out, &v)?;
        self.out.write_all(b"\n")?;
        self.out.flush()
    }
}

fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

fn validation_report(case: &CaseTree, solver: &str) -> Option<ErrorReport> {
    let fatal: Vec<String> = validate_case(case, &required_artifacts(solver))
        .into_iter()
        .filter(|v| v.severity == Severity::Fatal)
        .map(|v| format!("[{}] {}: {}", v.rule_id, v.path, v.message))
        .collect();
    if fatal.is_empty() {
        return None;
    }
    let excerpt = fatal.iter().take(40).cloned().collect::<Vec<_>>().join("\n");
    Some(ErrorReport {
        source: ErrorSource::Validation,
        keyword: super::runner::error_keyword(&excerpt),
        excerpt,
        command: "validate".into(),
    })
}

fn starting_case(task: &TaskSpec, warnings: &mut Vec<String>) -> Result<CaseTree, AgentError> {
    let mut case = task.baseline_case.clone().unwrap_or_else(|| CaseTree::new(&task.id));
    for f in &task.provided_files {
        if case.contains(&f.path) {
            warnings.push(format!("provided {} replaces the baseline file", f.path));
        }
        case.insert_bytes(&f.path, f.bytes.clone())?;
    }
    Ok(case)
}

/// Runs one trial with the default prompts and no retrieval.
pub fn run_agent(task: &TaskSpec, backend: &Backend, runner: &dyn Runner, workdir: &Path) -> Result<TrialRecord, AgentError> {
    Ok(run_agent_with(task, backend, runner, workdir, &AgentOptions::default())?.record)
}

/// Plan once, then per iteration: request files, merge them onto the
/// previous case, validate, write `iter_<k>/` and run the plan. Backend
/// failures end the trial as `failed_unrecoverable`; filesystem errors are
/// returned.
pub fn run_agent_with(
    task: &TaskSpec,
    backend: &Backend,
    runner: &dyn Runner,
    workdir: &Path,
    opts: &AgentOptions<'_>,
) -> Result<TrialRun, AgentError> {
    fs::create_dir_all(workdir)?;
    let transcript_path = workdir.join("transcript.jsonl");
    let mut log = Transcript { out: BufWriter::new(File::create(&transcript_path)?) };
    let mut usage = UsageTotals::default();
    let mut warnings = Vec::new();
    let mut case = starting_case(task, &mut warnings)?;
    let references = opts.retriever.retrieve(task);

    let mut record = TrialRecord {
        task_id: task.id.clone(),
        backend_model: backend.name.clone(),
        iterations_used: 0,
        outcome: Outcome::FailedUnrecoverable,
        usage,
        cost: Default::default(),
        final_error: None,
        transcript_path: transcript_path.clone(),
        case_name: task.case_name.clone(),
        files_provided: task.files_provided_label(),
        suite_index: 0,
        warnings: Vec::new(),
    };
    let unrecoverable = |e: &AgentError| ErrorReport {
        source: ErrorSource::ExitCode,
        excerpt: e.to_string(),
        command: "llm".into(),
        keyword: None,
    };

    let plan = match build_plan_with(task, backend, &opts.plan_prompt) {
        Ok((plan, req, resp)) => {
            usage += resp.usage;
            log.exchange("plan", 0, &req, &resp)?;
            warnings.extend(plan.warnings.iter().cloned());
            plan
        }
        Err(e) => {
            if let AgentError::Backend(_) | AgentError::NoPlanPossible = e {
                record.final_error = Some(unrecoverable(&e));
                record.warnings = warnings;
                return finish(record, usage, backend, workdir, case, None);
            }
            return Err(e);
        }
    };

    let max = task.limits.max_iterations.max(1);
    let mut last_error: Option<ErrorReport> = None;
    let mut reminder = false;
    for k in 1..=max {
        record.iterations_used = k;
        let ctx = RetryContext {
            system_prompt: &opts.files_prompt,
            plan: Some(&plan),
            references: &references,
            reminder: reminder.then_some(FORMAT_REMINDER),
        };
        let req = compose(task, &case, last_error.as_ref(), &backend.pricing, &task.limits, ctx);
        let sent = req.and_then(|mut req| {
            req.model = backend.name.clone();
            req.temperature = backend.temperature;
            let resp = send_chat(backend, &req)?;
            Ok((req, resp))
        });
        let (req, resp) = match sent {
            Ok(x) => x,
            Err(e @ (AgentError::Backend(_) | AgentError::BudgetImpossible { .. })) => {
                record.final_error = Some(unrecoverable(&e));
                record.outcome = Outcome::FailedUnrecoverable;
                record.warnings = warnings;
                return finish(record, usage, backend, workdir, case, Some(plan));
            }
            Err(e) => return Err(e),
        };
        usage += resp.usage;
        log.exchange("files", k, &req, &resp)?;

        let iter_dir = workdir.join(format!("iter_{k}"));
        let files = match interpret_files(&resp.content) {
            Ok(f) => f,
            Err(_) => {
                reminder = true;
                let err = ErrorReport {
                    source: ErrorSource::Validation,
                    excerpt: "the reply contained no FILE blocks".into(),
                    command: "interpret".into(),
                    keyword: None,
                };
                write_case(&case, &iter_dir)?;
                log.event("run", k, serde_json::to_value(&err).unwrap_or_default())?;
                last_error = Some(err);
                continue;
            }
        };
        reminder = false;
        for (path, content) in files {
            if task.provided_files.iter().any(|f| f.path == path) {
                warnings.push(format!("iteration {k}: generated {path} overrides the provided file"));
            }
            case.insert_bytes(&path, content.into_bytes())?;
        }

        if let Some(err) = validation_report(&case, &plan.solver) {
            write_case(&case, &iter_dir)?;
            log.event("run", k, serde_json::to_value(&err).unwrap_or_default())?;
            last_error = Some(err);
            continue;
        }
        write_case(&case, &iter_dir)?;
        let outcome = match execute_commands(&iter_dir, &plan, runner, &task.limits) {
            Ok(o) => o,
            Err(e @ AgentError::RunnerUnavailable(_)) => {
                record.final_error = Some(ErrorReport {
                    source: ErrorSource::ExitCode,
                    excerpt: e.to_string(),
                    command: "runner".into(),
                    keyword: None,
                });
                record.outcome = Outcome::FailedUnrecoverable;
                record.warnings = warnings;
                return finish(record, usage, backend, workdir, case, Some(plan));
            }
            Err(e) => return Err(e),
        };
        log.event("run", k, serde_json::to_value(&outcome).unwrap_or_default())?;
        match outcome {
            RunOutcome::Success => {
                record.outcome = Outcome::Success;
                record.final_error = None;
                record.warnings = warnings;
                return finish(record, usage, backend, workdir, case, Some(plan));
            }
            RunOutcome::Failure(err) => last_error = Some(err),
        }
    }
    record.outcome = Outcome::FailedMaxIterations;
    record.final_error = last_error;
    record.warnings = warnings;
    finish(record, usage, backend, workdir, case, Some(plan))
}

fn finish(
    mut record: TrialRecord,
    usage: UsageTotals,
    backend: &Backend,
    workdir: &Path,
    case: CaseTree,
    plan: Option<ExecutionPlan>,
) -> Result<TrialRun, AgentError> {
    record.usage = usage;
    record.cost = compute_cost(&usage, &backend.pricing);
    if backend.pricing.unpriced {
        record.warnings.push(format!("model {} has no pricing row; cost reported as 0", backend.name));
    }
    let json = serde_json::to_string_pretty(&record).map_err(|e| AgentError::Io(e.into()))?;
    fs::write(workdir.join("record.json"), json)?;
    Ok(TrialRun { record, final_case: case, plan })
}
