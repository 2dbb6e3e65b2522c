//! Benchmark suites: load tasks, run every (task, backend) trial, append
//! records to a JSONL log and render result tables.

mod report;
mod suite;

use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use report::{format_cost, format_tokens, load_records, persist_records, render_table, result_cell, TableFormat};
pub use suite::{load_suite, Expectations, Expected, Suite};

use crate::agent::{
    run_agent_with, AgentOptions, ErrorReport, ErrorSource, MockRunner, Outcome, RealRunner, Runner, TaskSpec, TrialRecord,
};
use crate::case::{check_task, CaseError};
use crate::llm::{default_pricing_table, make_backend, BackendConfig, LlmError, Pricing};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("schema error at line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("missing fixture {0}")]
    MissingFixture(PathBuf),
    #[error("bad bench configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Backend(#[from] LlmError),
    #[error(transparent)]
    Case(#[from] CaseError),
}

impl BenchError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        BenchError::Io { path: path.to_path_buf(), source }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunnerKind {
    #[default]
    Mock,
    Real,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchConfig {
    pub backends: Vec<BackendConfig>,
    #[serde(default)]
    pub runner: RunnerKind,
    #[serde(default = "one")]
    pub parallelism: usize,
    pub output_dir: PathBuf,
    #[serde(default = "one_u32")]
    pub repeat: u32,
    #[serde(default = "default_pricing_table")]
    pub pricing_table: Vec<Pricing>,
}

fn one() -> usize {
    1
}

fn one_u32() -> u32 {
    1
}

impl BenchConfig {
    pub fn new(backends: Vec<BackendConfig>, output_dir: impl Into<PathBuf>) -> Self {
        BenchConfig {
            backends,
            runner: RunnerKind::Mock,
            parallelism: 1,
            output_dir: output_dir.into(),
            repeat: 1,
            pricing_table: default_pricing_table(),
        }
    }
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' }).collect()
}

/// Directory names per backend; repeated models get a numeric suffix.
fn backend_labels(backends: &[BackendConfig]) -> Vec<String> {
    let mut labels: Vec<String> = Vec::new();
    for b in backends {
        let base = sanitize(&b.model);
        let mut label = base.clone();
        let mut n = 2;
        while labels.contains(&label) {
            label = format!("{base}-{n}");
            n += 1;
        }
        labels.push(label);
    }
    labels
}

fn check_config(cfg: &BenchConfig) -> Result<(), BenchError> {
    if cfg.backends.is_empty() {
        return Err(BenchError::Config("no backends configured".into()));
    }
    if cfg.parallelism == 0 {
        return Err(BenchError::Config("parallelism must be at least 1".into()));
    }
    if cfg.repeat == 0 {
        return Err(BenchError::Config("repeat must be at least 1".into()));
    }
    for b in &cfg.backends {
        match b.kind.as_str() {
            "http" => {
                make_backend(b, &cfg.pricing_table)?;
            }
            "scripted" => match &b.script_path {
                Some(p) if p.exists() => {}
                Some(p) => return Err(BenchError::Config(format!("script path {} does not exist", p.display()))),
                None => return Err(LlmError::InvalidConfig("scripted backend needs script_path".into()).into()),
            },
            other => return Err(LlmError::UnknownKind(other.into()).into()),
        }
    }
    Ok(())
}

struct Job {
    task: usize,
    backend: usize,
    rep: u32,
}

fn failed_record(task: &TaskSpec, model: &str, transcript: PathBuf, command: &str, excerpt: String) -> TrialRecord {
    TrialRecord {
        task_id: task.id.clone(),
        backend_model: model.into(),
        iterations_used: 0,
        outcome: Outcome::FailedUnrecoverable,
        usage: Default::default(),
        cost: Default::default(),
        final_error: Some(ErrorReport { source: ErrorSource::ExitCode, excerpt, command: command.into(), keyword: None }),
        transcript_path: transcript,
        case_name: task.case_name.clone(),
        files_provided: task.files_provided_label(),
        suite_index: 0,
        warnings: Vec::new(),
    }
}

fn run_trial(task: &TaskSpec, backend_cfg: &BackendConfig, cfg: &BenchConfig, workdir: &Path) -> TrialRecord {
    let transcript = workdir.join("transcript.jsonl");
    let backend = match make_backend(&backend_cfg.for_task(&task.id), &cfg.pricing_table) {
        Ok(b) => b,
        Err(e) => return failed_record(task, &backend_cfg.model, transcript, "llm", e.to_string()),
    };
    let runner: Box<dyn Runner> = match cfg.runner {
        RunnerKind::Mock => Box::new(MockRunner::new()),
        RunnerKind::Real => Box::new(RealRunner),
    };
    let run = match run_agent_with(task, &backend, runner.as_ref(), workdir, &AgentOptions::default()) {
        Ok(r) => r,
        Err(e) => return failed_record(task, &backend_cfg.model, transcript, "agent", e.to_string()),
    };
    let mut record = run.record;
    if record.outcome == Outcome::Success {
        match check_task(&run.final_case, task) {
            Ok(c) if c.passed => {}
            Ok(c) => {
                let reasons: Vec<String> = c
                    .failed_assertions
                    .iter()
                    .map(|f| format!("{}: {}", f.assertion.target, f.reason))
                    .collect();
                record.outcome = Outcome::FailedCheck;
                record.final_error = Some(ErrorReport {
                    source: ErrorSource::Validation,
                    excerpt: reasons.join("\n"),
                    command: "check".into(),
                    keyword: None,
                });
            }
            Err(CaseError::UncheckableTask) => record.warnings.push("task has no assertions; result unchecked".into()),
            Err(e) => {
                record.outcome = Outcome::FailedCheck;
                record.final_error = Some(ErrorReport {
                    source: ErrorSource::Validation,
                    excerpt: e.to_string(),
                    command: "check".into(),
                    keyword: None,
                });
            }
        }
    }
    record
}

/// Runs every task against every backend (`repeat` times each) on
/// `parallelism` worker threads. Trials write under
/// `<output_dir>/<suite>/<backend>/<task>/`; each finished record is
/// appended to `<output_dir>/<suite>/results.jsonl` as it arrives. The
/// returned records are in suite order. Only configuration and log I/O
/// errors are returned; a trial that breaks becomes a failed record.
pub fn run_suite(suite: &Suite, cfg: &BenchConfig) -> Result<Vec<TrialRecord>, BenchError> {
    check_config(cfg)?;
    let labels = backend_labels(&cfg.backends);
    let suite_dir = cfg.output_dir.join(sanitize(&suite.name));
    fs::create_dir_all(&suite_dir).map_err(|e| BenchError::io(&suite_dir, e))?;
    let results_path = suite_dir.join("results.jsonl");
    let mut results = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&results_path)
        .map_err(|e| BenchError::io(&results_path, e))?;

    let mut jobs = Vec::new();
    for task in 0..suite.tasks.len() {
        for backend in 0..cfg.backends.len() {
            for rep in 0..cfg.repeat {
                jobs.push(Job { task, backend, rep });
            }
        }
    }
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, TrialRecord)>();
    let mut done: Vec<(usize, TrialRecord)> = Vec::with_capacity(jobs.len());
    let mut write_err = None;

    std::thread::scope(|s| {
        for _ in 0..cfg.parallelism.min(jobs.len().max(1)) {
            let tx = tx.clone();
            let (jobs, next, labels, suite_dir) = (&jobs, &next, &labels, &suite_dir);
            s.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(job) = jobs.get(i) else { break };
                let task = &suite.tasks[job.task];
                let mut workdir = suite_dir.join(&labels[job.backend]).join(sanitize(&task.id));
                if cfg.repeat > 1 {
                    workdir = workdir.join(format!("rep_{}", job.rep + 1));
                }
                let mut record = run_trial(task, &cfg.backends[job.backend], cfg, &workdir);
                record.suite_index = job.task;
                if let Ok(rel) = record.transcript_path.strip_prefix(&cfg.output_dir) {
                    record.transcript_path = rel.to_path_buf();
                }
                if workdir.is_dir() {
                    if let Ok(json) = serde_json::to_string_pretty(&record) {
                        let _ = fs::write(workdir.join("record.json"), json);
                    }
                }
                if tx.send((i, record)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (i, record) in rx {
            if write_err.is_none() {
                let line = serde_json::to_string(&record).expect("records serialize");
                if let Err(e) = writeln!(results, "{line}").and_then(|_| results.flush()) {
                    write_err = Some(e);
                }
            }
            done.push((i, record));
        }
    });
    if let Some(e) = write_err {
        return Err(BenchError::io(&results_path, e));
    }
    done.sort_by_key(|(i, _)| *i);
    Ok(done.into_iter().map(|(_, r)| r).collect())
}
