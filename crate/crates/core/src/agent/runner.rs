use std::collections::VecDeque;
use std::io::Read;
use std::path::Path;
use std::process::{Command, Stdio};
use std::sync::{LazyLock, Mutex};
use std::time::{Duration, Instant};

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{AgentError, CommandSpec, ErrorReport, ErrorSource, ExecutionPlan, IterationLimits};
use crate::case::{load_case, required_artifacts, validate_case, CaseTree, Severity, Violation};
use crate::foam::{Dict, FoamFile, FoamList, FoamValue};

const MAX_EXCERPT_LINES: usize = 40;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandResult {
    pub exit_code: i32,
    pub log: String,
    pub timed_out: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "error")]
pub enum RunOutcome {
    Success,
    Failure(ErrorReport),
}

/// Runs one command with the case directory as working directory.
pub trait Runner: Send + Sync {
    fn run(&self, case_dir: &Path, cmd: &CommandSpec, timeout: Duration) -> Result<CommandResult, AgentError>;
}

/// Runs the plan's commands in order, writing `log.<program>` for each and
/// stopping at the first failure.
pub fn execute_commands(
    case_dir: &Path,
    plan: &ExecutionPlan,
    runner: &dyn Runner,
    limits: &IterationLimits,
) -> Result<RunOutcome, AgentError> {
    let timeout = Duration::from_secs(limits.per_run_wall_seconds.max(1));
    for cmd in &plan.commands {
        let result = runner.run(case_dir, cmd, timeout)?;
        std::fs::write(case_dir.join(format!("log.{}", cmd.program)), &result.log)?;
        if result.timed_out {
            let tail = last_lines(&result.log, MAX_EXCERPT_LINES);
            let excerpt = if tail.trim().is_empty() {
                format!("{} exceeded {} s", cmd.program, timeout.as_secs())
            } else {
                tail
            };
            return Ok(RunOutcome::Failure(ErrorReport {
                source: ErrorSource::Timeout,
                excerpt,
                command: cmd.display(),
                keyword: None,
            }));
        }
        if let Some(mut report) = extract_error(&result.log, result.exit_code) {
            report.command = cmd.display();
            return Ok(RunOutcome::Failure(report));
        }
    }
    Ok(RunOutcome::Success)
}

fn last_lines(text: &str, n: usize) -> String {
    let lines: Vec<&str> = text.lines().collect();
    lines[lines.len().saturating_sub(n)..].join("\n")
}

static KEYWORD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"keyword\s+([A-Za-z_][\w.:<>]*)").unwrap());
static NOT_FOUND: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#"['"]([^'"\s]+)['"]\s+not found"#).unwrap());
static NO_FILE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#"cannot find file\s+"([^"]+)""#).unwrap());
static UNKNOWN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"Unknown \w+ type (\w+)").unwrap());

/// Token the error is about: `keyword X`, `'X' not found`, the basename
/// of a missing file, or an unknown model name.
pub(crate) fn error_keyword(text: &str) -> Option<String> {
    if let Some(c) = KEYWORD.captures(text) {
        return Some(c[1].to_string());
    }
    if let Some(c) = NOT_FOUND.captures(text) {
        return Some(c[1].to_string());
    }
    if let Some(c) = NO_FILE.captures(text) {
        return c[1].trim_end_matches('/').rsplit('/').next().map(str::to_string);
    }
    UNKNOWN.captures(text).map(|c| c[1].to_string())
}

/// First `FOAM FATAL (IO) ERROR` block of a log, or the log tail for a
/// nonzero exit without that marker.
pub fn extract_error(log_text: &str, exit_code: i32) -> Option<ErrorReport> {
    let lines: Vec<&str> = log_text.lines().collect();
    if let Some(start) = lines.iter().position(|l| l.contains("FOAM FATAL ERROR") || l.contains("FOAM FATAL IO ERROR")) {
        let mut excerpt = Vec::new();
        for l in lines[start..].iter().take(MAX_EXCERPT_LINES) {
            excerpt.push(*l);
            if l.contains("FOAM exiting") || l.contains("FOAM aborting") {
                break;
            }
        }
        let excerpt = excerpt.join("\n");
        return Some(ErrorReport {
            source: ErrorSource::FatalPattern,
            keyword: error_keyword(&excerpt),
            excerpt,
            command: String::new(),
        });
    }
    if exit_code == 0 {
        return None;
    }
    let mut excerpt = last_lines(log_text, MAX_EXCERPT_LINES);
    if excerpt.trim().is_empty() {
        excerpt = format!("exit code {exit_code} with no output");
    }
    Some(ErrorReport { source: ErrorSource::ExitCode, keyword: error_keyword(&excerpt), excerpt, command: String::new() })
}

/// Spawns real OpenFOAM executables found on `PATH`.
#[derive(Debug, Default, Clone)]
pub struct RealRunner;

fn on_path(program: &str) -> bool {
    let Some(path) = std::env::var_os("PATH") else { return false };
    std::env::split_paths(&path).any(|dir| dir.join(program).is_file())
}

impl Runner for RealRunner {
    fn run(&self, case_dir: &Path, cmd: &CommandSpec, timeout: Duration) -> Result<CommandResult, AgentError> {
        if !on_path(&cmd.program) {
            return Err(AgentError::RunnerUnavailable(cmd.program.clone()));
        }
        let mut child = Command::new(&cmd.program)
            .args(&cmd.args)
            .current_dir(case_dir)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()?;
        let mut out = child.stdout.take().unwrap();
        let mut err = child.stderr.take().unwrap();
        let out_t = std::thread::spawn(move || {
            let mut s = Vec::new();
            let _ = out.read_to_end(&mut s);
            s
        });
        let err_t = std::thread::spawn(move || {
            let mut s = Vec::new();
            let _ = err.read_to_end(&mut s);
            s
        });
        let started = Instant::now();
        let mut timed_out = false;
        let status = loop {
            if let Some(s) = child.try_wait()? {
                break s;
            }
            if started.elapsed() > timeout {
                timed_out = true;
                let _ = child.kill();
                break child.wait()?;
            }
            std::thread::sleep(Duration::from_millis(50));
        };
        let mut log = String::from_utf8_lossy(&out_t.join().unwrap_or_default()).into_owned();
        log.push_str(&String::from_utf8_lossy(&err_t.join().unwrap_or_default()));
        Ok(CommandResult { exit_code: status.code().unwrap_or(-1), log, timed_out })
    }
}

const UTILITIES: &[&str] = &[
    "blockMesh",
    "setFields",
    "snappyHexMesh",
    "surfaceFeatureExtract",
    "surfaceFeatures",
    "decomposePar",
    "reconstructPar",
    "checkMesh",
    "extrudeMesh",
    "topoSet",
    "potentialFoam",
];

/// Offline stand-in for OpenFOAM. Mesh utilities check their dictionary
/// and `blockMesh` writes `constant/polyMesh/boundary`; solver commands
/// consume the next scripted verdict, then run [`validate_case`] on the
/// directory.
#[derive(Debug, Default)]
pub struct MockRunner {
    schedule: Mutex<VecDeque<bool>>,
}

impl MockRunner {
    pub fn new() -> Self {
        Self::default()
    }

    /// `true` lets the solver step proceed to validation, `false` fails it.
    pub fn with_schedule(schedule: Vec<bool>) -> Self {
        MockRunner { schedule: Mutex::new(schedule.into()) }
    }
}

fn fatal_log(program: &str, kind: &str, message: &str, file: &str) -> CommandResult {
    let log = format!(
        "/*---------------------------------------------------------------------------*\\\n\
         Application : {program}\n\
         \\*---------------------------------------------------------------------------*/\n\n\
         --> FOAM FATAL {kind}: (openfoam-2406)\n{message}\n\n\
         file: {file}\n\n    From {program} (mock runner)\n\nFOAM exiting\n\n"
    );
    CommandResult { exit_code: 1, log, timed_out: false }
}

fn ok_log(program: &str) -> CommandResult {
    CommandResult { exit_code: 0, log: format!("Application : {program}\n\nEnd\n\n"), timed_out: false }
}

fn violation_log(program: &str, v: &Violation) -> CommandResult {
    let kind = if v.message.starts_with("keyword") || v.rule_id == "P1" { "IO ERROR" } else { "ERROR" };
    fatal_log(program, kind, &format!("[{}] {}", v.rule_id, v.message), &v.path)
}

/// `constant/polyMesh/boundary` listing the patches of a blockMeshDict.
fn boundary_from_block_mesh(bm: &FoamFile) -> FoamFile {
    let mut items = Vec::new();
    let mut push = |name: &str, kind: &str| {
        let mut d = Dict::new();
        d.insert("type", FoamValue::atom(kind));
        if kind == "wall" {
            d.insert("inGroups", FoamValue::List(FoamList { size_prefix: true, items: vec![FoamValue::atom("wall")] }));
        }
        items.push(FoamValue::Keyed { name: name.into(), dict: d });
    };
    if let Some(FoamValue::List(l)) = bm.body.get("boundary").or_else(|| bm.body.get("patches")) {
        for item in &l.items {
            if let FoamValue::Keyed { name, dict } = item {
                push(name, dict.word("type").unwrap_or("patch"));
            }
        }
    }
    if let Some(FoamValue::Dict(d)) = bm.body.get("defaultPatch") {
        push(d.word("name").unwrap_or("defaultFaces"), d.word("type").unwrap_or("empty"));
    }
    let mut f = FoamFile::new("polyBoundaryMesh", "boundary");
    f.header.insert("location", FoamValue::atom("\"constant/polyMesh\""));
    f.body.entries.push(crate::foam::DictEntry::Bare(FoamValue::List(FoamList { size_prefix: true, items })));
    f
}

fn needs_dict(case: &CaseTree, program: &str, path: &str) -> Option<CommandResult> {
    match case.get(path) {
        Some(e) if e.as_foam().is_some() => None,
        Some(_) => Some(fatal_log(program, "IO ERROR", &format!("cannot parse dictionary \"{path}\""), path)),
        None => Some(fatal_log(program, "IO ERROR", &format!("cannot find file \"{path}\""), path)),
    }
}

impl Runner for MockRunner {
    fn run(&self, case_dir: &Path, cmd: &CommandSpec, _timeout: Duration) -> Result<CommandResult, AgentError> {
        let case = load_case(case_dir)?;
        let program = cmd.program.as_str();
        match program {
            "blockMesh" => {
                if let Some(fail) = needs_dict(&case, program, "system/blockMeshDict") {
                    return Ok(fail);
                }
                let boundary = boundary_from_block_mesh(case.foam("system/blockMeshDict").unwrap());
                let dir = case_dir.join("constant/polyMesh");
                std::fs::create_dir_all(&dir)?;
                let text = crate::foam::serialize_foam_file(&boundary, Default::default());
                std::fs::write(dir.join("boundary"), text)?;
                Ok(ok_log(program))
            }
            "setFields" => Ok(needs_dict(&case, program, "system/setFieldsDict").unwrap_or_else(|| ok_log(program))),
            p if UTILITIES.contains(&p) => Ok(ok_log(program)),
            _ => {
                if self.schedule.lock().unwrap().pop_front() == Some(false) {
                    return Ok(fatal_log(program, "ERROR", "scripted failure from the mock schedule", "-"));
                }
                let violations = validate_case(&case, &required_artifacts(program));
                let fatal = violations
                    .iter()
                    .find(|v| v.severity == Severity::Fatal || v.rule_id == "P1");
                Ok(match fatal {
                    Some(v) => violation_log(program, v),
                    None => ok_log(program),
                })
            }
        }
    }
}
