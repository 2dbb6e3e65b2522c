use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{AgentError, TaskSpec, PLAN_PROMPT};
use crate::case::required_artifacts;
use crate::llm::{send_chat, Backend, ChatRequest, ChatResponse, Message};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandSpec {
    pub program: String,
    #[serde(default)]
    pub args: Vec<String>,
}

impl CommandSpec {
    pub fn new(program: &str) -> Self {
        CommandSpec { program: program.into(), args: Vec::new() }
    }

    pub fn display(&self) -> String {
        std::iter::once(self.program.as_str()).chain(self.args.iter().map(String::as_str)).collect::<Vec<_>>().join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvidedCopy {
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanSource {
    Llm,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionPlan {
    pub solver: String,
    pub files_to_generate: Vec<String>,
    pub commands: Vec<CommandSpec>,
    pub copies: Vec<ProvidedCopy>,
    pub source: PlanSource,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

fn has_file(task: &TaskSpec, path: &str) -> bool {
    task.provided_files.iter().any(|f| f.path == path) || task.baseline_case.as_ref().is_some_and(|c| c.contains(path))
}

fn copies(task: &TaskSpec) -> Vec<ProvidedCopy> {
    task.provided_files.iter().map(|f| ProvidedCopy { from: f.path.clone(), to: f.path.clone() }).collect()
}

/// Registry plan for `solver`: blockMesh unless a mesh is supplied,
/// setFields when the solver needs it, then the solver.
pub fn default_plan(task: &TaskSpec, solver: &str) -> ExecutionPlan {
    let reqs = required_artifacts(solver);
    let mut commands = Vec::new();
    if !has_file(task, "constant/polyMesh/boundary") {
        commands.push(CommandSpec::new("blockMesh"));
    }
    if reqs.required_files.contains("system/setFieldsDict") {
        commands.push(CommandSpec::new("setFields"));
    }
    commands.push(CommandSpec::new(solver));
    let mut files: Vec<String> = reqs.required_files.iter().filter(|f| !has_file(task, f)).cloned().collect();
    if commands[0].program == "blockMesh" && !has_file(task, "system/blockMeshDict") {
        files.push("system/blockMeshDict".into());
    }
    ExecutionPlan {
        solver: solver.into(),
        files_to_generate: files,
        commands,
        copies: copies(task),
        source: PlanSource::Fallback,
        warnings: Vec::new(),
    }
}

/// First `{` to last `}`; tolerates code fences and prose around the JSON.
fn json_object(text: &str) -> Option<Value> {
    let start = text.find('{')?;
    let end = text.rfind('}')?;
    (start < end).then(|| serde_json::from_str(&text[start..=end]).ok()).flatten()
}

fn parse_command(v: &Value) -> Option<CommandSpec> {
    match v {
        Value::String(s) => {
            let mut parts = s.split_whitespace();
            let program = parts.next()?.to_string();
            Some(CommandSpec { program, args: parts.map(str::to_string).collect() })
        }
        Value::Array(items) => {
            let words: Option<Vec<String>> = items.iter().map(|i| i.as_str().map(str::to_string)).collect();
            let mut words = words?;
            (!words.is_empty()).then(|| CommandSpec { program: words.remove(0), args: words })
        }
        Value::Object(o) => {
            let program = o.get("program")?.as_str()?.to_string();
            let args = match o.get("args") {
                Some(Value::Array(a)) => a.iter().filter_map(|x| x.as_str().map(str::to_string)).collect(),
                _ => Vec::new(),
            };
            Some(CommandSpec { program, args })
        }
        _ => None,
    }
}

/// Parses an LLM plan reply; `Err` carries the reason it was rejected.
fn parse_plan(text: &str, task: &TaskSpec) -> Result<ExecutionPlan, String> {
    let v = json_object(text).ok_or("reply is not a JSON object")?;
    let solver = v.get("solver").and_then(Value::as_str).ok_or("plan has no solver")?.to_string();
    let commands: Vec<CommandSpec> = match v.get("commands") {
        Some(Value::Array(items)) => items.iter().map(parse_command).collect::<Option<_>>().ok_or("bad command entry")?,
        _ => return Err("plan has no commands".into()),
    };
    if commands.last().map(|c| c.program.as_str()) != Some(solver.as_str()) {
        return Err(format!("solver {solver} is not the final command"));
    }
    if commands.iter().any(|c| c.program.contains(['/', '\\']) || c.program.is_empty()) {
        return Err("command programs must be bare names".into());
    }
    let files = match v.get("files") {
        Some(Value::Array(items)) => items.iter().filter_map(|i| i.as_str().map(str::to_string)).collect(),
        _ => Vec::new(),
    };
    Ok(ExecutionPlan {
        solver,
        files_to_generate: files,
        commands,
        copies: copies(task),
        source: PlanSource::Llm,
        warnings: Vec::new(),
    })
}

pub(super) fn plan_request(task: &TaskSpec, backend: &Backend, prompt: &str) -> ChatRequest {
    let mut user = format!("Task:\n{}\n", task.description);
    if let Some(h) = &task.solver_hint {
        user.push_str(&format!("\nSuggested solver: {h}\n"));
    }
    if !task.provided_files.is_empty() {
        let names: Vec<&str> = task.provided_files.iter().map(|f| f.path.as_str()).collect();
        user.push_str(&format!("\nProvided files: {}\n", names.join(", ")));
    }
    if let Some(base) = &task.baseline_case {
        let names: Vec<&str> = base.paths().collect();
        user.push_str(&format!("\nExisting case files: {}\n", names.join(", ")));
    }
    backend.request(vec![Message::system(prompt), Message::user(user)])
}

/// One planning call. An unusable reply falls back to the registry plan
/// for the task's solver hint, with a warning on the plan.
pub fn build_plan(task: &TaskSpec, backend: &Backend) -> Result<(ExecutionPlan, ChatRequest, ChatResponse), AgentError> {
    build_plan_with(task, backend, PLAN_PROMPT)
}

pub(super) fn build_plan_with(
    task: &TaskSpec,
    backend: &Backend,
    prompt: &str,
) -> Result<(ExecutionPlan, ChatRequest, ChatResponse), AgentError> {
    let req = plan_request(task, backend, prompt);
    let resp = send_chat(backend, &req)?;
    let plan = match parse_plan(&resp.content, task) {
        Ok(p) => p,
        Err(why) => {
            let hint = task.solver_hint.as_deref().ok_or(AgentError::NoPlanPossible)?;
            let mut p = default_plan(task, hint);
            p.warnings.push(format!("plan reply rejected ({why}); using the {hint} default plan"));
            p
        }
    };
    Ok((plan, req, resp))
}
