use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::agent::{IterationLimits, ProvidedFile, TaskKind, TaskSpec};
use crate::case::{load_case, normalize_path, Assertion};

/// A reported observation for one model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expected {
    Pass,
    Fail,
    #[default]
    NotTested,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Expectations {
    #[serde(default)]
    pub expected_4o: Expected,
    #[serde(default)]
    pub expected_o1: Expected,
    #[serde(default)]
    pub expected_qwen: Expected,
    #[serde(default)]
    pub expected_ds: Expected,
    /// Free-form reported numbers (iterations, tokens, cost, result).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reported: Option<serde_json::Value>,
}

#[derive(Debug, Clone)]
pub struct Suite {
    pub name: String,
    pub fixtures_root: PathBuf,
    pub tasks: Vec<TaskSpec>,
    /// Keyed by task id.
    pub expectations: BTreeMap<String, Expectations>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProvidedRef {
    src: String,
    dest: String,
}

#[derive(Debug, Deserialize)]
struct TaskEntry {
    id: String,
    kind: TaskKind,
    description: String,
    #[serde(default)]
    case_name: Option<String>,
    #[serde(default)]
    baseline: Option<String>,
    #[serde(default)]
    provided_files: Vec<ProvidedRef>,
    #[serde(default)]
    assertions: Vec<Assertion>,
    #[serde(default)]
    solver_hint: Option<String>,
    #[serde(default)]
    limits: Option<IterationLimits>,
    #[serde(flatten)]
    expectations: Expectations,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SuiteFile {
    name: String,
    #[serde(default)]
    fixtures_root: Option<String>,
    tasks: Vec<TaskEntry>,
}

fn schema(line: usize, message: impl Into<String>) -> BenchError {
    BenchError::Schema { line, message: message.into() }
}

fn provided(root: &Path, r: &ProvidedRef) -> Result<Vec<ProvidedFile>, BenchError> {
    let src = root.join(&r.src);
    if !src.exists() {
        return Err(BenchError::MissingFixture(src));
    }
    let dest = r.dest.trim_matches('/');
    let mut out = Vec::new();
    if src.is_file() {
        let path = normalize_path(dest).map_err(|e| schema(0, e.to_string()))?;
        out.push(ProvidedFile { path, bytes: fs::read(&src).map_err(|e| BenchError::io(&src, e))? });
        return Ok(out);
    }
    for entry in walkdir::WalkDir::new(&src).sort_by_file_name() {
        let entry = entry.map_err(|e| BenchError::io(&src, e.into()))?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry.path().strip_prefix(&src).unwrap().to_string_lossy().replace('\\', "/");
        let joined = if dest.is_empty() { rel } else { format!("{dest}/{rel}") };
        let path = normalize_path(&joined).map_err(|e| schema(0, e.to_string()))?;
        out.push(ProvidedFile { path, bytes: fs::read(entry.path()).map_err(|e| BenchError::io(entry.path(), e))? });
    }
    Ok(out)
}

/// Reads a suite file, resolving baselines and provided files against
/// `fixtures_root` (relative to the suite file's directory).
pub fn load_suite(path: &Path) -> Result<Suite, BenchError> {
    let text = fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    let file: SuiteFile = serde_json::from_str(&text).map_err(|e| schema(e.line(), e.to_string()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let root = base.join(file.fixtures_root.as_deref().unwrap_or("."));

    let mut seen = HashSet::new();
    let mut tasks = Vec::new();
    let mut expectations = BTreeMap::new();
    for (i, t) in file.tasks.into_iter().enumerate() {
        if !seen.insert(t.id.clone()) {
            return Err(schema(0, format!("tasks[{i}].id: duplicate task id '{}'", t.id)));
        }
        let baseline_case = match &t.baseline {
            Some(rel) => {
                let dir = root.join(rel);
                if !dir.is_dir() {
                    return Err(BenchError::MissingFixture(dir));
                }
                Some(load_case(&dir)?)
            }
            None => None,
        };
        if t.kind == TaskKind::Modify && baseline_case.is_none() {
            return Err(schema(0, format!("tasks[{i}].baseline: modify task '{}' needs a baseline", t.id)));
        }
        let mut provided_files = Vec::new();
        for r in &t.provided_files {
            provided_files.extend(provided(&root, r)?);
        }
        expectations.insert(t.id.clone(), t.expectations);
        tasks.push(TaskSpec {
            case_name: t.case_name.unwrap_or_else(|| t.id.clone()),
            id: t.id,
            kind: t.kind,
            description: t.description,
            baseline_case,
            provided_files,
            assertions: t.assertions,
            solver_hint: t.solver_hint,
            limits: t.limits.unwrap_or_default(),
        });
    }
    Ok(Suite { name: file.name, fixtures_root: root, tasks, expectations })
}
