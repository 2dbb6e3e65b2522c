use regex::Regex;

use super::{AgentError, ErrorReport, ExecutionPlan, IterationLimits, TaskKind, TaskSpec, FILES_PROMPT};
use crate::case::{CaseEntry, CaseTree};
use crate::foam::{serialize_foam_file, FormatStyle};
use crate::llm::{ChatRequest, Message, Pricing};

const TRUNCATED: &str = "\n[truncated]";
const MAX_LISTED_BLOBS: usize = 40;

/// Optional parts of a files request beyond the task and the case.
#[derive(Debug, Clone, Copy)]
pub struct RetryContext<'a> {
    pub system_prompt: &'a str,
    pub plan: Option<&'a ExecutionPlan>,
    /// Retrieved reference snippets; empty in zero-shot runs.
    pub references: &'a [String],
    pub reminder: Option<&'a str>,
}

impl Default for RetryContext<'_> {
    fn default() -> Self {
        RetryContext { system_prompt: FILES_PROMPT, plan: None, references: &[], reminder: None }
    }
}

/// Lower values are dropped first when the request is over budget.
fn drop_priority(path: &str) -> u8 {
    let base = path.rsplit('/').next().unwrap_or(path);
    if path.starts_with("constant/polyMesh/")
        || matches!(base, "blockMeshDict" | "snappyHexMeshDict" | "extrudeMeshDict" | "surfaceFeatureExtractDict")
    {
        0
    } else if base == "fvSchemes" {
        1
    } else if matches!(base, "controlDict" | "fvSolution") {
        5
    } else if path.starts_with("system/") {
        2
    } else if path.starts_with("constant/") {
        3
    } else {
        4
    }
}

fn file_text(entry: &CaseEntry) -> Option<String> {
    match entry {
        CaseEntry::Parsed(f) => Some(serialize_foam_file(f, FormatStyle::plain())),
        CaseEntry::Blob(_) => None,
    }
}

fn word_in(text: &str, word: &str) -> bool {
    Regex::new(&format!(r"(^|[^\w.]){}($|[^\w.])", regex::escape(word))).is_ok_and(|re| re.is_match(text))
}

/// The case file an error points at: basename equal to the keyword, a
/// path or basename named in the excerpt, or a file mentioning the keyword.
pub fn implicated_file(case: &CaseTree, err: &ErrorReport) -> Option<String> {
    let shown: Vec<(&str, String)> = case.iter().filter_map(|(p, e)| file_text(e).map(|t| (p, t))).collect();
    let base = |p: &str| p.rsplit('/').next().unwrap_or(p).to_string();
    if let Some(kw) = &err.keyword {
        if let Some((p, _)) = shown.iter().find(|(p, _)| &base(p) == kw) {
            return Some(p.to_string());
        }
    }
    let mut by_len: Vec<&str> = shown.iter().map(|(p, _)| *p).collect();
    by_len.sort_by_key(|p| std::cmp::Reverse(p.len()));
    if let Some(p) = by_len.iter().find(|p| err.excerpt.contains(**p)) {
        return Some(p.to_string());
    }
    by_len.sort_by_key(|p| std::cmp::Reverse(base(p).len()));
    if let Some(p) = by_len.iter().find(|p| word_in(&err.excerpt, &base(p))) {
        return Some(p.to_string());
    }
    let kw = err.keyword.as_deref()?;
    shown.iter().find(|(_, t)| word_in(t, kw)).map(|(p, _)| p.to_string())
}

struct Parts<'a> {
    task: &'a TaskSpec,
    ctx: RetryContext<'a>,
    files: Vec<(&'a str, String)>,
    blobs: Vec<&'a str>,
}

impl Parts<'_> {
    fn user_message(&self, shown: &[bool], err: Option<(&ErrorReport, &str)>) -> String {
        let mut s = format!("Task:\n{}\n", self.task.description);
        if let Some(plan) = self.ctx.plan {
            let cmds: Vec<String> = plan.commands.iter().map(|c| c.display()).collect();
            s.push_str(&format!("\nSolver: {}\nCommands: {}\n", plan.solver, cmds.join(", ")));
            if !plan.files_to_generate.is_empty() {
                s.push_str(&format!("Files to write: {}\n", plan.files_to_generate.join(", ")));
            }
        }
        for r in self.ctx.references {
            s.push_str(&format!("\nReference:\n{r}\n"));
        }
        if !self.files.is_empty() {
            s.push_str("\nCurrent case files:\n");
        }
        let mut omitted = Vec::new();
        for ((path, text), keep) in self.files.iter().zip(shown) {
            if *keep {
                s.push_str(&format!("\nFILE: {path}\n```\n{text}```\n"));
            } else {
                omitted.push(*path);
            }
        }
        if !omitted.is_empty() {
            s.push_str(&format!("\nNot shown for length (unchanged unless you emit them): {}\n", omitted.join(", ")));
        }
        if !self.blobs.is_empty() {
            let listed: Vec<&str> = self.blobs.iter().take(MAX_LISTED_BLOBS).copied().collect();
            let more = self.blobs.len().saturating_sub(MAX_LISTED_BLOBS);
            s.push_str(&format!("\nOther files in the case: {}", listed.join(", ")));
            if more > 0 {
                s.push_str(&format!(" and {more} more"));
            }
            s.push('\n');
        }
        match err {
            Some((e, excerpt)) => {
                s.push_str(&format!("\nThe last attempt failed while running `{}`:\n```\n{excerpt}\n```\n", e.command));
                s.push_str("\nFix the cause of this error. Emit every file you change, in full, as FILE blocks.\n");
            }
            None if self.task.kind == TaskKind::Modify => {
                s.push_str("\nApply the requested change. Emit every file you change, in full, as FILE blocks.\n");
            }
            None => s.push_str("\nWrite all files needed for this case as FILE blocks.\n"),
        }
        if let Some(r) = self.ctx.reminder {
            s.push('\n');
            s.push_str(r);
        }
        s
    }
}

pub(crate) fn compose(
    task: &TaskSpec,
    case: &CaseTree,
    err: Option<&ErrorReport>,
    pricing: &Pricing,
    limits: &IterationLimits,
    ctx: RetryContext<'_>,
) -> Result<ChatRequest, AgentError> {
    let budget = (limits.token_budget_fraction * pricing.context_length as f64).floor() as u64;
    let mut files = Vec::new();
    let mut blobs = Vec::new();
    for (p, e) in case.iter() {
        match file_text(e) {
            Some(t) => files.push((p, t)),
            None => blobs.push(p),
        }
    }
    let keep_last = err.and_then(|e| implicated_file(case, e));
    let mut drop_order: Vec<usize> = (0..files.len()).collect();
    drop_order.sort_by_key(|&i| {
        let p = files[i].0;
        (keep_last.as_deref() == Some(p), drop_priority(p), p)
    });
    let parts = Parts { task, ctx, files, blobs };

    let mut shown = vec![true; parts.files.len()];
    let mut drops = drop_order.into_iter();
    let mut excerpt = err.map(|e| e.excerpt.clone()).unwrap_or_default();
    loop {
        let user = parts.user_message(&shown, err.map(|e| (e, excerpt.as_str())));
        let req = ChatRequest::new(&pricing.model, vec![Message::system(ctx.system_prompt), Message::user(user)]);
        let est = req.estimated_tokens();
        if est <= budget {
            return Ok(req);
        }
        if let Some(i) = drops.next() {
            shown[i] = false;
            continue;
        }
        if err.is_some() && !excerpt.is_empty() {
            let body = excerpt.strip_suffix(TRUNCATED).unwrap_or(&excerpt);
            let cut = ((est - budget) * 4 + 16) as usize;
            let mut keep = body.len().saturating_sub(cut);
            while !body.is_char_boundary(keep) {
                keep -= 1;
            }
            excerpt = if keep == 0 { String::new() } else { format!("{}{TRUNCATED}", &body[..keep]) };
            continue;
        }
        return Err(AgentError::BudgetImpossible { needed: est, budget });
    }
}

/// Retry request: task text, current case files and the error excerpt,
/// shrunk to `token_budget_fraction` of the context window by dropping
/// files (mesh dictionaries first, the implicated file last) and then
/// truncating the excerpt.
pub fn compose_retry(
    task: &TaskSpec,
    current_case: &CaseTree,
    err: &ErrorReport,
    pricing: &Pricing,
    limits: &IterationLimits,
) -> Result<ChatRequest, AgentError> {
    compose(task, current_case, Some(err), pricing, limits, RetryContext::default())
}
