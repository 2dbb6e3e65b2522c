use super::AgentError;
use crate::case::normalize_path;

fn file_header(line: &str) -> Option<&str> {
    let t = line.trim().trim_start_matches(['#', '*', '>', ' ']).trim_end_matches(['*', ' ']);
    let rest = t.strip_prefix("FILE:").or_else(|| t.strip_prefix("File:"))?;
    let path = rest.trim().trim_matches('`').trim();
    (!path.is_empty() && !path.contains(char::is_whitespace)).then_some(path)
}

fn is_fence(line: &str) -> bool {
    line.trim_start().starts_with("```")
}

fn looks_like_case_path(p: &str) -> bool {
    ["0/", "0.orig/", "constant/", "system/"].iter().any(|pre| p.starts_with(pre))
}

/// Extracts `FILE: <path>` + fenced block pairs, and fenced blocks whose
/// first line is `// <path>`. Later blocks for the same path replace
/// earlier ones; order is by first appearance.
pub fn interpret_files(response: &str) -> Result<Vec<(String, String)>, AgentError> {
    let lines: Vec<&str> = response.lines().collect();
    let mut out: Vec<(String, String)> = Vec::new();
    let mut pending: Option<&str> = None;
    let mut i = 0;
    while i < lines.len() {
        let line = lines[i];
        if let Some(p) = file_header(line) {
            pending = Some(p);
            i += 1;
            continue;
        }
        if !is_fence(line) {
            i += 1;
            continue;
        }
        let start = i + 1;
        let mut end = start;
        while end < lines.len() && !is_fence(lines[end]) {
            end += 1;
        }
        let mut body = &lines[start..end];
        let path = match pending.take() {
            Some(p) => Some(p),
            None => body.first().and_then(|first| {
                let p = first.trim().strip_prefix("//")?.trim();
                looks_like_case_path(p).then_some(p)
            }),
        };
        if let Some(p) = path {
            if body.first().is_some_and(|f| f.trim().strip_prefix("//").map(str::trim) == Some(p)) {
                body = &body[1..];
            }
            if let Ok(norm) = normalize_path(p) {
                let mut content = body.join("\n");
                content.push('\n');
                match out.iter_mut().find(|(q, _)| *q == norm) {
                    Some(slot) => slot.1 = content,
                    None => out.push((norm, content)),
                }
            }
        }
        i = end + 1;
    }
    if out.is_empty() {
        Err(AgentError::NoFilesFound)
    } else {
        Ok(out)
    }
}
