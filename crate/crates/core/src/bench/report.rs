use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::agent::{Outcome, TrialRecord};
use crate::llm::MicroUsd;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableFormat {
    Markdown,
    Csv,
}

const COLUMNS: [&str; 6] = ["case", "file provided", "iterations", "result", "total token", "token cost"];

/// `71000` → `71k`; below a thousand the count is printed as is.
pub fn format_tokens(total: u64) -> String {
    if total < 1000 {
        total.to_string()
    } else {
        format!("{}k", (total + 500) / 1000)
    }
}

/// Two decimals from ten cents up, otherwise two significant digits with
/// trailing zeros trimmed back to two decimals.
pub fn format_cost(cost: MicroUsd) -> String {
    let micro = cost.0;
    if micro == 0 {
        return "$0".into();
    }
    if micro >= 100_000 {
        let cents = (micro + 5_000) / 10_000;
        return format!("${}.{:02}", cents / 100, cents % 100);
    }
    let mut scale = 1u64;
    while micro / scale >= 100 {
        scale *= 10;
    }
    let rounded = (micro + scale / 2) / scale * scale;
    let digits = format!("{:06}", rounded);
    let trimmed = digits.trim_end_matches('0');
    let frac = if trimmed.len() < 2 { &digits[..2] } else { trimmed };
    format!("$0.{frac}")
}

/// `✓` for a success, else the first informative line of the final error.
pub fn result_cell(record: &TrialRecord) -> String {
    if record.outcome == Outcome::Success {
        return "✓".into();
    }
    let Some(err) = &record.final_error else {
        return match record.outcome {
            Outcome::FailedMaxIterations => "max iterations".into(),
            _ => "failed".into(),
        };
    };
    let line = err
        .excerpt
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with("-->") && !l.chars().all(|c| c == '-' || c == '='))
        .unwrap_or("failed");
    let mut s = line;
    if s.starts_with('[') {
        if let Some(i) = s.find("] ") {
            s = &s[i + 2..];
        }
    }
    if let Some(i) = s.find(": ") {
        let head = &s[..i];
        if !head.contains(' ') && (head.contains('/') || head.contains('.')) {
            s = &s[i + 2..];
        }
    }
    s.replace('|', "\\|")
}

fn row(r: &TrialRecord, with_model: bool) -> Vec<String> {
    let mut cells = vec![r.case_name.clone()];
    if with_model {
        cells.push(r.backend_model.clone());
    }
    cells.extend([
        r.files_provided.clone(),
        r.iterations_used.to_string(),
        result_cell(r),
        format_tokens(r.usage.total()),
        format_cost(r.cost),
    ]);
    cells
}

/// One row per record in suite order. A model column is added when the
/// records come from more than one backend.
pub fn render_table(records: &[TrialRecord], format: TableFormat) -> String {
    let mut sorted: Vec<&TrialRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.suite_index);
    let with_model = sorted.iter().any(|r| r.backend_model != sorted[0].backend_model);
    let mut header: Vec<&str> = COLUMNS.to_vec();
    if with_model {
        header.insert(1, "model");
    }
    match format {
        TableFormat::Markdown => {
            let mut s = format!("| {} |\n", header.join(" | "));
            s.push_str(&format!("|{}\n", "---|".repeat(header.len())));
            for r in sorted {
                s.push_str(&format!("| {} |\n", row(r, with_model).join(" | ")));
            }
            s
        }
        TableFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&header).expect("in-memory csv");
            for r in sorted {
                let mut cells = row(r, with_model);
                if let Some(c) = cells.iter_mut().find(|c| c.contains("\\|")) {
                    *c = c.replace("\\|", "|");
                }
                w.write_record(&cells).expect("in-memory csv");
            }
            String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 cells")
        }
    }
}

/// Appends records as JSON lines, creating the file and its directory.
pub fn persist_records(records: &[TrialRecord], path: &Path) -> Result<(), BenchError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    }
    let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(|e| BenchError::io(path, e))?;
    let mut buf = String::new();
    for r in records {
        buf.push_str(&serde_json::to_string(r).expect("records serialize"));
        buf.push('\n');
    }
    f.write_all(buf.as_bytes()).map_err(|e| BenchError::io(path, e))
}

pub fn load_records(path: &Path) -> Result<Vec<TrialRecord>, BenchError> {
    let text = fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r = serde_json::from_str(line).map_err(|e| BenchError::Schema { line: i + 1, message: e.to_string() })?;
        out.push(r);
    }
    Ok(out)
}
