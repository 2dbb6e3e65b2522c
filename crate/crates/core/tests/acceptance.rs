//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any of them fails.

mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::oracle;
use foamgpt::agent::{
    compose_retry, run_agent, ErrorReport, ErrorSource, IterationLimits, MockRunner, Outcome, TaskSpec, TrialRecord,
};
use foamgpt::bench::{load_suite, render_table, run_suite, BenchConfig, TableFormat};
use foamgpt::case::{load_case, required_artifacts, validate_case, CaseTree, Severity};
use foamgpt::foam::{parse_foam_file, serialize_foam_file, FormatStyle};
use foamgpt::llm::{
    compute_cost, default_pricing_table, find_pricing, Backend, BackendConfig, MicroUsd, ScriptedTransport,
    UsageTotals,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use regex::Regex;

type Verdict = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn reference_text() -> String {
    fs::read_to_string(oracle::core_dir().join("../../paper.md")).expect("paper.md at the workspace root")
}

fn parser_fidelity() -> Verdict {
    let needed = ["controlDict", "fvSolution", "fvSchemes", "blockMeshDict", "setFieldsDict", "U", "turbulenceProperties", "boundary"];
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(oracle::fixtures()).sort_by_file_name() {
        let entry = entry.map_err(|e| e.to_string())?;
        if entry.file_type().is_file() {
            let text = fs::read_to_string(entry.path()).unwrap_or_default();
            if text.contains("FoamFile") {
                files.push((entry.path().to_path_buf(), text));
            }
        }
    }
    let names: Vec<String> = files.iter().map(|(p, _)| p.file_name().unwrap().to_string_lossy().into()).collect();
    for n in needed {
        ensure(names.iter().any(|x| x == n), format!("corpus has no {n}"))?;
    }
    let start = Instant::now();
    let mut failures = Vec::new();
    for (path, text) in &files {
        let ok = parse_foam_file(text).ok().and_then(|first| {
            let out = serialize_foam_file(&first, FormatStyle::default());
            let second = parse_foam_file(&out).ok()?;
            Some(first == second && serialize_foam_file(&second, FormatStyle::default()) == out)
        });
        if ok != Some(true) {
            failures.push(path.display().to_string());
        }
    }
    let took = start.elapsed();
    ensure(files.len() >= 15, format!("only {} dictionaries", files.len()))?;
    ensure(failures.is_empty(), format!("not a fixed point: {}", failures.join(", ")))?;
    ensure(took < Duration::from_secs(1), format!("corpus took {took:?}"))?;
    Ok(format!("{} dictionaries, 0 failures, {took:.2?}", files.len()))
}

const PLAN: &str = r#"{"solver": "icoFoam", "commands": ["blockMesh", "icoFoam"]}"#;

fn cavity_reply() -> String {
    let root = oracle::fixtures().join("cases/cavity");
    let mut reply = String::new();
    for p in ["0/U", "0/p", "constant/transportProperties", "system/blockMeshDict", "system/controlDict", "system/fvSchemes", "system/fvSolution"] {
        reply.push_str(&format!("FILE: {p}\n```\n{}```\n", fs::read_to_string(root.join(p)).unwrap()));
    }
    reply
}

fn qwen(responses: Vec<String>) -> Backend {
    Backend::new("qwen-max", find_pricing(&default_pricing_table(), "qwen-max"), Box::new(ScriptedTransport::new(responses)))
}

fn loop_cap() -> Verdict {
    let mut task = TaskSpec::generate("cavity", "lid-driven cavity, 1 m/s lid, 20x20 cells");
    task.solver_hint = Some("icoFoam".into());
    let mut seen = Vec::new();
    for k in [1u32, 3, 19, 0] {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let attempts = if k == 0 { 25 } else { k as usize };
        let mut script = vec![PLAN.to_string()];
        script.extend((0..attempts).map(|_| cavity_reply()));
        let schedule: Vec<bool> = if k == 0 { vec![false; 30] } else { (1..=k).map(|i| i == k).collect() };
        let start = Instant::now();
        let r = run_agent(&task, &qwen(script), &MockRunner::with_schedule(schedule), dir.path()).map_err(|e| e.to_string())?;
        let took = start.elapsed();
        ensure(took < Duration::from_secs(5), format!("scenario k={k} took {took:?}"))?;
        let want = if k == 0 { (Outcome::FailedMaxIterations, 20) } else { (Outcome::Success, k) };
        ensure((r.outcome, r.iterations_used) == want, format!("k={k}: got {:?} after {}", r.outcome, r.iterations_used))?;
        seen.push(if k == 0 { "never->20".to_string() } else { format!("k={k}") });
    }
    Ok(seen.join(", "))
}

fn taxonomy() -> Verdict {
    let cases = [("patch_empty", "icoFoam", "R1"), ("smoother", "icoFoam", "R3"), ("p_rgh", "interFoam", "R2")];
    let root = oracle::fixtures().join("taxonomy");
    let mut notes = Vec::new();
    for (name, solver, rule) in cases {
        for (suffix, want) in [("negative", 1), ("positive", 0)] {
            let case = load_case(&root.join(format!("{name}_{suffix}"))).map_err(|e| e.to_string())?;
            let fatal: Vec<_> = validate_case(&case, &required_artifacts(solver))
                .into_iter()
                .filter(|v| v.severity == Severity::Fatal)
                .collect();
            ensure(fatal.len() == want, format!("{name}_{suffix}: {} fatal violations", fatal.len()))?;
            if let Some(v) = fatal.first() {
                ensure(v.rule_id == rule, format!("{name}_{suffix}: {} instead of {rule}", v.rule_id))?;
                notes.push(format!("{name}->{rule}"));
            }
        }
    }
    Ok(format!("{}, positives clean", notes.join(", ")))
}

/// Dollars-per-million from the pricing table text, as integer micro-USD.
fn micro(s: &str) -> u64 {
    let (whole, frac) = s.split_once('.').unwrap_or((s, ""));
    let frac = format!("{frac:0<6}");
    whole.parse::<u64>().unwrap() * 1_000_000 + frac[..6].parse::<u64>().unwrap()
}

fn cost_arithmetic() -> Verdict {
    let text = reference_text();
    let rows = [("gpt-4o", "GPT-4o", 12_500_000), ("o1", "OpenAI o1", 75_000_000), ("deepseek-v3", "DeepSeek-V3", 585_000), ("qwen-max", "Qwen 2.5-Max", 2_000_000)];
    let table = default_pricing_table();
    let mut notes = Vec::new();
    for (model, label, expected) in rows {
        let line = text
            .lines()
            .find(|l| l.trim_start().starts_with(label) && l.contains("& China") | l.contains("& USA"))
            .ok_or(format!("no pricing row for {label}"))?;
        let cells: Vec<&str> = line.split('&').map(str::trim).collect();
        let listed = micro(cells[1]) + micro(cells[2]);
        ensure(listed == expected, format!("{label}: listed prices sum to {listed}"))?;
        let got = compute_cost(&UsageTotals::new(1_000_000, 1_000_000), &find_pricing(&table, model));
        ensure(got == MicroUsd(expected), format!("{model}: {got} != {}", MicroUsd(expected)))?;
        notes.push(format!("{model} {got}"));
    }
    Ok(notes.join(", "))
}

fn suite_path(name: &str) -> PathBuf {
    oracle::core_dir().join("suites").join(format!("{name}.suite.json"))
}

fn run(name: &str, variant: &str, out: &Path, parallelism: usize) -> Result<Vec<TrialRecord>, String> {
    let suite = load_suite(&suite_path(name)).map_err(|e| e.to_string())?;
    let mut cfg = BenchConfig::new(vec![BackendConfig::scripted("qwen-max", oracle::scripts_dir().join(variant))], out);
    cfg.parallelism = parallelism;
    run_suite(&suite, &cfg).map_err(|e| e.to_string())
}

fn table2() -> Verdict {
    let n = load_suite(&suite_path("table2")).map_err(|e| e.to_string())?.tasks.len();
    ensure(n == 19, format!("{n} tasks"))?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let good = run("table2", "table2-oracle", &dir.path().join("oracle"), 4)?;
    let bad = run("table2", "table2-skip", &dir.path().join("skip"), 4)?;
    let passed = good.iter().filter(|r| r.outcome == Outcome::Success).count();
    let caught = bad.iter().filter(|r| r.outcome != Outcome::Success).count();
    ensure(passed == 19 && caught == 19, format!("oracle {passed}/19 succeed, skip {caught}/19 fail"))?;
    Ok("19/19 oracle trials succeed, 19/19 skipped edits fail".into())
}

/// Table III rows from the reference text, as rendered cells.
fn reference_table3() -> Vec<[String; 6]> {
    let texttt = Regex::new(r"\\texttt\{([^}]*)\}").unwrap();
    let text = reference_text();
    let mut rows = Vec::new();
    for name in ["Bubble", "Droplet", "AirFoil", "MotorBike", "Cylinder", "Nozzle"] {
        let line = text.lines().find(|l| l.trim_start().starts_with(&format!("{name} &"))).unwrap();
        let line = texttt.replace_all(line, "$1");
        let cells: Vec<String> = line
            .trim()
            .trim_end_matches('\\')
            .split('&')
            .map(|c| {
                c.replace("\\makecell{", "")
                    .replace("\\\\", "")
                    .replace(['{', '}'], "")
                    .replace("$\\surd$", "✓")
                    .replace("\\$", "$")
                    .split_whitespace()
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect();
        rows.push(cells.try_into().unwrap());
    }
    rows
}

fn table3_schema() -> Verdict {
    let rows = reference_table3();
    let mut records = Vec::new();
    for (i, cells) in rows.iter().enumerate() {
        let tokens: u64 = cells[4].trim_end_matches('k').parse::<u64>().map_err(|e| e.to_string())? * 1000;
        let success = cells[3] == "✓";
        records.push(TrialRecord {
            task_id: cells[0].to_lowercase(),
            backend_model: "qwen-max".into(),
            iterations_used: cells[2].parse().map_err(|e: std::num::ParseIntError| e.to_string())?,
            outcome: if success { Outcome::Success } else { Outcome::FailedMaxIterations },
            usage: UsageTotals::new(tokens * 4 / 5, tokens - tokens * 4 / 5),
            cost: MicroUsd(micro(cells[5].trim_start_matches('$'))),
            final_error: (!success).then(|| ErrorReport {
                source: ErrorSource::FatalPattern,
                excerpt: cells[3].clone(),
                command: "simpleFoam".into(),
                keyword: None,
            }),
            transcript_path: PathBuf::from(format!("{}/transcript.jsonl", cells[0])),
            case_name: cells[0].clone(),
            files_provided: cells[1].clone(),
            suite_index: i,
            warnings: vec![],
        });
    }
    let table = render_table(&records, TableFormat::Markdown);
    let lines: Vec<&str> = table.lines().collect();
    ensure(
        lines[0] == "| case | file provided | iterations | result | total token | token cost |",
        format!("header {}", lines[0]),
    )?;
    for (cells, line) in rows.iter().zip(&lines[2..]) {
        let want = format!("| {} |", cells.join(" | "));
        ensure(*line == want, format!("rendered {line}, expected {want}"))?;
    }
    ensure(lines.len() == 8, format!("{} table lines", lines.len()))?;
    let bubble = lines[2].split(" | ").collect::<Vec<_>>();
    let bubble = format!("{} | {} | {}", bubble[2], bubble[4], bubble[5].trim_end_matches(" |"));
    ensure(bubble == "8 | 71k | $0.25", format!("Bubble row {bubble}"))?;
    Ok(format!("6 columns, 6 rows match the reference table, Bubble `{bubble}`"))
}

const POOL: [&str; 10] = [
    "system/controlDict",
    "system/fvSolution",
    "system/fvSchemes",
    "system/blockMeshDict",
    "system/setFieldsDict",
    "constant/transportProperties",
    "constant/turbulenceProperties",
    "0/U",
    "0/p",
    "0/p_rgh",
];

const SIZES: [usize; 7] = [0, 10, 60, 150, 300, 500, 700];

fn dictionary(name: &str, lines: usize, marker: bool) -> Vec<u8> {
    let mut s = format!("FoamFile\n{{\n    object {};\n}}\n", name.rsplit('/').next().unwrap());
    if marker {
        s.push_str("solvers\n{\n    p\n    {\n        solver GAMG;\n        smootherx none;\n    }\n}\n");
    }
    for i in 0..lines {
        s.push_str(&format!("entry{i}    uniform ({i} {i} 0);\n"));
    }
    s.into_bytes()
}

fn budget_invariant() -> Verdict {
    let pricing = find_pricing(&default_pricing_table(), "qwen-max");
    ensure(pricing.context_length == 32_768, "qwen-max context is not 32k")?;
    let budget = 32_768 * 8 / 10;
    let mut parts = Vec::new();
    for (i, p) in POOL.iter().enumerate() {
        let mut row = Vec::new();
        for n in SIZES {
            let mut pair = Vec::new();
            for marker in [false, true] {
                let mut t = CaseTree::new("c");
                t.insert_bytes(p, dictionary(p, n, marker)).map_err(|e| e.to_string())?;
                pair.push(t);
            }
            row.push(pair);
        }
        parts.push((i, row));
    }
    let mut task = TaskSpec::generate("cavity", "lid-driven cavity");
    task.solver_hint = Some("icoFoam".into());
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let (mut max_tokens, mut with_files) = (0, 0);
    for case_no in 0..1000 {
        let count = rng.random_range(1..=POOL.len());
        let implicated = rng.random_range(0..count);
        let mut case = CaseTree::new("c");
        for (i, row) in &parts[..count] {
            case.merge(&row[rng.random_range(0..SIZES.len())][usize::from(*i == implicated)]);
        }
        let target = POOL[implicated];
        let mut excerpt = format!("--> FOAM FATAL IO ERROR:\nkeyword smootherx is undefined in dictionary \"{target}/solvers/p\"\n");
        for i in 0..rng.random_range(0..1500) {
            excerpt.push_str(&format!("    #{i}  Foam::error::exit(int) at ??:?\n"));
        }
        let err = ErrorReport { source: ErrorSource::FatalPattern, excerpt, command: "icoFoam".into(), keyword: Some("smootherx".into()) };
        let req = compose_retry(&task, &case, &err, &pricing, &IterationLimits::default()).map_err(|e| format!("case {case_no}: {e}"))?;
        let tokens = req.estimated_tokens();
        ensure(tokens <= budget, format!("case {case_no}: {tokens} tokens > {budget}"))?;
        max_tokens = max_tokens.max(tokens);
        let user = &req.messages[1].content;
        if POOL[..count].iter().any(|p| user.contains(&format!("FILE: {p}\n"))) {
            with_files += 1;
            ensure(user.contains(&format!("FILE: {target}\n")), format!("case {case_no}: {target} dropped"))?;
        }
    }
    Ok(format!("1000 cases, max {max_tokens} <= {budget} tokens, implicated file kept in all {with_files} with files"))
}

fn results(dir: &Path) -> Result<String, String> {
    let mut all = String::new();
    for name in ["table2", "table3"] {
        let p = dir.join(name).join("results.jsonl");
        all.push_str(&fs::read_to_string(&p).map_err(|e| format!("{}: {e}", p.display()))?);
    }
    Ok(all)
}

fn both_suites(out: &Path, parallelism: usize) -> Result<String, String> {
    run("table2", "table2-oracle", out, parallelism)?;
    run("table3", "table3-oracle", out, parallelism)?;
    results(out)
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let a = both_suites(&dir.path().join("a"), 1)?;
    let b = both_suites(&dir.path().join("b"), 1)?;
    ensure(a == b, "serial runs differ")?;
    let mut serial: Vec<&str> = a.lines().collect();
    serial.sort_unstable();
    let c = both_suites(&dir.path().join("c"), 4)?;
    let d = both_suites(&dir.path().join("d"), 4)?;
    for other in [&c, &d] {
        let mut lines: Vec<&str> = other.lines().collect();
        lines.sort_unstable();
        ensure(lines == serial, "parallel records differ from the serial ones")?;
    }
    Ok(format!("{} records, p=1 byte-identical, p=4 same multiset", serial.len()))
}

/// `FOAMGPT_LIVE` names a config whose default backend is a real endpoint;
/// OpenFOAM must be on PATH.
fn live() -> Option<Verdict> {
    let cfg = std::env::var_os("FOAMGPT_LIVE")?;
    let dir = match tempfile::tempdir() {
        Ok(d) => d,
        Err(e) => return Some(Err(e.to_string())),
    };
    let out = dir.path().join("out");
    let args = [
        "foamgpt".into(),
        "--config".into(),
        cfg,
        "generate".into(),
        "lid-driven cavity, 1 m/s lid, 20x20 cells, icoFoam, end time 0.5".into(),
        "--runner".into(),
        "real".into(),
        "--out".into(),
        out.clone().into_os_string(),
    ];
    let (mut o, mut e) = (Vec::new(), Vec::new());
    let code = foamgpt::cli::run(args, &mut o, &mut e);
    Some((|| {
        ensure(code != 3 && code < 64, format!("generate exited {code}: {}", String::from_utf8_lossy(&e)))?;
        let case = load_case(&out.join("case")).map_err(|e| e.to_string())?;
        let fatal = validate_case(&case, &required_artifacts("icoFoam")).into_iter().filter(|v| v.severity == Severity::Fatal).count();
        ensure(fatal == 0, format!("{fatal} fatal violations in the generated case"))?;
        Ok(format!("generate exited {code}, case validates"))
    })())
}

fn main() -> ExitCode {
    let checks: [(&str, fn() -> Verdict); 8] = [
        ("parser fidelity", parser_fidelity),
        ("loop cap", loop_cap),
        ("failure taxonomy", taxonomy),
        ("cost arithmetic", cost_arithmetic),
        ("table II suite", table2),
        ("table III report", table3_schema),
        ("retry budget", budget_invariant),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        match check() {
            Ok(msg) => println!("PASS  {name}: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL  {name}: {msg}");
            }
        }
    }
    match live() {
        None => println!("SKIP  live generate: FOAMGPT_LIVE not set"),
        Some(Ok(msg)) => println!("PASS  live generate: {msg}"),
        Some(Err(msg)) => {
            failed += 1;
            println!("FAIL  live generate: {msg}");
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
