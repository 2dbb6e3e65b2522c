//! The `foamgpt` command line. [`run`] takes the arguments and output
//! streams and returns the process exit code.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::agent::{
    run_agent_with, AgentOptions, IterationLimits, MockRunner, Outcome, ProvidedFile, RealRunner, Runner, TaskSpec,
};
use crate::bench::{load_suite, render_table, run_suite, BenchConfig, BenchError, RunnerKind, TableFormat};
use crate::case::{load_case, normalize_path, required_artifacts, validate_case, write_case, Severity};
use crate::foam::parse_foam_file;
use crate::llm::{compute_cost, default_pricing_table, make_backend, BackendConfig, Pricing, UsageTotals};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FATAL_FOUND: i32 = 1;
pub const EXIT_MAX_ITERATIONS: i32 = 2;
pub const EXIT_UNRECOVERABLE: i32 = 3;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATA: i32 = 65;
pub const EXIT_NO_INPUT: i32 = 66;
pub const EXIT_IO: i32 = 74;
pub const EXIT_CONFIG: i32 = 78;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AppConfig {
    #[serde(default = "default_pricing_table")]
    pub pricing_table: Vec<Pricing>,
    #[serde(default)]
    pub backends: BTreeMap<String, BackendConfig>,
    #[serde(default)]
    pub default_backend: Option<String>,
    #[serde(default)]
    pub runner: RunnerKind,
    #[serde(default)]
    pub system_prompt_path: Option<PathBuf>,
    #[serde(default)]
    pub limits: IterationLimits,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            pricing_table: default_pricing_table(),
            backends: BTreeMap::new(),
            default_backend: None,
            runner: RunnerKind::Mock,
            system_prompt_path: None,
            limits: IterationLimits::default(),
        }
    }
}

impl AppConfig {
    /// Parses a config; relative paths inside are resolved against `base`.
    pub fn from_json(text: &str, base: &Path) -> Result<Self, String> {
        let mut cfg: AppConfig = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if let Some(name) = &cfg.default_backend {
            if !cfg.backends.contains_key(name) {
                return Err(format!("default_backend '{name}' is not in backends"));
            }
        }
        for b in cfg.backends.values_mut() {
            if let Some(p) = &b.script_path {
                b.script_path = Some(base.join(p));
            }
        }
        if let Some(p) = &cfg.system_prompt_path {
            cfg.system_prompt_path = Some(base.join(p));
        }
        Ok(cfg)
    }
}

#[derive(Debug, Parser)]
#[command(name = "foamgpt", version, about = "Generate, validate and benchmark OpenFOAM cases with an LLM")]
struct Cli {
    /// JSON config file.
    #[arg(long, global = true, default_value = "foamgpt.json")]
    config: PathBuf,
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RunnerArg {
    Mock,
    Real,
}

impl From<RunnerArg> for RunnerKind {
    fn from(r: RunnerArg) -> Self {
        match r {
            RunnerArg::Mock => RunnerKind::Mock,
            RunnerArg::Real => RunnerKind::Real,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Markdown,
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a case from a description and run it until it works.
    Generate {
        description: String,
        /// SRC or SRC=DEST; a directory is copied file by file.
        #[arg(long)]
        provide: Vec<String>,
        #[arg(long)]
        backend: Option<String>,
        #[arg(long, value_enum)]
        runner: Option<RunnerArg>,
        #[arg(long, default_value = "foamgpt-out")]
        out: PathBuf,
        /// Solver to fall back on when the plan reply is unusable.
        #[arg(long)]
        solver: Option<String>,
        #[arg(long)]
        max_iterations: Option<u32>,
    },
    /// Check a case directory against the rule set.
    Validate {
        case_dir: PathBuf,
        /// Defaults to the controlDict application.
        #[arg(long)]
        solver: Option<String>,
    },
    /// Run a benchmark suite.
    Bench {
        suite: PathBuf,
        #[arg(long)]
        backend: Vec<String>,
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        #[arg(long, default_value = "bench-out")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        repeat: u32,
        #[arg(long, value_enum)]
        runner: Option<RunnerArg>,
        #[arg(long, value_enum, default_value = "markdown")]
        format: FormatArg,
    },
    /// Price a token count.
    Cost {
        #[arg(long)]
        model: String,
        #[arg(long, default_value_t = 0)]
        input: u64,
        #[arg(long, default_value_t = 0)]
        output: u64,
    },
    /// Dump a dictionary file as JSON.
    Parse { file: PathBuf },
}

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
    verbose: bool,
}

macro_rules! say {
    ($w:expr, $($t:tt)*) => {{
        let _ = writeln!($w, $($t)*);
    }};
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            if code == EXIT_OK {
                let _ = write!(out, "{}", e.render());
            } else {
                let _ = write!(err, "{}", e.render());
            }
            return code;
        }
    };
    let mut io = Io { out, err, verbose: cli.verbose };
    let cfg = match load_config(&cli.config) {
        Ok(c) => c,
        Err(msg) => {
            say!(io.err, "error: config {}: {msg}", cli.config.display());
            return EXIT_CONFIG;
        }
    };
    match cli.command {
        Command::Generate { description, provide, backend, runner, out, solver, max_iterations } => {
            cmd_generate(&mut io, &cfg, &description, &provide, backend, runner, &out, solver, max_iterations)
        }
        Command::Validate { case_dir, solver } => cmd_validate(&mut io, &case_dir, solver),
        Command::Bench { suite, backend, parallel, out, repeat, runner, format } => {
            cmd_bench(&mut io, &cfg, &suite, &backend, parallel, &out, repeat, runner, format)
        }
        Command::Cost { model, input, output } => cmd_cost(&mut io, &cfg, &model, input, output),
        Command::Parse { file } => cmd_parse(&mut io, &file),
    }
}

fn load_config(path: &Path) -> Result<AppConfig, String> {
    match fs::read_to_string(path) {
        Ok(text) => AppConfig::from_json(&text, path.parent().unwrap_or(Path::new("."))),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound && path == Path::new("foamgpt.json") => Ok(AppConfig::default()),
        Err(e) => Err(e.to_string()),
    }
}

fn pick_backend<'c>(cfg: &'c AppConfig, name: Option<&str>) -> Result<(&'c str, &'c BackendConfig), String> {
    let known = || cfg.backends.keys().cloned().collect::<Vec<_>>().join(", ");
    let name = match name.or(cfg.default_backend.as_deref()) {
        Some(n) => n,
        None => return Err(format!("no backend given and no default_backend; configured: [{}]", known())),
    };
    cfg.backends
        .get_key_value(name)
        .map(|(k, v)| (k.as_str(), v))
        .ok_or_else(|| format!("unknown backend '{name}'; configured: [{}]", known()))
}

fn make_runner(kind: RunnerKind) -> Box<dyn Runner> {
    match kind {
        RunnerKind::Mock => Box::new(MockRunner::new()),
        RunnerKind::Real => Box::new(RealRunner),
    }
}

fn default_dest(src: &Path) -> Option<String> {
    let name = src.file_name()?.to_str()?;
    if src.is_dir() {
        return Some(if name == "polyMesh" { "constant/polyMesh".into() } else { String::new() });
    }
    if name.ends_with("Dict") || matches!(name, "controlDict" | "fvSchemes" | "fvSolution") {
        Some(format!("system/{name}"))
    } else {
        None
    }
}

fn read_provided(spec: &str) -> Result<Vec<ProvidedFile>, (i32, String)> {
    let (src, dest) = match spec.split_once('=') {
        Some((s, d)) => (PathBuf::from(s), Some(d.trim_matches('/').to_string())),
        None => (PathBuf::from(spec), None),
    };
    if !src.exists() {
        return Err((EXIT_NO_INPUT, format!("provided file {} does not exist", src.display())));
    }
    let dest = match dest.or_else(|| default_dest(&src)) {
        Some(d) => d,
        None => return Err((EXIT_USAGE, format!("cannot tell where {spec} belongs in the case; use SRC=DEST"))),
    };
    let io_err = |p: &Path, e: std::io::Error| (EXIT_IO, format!("{}: {e}", p.display()));
    let bad_path = |e: crate::case::CaseError| (EXIT_USAGE, e.to_string());
    if src.is_file() {
        let bytes = fs::read(&src).map_err(|e| io_err(&src, e))?;
        return Ok(vec![ProvidedFile { path: normalize_path(&dest).map_err(bad_path)?, bytes }]);
    }
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(&src).sort_by_file_name() {
        let entry = entry.map_err(|e| io_err(&src, e.into()))?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry.path().strip_prefix(&src).unwrap_or(entry.path()).to_string_lossy().replace('\\', "/");
        let joined = if dest.is_empty() { rel } else { format!("{dest}/{rel}") };
        let bytes = fs::read(entry.path()).map_err(|e| io_err(entry.path(), e))?;
        files.push(ProvidedFile { path: normalize_path(&joined).map_err(bad_path)?, bytes });
    }
    Ok(files)
}

#[allow(clippy::too_many_arguments)]
fn cmd_generate(
    io: &mut Io<'_>,
    cfg: &AppConfig,
    description: &str,
    provide: &[String],
    backend: Option<String>,
    runner: Option<RunnerArg>,
    out: &Path,
    solver: Option<String>,
    max_iterations: Option<u32>,
) -> i32 {
    let (name, backend_cfg) = match pick_backend(cfg, backend.as_deref()) {
        Ok(b) => b,
        Err(msg) => {
            say!(io.err, "error: {msg}");
            return EXIT_USAGE;
        }
    };
    let mut task = TaskSpec::generate("generate", description);
    task.case_name = "case".into();
    task.solver_hint = solver;
    task.limits = cfg.limits.clone();
    if let Some(n) = max_iterations {
        task.limits.max_iterations = n;
    }
    for p in provide {
        match read_provided(p) {
            Ok(files) => task.provided_files.extend(files),
            Err((code, msg)) => {
                say!(io.err, "error: {msg}");
                return code;
            }
        }
    }
    let backend = match make_backend(&backend_cfg.for_task(&task.id), &cfg.pricing_table) {
        Ok(b) => b,
        Err(e) => {
            say!(io.err, "error: backend {name}: {e}");
            return EXIT_CONFIG;
        }
    };
    let mut opts = AgentOptions::default();
    if let Some(p) = &cfg.system_prompt_path {
        match fs::read_to_string(p) {
            Ok(t) => opts.files_prompt = t,
            Err(e) => {
                say!(io.err, "error: system prompt {}: {e}", p.display());
                return EXIT_NO_INPUT;
            }
        }
    }
    let runner = make_runner(runner.map(Into::into).unwrap_or(cfg.runner));
    let trial = match run_agent_with(&task, &backend, runner.as_ref(), out, &opts) {
        Ok(t) => t,
        Err(e) => {
            say!(io.err, "error: {e}");
            return EXIT_IO;
        }
    };
    if let Err(e) = write_case(&trial.final_case, &out.join("case")) {
        say!(io.err, "error: {e}");
        return EXIT_IO;
    }
    let r = &trial.record;
    if io.verbose {
        for w in &r.warnings {
            say!(io.err, "warning: {w}");
        }
    }
    say!(
        io.out,
        "{:?} after {} iteration(s); {} tokens; {}; case written to {}",
        r.outcome,
        r.iterations_used,
        r.usage.total(),
        r.cost,
        out.join("case").display()
    );
    if let Some(e) = &r.final_error {
        say!(io.out, "last error ({}):\n{}", e.command, e.excerpt);
    }
    match r.outcome {
        Outcome::Success => EXIT_OK,
        Outcome::FailedMaxIterations | Outcome::FailedCheck => EXIT_MAX_ITERATIONS,
        Outcome::FailedUnrecoverable => EXIT_UNRECOVERABLE,
    }
}

fn cmd_validate(io: &mut Io<'_>, dir: &Path, solver: Option<String>) -> i32 {
    if !dir.is_dir() {
        say!(io.err, "error: {} is not a directory", dir.display());
        return EXIT_NO_INPUT;
    }
    let case = match load_case(dir) {
        Ok(c) => c,
        Err(e) => {
            say!(io.err, "error: {e}");
            return EXIT_IO;
        }
    };
    let solver = solver.or_else(|| {
        case.foam("system/controlDict").and_then(|f| f.body.word("application")).map(str::to_string)
    });
    let reqs = required_artifacts(solver.as_deref().unwrap_or(""));
    let violations = validate_case(&case, &reqs);
    let mut fatal = 0;
    for v in &violations {
        let sev = match v.severity {
            Severity::Fatal => {
                fatal += 1;
                "FATAL"
            }
            Severity::Warning => "WARN ",
        };
        say!(io.out, "{sev} {} {}: {}", v.rule_id, v.path, v.message);
    }
    say!(io.out, "{} fatal, {} warning(s) for {}", fatal, violations.len() - fatal, reqs.solver);
    if fatal > 0 {
        EXIT_FATAL_FOUND
    } else {
        EXIT_OK
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    io: &mut Io<'_>,
    cfg: &AppConfig,
    suite_path: &Path,
    backends: &[String],
    parallel: usize,
    out: &Path,
    repeat: u32,
    runner: Option<RunnerArg>,
    format: FormatArg,
) -> i32 {
    let suite = match load_suite(suite_path) {
        Ok(s) => s,
        Err(BenchError::Io { path, source }) => {
            say!(io.err, "error: cannot read suite {}: {source}", path.display());
            return EXIT_NO_INPUT;
        }
        Err(e) => {
            say!(io.err, "error: {}: {e}", suite_path.display());
            return EXIT_DATA;
        }
    };
    let names: Vec<Option<&str>> =
        if backends.is_empty() { vec![None] } else { backends.iter().map(|b| Some(b.as_str())).collect() };
    let mut chosen = Vec::new();
    for n in names {
        match pick_backend(cfg, n) {
            Ok((_, b)) => chosen.push(b.clone()),
            Err(msg) => {
                say!(io.err, "error: {msg}");
                return EXIT_USAGE;
            }
        }
    }
    let bench_cfg = BenchConfig {
        backends: chosen,
        runner: runner.map(Into::into).unwrap_or(cfg.runner),
        parallelism: parallel,
        output_dir: out.to_path_buf(),
        repeat,
        pricing_table: cfg.pricing_table.clone(),
    };
    let records = match run_suite(&suite, &bench_cfg) {
        Ok(r) => r,
        Err(e @ (BenchError::Config(_) | BenchError::Backend(_))) => {
            say!(io.err, "error: {e}");
            return EXIT_USAGE;
        }
        Err(e) => {
            say!(io.err, "error: {e}");
            return EXIT_IO;
        }
    };
    let (fmt, ext) = match format {
        FormatArg::Markdown => (TableFormat::Markdown, "md"),
        FormatArg::Csv => (TableFormat::Csv, "csv"),
    };
    let table = render_table(&records, fmt);
    let path = out.join(&suite.name).join(format!("table.{ext}"));
    if let Err(e) = fs::write(&path, &table) {
        say!(io.err, "error: {}: {e}", path.display());
        return EXIT_IO;
    }
    let _ = write!(io.out, "{table}");
    if io.verbose {
        say!(io.err, "{} trial(s) recorded in {}", records.len(), out.join(&suite.name).join("results.jsonl").display());
    }
    EXIT_OK
}

fn cmd_cost(io: &mut Io<'_>, cfg: &AppConfig, model: &str, input: u64, output: u64) -> i32 {
    let Some(p) = cfg.pricing_table.iter().find(|p| p.matches(model)) else {
        let known: Vec<&str> = cfg.pricing_table.iter().map(|p| p.model.as_str()).collect();
        say!(io.err, "error: unknown model '{model}'; known models: {}", known.join(", "));
        return EXIT_USAGE;
    };
    let usage = UsageTotals::new(input, output);
    say!(io.out, "{}", compute_cost(&usage, p));
    EXIT_OK
}

fn cmd_parse(io: &mut Io<'_>, file: &Path) -> i32 {
    let text = match fs::read_to_string(file) {
        Ok(t) => t,
        Err(e) => {
            say!(io.err, "error: {}: {e}", file.display());
            return EXIT_NO_INPUT;
        }
    };
    match parse_foam_file(&text) {
        Ok(f) => {
            say!(io.out, "{}", serde_json::to_string_pretty(&f).unwrap_or_default());
            EXIT_OK
        }
        Err(e) => {
            say!(io.err, "error: {}: {e}", file.display());
            EXIT_DATA
        }
    }
}
