//! Python bindings: dictionaries, cases, validation, pricing and tables.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyKeyError, PyValueError};
use pyo3::prelude::*;

use foamgpt::bench::{self, TableFormat};
use foamgpt::case::{self, Assertion};
use foamgpt::foam::{self, FormatStyle};
use foamgpt::llm::{self, UsageTotals};

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, json: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (json,))
}

/// A parsed OpenFOAM dictionary file.
#[pyclass(name = "FoamFile", module = "pyfoamgpt", skip_from_py_object)]
#[derive(Clone)]
struct PyFoamFile {
    inner: foam::FoamFile,
}

#[pymethods]
impl PyFoamFile {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        foam::parse_foam_file(text).map(|inner| PyFoamFile { inner }).map_err(value_err)
    }

    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        let text = std::fs::read_to_string(&path).map_err(|e| PyIOError::new_err(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    #[getter]
    fn class_name(&self) -> Option<String> {
        self.inner.class().map(str::to_string)
    }

    #[getter]
    fn object(&self) -> Option<String> {
        self.inner.object().map(str::to_string)
    }

    /// The value at a `/`-separated key path, as OpenFOAM text.
    fn get(&self, path: &str) -> PyResult<String> {
        foam::get_entry(&self.inner, path).map(|v| v.to_string()).map_err(|e| PyKeyError::new_err(e.to_string()))
    }

    /// A copy with `path` set to the parsed `value`.
    fn set(&self, path: &str, value: &str) -> PyResult<Self> {
        let v = foam::parse_value(value).map_err(value_err)?;
        foam::set_entry(&self.inner, path, v).map(|inner| PyFoamFile { inner }).map_err(value_err)
    }

    #[pyo3(signature = (banner = true))]
    fn dumps(&self, banner: bool) -> String {
        let style = if banner { FormatStyle::default() } else { FormatStyle::plain() };
        foam::serialize_foam_file(&self.inner, style)
    }

    /// The syntax tree as plain Python objects.
    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &serde_json::to_string(&self.inner).map_err(value_err)?)
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("FoamFile(object={:?})", self.inner.object().unwrap_or(""))
    }
}

/// A case directory held in memory.
#[pyclass(name = "Case", module = "pyfoamgpt")]
struct PyCase {
    inner: case::CaseTree,
}

#[pymethods]
impl PyCase {
    #[new]
    #[pyo3(signature = (name = "case"))]
    fn new(name: &str) -> Self {
        PyCase { inner: case::CaseTree::new(name) }
    }

    #[staticmethod]
    fn load(dir: PathBuf) -> PyResult<Self> {
        case::load_case(&dir).map(|inner| PyCase { inner }).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    fn write(&self, dir: PathBuf) -> PyResult<()> {
        case::write_case(&self.inner, &dir).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    fn paths(&self) -> Vec<String> {
        self.inner.paths().map(str::to_string).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __contains__(&self, path: &str) -> bool {
        self.inner.contains(path)
    }

    /// The parsed dictionary at `path`, or None for raw or missing files.
    fn file(&self, path: &str) -> Option<PyFoamFile> {
        self.inner.foam(path).map(|f| PyFoamFile { inner: f.clone() })
    }

    /// Adds or replaces a file from its text; returns a parse warning if any.
    fn put(&mut self, path: &str, text: &str) -> PyResult<Option<String>> {
        let w = self.inner.insert_bytes(path, text.as_bytes().to_vec()).map_err(value_err)?;
        Ok(w.map(|v| v.message))
    }

    /// Rule violations for `solver` as dicts with rule_id, path, message
    /// and severity.
    fn validate<'py>(&self, py: Python<'py>, solver: &str) -> PyResult<Bound<'py, PyAny>> {
        let v = case::validate_case(&self.inner, &case::required_artifacts(solver));
        to_py(py, &serde_json::to_string(&v).map_err(value_err)?)
    }

    /// Evaluates assertions given as a JSON list; returns (passed, reasons).
    fn check(&self, assertions_json: &str) -> PyResult<(bool, Vec<String>)> {
        let a: Vec<Assertion> = serde_json::from_str(assertions_json).map_err(value_err)?;
        let r = case::check_assertions(&self.inner, &a).map_err(value_err)?;
        Ok((r.passed, r.failed_assertions.into_iter().map(|f| format!("{}: {}", f.assertion.target, f.reason)).collect()))
    }
}

/// Cost in micro-USD of `input`/`output` tokens on `model`.
#[pyfunction]
fn compute_cost(model: &str, input: u64, output: u64) -> PyResult<u64> {
    let table = llm::default_pricing_table();
    let p = table
        .iter()
        .find(|p| p.matches(model))
        .ok_or_else(|| PyKeyError::new_err(format!("unknown model '{model}'")))?;
    Ok(llm::compute_cost(&UsageTotals::new(input, output), p).0)
}

#[pyfunction]
fn format_money(micro_usd: u64) -> String {
    llm::MicroUsd(micro_usd).to_string()
}

#[pyfunction]
fn estimate_tokens(text: &str) -> u64 {
    llm::estimate_tokens(text)
}

#[pyfunction]
fn pricing_table(py: Python<'_>) -> PyResult<Bound<'_, PyAny>> {
    to_py(py, &serde_json::to_string(&llm::default_pricing_table()).map_err(value_err)?)
}

/// Renders a results JSONL file as a markdown or csv table.
#[pyfunction]
#[pyo3(signature = (results_path, format = "markdown"))]
fn render_table(results_path: PathBuf, format: &str) -> PyResult<String> {
    let fmt = match format {
        "markdown" | "md" => TableFormat::Markdown,
        "csv" => TableFormat::Csv,
        other => return Err(value_err(format!("unknown format '{other}'"))),
    };
    let records = bench::load_records(&results_path).map_err(value_err)?;
    Ok(bench::render_table(&records, fmt))
}

#[pyfunction]
fn load_records(py: Python<'_>, results_path: PathBuf) -> PyResult<Bound<'_, PyAny>> {
    let records = bench::load_records(&results_path).map_err(value_err)?;
    to_py(py, &serde_json::to_string(&records).map_err(value_err)?)
}

#[pymodule]
pub fn pyfoamgpt(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFoamFile>()?;
    m.add_class::<PyCase>()?;
    m.add_function(wrap_pyfunction!(compute_cost, m)?)?;
    m.add_function(wrap_pyfunction!(format_money, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_tokens, m)?)?;
    m.add_function(wrap_pyfunction!(pricing_table, m)?)?;
    m.add_function(wrap_pyfunction!(render_table, m)?)?;
    m.add_function(wrap_pyfunction!(load_records, m)?)?;
    Ok(())
}
