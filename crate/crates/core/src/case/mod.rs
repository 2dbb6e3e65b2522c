//! In-memory model of an OpenFOAM case directory.

mod registry;
mod rules;
mod task;

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::foam::{parse_foam_file, serialize_foam_file, FoamFile, FormatStyle};

pub use registry::{
    required_artifacts, turbulence_models, RequirementSet, CONSTRAINT_PATCH_TYPES, LES_MODELS, RAS_MODELS,
};
pub use rules::{validate_case, RULES};
pub use task::{check_assertions, check_task, Assertion, Check, CheckResult, FailedAssertion};

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("invalid case path '{0}'")]
    InvalidPath(String),
    #[error("task has no assertions; result is indeterminate")]
    UncheckableTask,
    #[error("malformed assertion target '{0}', expected '<file>:<keyword path>'")]
    BadTarget(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CaseError + '_ {
    move |source| CaseError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Fatal,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule_id: String,
    pub path: String,
    pub message: String,
    pub severity: Severity,
}

impl Violation {
    pub(crate) fn fatal(rule: &str, path: &str, message: impl Into<String>) -> Self {
        Violation { rule_id: rule.into(), path: path.into(), message: message.into(), severity: Severity::Fatal }
    }

    pub(crate) fn warning(rule: &str, path: &str, message: impl Into<String>) -> Self {
        Violation { rule_id: rule.into(), path: path.into(), message: message.into(), severity: Severity::Warning }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CaseEntry {
    Parsed(FoamFile),
    Blob(Vec<u8>),
}

impl CaseEntry {
    pub fn as_foam(&self) -> Option<&FoamFile> {
        match self {
            CaseEntry::Parsed(f) => Some(f),
            CaseEntry::Blob(_) => None,
        }
    }

    /// Text written to disk for this entry.
    pub fn to_bytes(&self) -> Vec<u8> {
        match self {
            CaseEntry::Parsed(f) => serialize_foam_file(f, FormatStyle::default()).into_bytes(),
            CaseEntry::Blob(b) => b.clone(),
        }
    }
}

/// A case directory: case-relative path → parsed dictionary or opaque bytes.
#[derive(Debug, Clone, Default)]
pub struct CaseTree {
    pub root_name: String,
    entries: BTreeMap<String, CaseEntry>,
    /// Parse fallbacks recorded while loading (rule `P1`).
    pub warnings: Vec<Violation>,
}

/// Normalizes a case-relative path: forward slashes, no `.`/empty
/// segments; absolute paths and `..` are rejected.
pub fn normalize_path(raw: &str) -> Result<String, CaseError> {
    let unified = raw.trim().replace('\\', "/");
    if unified.starts_with('/') || unified.contains(':') {
        return Err(CaseError::InvalidPath(raw.to_string()));
    }
    let mut parts = Vec::new();
    for seg in unified.split('/') {
        match seg {
            "" | "." => {}
            ".." => return Err(CaseError::InvalidPath(raw.to_string())),
            s => parts.push(s),
        }
    }
    if parts.is_empty() {
        return Err(CaseError::InvalidPath(raw.to_string()));
    }
    Ok(parts.join("/"))
}

const OPAQUE_EXTENSIONS: &[&str] = &["stl", "obj", "gz", "vtk", "vtp", "vtu", "png", "jpg", "eMesh", "csv", "zip"];

/// Whether a path is expected to hold an OpenFOAM dictionary.
fn is_dictionary_path(path: &str) -> bool {
    let mut segs = path.split('/');
    let top = segs.next().unwrap_or("");
    if !matches!(top, "0" | "0.orig" | "system" | "constant") || !path.contains('/') {
        return false;
    }
    if path.starts_with("constant/polyMesh/") {
        return path == "constant/polyMesh/boundary";
    }
    if path.starts_with("constant/triSurface/") || path.starts_with("constant/geometry/") {
        return false;
    }
    let base = path.rsplit('/').next().unwrap_or(path);
    match base.rsplit_once('.') {
        Some((_, ext)) => !OPAQUE_EXTENSIONS.contains(&ext),
        None => true,
    }
}

impl CaseTree {
    pub fn new(root_name: impl Into<String>) -> Self {
        CaseTree { root_name: root_name.into(), ..Default::default() }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, path: &str) -> Option<&CaseEntry> {
        self.entries.get(path)
    }

    pub fn foam(&self, path: &str) -> Option<&FoamFile> {
        self.entries.get(path).and_then(CaseEntry::as_foam)
    }

    pub fn contains(&self, path: &str) -> bool {
        self.entries.contains_key(path)
    }

    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &CaseEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Inserts a parsed file under a normalized path.
    pub fn insert_foam(&mut self, path: &str, mut file: FoamFile) -> Result<(), CaseError> {
        let path = normalize_path(path)?;
        file.source_path = Some(path.clone());
        self.entries.insert(path, CaseEntry::Parsed(file));
        Ok(())
    }

    pub fn insert_blob(&mut self, path: &str, bytes: Vec<u8>) -> Result<(), CaseError> {
        let path = normalize_path(path)?;
        self.warnings.retain(|w| w.path != path);
        self.entries.insert(path, CaseEntry::Blob(bytes));
        Ok(())
    }

    /// Inserts file content, parsing it when the path is a dictionary
    /// location. Unparseable dictionaries are kept as blobs and produce a
    /// `P1` warning, which is also returned.
    pub fn insert_bytes(&mut self, path: &str, bytes: Vec<u8>) -> Result<Option<Violation>, CaseError> {
        let path = normalize_path(path)?;
        self.warnings.retain(|w| w.path != path);
        if is_dictionary_path(&path) {
            if let Ok(text) = std::str::from_utf8(&bytes) {
                match parse_foam_file(text) {
                    Ok(mut f) => {
                        f.source_path = Some(path.clone());
                        self.entries.insert(path, CaseEntry::Parsed(f));
                        return Ok(None);
                    }
                    Err(e) => {
                        let w = Violation::warning("P1", &path, format!("dictionary kept as raw bytes: {e}"));
                        self.warnings.push(w.clone());
                        self.entries.insert(path, CaseEntry::Blob(bytes));
                        return Ok(Some(w));
                    }
                }
            }
        }
        self.entries.insert(path, CaseEntry::Blob(bytes));
        Ok(None)
    }

    pub fn remove(&mut self, path: &str) -> Option<CaseEntry> {
        self.warnings.retain(|w| w.path != path);
        self.entries.remove(path)
    }

    /// Overlays every entry of `other`; returns the paths that replaced
    /// existing entries.
    pub fn merge(&mut self, other: &CaseTree) -> Vec<String> {
        let mut replaced = Vec::new();
        for (path, entry) in &other.entries {
            self.warnings.retain(|w| &w.path != path);
            if self.entries.insert(path.clone(), entry.clone()).is_some() {
                replaced.push(path.clone());
            }
        }
        self.warnings.extend(other.warnings.iter().cloned());
        replaced
    }

    /// Same entries, ignoring `root_name` and load warnings.
    pub fn same_content(&self, other: &CaseTree) -> bool {
        self.entries == other.entries
    }
}

/// Loads every file below `dir`. Dictionaries are parsed; everything else,
/// and dictionaries that fail to parse, is stored as bytes.
pub fn load_case(dir: &Path) -> Result<CaseTree, CaseError> {
    let meta = fs::metadata(dir).map_err(io_err(dir))?;
    if !meta.is_dir() {
        return Err(CaseError::Io {
            path: dir.to_path_buf(),
            source: io::Error::new(io::ErrorKind::NotADirectory, "not a directory"),
        });
    }
    let root_name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let mut case = CaseTree::new(root_name);
    for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| CaseError::Io {
            path: e.path().map(Path::to_path_buf).unwrap_or_else(|| dir.to_path_buf()),
            source: e.into_io_error().unwrap_or_else(|| io::Error::other("walk error")),
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry.path().strip_prefix(dir).expect("walkdir yields children");
        let rel = rel.to_string_lossy().replace('\\', "/");
        let bytes = fs::read(entry.path()).map_err(io_err(entry.path()))?;
        case.insert_bytes(&rel, bytes)?;
    }
    Ok(case)
}

/// Materializes every entry below `dir`, creating it if needed.
pub fn write_case(case: &CaseTree, dir: &Path) -> Result<(), CaseError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for (rel, entry) in &case.entries {
        let target = dir.join(rel);
        if let Some(parent) = target.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        fs::write(&target, entry.to_bytes()).map_err(io_err(&target))?;
    }
    Ok(())
}
