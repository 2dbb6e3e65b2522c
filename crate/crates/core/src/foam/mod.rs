//! OpenFOAM ASCII dictionary files.
//!
//! [`parse_foam_file`] turns the text of a dictionary (a `FoamFile` header
//! block followed by keyword entries) into a [`FoamFile`] AST and
//! [`serialize_foam_file`] writes it back in the standard layout. Constructs
//! outside the supported grammar (`$var` macros, `#calc`, `#{ code #}`
//! blocks, malformed tails) are kept verbatim as [`FoamValue::Raw`] or
//! [`DictEntry::Raw`] so that generated files survive inspection.

mod lexer;
mod parser;
mod path;
mod writer;

use std::fmt;

use serde::Serialize;
use thiserror::Error;

pub use parser::{parse_foam_file, parse_value};
pub use path::{get_entry, set_entry};
pub use writer::{serialize_foam_file, FormatStyle};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FoamError {
    #[error("unbalanced braces near line {line}")]
    UnbalancedBraces { line: usize },
    #[error("unterminated string, comment or code block starting at line {line}")]
    UnterminatedToken { line: usize },
    #[error("missing FoamFile header block")]
    MissingHeader,
    #[error("unsupported format '{0}', only ascii dictionaries are handled")]
    NonAsciiFormat(String),
    #[error("entry not found: {0}")]
    NotFound(String),
    #[error("not a dictionary: {0}")]
    NotADict(String),
    #[error("empty keyword path")]
    EmptyPath,
}

/// A numeric token. The original lexeme is kept so unmodified numbers are
/// re-emitted exactly; equality compares the parsed value.
#[derive(Debug, Clone, Serialize)]
pub struct Number {
    pub lexeme: String,
    pub value: f64,
}

impl Number {
    pub fn parse(lexeme: &str) -> Option<Number> {
        let first = lexeme.bytes().next()?;
        if !(first.is_ascii_digit() || matches!(first, b'-' | b'+' | b'.')) {
            return None;
        }
        if !lexeme
            .bytes()
            .all(|b| b.is_ascii_digit() || matches!(b, b'-' | b'+' | b'.' | b'e' | b'E'))
        {
            return None;
        }
        let value: f64 = lexeme.parse().ok()?;
        value.is_finite().then(|| Number { lexeme: lexeme.to_string(), value })
    }

    pub fn is_integer(&self) -> bool {
        self.value.fract() == 0.0 && !self.lexeme.contains(['.', 'e', 'E'])
    }
}

impl From<f64> for Number {
    fn from(value: f64) -> Self {
        Number { lexeme: format!("{value}"), value }
    }
}

impl From<i64> for Number {
    fn from(value: i64) -> Self {
        Number { lexeme: value.to_string(), value: value as f64 }
    }
}

impl PartialEq for Number {
    fn eq(&self, other: &Self) -> bool {
        self.value == other.value
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoamList {
    /// Written as `N(...)`; set for size-prefixed lists such as
    /// `nonuniform List<scalar> 3(1 2 3)` or the polyMesh boundary list.
    pub size_prefix: bool,
    pub items: Vec<FoamValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FoamValue {
    Atom(String),
    Number(Number),
    DimensionSet([i32; 7]),
    /// Parenthesized numbers, e.g. `(2 0 0)`.
    VectorLike(Vec<Number>),
    List(FoamList),
    Dict(Dict),
    /// A named dictionary inside a list, e.g. `movingWall { type wall; }` in
    /// a boundary list.
    Keyed { name: String, dict: Dict },
    /// Several tokens forming one entry value, e.g. `uniform (0 0 0)`.
    Seq(Vec<FoamValue>),
    Raw(String),
}

impl FoamValue {
    pub fn atom(s: impl Into<String>) -> Self {
        FoamValue::Atom(s.into())
    }

    pub fn number(n: impl Into<Number>) -> Self {
        FoamValue::Number(n.into())
    }

    pub fn vector(xs: &[f64]) -> Self {
        FoamValue::VectorLike(xs.iter().map(|&x| Number::from(x)).collect())
    }

    pub fn as_dict(&self) -> Option<&Dict> {
        match self {
            FoamValue::Dict(d) | FoamValue::Keyed { dict: d, .. } => Some(d),
            _ => None,
        }
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            FoamValue::Atom(s) => Some(s),
            _ => None,
        }
    }

    /// The value as a plain word: atoms lose surrounding quotes, numbers
    /// yield their lexeme.
    pub fn as_word(&self) -> Option<&str> {
        match self {
            FoamValue::Atom(s) => Some(s.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(s)),
            FoamValue::Number(n) => Some(&n.lexeme),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            FoamValue::Number(n) => Some(n.value),
            _ => None,
        }
    }

    /// Last token of a sequence, or the value itself.
    pub fn last_token(&self) -> &FoamValue {
        match self {
            FoamValue::Seq(items) if !items.is_empty() => items[items.len() - 1].last_token(),
            other => other,
        }
    }

    /// Depth-first search for a sub-value equal to `needle`.
    pub fn contains(&self, needle: &FoamValue) -> bool {
        if self == needle {
            return true;
        }
        match self {
            FoamValue::List(l) => l.items.iter().any(|v| v.contains(needle)),
            FoamValue::Seq(items) => items.iter().any(|v| v.contains(needle)),
            FoamValue::Dict(d) | FoamValue::Keyed { dict: d, .. } => {
                d.entries.iter().any(|e| match e {
                    DictEntry::Entry(_, v) | DictEntry::Bare(v) => v.contains(needle),
                    DictEntry::Raw(_) => false,
                })
            }
            _ => false,
        }
    }
}

impl fmt::Display for FoamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&writer::inline(self))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DictEntry {
    Entry(String, FoamValue),
    /// Verbatim text: `#include` style directives and unparseable tails.
    Raw(String),
    /// A value without keyword, e.g. the patch list of `polyMesh/boundary`.
    Bare(FoamValue),
}

/// Ordered dictionary. Duplicate keywords are kept in place; lookups see the
/// last occurrence, as OpenFOAM does.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Dict {
    pub entries: Vec<DictEntry>,
}

impl Dict {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&FoamValue> {
        self.entries.iter().rev().find_map(|e| match e {
            DictEntry::Entry(k, v) if k == key => Some(v),
            _ => None,
        })
    }

    pub fn get_mut(&mut self, key: &str) -> Option<&mut FoamValue> {
        self.entries.iter_mut().rev().find_map(|e| match e {
            DictEntry::Entry(k, v) if k == key => Some(v),
            _ => None,
        })
    }

    /// Lookup that also searches named dictionaries inside bare lists, so
    /// that `movingWall` resolves in a polyMesh boundary file.
    pub fn lookup(&self, key: &str) -> Option<&FoamValue> {
        self.get(key).or_else(|| {
            self.bare_values().find_map(|v| match v {
                FoamValue::List(l) => l.items.iter().find(|i| matches!(i, FoamValue::Keyed { name, .. } if name == key)),
                _ => None,
            })
        })
    }

    pub(crate) fn lookup_mut(&mut self, key: &str) -> Option<&mut FoamValue> {
        if self.get(key).is_some() {
            return self.get_mut(key);
        }
        self.entries.iter_mut().find_map(|e| match e {
            DictEntry::Bare(FoamValue::List(l)) => l
                .items
                .iter_mut()
                .find(|i| matches!(i, FoamValue::Keyed { name, .. } if name == key)),
            _ => None,
        })
    }

    /// Replaces the value of an existing keyword in place or appends it.
    pub fn insert(&mut self, key: impl Into<String>, value: FoamValue) {
        let key = key.into();
        match self.get_mut(&key) {
            Some(slot) => *slot = value,
            None => self.entries.push(DictEntry::Entry(key, value)),
        }
    }

    pub fn remove(&mut self, key: &str) -> Option<FoamValue> {
        let pos = self
            .entries
            .iter()
            .rposition(|e| matches!(e, DictEntry::Entry(k, _) if k == key))?;
        match self.entries.remove(pos) {
            DictEntry::Entry(_, v) => Some(v),
            _ => unreachable!(),
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().filter_map(|e| match e {
            DictEntry::Entry(k, _) => Some(k.as_str()),
            _ => None,
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &FoamValue)> {
        self.entries.iter().filter_map(|e| match e {
            DictEntry::Entry(k, v) => Some((k.as_str(), v)),
            _ => None,
        })
    }

    pub fn raw_entries(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().filter_map(|e| match e {
            DictEntry::Raw(r) => Some(r.as_str()),
            _ => None,
        })
    }

    pub fn bare_values(&self) -> impl Iterator<Item = &FoamValue> {
        self.entries.iter().filter_map(|e| match e {
            DictEntry::Bare(v) => Some(v),
            _ => None,
        })
    }

    /// Word value of a keyword (`type fixedValue;` → `fixedValue`).
    pub fn word(&self, key: &str) -> Option<&str> {
        self.get(key).and_then(FoamValue::as_word)
    }
}

/// One parsed dictionary file.
#[derive(Debug, Clone, Serialize)]
pub struct FoamFile {
    pub header: Dict,
    pub body: Dict,
    /// Case-relative path, set when the file was loaded from a case.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_path: Option<String>,
}

impl FoamFile {
    /// A file with the standard header for `class`/`object` and an empty body.
    pub fn new(class: &str, object: &str) -> Self {
        let mut header = Dict::new();
        header.insert("version", FoamValue::Number(Number::parse("2.0").unwrap()));
        header.insert("format", FoamValue::atom("ascii"));
        header.insert("class", FoamValue::atom(class));
        header.insert("object", FoamValue::atom(object));
        FoamFile { header, body: Dict::new(), source_path: None }
    }

    pub fn class(&self) -> Option<&str> {
        self.header.word("class")
    }

    pub fn object(&self) -> Option<&str> {
        self.header.word("object")
    }
}

/// Structural equality: header and body; `source_path` is bookkeeping.
impl PartialEq for FoamFile {
    fn eq(&self, other: &Self) -> bool {
        self.header == other.header && self.body == other.body
    }
}
