use super::{Dict, DictEntry, FoamFile, FoamList, FoamValue};

const INDENT: &str = "    ";
const INLINE_LIST_MAX: usize = 72;

const BANNER: &str = r"/*--------------------------------*- C++ -*----------------------------------*\
  =========                 |
  \\      /  F ield         | OpenFOAM: The Open Source CFD Toolbox
   \\    /   O peration     | Version:  v2406
    \\  /    A nd           | Website:  www.openfoam.com
     \\/     M anipulation  |
\*---------------------------------------------------------------------------*/
";

const FOOTER: &str = "\n// ************************************************************************* //\n";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FormatStyle {
    /// Emit the OpenFOAM banner comment and closing rule.
    pub banner: bool,
}

impl Default for FormatStyle {
    fn default() -> Self {
        FormatStyle { banner: true }
    }
}

impl FormatStyle {
    pub fn plain() -> Self {
        FormatStyle { banner: false }
    }
}

pub fn serialize_foam_file(file: &FoamFile, style: FormatStyle) -> String {
    let mut out = String::new();
    if style.banner {
        out.push_str(BANNER);
    }
    out.push_str("FoamFile\n{\n");
    write_entries(&mut out, &file.header, 1);
    out.push_str("}\n");
    if style.banner {
        out.push_str("// * * * * * * * * * * * * * * * * * * * * * * * * * * * * * * * * * * * * //\n");
    }
    out.push('\n');
    write_entries(&mut out, &file.body, 0);
    if style.banner {
        out.push_str(FOOTER);
    }
    out
}

fn pad(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str(INDENT);
    }
}

fn write_entries(out: &mut String, dict: &Dict, level: usize) {
    for entry in &dict.entries {
        match entry {
            DictEntry::Raw(text) => {
                pad(out, level);
                out.push_str(text);
                out.push('\n');
            }
            DictEntry::Bare(v) => {
                write_block(out, v, level);
                out.push('\n');
            }
            DictEntry::Entry(key, FoamValue::Dict(d)) => {
                pad(out, level);
                out.push_str(key);
                out.push('\n');
                write_braced(out, d, level);
                out.push('\n');
            }
            DictEntry::Entry(key, FoamValue::Seq(items)) if items.is_empty() => {
                pad(out, level);
                out.push_str(key);
                out.push_str(";\n");
            }
            DictEntry::Entry(key, v) => {
                pad(out, level);
                out.push_str(key);
                write_value_tail(out, v, level);
                out.push_str(";\n");
            }
        }
    }
}

fn write_braced(out: &mut String, d: &Dict, level: usize) {
    pad(out, level);
    out.push_str("{\n");
    write_entries(out, d, level + 1);
    pad(out, level);
    out.push('}');
}

/// Writes the value after a keyword: inline parts on the keyword's line,
/// block parts (long lists, dictionaries) on their own lines.
fn write_value_tail(out: &mut String, v: &FoamValue, level: usize) {
    let parts: &[FoamValue] = match v {
        FoamValue::Seq(items) => items,
        other => std::slice::from_ref(other),
    };
    let mut on_new_line = false;
    for part in parts {
        match try_inline(part) {
            Some(s) if !on_new_line => {
                out.push(' ');
                out.push_str(&s);
            }
            Some(s) => {
                out.push('\n');
                pad(out, level);
                out.push_str(&s);
            }
            None => {
                out.push('\n');
                write_block(out, part, level);
                on_new_line = true;
            }
        }
    }
}

/// Multi-line rendering starting at the beginning of a line; no trailing
/// newline.
fn write_block(out: &mut String, v: &FoamValue, level: usize) {
    match v {
        FoamValue::List(FoamList { size_prefix, items }) if try_inline(v).is_none() => {
            if *size_prefix {
                pad(out, level);
                out.push_str(&items.len().to_string());
                out.push('\n');
            }
            pad(out, level);
            out.push_str("(\n");
            for item in items {
                write_block(out, item, level + 1);
                out.push('\n');
            }
            pad(out, level);
            out.push(')');
        }
        FoamValue::Dict(d) => write_braced(out, d, level),
        FoamValue::Keyed { name, dict } => {
            pad(out, level);
            out.push_str(name);
            out.push('\n');
            write_braced(out, dict, level);
        }
        FoamValue::Seq(items) => {
            pad(out, level);
            let mut first = true;
            for item in items {
                match try_inline(item) {
                    Some(s) => {
                        if !first {
                            out.push(' ');
                        }
                        out.push_str(&s);
                    }
                    None => {
                        out.push('\n');
                        write_block(out, item, level);
                        out.push('\n');
                        pad(out, level);
                    }
                }
                first = false;
            }
        }
        other => {
            pad(out, level);
            out.push_str(&inline(other));
        }
    }
}

/// Single-line rendering, or `None` when the value needs a block layout.
fn try_inline(v: &FoamValue) -> Option<String> {
    match v {
        FoamValue::Dict(_) | FoamValue::Keyed { .. } => None,
        FoamValue::List(l) => {
            let s = inline(v);
            let nested = l.items.iter().any(|i| matches!(i, FoamValue::Dict(_) | FoamValue::Keyed { .. }));
            (!nested && s.len() <= INLINE_LIST_MAX && l.items.iter().all(|i| try_inline(i).is_some())).then_some(s)
        }
        FoamValue::Seq(items) => {
            let parts: Option<Vec<String>> = items.iter().map(try_inline).collect();
            parts.map(|p| p.join(" "))
        }
        other => Some(inline(other)),
    }
}

/// Single-line rendering regardless of length; dictionaries use `{ a 1; }`.
pub(super) fn inline(v: &FoamValue) -> String {
    match v {
        FoamValue::Atom(s) | FoamValue::Raw(s) => s.clone(),
        FoamValue::Number(n) => n.lexeme.clone(),
        FoamValue::DimensionSet(d) => {
            let parts: Vec<String> = d.iter().map(|x| x.to_string()).collect();
            format!("[{}]", parts.join(" "))
        }
        FoamValue::VectorLike(ns) => {
            let parts: Vec<&str> = ns.iter().map(|n| n.lexeme.as_str()).collect();
            format!("({})", parts.join(" "))
        }
        FoamValue::List(FoamList { size_prefix, items }) => {
            let parts: Vec<String> = items.iter().map(inline).collect();
            let prefix = if *size_prefix { items.len().to_string() } else { String::new() };
            format!("{prefix}({})", parts.join(" "))
        }
        FoamValue::Seq(items) => items.iter().map(inline).collect::<Vec<_>>().join(" "),
        FoamValue::Dict(d) => format!("{{ {}}}", inline_entries(d)),
        FoamValue::Keyed { name, dict } => format!("{name} {{ {}}}", inline_entries(dict)),
    }
}

fn inline_entries(d: &Dict) -> String {
    let mut s = String::new();
    for e in &d.entries {
        match e {
            DictEntry::Entry(k, FoamValue::Dict(inner)) => s.push_str(&format!("{k} {{ {}}} ", inline_entries(inner))),
            DictEntry::Entry(k, FoamValue::Seq(items)) if items.is_empty() => s.push_str(&format!("{k}; ")),
            DictEntry::Entry(k, v) => s.push_str(&format!("{k} {}; ", inline(v))),
            DictEntry::Raw(r) => s.push_str(&format!("{r} ")),
            DictEntry::Bare(v) => s.push_str(&format!("{} ", inline(v))),
        }
    }
    s
}
