use super::lexer::{check_balance, tokenize, TokKind, Token};
use super::{Dict, DictEntry, FoamError, FoamFile, FoamList, FoamValue, Number};

/// Internal failure inside one entry; recovered as a raw tail.
#[derive(Debug)]
struct Malformed;

struct Parser<'a> {
    src: &'a str,
    toks: Vec<Token>,
    pos: usize,
}

/// Parses the text of one dictionary file.
pub fn parse_foam_file(text: &str) -> Result<FoamFile, FoamError> {
    let mut body = parse_dict_text(text)?;

    let header_pos = body
        .entries
        .iter()
        .position(|e| matches!(e, DictEntry::Entry(k, FoamValue::Dict(_)) if k == "FoamFile"))
        .ok_or(FoamError::MissingHeader)?;
    let header = match body.entries.remove(header_pos) {
        DictEntry::Entry(_, FoamValue::Dict(d)) => d,
        _ => unreachable!(),
    };
    if let Some(format) = header.word("format") {
        if format != "ascii" {
            return Err(FoamError::NonAsciiFormat(format.to_string()));
        }
    }
    Ok(FoamFile { header: canonical_header(header), body, source_path: None })
}

/// Parses a value fragment such as `uniform (2 0 0)`; used for assertion
/// operands. A single token yields that token, several yield a `Seq`.
pub fn parse_value(text: &str) -> Result<FoamValue, FoamError> {
    let toks = tokenize(text)?;
    check_balance(&toks)?;
    let mut p = Parser { src: text, toks, pos: 0 };
    let end = p.toks.len();
    let items = p.items_until(end).map_err(|_| FoamError::NotFound(text.to_string()))?;
    Ok(match items.len() {
        1 => items.into_iter().next().unwrap(),
        _ => FoamValue::Seq(items),
    })
}

pub(crate) fn parse_dict_text(text: &str) -> Result<Dict, FoamError> {
    let toks = tokenize(text)?;
    check_balance(&toks)?;
    let mut p = Parser { src: text, toks, pos: 0 };
    Ok(p.dict_body())
}

/// Header keys in write order: version, format, class, note, location,
/// object, then anything else in source order. Missing required keys get
/// the standard defaults.
fn canonical_header(mut raw: Dict) -> Dict {
    let mut out = Dict::new();
    let defaults: [(&str, Option<FoamValue>); 6] = [
        ("version", Some(FoamValue::Number(Number::parse("2.0").unwrap()))),
        ("format", Some(FoamValue::atom("ascii"))),
        ("class", Some(FoamValue::atom("dictionary"))),
        ("note", None),
        ("location", None),
        ("object", None),
    ];
    for (key, default) in defaults {
        match raw.remove(key).or(default) {
            Some(v) => out.insert(key, v),
            None => {}
        }
    }
    out.entries.extend(raw.entries);
    out
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, off: usize) -> Option<&Token> {
        self.toks.get(self.pos + off)
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos];
        self.pos += 1;
        t
    }

    fn text(&self, t: &Token) -> &'a str {
        t.text(self.src)
    }

    /// Index of the token closing the current scope (`}` or end of input).
    fn scope_end(&self) -> usize {
        let mut depth = 0i32;
        for (i, t) in self.toks.iter().enumerate().skip(self.pos) {
            match t.kind {
                TokKind::Punct('{' | '(' | '[') => depth += 1,
                TokKind::Punct('}') if depth == 0 => return i,
                TokKind::Punct('}' | ')' | ']') => depth -= 1,
                _ => {}
            }
        }
        self.toks.len()
    }

    /// Entries up to the closing `}` of this scope (not consumed) or EOF.
    fn dict_body(&mut self) -> Dict {
        let mut dict = Dict::new();
        loop {
            let Some(t) = self.peek().copied() else { break };
            if t.is('}') {
                break;
            }
            if t.is(';') {
                self.pos += 1;
                continue;
            }
            let start = self.pos;
            match self.entry() {
                Ok(e) => dict.entries.push(e),
                Err(Malformed) => {
                    self.pos = start;
                    let end = self.scope_end();
                    let first = self.toks[start].start;
                    let last = self.toks[end - 1].end;
                    dict.entries.push(DictEntry::Raw(self.src[first..last].to_string()));
                    self.pos = end;
                }
            }
        }
        dict
    }

    fn entry(&mut self) -> Result<DictEntry, Malformed> {
        let t = *self.peek().ok_or(Malformed)?;
        let text = self.text(&t);

        if t.kind == TokKind::Word && text.starts_with('#') && text.len() > 1 {
            return Ok(self.directive());
        }

        let bare_start = t.is('(') || (t.kind == TokKind::Word && Number::parse(text).is_some());
        if bare_start {
            let (stop, terminated) = match self.statement_end() {
                Ok(i) => (i, true),
                Err(end) => (end, false),
            };
            let items = self.items_until(stop)?;
            if terminated {
                self.pos += 1;
            }
            return Ok(DictEntry::Bare(collapse(items)));
        }

        if !matches!(t.kind, TokKind::Word | TokKind::Str) {
            return Err(Malformed);
        }
        self.pos += 1;
        let key = text.to_string();

        match self.peek() {
            Some(n) if n.is('{') => {
                self.pos += 1;
                let dict = self.dict_body();
                self.expect('}')?;
                if self.peek().is_some_and(|n| n.is(';')) {
                    self.pos += 1;
                }
                Ok(DictEntry::Entry(key, FoamValue::Dict(dict)))
            }
            _ => {
                let stop = self.statement_end().map_err(|_| Malformed)?;
                let items = self.items_until(stop)?;
                self.pos += 1;
                Ok(DictEntry::Entry(key, collapse(items)))
            }
        }
    }

    /// `#include "file"` and friends: the rest of the source line, verbatim.
    fn directive(&mut self) -> DictEntry {
        let first = self.bump();
        let mut last = first;
        while let Some(n) = self.peek() {
            if n.line != first.line || !matches!(n.kind, TokKind::Word | TokKind::Str) {
                break;
            }
            last = self.bump();
        }
        DictEntry::Raw(self.src[first.start..last.end].to_string())
    }

    fn expect(&mut self, c: char) -> Result<(), Malformed> {
        match self.peek() {
            Some(t) if t.is(c) => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(Malformed),
        }
    }

    /// Position of the `;` ending the current value, at nesting depth zero,
    /// before `limit`.
    /// `Ok` with the index of the `;` ending the current statement, or
    /// `Err` with the scope end when the scope closes first.
    fn statement_end(&self) -> Result<usize, usize> {
        let mut depth = 0i32;
        for (i, t) in self.toks.iter().enumerate().skip(self.pos) {
            match t.kind {
                TokKind::Punct('{' | '(' | '[') => depth += 1,
                TokKind::Punct('}') if depth == 0 => return Err(i),
                TokKind::Punct('}' | ')' | ']') => depth -= 1,
                TokKind::Punct(';') if depth == 0 => return Ok(i),
                _ => {}
            }
        }
        Err(self.toks.len())
    }

    fn items_until(&mut self, stop: usize) -> Result<Vec<FoamValue>, Malformed> {
        let mut items = Vec::new();
        while self.pos < stop {
            self.item(&mut items)?;
        }
        Ok(items)
    }

    /// Parses one value item and pushes it (or two, when an integer turns
    /// out not to be a size prefix).
    fn item(&mut self, out: &mut Vec<FoamValue>) -> Result<(), Malformed> {
        let t = self.bump();
        let text = self.text(&t);
        match t.kind {
            TokKind::Str => out.push(FoamValue::Atom(text.to_string())),
            TokKind::Code => out.push(FoamValue::Raw(text.to_string())),
            TokKind::Word => {
                if text.starts_with('$') {
                    out.push(FoamValue::Raw(text.to_string()));
                } else if text.starts_with('#') {
                    // `#calc "..."`, `#eval "..."`: keep with its argument
                    let end = match self.peek() {
                        Some(n) if n.kind == TokKind::Str => self.bump().end,
                        _ => t.end,
                    };
                    out.push(FoamValue::Raw(self.src[t.start..end].to_string()));
                } else if let Some(n) = Number::parse(text) {
                    let prefix_candidate = n.is_integer()
                        && n.value >= 0.0
                        && self.peek().is_some_and(|p| p.is('('))
                        && {
                            let gap = &self.src[t.end..self.peek().unwrap().start];
                            gap.is_empty() || gap.contains('\n')
                        };
                    if prefix_candidate {
                        let list = self.list()?;
                        let count = match &list {
                            FoamValue::List(l) => l.items.len(),
                            FoamValue::VectorLike(v) => v.len(),
                            _ => unreachable!(),
                        };
                        if count as f64 == n.value {
                            let items = match list {
                                FoamValue::List(l) => l.items,
                                FoamValue::VectorLike(v) => v.into_iter().map(FoamValue::Number).collect(),
                                _ => unreachable!(),
                            };
                            out.push(FoamValue::List(FoamList { size_prefix: true, items }));
                        } else {
                            out.push(FoamValue::Number(n));
                            out.push(list);
                        }
                    } else {
                        out.push(FoamValue::Number(n));
                    }
                } else {
                    out.push(FoamValue::Atom(text.to_string()));
                }
            }
            TokKind::Punct('(') => {
                self.pos -= 1;
                out.push(self.list()?);
            }
            TokKind::Punct('[') => {
                self.pos -= 1;
                out.push(self.dimensions());
            }
            TokKind::Punct(_) => return Err(Malformed),
        }
        Ok(())
    }

    fn list(&mut self) -> Result<FoamValue, Malformed> {
        self.expect('(')?;
        let mut items = Vec::new();
        loop {
            let t = *self.peek().ok_or(Malformed)?;
            if t.is(')') {
                self.pos += 1;
                break;
            }
            if t.is('{') {
                self.pos += 1;
                let dict = self.dict_body();
                self.expect('}')?;
                items.push(FoamValue::Dict(dict));
                continue;
            }
            if matches!(t.kind, TokKind::Word | TokKind::Str)
                && self.peek_at(1).is_some_and(|n| n.is('{'))
            {
                let name = self.text(&t).to_string();
                self.pos += 2;
                let dict = self.dict_body();
                self.expect('}')?;
                items.push(FoamValue::Keyed { name, dict });
                continue;
            }
            if t.is(';') || t.is('}') {
                return Err(Malformed);
            }
            self.item(&mut items)?;
        }
        let numbers: Option<Vec<Number>> = items
            .iter()
            .map(|v| match v {
                FoamValue::Number(n) => Some(n.clone()),
                _ => None,
            })
            .collect();
        Ok(match numbers {
            Some(ns) if !ns.is_empty() => FoamValue::VectorLike(ns),
            _ => FoamValue::List(FoamList { size_prefix: false, items }),
        })
    }

    /// `[0 1 -1 0 0 0 0]`; anything other than seven integers stays raw.
    fn dimensions(&mut self) -> FoamValue {
        let open = self.bump();
        let mut close = open;
        let mut dims = Vec::new();
        let mut ok = true;
        while let Some(t) = self.peek().copied() {
            self.pos += 1;
            if t.is(']') {
                close = t;
                break;
            }
            match (t.kind, Number::parse(self.text(&t))) {
                (TokKind::Word, Some(n)) if n.value.fract() == 0.0 => dims.push(n.value as i32),
                _ => ok = false,
            }
        }
        match <[i32; 7]>::try_from(dims) {
            Ok(d) if ok => FoamValue::DimensionSet(d),
            _ => FoamValue::Raw(self.src[open.start..close.end].to_string()),
        }
    }
}

fn collapse(mut items: Vec<FoamValue>) -> FoamValue {
    if items.len() == 1 {
        items.pop().unwrap()
    } else {
        FoamValue::Seq(items)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONTROL: &str =
        "FoamFile { version 2.0; format ascii; class dictionary; object controlDict; } endTime 5;";

    #[test]
    fn minimal_control_dict() {
        let f = parse_foam_file(CONTROL).unwrap();
        assert_eq!(f.body.get("endTime"), Some(&FoamValue::number(5i64)));
        assert_eq!(f.object(), Some("controlDict"));
    }

    #[test]
    fn header_only_file_has_empty_body() {
        let f = parse_foam_file("FoamFile { version 2.0; format ascii; class dictionary; object x; }").unwrap();
        assert!(f.body.is_empty());
    }

    #[test]
    fn header_errors() {
        assert_eq!(parse_foam_file("endTime 5;"), Err(FoamError::MissingHeader));
        assert_eq!(
            parse_foam_file("FoamFile { format binary; object U; }"),
            Err(FoamError::NonAsciiFormat("binary".into()))
        );
        assert_eq!(
            parse_foam_file("FoamFile { format ascii; }\na { b 1;\n"),
            Err(FoamError::UnbalancedBraces { line: 2 })
        );
    }

    #[test]
    fn field_values() {
        let f = parse_foam_file(
            "FoamFile { object U; }\n\
             dimensions [0 1 -1 0 0 0 0];\n\
             internalField uniform (0 0 0);\n\
             boundaryField { movingWall { type fixedValue; value uniform (1 0 0); } }",
        )
        .unwrap();
        assert_eq!(f.body.get("dimensions"), Some(&FoamValue::DimensionSet([0, 1, -1, 0, 0, 0, 0])));
        assert_eq!(
            f.body.get("internalField"),
            Some(&FoamValue::Seq(vec![FoamValue::atom("uniform"), FoamValue::vector(&[0.0, 0.0, 0.0])]))
        );
    }

    #[test]
    fn include_and_macros_are_raw() {
        let f = parse_foam_file(
            "FoamFile { object U; }\n#include \"initialConditions\"\ninternalField uniform $flowVelocity;\nx #calc \"2*$a\";",
        )
        .unwrap();
        assert_eq!(f.body.entries[0], DictEntry::Raw("#include \"initialConditions\"".into()));
        assert_eq!(
            f.body.get("internalField"),
            Some(&FoamValue::Seq(vec![FoamValue::atom("uniform"), FoamValue::Raw("$flowVelocity".into())]))
        );
        assert_eq!(f.body.get("x"), Some(&FoamValue::Raw("#calc \"2*$a\"".into())));
    }

    #[test]
    fn size_prefixed_lists() {
        let v = parse_value("nonuniform List<scalar> 3(1 2 3)").unwrap();
        let FoamValue::Seq(items) = v else { panic!() };
        assert_eq!(
            items[2],
            FoamValue::List(FoamList {
                size_prefix: true,
                items: vec![FoamValue::number(1i64), FoamValue::number(2i64), FoamValue::number(3i64)]
            })
        );
        // same line with a space: an arc point, not a prefix
        let v = parse_value("arc 0 3 (1 2 3)").unwrap();
        let FoamValue::Seq(items) = v else { panic!() };
        assert_eq!(items.len(), 4);
    }

    #[test]
    fn boundary_file_bare_list() {
        let f = parse_foam_file(
            "FoamFile { class polyBoundaryMesh; object boundary; }\n2\n(\n  a { type wall; nFaces 1; }\n  b { type empty; }\n)\n",
        )
        .unwrap();
        let b = f.body.lookup("b").unwrap().as_dict().unwrap();
        assert_eq!(b.word("type"), Some("empty"));
    }

    #[test]
    fn malformed_tail_becomes_raw() {
        let f = parse_foam_file("FoamFile { object x; }\na 1;\nb 2\n").unwrap();
        assert_eq!(f.body.get("a"), Some(&FoamValue::number(1i64)));
        assert_eq!(f.body.entries[1], DictEntry::Raw("b 2".into()));
    }

    #[test]
    fn nonstandard_dimensions_are_raw() {
        assert_eq!(parse_value("[0 2 -1 0 0]").unwrap(), FoamValue::Raw("[0 2 -1 0 0]".into()));
    }
}
