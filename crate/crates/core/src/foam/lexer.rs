use super::FoamError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum TokKind {
    /// Bare word: keywords, atoms, numbers, `$var`, `#directive`.
    Word,
    /// Double-quoted string, quotes included in the span.
    Str,
    /// Verbatim `#{ ... #}` block.
    Code,
    Punct(char),
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Token {
    pub kind: TokKind,
    pub start: usize,
    pub end: usize,
    pub line: usize,
}

impl Token {
    pub fn text<'a>(&self, src: &'a str) -> &'a str {
        &src[self.start..self.end]
    }

    pub fn is(&self, c: char) -> bool {
        self.kind == TokKind::Punct(c)
    }
}

fn is_delim(b: u8) -> bool {
    matches!(b, b';' | b'{' | b'}' | b'[' | b']' | b'"') || b.is_ascii_whitespace()
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, FoamError> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    let mut line = 1;

    while i < bytes.len() {
        let b = bytes[i];
        if b == b'\n' {
            line += 1;
            i += 1;
            continue;
        }
        if b.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if b == b'/' && bytes.get(i + 1) == Some(&b'/') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if b == b'/' && bytes.get(i + 1) == Some(&b'*') {
            let open_line = line;
            i += 2;
            loop {
                if i + 1 >= bytes.len() {
                    return Err(FoamError::UnterminatedToken { line: open_line });
                }
                if bytes[i] == b'*' && bytes[i + 1] == b'/' {
                    i += 2;
                    break;
                }
                if bytes[i] == b'\n' {
                    line += 1;
                }
                i += 1;
            }
            continue;
        }

        let start = i;
        let start_line = line;
        match b {
            b'#' if bytes.get(i + 1) == Some(&b'{') => {
                i += 2;
                loop {
                    if i + 1 >= bytes.len() {
                        return Err(FoamError::UnterminatedToken { line: start_line });
                    }
                    if bytes[i] == b'#' && bytes[i + 1] == b'}' {
                        i += 2;
                        break;
                    }
                    if bytes[i] == b'\n' {
                        line += 1;
                    }
                    i += 1;
                }
                toks.push(Token { kind: TokKind::Code, start, end: i, line: start_line });
            }
            b'"' => {
                i += 1;
                loop {
                    match bytes.get(i) {
                        None => return Err(FoamError::UnterminatedToken { line: start_line }),
                        Some(b'\\') => i += 2,
                        Some(b'"') => {
                            i += 1;
                            break;
                        }
                        Some(b'\n') => {
                            line += 1;
                            i += 1;
                        }
                        Some(_) => i += 1,
                    }
                }
                toks.push(Token { kind: TokKind::Str, start, end: i, line: start_line });
            }
            b';' | b'{' | b'}' | b'(' | b')' | b'[' | b']' => {
                i += 1;
                toks.push(Token { kind: TokKind::Punct(b as char), start, end: i, line });
            }
            _ => {
                i = scan_word(bytes, i);
                toks.push(Token { kind: TokKind::Word, start, end: i, line });
            }
        }
    }
    Ok(toks)
}

/// Words may carry balanced parentheses when they start with a letter,
/// e.g. `div(phi,U)` or `laplacian((1|A(U)),p)`.
fn scan_word(bytes: &[u8], start: usize) -> usize {
    let may_nest = bytes[start].is_ascii_alphabetic() || bytes[start] == b'_';
    let mut i = start;
    let mut depth = 0usize;
    let mut first_paren = None;
    while i < bytes.len() {
        let b = bytes[i];
        if depth == 0 && (is_delim(b) || b == b')') {
            break;
        }
        if depth > 0 && (b.is_ascii_whitespace() || matches!(b, b';' | b'{' | b'}')) {
            // unbalanced inside the word: split at the first parenthesis
            return first_paren.unwrap_or(i);
        }
        if b == b'(' {
            if !may_nest || i == start {
                break;
            }
            first_paren.get_or_insert(i);
            depth += 1;
        } else if b == b')' {
            depth -= 1;
        }
        i += 1;
    }
    if depth > 0 {
        return first_paren.unwrap_or(i);
    }
    i
}

/// Checks `{}`, `()` and `[]` nesting; reports the line of the offending token.
pub(crate) fn check_balance(toks: &[Token]) -> Result<(), FoamError> {
    let mut stack: Vec<(char, usize)> = Vec::new();
    for t in toks {
        if let TokKind::Punct(c) = t.kind {
            match c {
                '{' | '(' | '[' => stack.push((c, t.line)),
                '}' | ')' | ']' => {
                    let want = match c {
                        '}' => '{',
                        ')' => '(',
                        _ => '[',
                    };
                    match stack.pop() {
                        Some((open, _)) if open == want => {}
                        _ => return Err(FoamError::UnbalancedBraces { line: t.line }),
                    }
                }
                _ => {}
            }
        }
    }
    match stack.pop() {
        Some((_, line)) => Err(FoamError::UnbalancedBraces { line }),
        None => Ok(()),
    }
}
