//! Tokenizer for one logical line of the analysed scripting dialect.

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Name(String),
    Number(String),
    Str { value: String, fstring: bool },
    Op(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub offset: usize,
    pub message: String,
}

const OPS: &[&str] = &[
    "**=", "//=", ">>=", "<<=", "...", "->", ":=", "**", "//", "==", "!=", "<=", ">=", "<<", ">>",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "@=", "+", "-", "*", "/", "%", "@", "&", "|",
    "^", "~", "<", ">", "(", ")", "[", "]", "{", "}", ",", ":", ".", ";", "=",
];

fn is_name_start(c: char) -> bool {
    c == '_' || c.is_alphabetic()
}

fn is_name_char(c: char) -> bool {
    c == '_' || c.is_alphanumeric()
}

/// Returns the length of a string prefix (`r`, `f`, `rb`, ...) if `rest`
/// starts with one directly followed by a quote.
fn string_prefix_len(rest: &str) -> Option<usize> {
    let bytes = rest.as_bytes();
    let is_prefix = |b: u8| matches!(b.to_ascii_lowercase(), b'r' | b'b' | b'u' | b'f');
    let is_quote = |b: u8| b == b'\'' || b == b'"';
    match bytes {
        [q, ..] if is_quote(*q) => Some(0),
        [p, q, ..] if is_prefix(*p) && is_quote(*q) => Some(1),
        [p1, p2, q, ..] if is_prefix(*p1) && is_prefix(*p2) && is_quote(*q) => Some(2),
        _ => None,
    }
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, LexError> {
    let mut out = Vec::new();
    let mut i = 0;
    let bytes = src.as_bytes();
    while i < src.len() {
        let rest = &src[i..];
        let c = rest.chars().next().unwrap_or(' ');
        if c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\x0c' {
            i += c.len_utf8();
            continue;
        }
        if c == '\\' {
            // explicit line continuation
            let after = rest[1..].trim_start_matches([' ', '\t', '\r']);
            if after.starts_with('\n') || after.is_empty() {
                i += rest.len() - after.len();
                continue;
            }
            return Err(LexError {
                offset: i,
                message: "stray backslash".into(),
            });
        }
        if c == '#' {
            match rest.find('\n') {
                Some(n) => i += n,
                None => i = src.len(),
            }
            continue;
        }
        if let Some(plen) = string_prefix_len(rest) {
            let prefix = rest[..plen].to_ascii_lowercase();
            let (value, len) = lex_string(&rest[plen..], prefix.contains('r')).map_err(|m| LexError {
                offset: i,
                message: m,
            })?;
            out.push(Token {
                tok: Tok::Str {
                    value,
                    fstring: prefix.contains('f'),
                },
                start: i,
                end: i + plen + len,
            });
            i += plen + len;
            continue;
        }
        if is_name_start(c) {
            let len = rest
                .char_indices()
                .find(|&(_, ch)| !is_name_char(ch))
                .map(|(n, _)| n)
                .unwrap_or(rest.len());
            out.push(Token {
                tok: Tok::Name(rest[..len].to_string()),
                start: i,
                end: i + len,
            });
            i += len;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            let len = lex_number(rest);
            out.push(Token {
                tok: Tok::Number(rest[..len].to_string()),
                start: i,
                end: i + len,
            });
            i += len;
            continue;
        }
        match OPS.iter().find(|op| rest.starts_with(**op)) {
            Some(op) => {
                out.push(Token {
                    tok: Tok::Op(op),
                    start: i,
                    end: i + op.len(),
                });
                i += op.len();
            }
            None => {
                return Err(LexError {
                    offset: i,
                    message: format!("unexpected character {c:?}"),
                })
            }
        }
    }
    Ok(out)
}

fn lex_number(rest: &str) -> usize {
    let bytes = rest.as_bytes();
    let mut n = 0;
    if rest.len() > 1 && bytes[0] == b'0' && matches!(bytes[1] | 0x20, b'x' | b'o' | b'b') {
        n = 2;
        while n < bytes.len() && (bytes[n].is_ascii_hexdigit() || bytes[n] == b'_') {
            n += 1;
        }
        return n;
    }
    while n < bytes.len() && (bytes[n].is_ascii_digit() || bytes[n] == b'_') {
        n += 1;
    }
    if n < bytes.len() && bytes[n] == b'.' {
        n += 1;
        while n < bytes.len() && (bytes[n].is_ascii_digit() || bytes[n] == b'_') {
            n += 1;
        }
    }
    if n < bytes.len() && (bytes[n] | 0x20) == b'e' {
        let mut m = n + 1;
        if m < bytes.len() && (bytes[m] == b'+' || bytes[m] == b'-') {
            m += 1;
        }
        if m < bytes.len() && bytes[m].is_ascii_digit() {
            n = m;
            while n < bytes.len() && bytes[n].is_ascii_digit() {
                n += 1;
            }
        }
    }
    if n < bytes.len() && (bytes[n] | 0x20) == b'j' {
        n += 1;
    }
    n
}

/// Lexes a quoted string starting at the opening quote. Returns the decoded
/// value and the consumed byte length.
fn lex_string(s: &str, raw: bool) -> Result<(String, usize), String> {
    let quote = s.as_bytes()[0];
    let triple = s.len() >= 3 && s.as_bytes()[1] == quote && s.as_bytes()[2] == quote;
    let open = if triple { 3 } else { 1 };
    let mut value = String::new();
    let mut chars = s[open..].char_indices().peekable();
    while let Some((idx, ch)) = chars.next() {
        let pos = open + idx;
        if ch as u32 == quote as u32 {
            if !triple {
                return Ok((value, pos + 1));
            }
            let b = s.as_bytes();
            if pos + 2 < s.len() && b[pos + 1] == quote && b[pos + 2] == quote {
                return Ok((value, pos + 3));
            }
            value.push(ch);
            continue;
        }
        if ch == '\n' && !triple {
            return Err("unterminated string literal".into());
        }
        if ch == '\\' {
            let Some((_, next)) = chars.next() else {
                return Err("unterminated string literal".into());
            };
            if raw {
                value.push('\\');
                value.push(next);
                continue;
            }
            match next {
                'n' => value.push('\n'),
                't' => value.push('\t'),
                'r' => value.push('\r'),
                '0' => value.push('\0'),
                '\\' => value.push('\\'),
                '\'' => value.push('\''),
                '"' => value.push('"'),
                '\n' => {}
                'x' | 'u' | 'U' => {
                    let width = match next {
                        'x' => 2,
                        'u' => 4,
                        _ => 8,
                    };
                    let mut hex = String::new();
                    for _ in 0..width {
                        match chars.next() {
                            Some((_, h)) if h.is_ascii_hexdigit() => hex.push(h),
                            _ => return Err("truncated escape".into()),
                        }
                    }
                    let code = u32::from_str_radix(&hex, 16).map_err(|e| e.to_string())?;
                    value.push(char::from_u32(code).ok_or("invalid code point")?);
                }
                other => {
                    value.push('\\');
                    value.push(other);
                }
            }
            continue;
        }
        value.push(ch);
    }
    Err("unterminated string literal".into())
}
