//! Physical lines → logical statements.
//!
//! Open brackets, unterminated triple-quoted strings and trailing backslashes
//! join physical lines. Compound statements (`for`, `def`, `if`, ...) absorb
//! their indented body so that each top-level statement is one unit.

/// One top-level statement of a cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogicalStatement {
    /// 1-based physical line where the statement starts.
    pub line_id: u32,
    /// Statement text; a block keeps its body lines joined with `\n`.
    pub text: String,
    pub block: Option<BlockKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    Loop,
    Definition,
    Other,
}

#[derive(Debug, Clone)]
struct LogicalLine {
    first: usize,
    indent: usize,
    text: String,
}

#[derive(Default)]
struct ScanState {
    depth: i32,
    /// Open triple-quote delimiter, if any.
    in_triple: Option<&'static str>,
}

impl ScanState {
    /// Scans one physical line; returns true when the line ends with a
    /// backslash continuation.
    fn scan(&mut self, line: &str) -> bool {
        let bytes = line.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            if let Some(delim) = self.in_triple {
                match line[i..].find(delim) {
                    Some(n) => {
                        // skip escaped delimiters
                        let at = i + n;
                        if at > 0 && bytes[at - 1] == b'\\' {
                            i = at + 1;
                            continue;
                        }
                        i = at + 3;
                        self.in_triple = None;
                    }
                    None => return false,
                }
                continue;
            }
            match bytes[i] {
                b'#' => return false,
                b'(' | b'[' | b'{' => self.depth += 1,
                b')' | b']' | b'}' => self.depth -= 1,
                q @ (b'\'' | b'"') => {
                    if line[i..].starts_with("'''") || line[i..].starts_with("\"\"\"") {
                        self.in_triple = Some(if q == b'\'' { "'''" } else { "\"\"\"" });
                        i += 3;
                        continue;
                    }
                    let mut j = i + 1;
                    while j < bytes.len() && bytes[j] != q {
                        if bytes[j] == b'\\' {
                            j += 1;
                        }
                        j += 1;
                    }
                    i = j;
                }
                b'\\' if i + 1 == bytes.len() || line[i + 1..].trim().is_empty() => return true,
                _ => {}
            }
            i += 1;
        }
        false
    }

    fn open(&self) -> bool {
        self.depth > 0 || self.in_triple.is_some()
    }
}

fn indent_of(line: &str) -> usize {
    line.chars()
        .take_while(|c| *c == ' ' || *c == '\t')
        .map(|c| if c == '\t' { 4 } else { 1 })
        .sum()
}

fn is_blank_or_comment(line: &str) -> bool {
    let t = line.trim();
    t.is_empty() || t.starts_with('#')
}

fn logical_lines(lines: &[String]) -> Vec<LogicalLine> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        if is_blank_or_comment(&lines[i]) {
            i += 1;
            continue;
        }
        let first = i;
        let mut state = ScanState::default();
        let mut text = String::new();
        loop {
            let continued = state.scan(&lines[i]);
            text.push_str(&lines[i]);
            i += 1;
            if (!continued && !state.open()) || i >= lines.len() {
                break;
            }
            text.push('\n');
        }
        out.push(LogicalLine {
            first,
            indent: indent_of(&lines[first]),
            text,
        });
    }
    out
}

fn first_word(text: &str) -> &str {
    let t = text.trim_start();
    let end = t
        .find(|c: char| !(c.is_alphanumeric() || c == '_'))
        .unwrap_or(t.len());
    &t[..end]
}

fn block_kind(text: &str) -> Option<BlockKind> {
    let t = text.trim_start();
    if t.starts_with('@') {
        return Some(BlockKind::Definition);
    }
    match first_word(t) {
        "for" | "while" => Some(BlockKind::Loop),
        "async" => {
            let rest = t["async".len()..].trim_start();
            match first_word(rest) {
                "for" => Some(BlockKind::Loop),
                "def" => Some(BlockKind::Definition),
                "with" => Some(BlockKind::Other),
                _ => None,
            }
        }
        "def" | "class" => Some(BlockKind::Definition),
        "if" | "try" | "with" | "elif" | "else" | "except" | "finally" | "match" => {
            Some(BlockKind::Other)
        }
        _ => None,
    }
}

fn is_clause_continuation(text: &str) -> bool {
    matches!(first_word(text), "else" | "elif" | "except" | "finally")
}

/// Splits a cell into top-level statements.
pub fn split_statements(lines: &[String]) -> Vec<LogicalStatement> {
    let logical = logical_lines(lines);
    let mut out = Vec::new();
    let mut i = 0;
    while i < logical.len() {
        let head = &logical[i];
        let kind = block_kind(&head.text);
        let mut text = head.text.clone();
        i += 1;
        if let Some(kind) = kind {
            let decorator = head.text.trim_start().starts_with('@');
            while i < logical.len() {
                let next = &logical[i];
                let absorb = next.indent > head.indent
                    || (next.indent == head.indent
                        && (is_clause_continuation(&next.text)
                            || (decorator && matches!(block_kind(&next.text), Some(BlockKind::Definition)))));
                if !absorb {
                    break;
                }
                // blank and comment lines between body lines are preserved
                let prev_end = logical[i - 1].first + logical[i - 1].text.matches('\n').count();
                for gap in prev_end + 1..next.first {
                    text.push('\n');
                    text.push_str(&lines[gap]);
                }
                text.push('\n');
                text.push_str(&next.text);
                i += 1;
            }
            out.push(LogicalStatement {
                line_id: head.first as u32 + 1,
                text,
                block: Some(kind),
            });
        } else {
            out.push(LogicalStatement {
                line_id: head.first as u32 + 1,
                text,
                block: None,
            });
        }
    }
    out
}

/// Removes the common leading indentation of a block body.
pub fn dedent(lines: &[&str]) -> Vec<String> {
    let min = lines
        .iter()
        .filter(|l| !is_blank_or_comment(l))
        .map(|l| indent_of(l))
        .min()
        .unwrap_or(0);
    lines
        .iter()
        .map(|l| {
            let mut width = 0;
            let mut cut = 0;
            for (idx, c) in l.char_indices() {
                if width >= min || !(c == ' ' || c == '\t') {
                    cut = idx;
                    break;
                }
                width += if c == '\t' { 4 } else { 1 };
                cut = idx + c.len_utf8();
            }
            l[cut..].to_string()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lines(src: &str) -> Vec<String> {
        src.lines().map(str::to_string).collect()
    }

    #[test]
    fn brackets_join_physical_lines() {
        let stmts = split_statements(&lines("df = df.merge(\n    other,\n    on='k')\ndf.head()"));
        assert_eq!(stmts.len(), 2);
        assert_eq!(stmts[0].line_id, 1);
        assert_eq!(stmts[1].line_id, 4);
        assert_eq!(stmts[1].text, "df.head()");
    }

    #[test]
    fn backslash_and_triple_quotes_continue() {
        let stmts = split_statements(&lines("x = a + \\\n    b\ns = '''one\ntwo'''\ny = 1"));
        assert_eq!(
            stmts.iter().map(|s| s.line_id).collect::<Vec<_>>(),
            vec![1, 3, 5]
        );
    }

    #[test]
    fn blocks_absorb_their_bodies() {
        let src = "df = load()\nfor c in cols:\n    df[c] = df[c].fillna(0)\n\n    # note\n    n += 1\nelse:\n    pass\ndf.head()";
        let stmts = split_statements(&lines(src));
        assert_eq!(stmts.len(), 3);
        assert_eq!(stmts[1].block, Some(BlockKind::Loop));
        assert_eq!(stmts[1].line_id, 2);
        assert!(stmts[1].text.contains("n += 1"));
        assert!(stmts[1].text.contains("else:"));
        assert_eq!(stmts[2].line_id, 9);
    }

    #[test]
    fn comment_only_cells_are_empty() {
        assert!(split_statements(&lines("# just a note\n\n")).is_empty());
    }

    #[test]
    fn dedent_strips_common_prefix() {
        assert_eq!(dedent(&["    a", "      b", ""]), vec!["a", "  b", ""]);
    }
}
