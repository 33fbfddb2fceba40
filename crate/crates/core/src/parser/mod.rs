//! Statement parsing into a normalised IR.
//!
//! Supported: assignments (plain, tuple, chained, augmented, subscript and
//! attribute stores), attribute/method chains, subscripts, top-level calls,
//! binary/unary/comparison operators and bare expressions. `for`/`while`
//! blocks become one opaque statement; function and class definitions are
//! recorded but not inlined. Anything else is [`ParseStatus::Unparsed`].

pub mod ast;
pub mod lexer;
pub mod lines;

use serde::{Deserialize, Serialize};

use ast::{CallArg, Expr, Parser};
use lines::{BlockKind, LogicalStatement};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseStatus {
    Parsed,
    Unparsed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatementKind {
    Assign,
    AugAssign,
    Expr,
    Import,
    Definition,
    Loop,
    Other,
}

/// What a call is applied to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Receiver {
    /// A named variable.
    Var(String),
    /// The result of the call at this index in the same statement.
    Prev(usize),
    /// Free function call (`display(df)`, `len(x)`).
    None,
}

/// Summary of an argument expression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArgValue {
    Str { value: String },
    Number { value: String },
    Bool { value: bool },
    None,
    Name { name: String },
    List { items: Vec<ArgValue> },
    Dict { entries: Vec<(ArgValue, ArgValue)> },
    Slice { raw: String },
    /// Boolean row selector; `columns` are the column literals it tests.
    Mask { raw: String, columns: Vec<String>, names: Vec<String> },
    Lambda { raw: String },
    /// Result of an earlier call in the same statement.
    CallResult { index: usize },
    Expr { raw: String, columns: Vec<String>, names: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kwarg {
    pub name: String,
    pub value: ArgValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicCall {
    pub receiver: Receiver,
    /// Attribute path between the receiver and the call (`str`, `loc`, ...).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accessor: Option<String>,
    pub func_name: String,
    pub args: Vec<ArgValue>,
    pub kwargs: Vec<Kwarg>,
    pub column_refs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatementIR {
    pub cell_epoch: u32,
    pub line_id: u32,
    pub kind: StatementKind,
    pub targets: Vec<String>,
    pub calls: Vec<AtomicCall>,
    /// Variables read by the statement, in source order.
    pub reads: Vec<String>,
    pub display_expr: bool,
    /// The receiver was mutated through an in-place keyword; it is recorded
    /// as both input and target.
    #[serde(default)]
    pub inplace: bool,
    pub raw: String,
    pub parse_status: ParseStatus,
}

impl AtomicCall {
    pub fn kwarg(&self, name: &str) -> Option<&ArgValue> {
        self.kwargs.iter().find(|k| k.name == name).map(|k| &k.value)
    }

    /// Registry lookup keys, most specific first.
    pub fn lookup_keys(&self) -> Vec<String> {
        let mut keys = Vec::new();
        if let Some(acc) = &self.accessor {
            keys.push(format!("{acc}.{}", self.func_name));
            if let Some(last) = acc.rsplit('.').next().filter(|l| *l != acc) {
                keys.push(format!("{last}.{}", self.func_name));
            }
        }
        keys.push(self.func_name.clone());
        keys
    }
}

impl ArgValue {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            ArgValue::Str { value } => Some(value),
            _ => None,
        }
    }

    pub fn as_str_list(&self) -> Option<Vec<&str>> {
        match self {
            ArgValue::List { items } if !items.is_empty() => items.iter().map(ArgValue::as_str).collect(),
            _ => None,
        }
    }

    pub fn is_true(&self) -> bool {
        matches!(self, ArgValue::Bool { value: true })
    }

    /// Variable names referenced by the argument.
    pub fn names(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_names(&mut out);
        out
    }

    fn collect_names<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            ArgValue::Name { name } => out.push(name),
            ArgValue::List { items } => items.iter().for_each(|i| i.collect_names(out)),
            ArgValue::Dict { entries } => entries.iter().for_each(|(k, v)| {
                k.collect_names(out);
                v.collect_names(out);
            }),
            ArgValue::Mask { names, .. } | ArgValue::Expr { names, .. } => {
                out.extend(names.iter().map(String::as_str))
            }
            _ => {}
        }
    }
}

impl StatementIR {
    fn unparsed(raw: &str, cell_epoch: u32, line_id: u32) -> Self {
        StatementIR {
            cell_epoch,
            line_id,
            kind: StatementKind::Other,
            targets: Vec::new(),
            calls: Vec::new(),
            reads: Vec::new(),
            display_expr: false,
            inplace: false,
            raw: raw.to_string(),
            parse_status: ParseStatus::Unparsed,
        }
    }

    pub fn is_parsed(&self) -> bool {
        self.parse_status == ParseStatus::Parsed
    }
}

/// Returns the ordered call chain of a statement; chain element `i+1` has
/// `Receiver::Prev(i)` when it applies to the previous result.
pub fn decompose_chain(stmt: &StatementIR) -> Vec<AtomicCall> {
    stmt.calls.clone()
}

/// Parses every statement of a cell execution.
pub fn parse_cell(source_lines: &[String], cell_epoch: u32) -> Vec<StatementIR> {
    lines::split_statements(source_lines)
        .into_iter()
        .map(|stmt| parse_logical(&stmt, cell_epoch))
        .collect()
}

fn parse_logical(stmt: &LogicalStatement, cell_epoch: u32) -> StatementIR {
    match stmt.block {
        None => parse_statement(&stmt.text, cell_epoch, stmt.line_id),
        Some(BlockKind::Loop) => parse_loop(&stmt.text, cell_epoch, stmt.line_id),
        Some(BlockKind::Definition) => parse_definition(&stmt.text, cell_epoch, stmt.line_id),
        Some(BlockKind::Other) => StatementIR::unparsed(&stmt.text, cell_epoch, stmt.line_id),
    }
}

/// Parses one logical line. Never fails: unsupported syntax yields an
/// `Unparsed` statement that still occupies its line id.
pub fn parse_statement(raw: &str, cell_epoch: u32, line_id: u32) -> StatementIR {
    let trimmed = raw.trim();
    if trimmed.starts_with('%') || trimmed.starts_with('!') {
        return StatementIR::unparsed(raw, cell_epoch, line_id);
    }
    let Ok(toks) = lexer::tokenize(raw) else {
        return StatementIR::unparsed(raw, cell_epoch, line_id);
    };
    let toks: &[lexer::Token] = match toks.last() {
        Some(t) if t.tok == lexer::Tok::Op(";") => &toks[..toks.len() - 1],
        _ => &toks,
    };
    if toks.is_empty() {
        return StatementIR::unparsed(raw, cell_epoch, line_id);
    }
    if let lexer::Tok::Name(first) = &toks[0].tok {
        match first.as_str() {
            "import" | "from" => return parse_import(toks, raw, cell_epoch, line_id),
            kw if ast::is_keyword(kw) && !matches!(kw, "not" | "lambda" | "None" | "True" | "False" | "await") => {
                return StatementIR::unparsed(raw, cell_epoch, line_id)
            }
            _ => {}
        }
    }
    match parse_simple(toks) {
        Some(simple) => lower_statement(simple, raw, cell_epoch, line_id),
        None => StatementIR::unparsed(raw, cell_epoch, line_id),
    }
}

enum Simple {
    Assign { targets: Vec<Expr>, value: Expr },
    AugAssign { target: Expr, op: &'static str, value: Expr },
    Expr(Expr),
}

fn parse_simple(toks: &[lexer::Token]) -> Option<Simple> {
    let mut p = Parser::new(toks);
    let first = p.parse_testlist().ok()?;
    if p.at_end() {
        return Some(Simple::Expr(first));
    }
    if p.peek_op("=") {
        let mut exprs = vec![first];
        while p.eat_op("=") {
            exprs.push(p.parse_testlist().ok()?);
        }
        if !p.at_end() {
            return None;
        }
        let value = exprs.pop()?;
        return Some(Simple::Assign { targets: exprs, value });
    }
    let op = p.next_op()?;
    let bin = op.strip_suffix('=').filter(|b| !b.is_empty() && !matches!(op, "==" | "<=" | ">=" | "!="))?;
    let value = p.parse_testlist().ok()?;
    if !p.at_end() {
        return None;
    }
    let bin: &'static str = ["+", "-", "*", "/", "//", "%", "**", "@", "&", "|", "^", "<<", ">>"]
        .into_iter()
        .find(|b| *b == bin)?;
    Some(Simple::AugAssign { target: first, op: bin, value })
}

fn parse_import(toks: &[lexer::Token], raw: &str, cell_epoch: u32, line_id: u32) -> StatementIR {
    use lexer::Tok;
    let names: Vec<&str> = toks
        .iter()
        .map(|t| match &t.tok {
            Tok::Name(n) => n.as_str(),
            Tok::Op(o) => o,
            _ => "",
        })
        .collect();
    let mut targets = Vec::new();
    let body: &[&str] = if names[0] == "from" {
        match names.iter().position(|n| *n == "import") {
            Some(i) => &names[i + 1..],
            None => return StatementIR::unparsed(raw, cell_epoch, line_id),
        }
    } else {
        &names[1..]
    };
    let from = names[0] == "from";
    for clause in body.split(|n| *n == ",") {
        let clause: Vec<&str> = clause.iter().copied().filter(|n| !matches!(*n, "(" | ")")).collect();
        match clause.as_slice() {
            [.., "as", alias] => targets.push(alias.to_string()),
            [first, ..] if *first != "*" => {
                // `import a.b` binds `a`; `from m import a` binds `a`
                targets.push(if from { clause.last().unwrap_or(first) } else { first }.to_string())
            }
            _ => {}
        }
    }
    if targets.is_empty() {
        return StatementIR::unparsed(raw, cell_epoch, line_id);
    }
    StatementIR {
        kind: StatementKind::Import,
        targets,
        parse_status: ParseStatus::Parsed,
        ..StatementIR::unparsed(raw, cell_epoch, line_id)
    }
}

fn parse_definition(text: &str, cell_epoch: u32, line_id: u32) -> StatementIR {
    let name = text.lines().find_map(|l| {
        let t = l.trim_start();
        let t = t.strip_prefix("async ").unwrap_or(t).trim_start();
        let rest = t.strip_prefix("def ").or_else(|| t.strip_prefix("class "))?;
        let end = rest.find(|c: char| !(c.is_alphanumeric() || c == '_')).unwrap_or(rest.len());
        Some(rest[..end].to_string())
    });
    match name {
        Some(name) if !name.is_empty() => StatementIR {
            kind: StatementKind::Definition,
            targets: vec![name],
            parse_status: ParseStatus::Parsed,
            ..StatementIR::unparsed(text, cell_epoch, line_id)
        },
        _ => StatementIR::unparsed(text, cell_epoch, line_id),
    }
}

/// A loop is one opaque statement: its targets are every variable assigned
/// inside, its reads every variable read inside.
fn parse_loop(text: &str, cell_epoch: u32, line_id: u32) -> StatementIR {
    let mut physical: Vec<&str> = text.lines().collect();
    let header_src = physical.remove(0);
    let Some(colon) = top_level_colon(header_src) else {
        return StatementIR::unparsed(text, cell_epoch, line_id);
    };
    let header = &header_src[..colon];
    let inline_body = header_src[colon + 1..].trim();

    let mut targets: Vec<String> = Vec::new();
    let mut reads: Vec<String> = Vec::new();
    let mut calls: Vec<AtomicCall> = Vec::new();

    let header_trim = header.trim_start();
    let header_trim = header_trim.strip_prefix("async").map(str::trim_start).unwrap_or(header_trim);
    let Ok(toks) = lexer::tokenize(header_trim) else {
        return StatementIR::unparsed(text, cell_epoch, line_id);
    };
    let mut p = Parser::new(&toks);
    if p.eat_kw("for") {
        let Ok(target) = p.parse_testlist() else {
            return StatementIR::unparsed(text, cell_epoch, line_id);
        };
        let target = match target {
            Expr::Compare(left, rest) if rest.len() == 1 && rest[0].0 == "in" => {
                // `for x in xs` parses as a comparison; split it back apart
                let iter = rest.into_iter().next().map(|(_, e)| e).unwrap_or(Expr::NoneLit);
                push_unique(&mut reads, iter.names());
                *left
            }
            Expr::Tuple(mut items) => {
                // `for a, b in pairs`: the last item carries the `in` comparison
                match items.pop() {
                    Some(Expr::Compare(left, rest)) if rest.len() == 1 && rest[0].0 == "in" => {
                        let iter = rest.into_iter().next().map(|(_, e)| e).unwrap_or(Expr::NoneLit);
                        push_unique(&mut reads, iter.names());
                        items.push(*left);
                        Expr::Tuple(items)
                    }
                    _ => return StatementIR::unparsed(text, cell_epoch, line_id),
                }
            }
            _ => return StatementIR::unparsed(text, cell_epoch, line_id),
        };
        let mut names = Vec::new();
        collect_store_names(&target, &mut names);
        push_unique(&mut targets, names);
    } else if p.eat_kw("while") {
        let Ok(cond) = p.parse_test() else {
            return StatementIR::unparsed(text, cell_epoch, line_id);
        };
        push_unique(&mut reads, cond.names());
    } else {
        return StatementIR::unparsed(text, cell_epoch, line_id);
    }

    let mut body_lines: Vec<String> = Vec::new();
    if !inline_body.is_empty() {
        body_lines.push(inline_body.to_string());
    }
    body_lines.extend(lines::dedent(&physical));
    // clause keywords (`else:`) are dropped but their bodies kept
    let body_lines: Vec<String> = body_lines
        .into_iter()
        .filter(|l| !matches!(l.trim(), "else:"))
        .collect();
    let body_lines = lines::dedent(&body_lines.iter().map(String::as_str).collect::<Vec<_>>());
    for inner in parse_cell(&body_lines, cell_epoch) {
        push_unique(&mut targets, inner.targets.clone());
        push_unique(&mut reads, inner.reads.clone());
        let offset = calls.len();
        calls.extend(inner.calls.into_iter().map(|mut c| {
            if let Receiver::Prev(i) = c.receiver {
                c.receiver = Receiver::Prev(i + offset);
            }
            shift_results(&mut c.args, offset);
            for k in &mut c.kwargs {
                shift_results(std::slice::from_mut(&mut k.value), offset);
            }
            c
        }));
    }

    StatementIR {
        cell_epoch,
        line_id,
        kind: StatementKind::Loop,
        targets,
        calls,
        reads,
        display_expr: false,
        inplace: false,
        raw: text.to_string(),
        parse_status: ParseStatus::Parsed,
    }
}

fn shift_results(args: &mut [ArgValue], offset: usize) {
    for a in args {
        match a {
            ArgValue::CallResult { index } => *index += offset,
            ArgValue::List { items } => shift_results(items, offset),
            _ => {}
        }
    }
}

fn top_level_colon(line: &str) -> Option<usize> {
    let toks = lexer::tokenize(line).ok()?;
    let mut depth = 0i32;
    for t in &toks {
        match &t.tok {
            lexer::Tok::Op("(" | "[" | "{") => depth += 1,
            lexer::Tok::Op(")" | "]" | "}") => depth -= 1,
            lexer::Tok::Op(":") if depth == 0 => return Some(t.start),
            _ => {}
        }
    }
    None
}

fn push_unique(out: &mut Vec<String>, items: impl IntoIterator<Item = String>) {
    for item in items {
        if !out.contains(&item) {
            out.push(item);
        }
    }
}

/// Names bound by an assignment target.
fn collect_store_names(target: &Expr, out: &mut Vec<String>) {
    match target {
        Expr::Name(n) => {
            if !out.contains(n) {
                out.push(n.clone())
            }
        }
        Expr::Tuple(items) | Expr::List(items) => items.iter().for_each(|i| collect_store_names(i, out)),
        Expr::Starred(e) => collect_store_names(e, out),
        Expr::Subscript(..) | Expr::Attr(..) => {
            if let Some(root) = target.root_name() {
                if !out.iter().any(|o| o == root) {
                    out.push(root.to_string());
                }
            }
        }
        _ => {}
    }
}

/// Keyword arguments whose string values name columns.
const COLUMN_KWARGS: &[&str] = &[
    "by", "subset", "columns", "column", "on", "left_on", "right_on", "id_vars", "value_vars",
    "values", "index", "keys", "x", "y", "hue", "var_name", "value_name",
];

/// Methods whose positional string arguments name columns, with the positions.
const COLUMN_POSITIONAL: &[(&str, &[usize])] = &[
    ("groupby", &[0]),
    ("sort_values", &[0]),
    ("set_index", &[0]),
    ("drop_duplicates", &[0]),
    ("drop", &[0]),
    ("dropna", &[]),
    ("pivot", &[0, 1, 2]),
    ("pivot_table", &[0, 1, 2]),
    ("melt", &[0, 1]),
    ("explode", &[0]),
    ("nlargest", &[1]),
    ("nsmallest", &[1]),
    ("pop", &[0]),
    ("value_counts", &[0]),
    ("get", &[0]),
    ("filter", &[0]),
    ("insert", &[1]),
];

/// Methods whose dict arguments are keyed by column name.
const DICT_KEYED: &[&str] = &["rename", "fillna", "astype", "agg", "aggregate", "round", "replace"];

const MASK_METHODS: &[&str] = &[
    "isin", "notna", "notnull", "isna", "isnull", "between", "duplicated", "contains",
    "startswith", "endswith", "match", "eq", "ne", "gt", "lt", "ge", "le",
];

/// String keys of subscripts anywhere inside `e`.
fn subscript_columns(e: &Expr) -> Vec<String> {
    let mut out = Vec::new();
    e.walk(&mut |node| {
        if let Expr::Subscript(_, key) = node {
            let parts: Vec<&Expr> = match key.as_ref() {
                Expr::Tuple(items) => items.iter().collect(),
                k => vec![k],
            };
            for part in parts {
                if let Some(s) = part.as_str_literal() {
                    out.push(s.to_string());
                } else if let Some(list) = part.as_str_list() {
                    out.extend(list);
                }
            }
        }
    });
    let mut dedup = Vec::new();
    push_unique(&mut dedup, out);
    dedup
}

fn is_mask(e: &Expr) -> bool {
    match e {
        Expr::Compare(..) => true,
        Expr::Unary("~" | "not", inner) => is_mask(inner) || is_chain(inner),
        Expr::BinOp(l, "&" | "|" | "^", r) => is_mask(l) || is_mask(r),
        Expr::BoolOp(_, items) => items.iter().any(is_mask),
        Expr::Call(func, _) => matches!(func.as_ref(), Expr::Attr(_, m) if MASK_METHODS.contains(&m.as_str())),
        _ => false,
    }
}

fn is_chain(e: &Expr) -> bool {
    matches!(
        e,
        Expr::Name(_) | Expr::Attr(..) | Expr::Call(..) | Expr::Subscript(..) | Expr::BinOp(..) | Expr::Unary(..) | Expr::Compare(..)
    )
}

fn summarize(e: &Expr) -> ArgValue {
    match e {
        Expr::Str { value, fstring: false } => ArgValue::Str { value: value.clone() },
        Expr::Num(n) => ArgValue::Number { value: n.clone() },
        Expr::Unary("-", inner) if matches!(inner.as_ref(), Expr::Num(_)) => ArgValue::Number { value: e.to_string().trim_matches(|c| c == '(' || c == ')').to_string() },
        Expr::Bool(b) => ArgValue::Bool { value: *b },
        Expr::NoneLit => ArgValue::None,
        Expr::Name(n) => ArgValue::Name { name: n.clone() },
        Expr::List(items) | Expr::Tuple(items) | Expr::Set(items) => ArgValue::List {
            items: items.iter().map(summarize).collect(),
        },
        Expr::Dict(pairs) => ArgValue::Dict {
            entries: pairs.iter().map(|(k, v)| (summarize(k), summarize(v))).collect(),
        },
        Expr::Slice(..) => ArgValue::Slice { raw: e.to_string() },
        Expr::Lambda(..) => ArgValue::Lambda { raw: e.to_string() },
        _ if is_mask(e) => ArgValue::Mask {
            raw: e.to_string(),
            columns: subscript_columns(e),
            names: e.names(),
        },
        _ => ArgValue::Expr {
            raw: e.to_string(),
            columns: subscript_columns(e),
            names: e.names(),
        },
    }
}

fn canonical_binop(op: &str) -> &'static str {
    match op {
        "+" => "add",
        "-" => "sub",
        "*" => "mul",
        "/" => "truediv",
        "//" => "floordiv",
        "%" => "mod",
        "**" => "pow",
        "@" => "matmul",
        "&" => "and_",
        "|" => "or_",
        "^" => "xor",
        "<<" => "lshift",
        ">>" => "rshift",
        _ => "binop",
    }
}

fn canonical_cmp(op: &str) -> &'static str {
    match op {
        "==" => "eq",
        "!=" => "ne",
        "<" => "lt",
        "<=" => "le",
        ">" => "gt",
        ">=" => "ge",
        "in" => "contains",
        "not in" => "not_contains",
        "is" => "is_",
        _ => "is_not",
    }
}

fn canonical_unary(op: &str) -> &'static str {
    match op {
        "-" => "neg",
        "+" => "pos",
        "~" => "invert",
        _ => "not_",
    }
}

enum Operand {
    Var(String),
    Prev(usize),
    Value(ArgValue),
}

impl Operand {
    fn into_receiver(self) -> (Receiver, Option<ArgValue>) {
        match self {
            Operand::Var(v) => (Receiver::Var(v), None),
            Operand::Prev(i) => (Receiver::Prev(i), None),
            Operand::Value(a) => (Receiver::None, Some(a)),
        }
    }

    fn into_arg(self) -> ArgValue {
        match self {
            Operand::Var(name) => ArgValue::Name { name },
            Operand::Prev(index) => ArgValue::CallResult { index },
            Operand::Value(a) => a,
        }
    }
}

#[derive(Default)]
struct Lowerer {
    calls: Vec<AtomicCall>,
}

impl Lowerer {
    fn push(&mut self, call: AtomicCall) -> Operand {
        self.calls.push(call);
        Operand::Prev(self.calls.len() - 1)
    }

    /// Lowers `e`, returning its operand and any trailing attribute path not
    /// yet consumed by a call or subscript.
    fn lower_with_attrs(&mut self, e: &Expr) -> (Operand, Vec<String>) {
        match e {
            Expr::Attr(base, name) => {
                let (op, mut attrs) = self.lower_with_attrs(base);
                attrs.push(name.clone());
                (op, attrs)
            }
            _ => (self.lower(e), Vec::new()),
        }
    }

    fn lower(&mut self, e: &Expr) -> Operand {
        match e {
            Expr::Name(n) => Operand::Var(n.clone()),
            Expr::Attr(..) => self.lower_with_attrs(e).0,
            Expr::Call(func, args) => self.lower_call(func, args),
            Expr::Subscript(base, key) => {
                let (op, attrs) = self.lower_with_attrs(base);
                let (receiver, lead) = op.into_receiver();
                let parts = key_parts(key);
                let mut arg_values: Vec<ArgValue> = lead.into_iter().collect();
                arg_values.extend(parts.iter().map(|p| summarize(p)));
                let column_refs = key_columns(&parts);
                self.push(AtomicCall {
                    receiver,
                    accessor: accessor(&attrs),
                    func_name: "getitem".into(),
                    args: arg_values,
                    kwargs: Vec::new(),
                    column_refs,
                })
            }
            Expr::BinOp(l, op, r) => {
                let func_name = canonical_binop(op).to_string();
                let mut refs = subscript_columns(r);
                if is_chain(l) {
                    let receiver = self.lower(l).into_receiver();
                    let mut args: Vec<ArgValue> = receiver.1.into_iter().collect();
                    args.push(summarize(r));
                    self.push(AtomicCall {
                        receiver: receiver.0,
                        accessor: None,
                        func_name,
                        args,
                        kwargs: Vec::new(),
                        column_refs: refs,
                    })
                } else {
                    let mut all = subscript_columns(l);
                    all.append(&mut refs);
                    let mut column_refs = Vec::new();
                    push_unique(&mut column_refs, all);
                    self.push(AtomicCall {
                        receiver: Receiver::None,
                        accessor: None,
                        func_name,
                        args: vec![summarize(l), summarize(r)],
                        kwargs: Vec::new(),
                        column_refs,
                    })
                }
            }
            Expr::Unary(op, inner) if is_chain(inner) => {
                let (receiver, lead) = self.lower(inner).into_receiver();
                self.push(AtomicCall {
                    receiver,
                    accessor: None,
                    func_name: canonical_unary(op).into(),
                    args: lead.into_iter().collect(),
                    kwargs: Vec::new(),
                    column_refs: Vec::new(),
                })
            }
            Expr::Compare(l, rest) if is_chain(l) => {
                let (receiver, lead) = self.lower(l).into_receiver();
                let mut args: Vec<ArgValue> = lead.into_iter().collect();
                let mut refs = Vec::new();
                for (_, r) in rest {
                    args.push(summarize(r));
                    push_unique(&mut refs, subscript_columns(r));
                }
                self.push(AtomicCall {
                    receiver,
                    accessor: None,
                    func_name: canonical_cmp(rest[0].0).into(),
                    args,
                    kwargs: Vec::new(),
                    column_refs: refs,
                })
            }
            _ => Operand::Value(summarize(e)),
        }
    }

    fn lower_call(&mut self, func: &Expr, args: &[CallArg]) -> Operand {
        let (receiver, lead, accessor_path, func_name) = match func {
            Expr::Attr(base, method) => {
                let (op, attrs) = self.lower_with_attrs(base);
                let (receiver, lead) = op.into_receiver();
                (receiver, lead, accessor(&attrs), method.clone())
            }
            Expr::Name(f) => (Receiver::None, None, None, f.clone()),
            other => {
                let (receiver, lead) = self.lower(other).into_receiver();
                (receiver, lead, None, "call".to_string())
            }
        };
        let mut positional: Vec<ArgValue> = lead.into_iter().collect();
        let mut kwargs = Vec::new();
        let mut refs: Vec<String> = Vec::new();
        let positions = COLUMN_POSITIONAL
            .iter()
            .find(|(f, _)| *f == func_name)
            .map(|(_, p)| *p)
            .unwrap_or(&[]);
        let dict_keyed = DICT_KEYED.contains(&func_name.as_str());
        let mut pos_index = 0;
        for arg in args {
            push_unique(&mut refs, subscript_columns(&arg.value));
            if dict_keyed {
                push_unique(&mut refs, dict_columns(&func_name, &arg.value));
            }
            match (&arg.keyword, arg.star) {
                (Some(k), _) => {
                    if COLUMN_KWARGS.contains(&k.as_str()) {
                        push_unique(&mut refs, literal_columns(&arg.value));
                    }
                    kwargs.push(Kwarg { name: k.clone(), value: summarize(&arg.value) });
                }
                (None, 0) => {
                    if positions.contains(&pos_index) {
                        push_unique(&mut refs, literal_columns(&arg.value));
                    }
                    positional.push(summarize(&arg.value));
                    pos_index += 1;
                }
                (None, _) => positional.push(summarize(&arg.value)),
            }
        }
        self.push(AtomicCall {
            receiver,
            accessor: accessor_path,
            func_name,
            args: positional,
            kwargs,
            column_refs: refs,
        })
    }
}

fn accessor(attrs: &[String]) -> Option<String> {
    if attrs.is_empty() {
        None
    } else {
        Some(attrs.join("."))
    }
}

fn key_parts(key: &Expr) -> Vec<&Expr> {
    match key {
        Expr::Tuple(items) => items.iter().collect(),
        k => vec![k],
    }
}

fn key_columns(parts: &[&Expr]) -> Vec<String> {
    let mut refs = Vec::new();
    for part in parts {
        if let Some(s) = part.as_str_literal() {
            push_unique(&mut refs, [s.to_string()]);
        } else if let Some(list) = part.as_str_list() {
            push_unique(&mut refs, list);
        } else {
            push_unique(&mut refs, subscript_columns(part));
        }
    }
    refs
}

fn literal_columns(e: &Expr) -> Vec<String> {
    if let Some(s) = e.as_str_literal() {
        vec![s.to_string()]
    } else {
        e.as_str_list().unwrap_or_default()
    }
}

fn dict_columns(func_name: &str, e: &Expr) -> Vec<String> {
    let Expr::Dict(pairs) = e else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for (k, v) in pairs {
        // replace({'col': {...}}) is column-keyed; replace({'a': 'b'}) is value-keyed
        if func_name == "replace" && !matches!(v, Expr::Dict(_)) {
            continue;
        }
        if let Some(s) = k.as_str_literal() {
            out.push(s.to_string());
        }
        if func_name == "rename" {
            if let Some(s) = v.as_str_literal() {
                out.push(s.to_string());
            }
        }
    }
    out
}

fn lower_statement(simple: Simple, raw: &str, cell_epoch: u32, line_id: u32) -> StatementIR {
    let mut lw = Lowerer::default();
    let mut targets = Vec::new();
    let mut reads = Vec::new();
    let mut display_expr = false;
    let mut inplace = false;
    let kind;

    match simple {
        Simple::Assign { targets: stores, value } => {
            kind = StatementKind::Assign;
            push_unique(&mut reads, value.names());
            let result = lw.lower(&value).into_arg();
            for store in &stores {
                lower_store(&mut lw, store, &result, &mut targets, &mut reads);
            }
        }
        Simple::AugAssign { target, op, value } => {
            kind = StatementKind::AugAssign;
            push_unique(&mut reads, target.names());
            push_unique(&mut reads, value.names());
            let current = lw.lower(&target);
            let (receiver, lead) = current.into_receiver();
            let mut args: Vec<ArgValue> = lead.into_iter().collect();
            args.push(lw.lower(&value).into_arg());
            let column_refs = subscript_columns(&value);
            let result = lw.push(AtomicCall {
                receiver,
                accessor: None,
                func_name: canonical_binop(op).into(),
                args,
                kwargs: Vec::new(),
                column_refs,
            });
            let result = result.into_arg();
            match &target {
                Expr::Name(n) => targets.push(n.clone()),
                _ => lower_store(&mut lw, &target, &result, &mut targets, &mut reads),
            }
        }
        Simple::Expr(expr) => {
            kind = StatementKind::Expr;
            push_unique(&mut reads, expr.names());
            match &expr {
                Expr::Name(n) => {
                    // a bare name displays the variable
                    lw.push(AtomicCall {
                        receiver: Receiver::Var(n.clone()),
                        accessor: None,
                        func_name: "display".into(),
                        args: Vec::new(),
                        kwargs: Vec::new(),
                        column_refs: Vec::new(),
                    });
                }
                _ => {
                    lw.lower(&expr);
                }
            }
            let mutated = lw.calls.iter().find(|c| c.kwarg("inplace").is_some_and(ArgValue::is_true));
            if let Some(call) = mutated {
                inplace = true;
                if let Some(root) = chain_root(&lw.calls, call) {
                    targets.push(root);
                }
            } else {
                display_expr = true;
            }
        }
    }

    if lw.calls.is_empty() && targets.is_empty() {
        return StatementIR::unparsed(raw, cell_epoch, line_id);
    }
    StatementIR {
        cell_epoch,
        line_id,
        kind,
        targets,
        calls: lw.calls,
        reads,
        display_expr,
        inplace,
        raw: raw.to_string(),
        parse_status: ParseStatus::Parsed,
    }
}

fn chain_root(calls: &[AtomicCall], call: &AtomicCall) -> Option<String> {
    let mut current = call;
    loop {
        match &current.receiver {
            Receiver::Var(v) => return Some(v.clone()),
            Receiver::Prev(i) => current = calls.get(*i)?,
            Receiver::None => return None,
        }
    }
}

fn lower_store(lw: &mut Lowerer, store: &Expr, value: &ArgValue, targets: &mut Vec<String>, reads: &mut Vec<String>) {
    match store {
        Expr::Name(_) | Expr::Tuple(_) | Expr::List(_) | Expr::Starred(_) => {
            let mut names = Vec::new();
            collect_store_names(store, &mut names);
            for n in names {
                if !targets.contains(&n) {
                    targets.push(n);
                }
            }
            if let Expr::Tuple(items) | Expr::List(items) = store {
                for item in items {
                    if matches!(item, Expr::Subscript(..) | Expr::Attr(..)) {
                        lower_store(lw, item, value, targets, reads);
                    }
                }
            }
        }
        Expr::Subscript(base, key) => {
            push_unique(reads, base.names());
            push_unique(reads, key.names());
            let (op, attrs) = lw.lower_with_attrs(base);
            let (receiver, lead) = op.into_receiver();
            let parts = key_parts(key);
            let mut args: Vec<ArgValue> = lead.into_iter().collect();
            args.extend(parts.iter().map(|p| summarize(p)));
            let column_refs = key_columns(&parts);
            lw.push(AtomicCall {
                receiver,
                accessor: accessor(&attrs),
                func_name: "setitem".into(),
                args,
                kwargs: vec![Kwarg { name: "value".into(), value: value.clone() }],
                column_refs,
            });
            if let Some(root) = store.root_name() {
                if !targets.iter().any(|t| t == root) {
                    targets.push(root.to_string());
                }
            }
        }
        Expr::Attr(base, name) => {
            push_unique(reads, base.names());
            let (op, mut attrs) = lw.lower_with_attrs(base);
            let (receiver, _) = op.into_receiver();
            attrs.push(name.clone());
            let column_refs = match value {
                ArgValue::List { .. } => value
                    .as_str_list()
                    .map(|l| l.into_iter().map(str::to_string).collect())
                    .unwrap_or_default(),
                _ => Vec::new(),
            };
            lw.push(AtomicCall {
                receiver,
                accessor: accessor(&attrs),
                func_name: "setattr".into(),
                args: Vec::new(),
                kwargs: vec![Kwarg { name: "value".into(), value: value.clone() }],
                column_refs,
            });
            if let Some(root) = store.root_name() {
                if !targets.iter().any(|t| t == root) {
                    targets.push(root.to_string());
                }
            }
        }
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn funcs(stmt: &StatementIR) -> Vec<&str> {
        stmt.calls.iter().map(|c| c.func_name.as_str()).collect()
    }

    #[test]
    fn single_call_assignment() {
        let s = parse_statement("df2 = df.dropna()", 1, 1);
        assert_eq!(s.parse_status, ParseStatus::Parsed);
        assert_eq!(s.targets, vec!["df2"]);
        assert_eq!(s.calls.len(), 1);
        assert_eq!(s.calls[0].receiver, Receiver::Var("df".into()));
        assert_eq!(s.calls[0].func_name, "dropna");
        assert!(!s.display_expr);
    }

    #[test]
    fn bare_call_is_a_display_expression() {
        let s = parse_statement("df.head()", 2, 1);
        assert!(s.targets.is_empty());
        assert!(s.display_expr);
        assert_eq!(funcs(&s), vec!["head"]);
    }

    #[test]
    fn column_replace_statement() {
        let s = parse_statement("df['Size'] = df['Size'].replace('Varies with device', 0)", 3, 1);
        assert_eq!(s.targets, vec!["df"]);
        assert_eq!(funcs(&s), vec!["getitem", "replace", "setitem"]);
        let replace = &s.calls[1];
        assert_eq!(replace.receiver, Receiver::Prev(0));
        assert_eq!(
            replace.args,
            vec![
                ArgValue::Str { value: "Varies with device".into() },
                ArgValue::Number { value: "0".into() },
            ]
        );
        assert!(s.calls[0].column_refs.contains(&"Size".to_string()));
        assert!(s.calls[2].column_refs.contains(&"Size".to_string()));
        assert!(!replace.column_refs.contains(&"Varies with device".to_string()));
        assert_eq!(s.calls[2].kwarg("value"), Some(&ArgValue::CallResult { index: 1 }));
    }

    #[test]
    fn chains_decompose_in_evaluation_order() {
        let s = parse_statement("df.groupby('cylinder').mean()", 1, 1);
        let chain = decompose_chain(&s);
        assert_eq!(chain.iter().map(|c| c.func_name.as_str()).collect::<Vec<_>>(), vec!["groupby", "mean"]);
        assert_eq!(chain[0].column_refs, vec!["cylinder"]);
        assert_eq!(chain[1].receiver, Receiver::Prev(0));

        let s = parse_statement("df.fillna(0).sort_values('a').head(5)", 1, 1);
        assert_eq!(funcs(&s), vec!["fillna", "sort_values", "head"]);
        assert_eq!(s.calls[2].receiver, Receiver::Prev(1));
    }

    #[test]
    fn masks_and_accessors() {
        let s = parse_statement("df = df[df['Type'] == 'Free']", 1, 1);
        assert_eq!(funcs(&s), vec!["getitem"]);
        assert!(matches!(&s.calls[0].args[0], ArgValue::Mask { columns, .. } if columns == &vec!["Type".to_string()]));
        assert_eq!(s.calls[0].column_refs, vec!["Type"]);

        let s = parse_statement("parts = df['name'].str.split(' ', expand=True)", 1, 1);
        assert_eq!(s.calls[1].accessor.as_deref(), Some("str"));
        assert_eq!(s.calls[1].lookup_keys(), vec!["str.split", "split"]);

        let s = parse_statement("df.loc[df['Size'] == 'Varies with device'] = 0", 1, 1);
        assert_eq!(s.targets, vec!["df"]);
        assert_eq!(funcs(&s), vec!["setitem"]);
        assert_eq!(s.calls[0].accessor.as_deref(), Some("loc"));
        assert_eq!(s.calls[0].column_refs, vec!["Size"]);
    }

    #[test]
    fn operators_become_calls() {
        let s = parse_statement("df = df + 1", 1, 1);
        assert_eq!(funcs(&s), vec!["add"]);
        assert_eq!(s.calls[0].receiver, Receiver::Var("df".into()));

        let s = parse_statement("df['B'] = df['A'] * 2", 1, 1);
        assert_eq!(funcs(&s), vec!["getitem", "mul", "setitem"]);

        let s = parse_statement("df += 1", 1, 1);
        assert_eq!(s.kind, StatementKind::AugAssign);
        assert_eq!(s.targets, vec!["df"]);
        assert_eq!(funcs(&s), vec!["add"]);
    }

    #[test]
    fn inplace_keyword_marks_receiver_as_target() {
        let s = parse_statement("df.dropna(subset=['a'], inplace=True)", 1, 1);
        assert!(s.inplace);
        assert_eq!(s.targets, vec!["df"]);
        assert!(!s.display_expr);
        assert_eq!(s.calls[0].column_refs, vec!["a"]);
    }

    #[test]
    fn functions_and_merges() {
        let s = parse_statement("m = pd.merge(left, right[['k', 'v']], on='k')", 1, 1);
        assert_eq!(s.reads, vec!["pd", "left", "right"]);
        assert_eq!(s.calls[0].column_refs, vec!["k", "v"]);
        let s = parse_statement("display(df)", 1, 1);
        assert_eq!(s.calls[0].receiver, Receiver::None);
        assert!(s.display_expr);
        let s = parse_statement("df", 1, 1);
        assert_eq!(funcs(&s), vec!["display"]);
    }

    #[test]
    fn tuple_chained_and_attribute_stores() {
        let s = parse_statement("a, b = x.copy(), y.copy()", 1, 1);
        assert_eq!(s.targets, vec!["a", "b"]);
        let s = parse_statement("a = b = df.copy()", 1, 1);
        assert_eq!(s.targets, vec!["a", "b"]);
        let s = parse_statement("df.columns = ['x', 'y']", 1, 1);
        assert_eq!(s.targets, vec!["df"]);
        assert_eq!(s.calls[0].func_name, "setattr");
        assert_eq!(s.calls[0].lookup_keys()[0], "columns.setattr");
    }

    #[test]
    fn rename_dict_columns() {
        let s = parse_statement("df = df.rename(columns={'a': 'b'})", 1, 1);
        assert_eq!(s.calls[0].column_refs, vec!["a", "b"]);
    }

    #[test]
    fn unsupported_syntax_degrades() {
        for raw in [
            "if x: y = 1",
            "del df['a']",
            "%matplotlib inline",
            "!pip install x",
            "x = (",
            "42",
            "'doc'",
            "return x",
        ] {
            let s = parse_statement(raw, 1, 3);
            assert_eq!(s.parse_status, ParseStatus::Unparsed, "{raw}");
            assert_eq!(s.line_id, 3);
        }
    }

    #[test]
    fn imports_bind_names() {
        assert_eq!(parse_statement("import pandas as pd", 1, 1).targets, vec!["pd"]);
        assert_eq!(parse_statement("import os.path", 1, 1).targets, vec!["os"]);
        assert_eq!(
            parse_statement("from a.b import c, d as e", 1, 1).targets,
            vec!["c", "e"]
        );
    }

    #[test]
    fn loops_are_opaque_statements() {
        let cell: Vec<String> = "df = load()\nfor col in ['a', 'b']:\n    df[col] = df[col].fillna(0)\n    tmp = df.copy()\ndf.head()"
            .lines()
            .map(str::to_string)
            .collect();
        let stmts = parse_cell(&cell, 2);
        assert_eq!(stmts.len(), 3);
        let lp = &stmts[1];
        assert_eq!(lp.kind, StatementKind::Loop);
        assert_eq!(lp.line_id, 2);
        assert_eq!(lp.targets, vec!["col", "df", "tmp"]);
        assert!(lp.reads.contains(&"df".to_string()));
        assert_eq!(lp.calls.len(), 4);
        // receivers of the inner statements are re-based
        assert_eq!(lp.calls[1].receiver, Receiver::Prev(0));
        assert_eq!(stmts[2].line_id, 5);
    }

    #[test]
    fn definitions_are_recorded() {
        let cell: Vec<String> = "def clean(d):\n    return d.dropna()\nout = clean(df)"
            .lines()
            .map(str::to_string)
            .collect();
        let stmts = parse_cell(&cell, 1);
        assert_eq!(stmts[0].kind, StatementKind::Definition);
        assert_eq!(stmts[0].targets, vec!["clean"]);
        assert_eq!(stmts[1].calls[0].func_name, "clean");
        assert_eq!(stmts[1].line_id, 3);
    }

    #[test]
    fn multi_line_statement_uses_first_physical_line() {
        let cell: Vec<String> = "x = 1\ndf2 = (df\n       .dropna()\n       .reset_index())\ndf2"
            .lines()
            .map(str::to_string)
            .collect();
        let stmts = parse_cell(&cell, 1);
        assert_eq!(stmts.iter().map(|s| s.line_id).collect::<Vec<_>>(), vec![1, 2, 5]);
        assert_eq!(funcs(&stmts[1]), vec!["dropna", "reset_index"]);
    }
}
