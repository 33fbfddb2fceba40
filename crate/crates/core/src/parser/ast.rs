//! Expression syntax tree and a precedence-climbing parser over [`Token`]s.

use std::fmt;

use super::lexer::{Tok, Token};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Name(String),
    Str { value: String, fstring: bool },
    Num(String),
    Bool(bool),
    NoneLit,
    Ellipsis,
    Attr(Box<Expr>, String),
    Call(Box<Expr>, Vec<CallArg>),
    Subscript(Box<Expr>, Box<Expr>),
    Slice(Option<Box<Expr>>, Option<Box<Expr>>, Option<Box<Expr>>),
    List(Vec<Expr>),
    Tuple(Vec<Expr>),
    Set(Vec<Expr>),
    Dict(Vec<(Expr, Expr)>),
    BinOp(Box<Expr>, &'static str, Box<Expr>),
    Unary(&'static str, Box<Expr>),
    Compare(Box<Expr>, Vec<(&'static str, Expr)>),
    BoolOp(&'static str, Vec<Expr>),
    IfExp(Box<Expr>, Box<Expr>, Box<Expr>),
    Lambda(Vec<String>, Box<Expr>),
    /// Comprehension or generator: element followed by every clause expression.
    Comprehension(&'static str, Vec<Expr>),
    Starred(Box<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CallArg {
    pub keyword: Option<String>,
    /// 0 = plain, 1 = `*arg`, 2 = `**arg`
    pub star: u8,
    pub value: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxError(pub String);

const KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue",
    "def", "del", "elif", "else", "except", "finally", "for", "from", "global", "if", "import",
    "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return", "try", "while",
    "with", "yield",
];

pub fn is_keyword(name: &str) -> bool {
    KEYWORDS.contains(&name)
}

pub struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
}

type PResult<T> = Result<T, SyntaxError>;

impl<'a> Parser<'a> {
    pub fn new(toks: &'a [Token]) -> Self {
        Parser { toks, pos: 0 }
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, offset: usize) -> Option<&Tok> {
        self.toks.get(self.pos + offset).map(|t| &t.tok)
    }

    pub fn peek_op(&self, op: &str) -> bool {
        matches!(self.peek(), Some(Tok::Op(o)) if *o == op)
    }

    pub fn peek_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Name(n)) if n == kw)
    }

    pub fn eat_op(&mut self, op: &str) -> bool {
        if self.peek_op(op) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn eat_kw(&mut self, kw: &str) -> bool {
        if self.peek_kw(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn next_op(&mut self) -> Option<&'static str> {
        match self.peek() {
            Some(Tok::Op(o)) => {
                let o = *o;
                self.pos += 1;
                Some(o)
            }
            _ => None,
        }
    }

    fn expect_op(&mut self, op: &str) -> PResult<()> {
        if self.eat_op(op) {
            Ok(())
        } else {
            Err(self.error(&format!("expected '{op}'")))
        }
    }

    fn expect_name(&mut self) -> PResult<String> {
        match self.peek() {
            Some(Tok::Name(n)) if !is_keyword(n) => {
                let n = n.clone();
                self.pos += 1;
                Ok(n)
            }
            _ => Err(self.error("expected identifier")),
        }
    }

    fn error(&self, msg: &str) -> SyntaxError {
        SyntaxError(format!("{msg} at token {}", self.pos))
    }

    /// Comma-separated expressions, producing a tuple when a comma is present.
    pub fn parse_testlist(&mut self) -> PResult<Expr> {
        let first = self.parse_star_or_test()?;
        if !self.peek_op(",") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.ends_expression() {
                break;
            }
            items.push(self.parse_star_or_test()?);
        }
        Ok(Expr::Tuple(items))
    }

    fn ends_expression(&self) -> bool {
        match self.peek() {
            None => true,
            Some(Tok::Op(o)) => matches!(*o, ")" | "]" | "}" | "=" | ";" | ":") || o.ends_with('=') && *o != "==",
            Some(Tok::Name(n)) => matches!(n.as_str(), "in" | "for" | "if"),
            _ => false,
        }
    }

    fn parse_star_or_test(&mut self) -> PResult<Expr> {
        if self.eat_op("*") {
            return Ok(Expr::Starred(Box::new(self.parse_bitor()?)));
        }
        self.parse_test()
    }

    pub fn parse_test(&mut self) -> PResult<Expr> {
        if self.eat_kw("lambda") {
            return self.parse_lambda();
        }
        let body = self.parse_or()?;
        if self.peek_kw("if") && !self.is_comprehension_if() {
            self.pos += 1;
            let cond = self.parse_or()?;
            if !self.eat_kw("else") {
                return Err(self.error("expected 'else'"));
            }
            let orelse = self.parse_test()?;
            return Ok(Expr::IfExp(Box::new(body), Box::new(cond), Box::new(orelse)));
        }
        Ok(body)
    }

    /// Inside a comprehension an `if` without `else` is a filter clause; a
    /// ternary always has an `else` before the closing bracket.
    fn is_comprehension_if(&self) -> bool {
        let mut depth = 0i32;
        for t in &self.toks[self.pos + 1..] {
            match &t.tok {
                Tok::Op("(" | "[" | "{") => depth += 1,
                Tok::Op(")" | "]" | "}") => {
                    if depth == 0 {
                        return true;
                    }
                    depth -= 1;
                }
                Tok::Name(n) if depth == 0 && n == "else" => return false,
                Tok::Name(n) if depth == 0 && (n == "for" || n == "if") => return true,
                _ => {}
            }
        }
        false
    }

    fn parse_lambda(&mut self) -> PResult<Expr> {
        let mut params = Vec::new();
        while !self.peek_op(":") {
            match self.peek() {
                Some(Tok::Name(n)) => {
                    params.push(n.clone());
                    self.pos += 1;
                }
                Some(Tok::Op("," | "*" | "**")) => self.pos += 1,
                Some(Tok::Op("=")) => {
                    self.pos += 1;
                    self.parse_test()?;
                }
                _ => return Err(self.error("bad lambda parameters")),
            }
        }
        self.expect_op(":")?;
        let body = self.parse_test()?;
        Ok(Expr::Lambda(params, Box::new(body)))
    }

    fn parse_or(&mut self) -> PResult<Expr> {
        let first = self.parse_and()?;
        if !self.peek_kw("or") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_kw("or") {
            items.push(self.parse_and()?);
        }
        Ok(Expr::BoolOp("or", items))
    }

    fn parse_and(&mut self) -> PResult<Expr> {
        let first = self.parse_not()?;
        if !self.peek_kw("and") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_kw("and") {
            items.push(self.parse_not()?);
        }
        Ok(Expr::BoolOp("and", items))
    }

    fn parse_not(&mut self) -> PResult<Expr> {
        if self.eat_kw("not") {
            return Ok(Expr::Unary("not", Box::new(self.parse_not()?)));
        }
        self.parse_comparison()
    }

    fn comparison_op(&mut self) -> Option<&'static str> {
        let op = match self.peek() {
            Some(Tok::Op(o)) if matches!(*o, "<" | ">" | "==" | ">=" | "<=" | "!=") => *o,
            Some(Tok::Name(n)) if n == "in" => "in",
            Some(Tok::Name(n)) if n == "is" => {
                if matches!(self.peek_at(1), Some(Tok::Name(m)) if m == "not") {
                    self.pos += 1;
                    "is not"
                } else {
                    "is"
                }
            }
            Some(Tok::Name(n)) if n == "not" => {
                if matches!(self.peek_at(1), Some(Tok::Name(m)) if m == "in") {
                    self.pos += 1;
                    "not in"
                } else {
                    return None;
                }
            }
            _ => return None,
        };
        self.pos += 1;
        Some(op)
    }

    fn parse_comparison(&mut self) -> PResult<Expr> {
        let left = self.parse_bitor()?;
        let mut rest = Vec::new();
        while let Some(op) = self.comparison_op() {
            rest.push((op, self.parse_bitor()?));
        }
        if rest.is_empty() {
            Ok(left)
        } else {
            Ok(Expr::Compare(Box::new(left), rest))
        }
    }

    fn parse_binary(
        &mut self,
        ops: &[&'static str],
        next: fn(&mut Self) -> PResult<Expr>,
    ) -> PResult<Expr> {
        let mut left = next(self)?;
        loop {
            let op = match self.peek() {
                Some(Tok::Op(o)) if ops.contains(o) => *o,
                _ => return Ok(left),
            };
            self.pos += 1;
            let right = next(self)?;
            left = Expr::BinOp(Box::new(left), op, Box::new(right));
        }
    }

    fn parse_bitor(&mut self) -> PResult<Expr> {
        self.parse_binary(&["|"], Self::parse_bitxor)
    }
    fn parse_bitxor(&mut self) -> PResult<Expr> {
        self.parse_binary(&["^"], Self::parse_bitand)
    }
    fn parse_bitand(&mut self) -> PResult<Expr> {
        self.parse_binary(&["&"], Self::parse_shift)
    }
    fn parse_shift(&mut self) -> PResult<Expr> {
        self.parse_binary(&["<<", ">>"], Self::parse_arith)
    }
    fn parse_arith(&mut self) -> PResult<Expr> {
        self.parse_binary(&["+", "-"], Self::parse_term)
    }
    fn parse_term(&mut self) -> PResult<Expr> {
        self.parse_binary(&["*", "/", "//", "%", "@"], Self::parse_factor)
    }

    fn parse_factor(&mut self) -> PResult<Expr> {
        for op in ["-", "+", "~"] {
            if self.eat_op(op) {
                return Ok(Expr::Unary(op, Box::new(self.parse_factor()?)));
            }
        }
        self.parse_power()
    }

    fn parse_power(&mut self) -> PResult<Expr> {
        self.eat_kw("await");
        let base = self.parse_primary()?;
        if self.eat_op("**") {
            let exp = self.parse_factor()?;
            return Ok(Expr::BinOp(Box::new(base), "**", Box::new(exp)));
        }
        Ok(base)
    }

    fn parse_primary(&mut self) -> PResult<Expr> {
        let mut expr = self.parse_atom()?;
        loop {
            if self.eat_op(".") {
                let name = match self.peek() {
                    Some(Tok::Name(n)) => n.clone(),
                    _ => return Err(self.error("expected attribute name")),
                };
                self.pos += 1;
                expr = Expr::Attr(Box::new(expr), name);
            } else if self.eat_op("(") {
                let args = self.parse_call_args()?;
                expr = Expr::Call(Box::new(expr), args);
            } else if self.eat_op("[") {
                let key = self.parse_subscript_list()?;
                self.expect_op("]")?;
                expr = Expr::Subscript(Box::new(expr), Box::new(key));
            } else {
                return Ok(expr);
            }
        }
    }

    fn parse_call_args(&mut self) -> PResult<Vec<CallArg>> {
        let mut args = Vec::new();
        while !self.eat_op(")") {
            let arg = if self.eat_op("**") {
                CallArg { keyword: None, star: 2, value: self.parse_test()? }
            } else if self.eat_op("*") {
                CallArg { keyword: None, star: 1, value: self.parse_test()? }
            } else if matches!((self.peek(), self.peek_at(1)), (Some(Tok::Name(_)), Some(Tok::Op("=")))) {
                let keyword = self.expect_name()?;
                self.expect_op("=")?;
                CallArg { keyword: Some(keyword), star: 0, value: self.parse_test()? }
            } else {
                let value = self.parse_test()?;
                let value = if self.peek_kw("for") || self.peek_kw("async") {
                    self.parse_comprehension_tail("gen", value)?
                } else {
                    value
                };
                CallArg { keyword: None, star: 0, value }
            };
            args.push(arg);
            if !self.eat_op(",") {
                self.expect_op(")")?;
                break;
            }
        }
        Ok(args)
    }

    fn parse_subscript_list(&mut self) -> PResult<Expr> {
        let first = self.parse_subscript()?;
        if !self.peek_op(",") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.peek_op("]") {
                break;
            }
            items.push(self.parse_subscript()?);
        }
        Ok(Expr::Tuple(items))
    }

    fn parse_subscript(&mut self) -> PResult<Expr> {
        let slice_end = |p: &Self| p.peek_op(":") || p.peek_op("]") || p.peek_op(",");
        let lower = if self.peek_op(":") { None } else { Some(Box::new(self.parse_test()?)) };
        if !self.eat_op(":") {
            return Ok(*lower.expect("non-slice subscript has an expression"));
        }
        let upper = if slice_end(self) { None } else { Some(Box::new(self.parse_test()?)) };
        let step = if self.eat_op(":") {
            if slice_end(self) { None } else { Some(Box::new(self.parse_test()?)) }
        } else {
            None
        };
        Ok(Expr::Slice(lower, upper, step))
    }

    fn parse_comprehension_tail(&mut self, kind: &'static str, elt: Expr) -> PResult<Expr> {
        let mut parts = vec![elt];
        loop {
            self.eat_kw("async");
            if self.eat_kw("for") {
                parts.push(self.parse_target_list()?);
                if !self.eat_kw("in") {
                    return Err(self.error("expected 'in'"));
                }
                parts.push(self.parse_or()?);
            } else if self.eat_kw("if") {
                parts.push(self.parse_or()?);
            } else {
                return Ok(Expr::Comprehension(kind, parts));
            }
        }
    }

    fn parse_target_list(&mut self) -> PResult<Expr> {
        let first = self.parse_bitor()?;
        if !self.peek_op(",") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.peek_kw("in") {
                break;
            }
            items.push(self.parse_bitor()?);
        }
        Ok(Expr::Tuple(items))
    }

    fn parse_atom(&mut self) -> PResult<Expr> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.error("unexpected end of input"));
        };
        self.pos += 1;
        match tok {
            Tok::Name(n) => match n.as_str() {
                "True" => Ok(Expr::Bool(true)),
                "False" => Ok(Expr::Bool(false)),
                "None" => Ok(Expr::NoneLit),
                _ if is_keyword(&n) => Err(SyntaxError(format!("unexpected keyword '{n}'"))),
                _ => Ok(Expr::Name(n)),
            },
            Tok::Number(n) => Ok(Expr::Num(n)),
            Tok::Str { mut value, mut fstring } => {
                while let Some(Tok::Str { value: v, fstring: f }) = self.peek() {
                    value.push_str(v);
                    fstring |= *f;
                    self.pos += 1;
                }
                Ok(Expr::Str { value, fstring })
            }
            Tok::Op("...") => Ok(Expr::Ellipsis),
            Tok::Op("(") => {
                if self.eat_op(")") {
                    return Ok(Expr::Tuple(Vec::new()));
                }
                let first = self.parse_star_or_test()?;
                if self.peek_kw("for") || self.peek_kw("async") {
                    let comp = self.parse_comprehension_tail("gen", first)?;
                    self.expect_op(")")?;
                    return Ok(comp);
                }
                if self.eat_op(")") {
                    return Ok(first);
                }
                let mut items = vec![first];
                while self.eat_op(",") {
                    if self.peek_op(")") {
                        break;
                    }
                    items.push(self.parse_star_or_test()?);
                }
                self.expect_op(")")?;
                Ok(Expr::Tuple(items))
            }
            Tok::Op("[") => {
                if self.eat_op("]") {
                    return Ok(Expr::List(Vec::new()));
                }
                let first = self.parse_star_or_test()?;
                if self.peek_kw("for") || self.peek_kw("async") {
                    let comp = self.parse_comprehension_tail("list", first)?;
                    self.expect_op("]")?;
                    return Ok(comp);
                }
                let mut items = vec![first];
                while self.eat_op(",") {
                    if self.peek_op("]") {
                        break;
                    }
                    items.push(self.parse_star_or_test()?);
                }
                self.expect_op("]")?;
                Ok(Expr::List(items))
            }
            Tok::Op("{") => self.parse_brace(),
            Tok::Op(o) => Err(SyntaxError(format!("unexpected operator '{o}'"))),
        }
    }

    fn parse_brace(&mut self) -> PResult<Expr> {
        if self.eat_op("}") {
            return Ok(Expr::Dict(Vec::new()));
        }
        if self.eat_op("**") {
            // dict unpacking: keep the operand as a value under a null key
            let v = self.parse_bitor()?;
            return self.finish_dict(vec![(Expr::NoneLit, v)]);
        }
        let first = self.parse_star_or_test()?;
        if self.eat_op(":") {
            let value = self.parse_test()?;
            if self.peek_kw("for") {
                let comp = self.parse_comprehension_tail("dict", Expr::Tuple(vec![first, value]))?;
                self.expect_op("}")?;
                return Ok(comp);
            }
            return self.finish_dict(vec![(first, value)]);
        }
        if self.peek_kw("for") {
            let comp = self.parse_comprehension_tail("set", first)?;
            self.expect_op("}")?;
            return Ok(comp);
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.peek_op("}") {
                break;
            }
            items.push(self.parse_star_or_test()?);
        }
        self.expect_op("}")?;
        Ok(Expr::Set(items))
    }

    fn finish_dict(&mut self, mut pairs: Vec<(Expr, Expr)>) -> PResult<Expr> {
        while self.eat_op(",") {
            if self.peek_op("}") {
                break;
            }
            if self.eat_op("**") {
                let v = self.parse_bitor()?;
                pairs.push((Expr::NoneLit, v));
                continue;
            }
            let k = self.parse_test()?;
            self.expect_op(":")?;
            let v = self.parse_test()?;
            pairs.push((k, v));
        }
        self.expect_op("}")?;
        Ok(Expr::Dict(pairs))
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('\'');
    for ch in s.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '\'' => out.push_str("\\'"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\0' => out.push_str("\\x00"),
            c => out.push(c),
        }
    }
    out.push('\'');
    out
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

impl fmt::Display for CallArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.keyword, self.star) {
            (Some(k), _) => write!(f, "{k}={}", self.value),
            (None, 1) => write!(f, "*{}", self.value),
            (None, 2) => write!(f, "**{}", self.value),
            _ => write!(f, "{}", self.value),
        }
    }
}

/// Normalised source rendering used for argument summaries.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Name(n) => write!(f, "{n}"),
            Expr::Str { value, fstring } => {
                write!(f, "{}{}", if *fstring { "f" } else { "" }, quote(value))
            }
            Expr::Num(n) => write!(f, "{n}"),
            Expr::Bool(b) => write!(f, "{}", if *b { "True" } else { "False" }),
            Expr::NoneLit => write!(f, "None"),
            Expr::Ellipsis => write!(f, "..."),
            Expr::Attr(b, a) => write!(f, "{b}.{a}"),
            Expr::Call(func, args) => write!(f, "{func}({})", join(args)),
            Expr::Subscript(b, k) => match k.as_ref() {
                Expr::Tuple(items) if !items.is_empty() => write!(f, "{b}[{}]", join(items)),
                k => write!(f, "{b}[{k}]"),
            },
            Expr::Slice(lo, hi, step) => {
                let part = |e: &Option<Box<Expr>>| e.as_ref().map(|e| e.to_string()).unwrap_or_default();
                write!(f, "{}:{}", part(lo), part(hi))?;
                if step.is_some() {
                    write!(f, ":{}", part(step))?;
                }
                Ok(())
            }
            Expr::List(items) => write!(f, "[{}]", join(items)),
            Expr::Tuple(items) if items.len() == 1 => write!(f, "({},)", items[0]),
            Expr::Tuple(items) => write!(f, "({})", join(items)),
            Expr::Set(items) => write!(f, "{{{}}}", join(items)),
            Expr::Dict(pairs) => {
                let parts: Vec<String> = pairs.iter().map(|(k, v)| format!("{k}: {v}")).collect();
                write!(f, "{{{}}}", parts.join(", "))
            }
            Expr::BinOp(l, op, r) => write!(f, "({l} {op} {r})"),
            Expr::Unary("not", e) => write!(f, "(not {e})"),
            Expr::Unary(op, e) => write!(f, "({op}{e})"),
            Expr::Compare(l, rest) => {
                write!(f, "({l}")?;
                for (op, r) in rest {
                    write!(f, " {op} {r}")?;
                }
                write!(f, ")")
            }
            Expr::BoolOp(op, items) => {
                let parts: Vec<String> = items.iter().map(ToString::to_string).collect();
                write!(f, "({})", parts.join(&format!(" {op} ")))
            }
            Expr::IfExp(body, cond, orelse) => write!(f, "({body} if {cond} else {orelse})"),
            Expr::Lambda(params, body) => write!(f, "(lambda {}: {body})", params.join(", ")),
            Expr::Comprehension(kind, parts) => write!(f, "<{kind}comp {}>", join(parts)),
            Expr::Starred(e) => write!(f, "*{e}"),
        }
    }
}

impl Expr {
    /// Visits every sub-expression in source order, the node itself first.
    pub fn walk<'e>(&'e self, visit: &mut dyn FnMut(&'e Expr)) {
        visit(self);
        match self {
            Expr::Attr(b, _) => b.walk(visit),
            Expr::Call(func, args) => {
                func.walk(visit);
                for a in args {
                    a.value.walk(visit);
                }
            }
            Expr::Subscript(b, k) => {
                b.walk(visit);
                k.walk(visit);
            }
            Expr::Slice(lo, hi, step) => {
                for e in [lo, hi, step].into_iter().flatten() {
                    e.walk(visit);
                }
            }
            Expr::List(items) | Expr::Tuple(items) | Expr::Set(items) | Expr::BoolOp(_, items) => {
                for e in items {
                    e.walk(visit);
                }
            }
            Expr::Comprehension(_, items) => {
                for e in items {
                    e.walk(visit);
                }
            }
            Expr::Dict(pairs) => {
                for (k, v) in pairs {
                    k.walk(visit);
                    v.walk(visit);
                }
            }
            Expr::BinOp(l, _, r) => {
                l.walk(visit);
                r.walk(visit);
            }
            Expr::Unary(_, e) | Expr::Starred(e) => e.walk(visit),
            Expr::Compare(l, rest) => {
                l.walk(visit);
                for (_, r) in rest {
                    r.walk(visit);
                }
            }
            Expr::IfExp(a, b, c) => {
                a.walk(visit);
                b.walk(visit);
                c.walk(visit);
            }
            Expr::Lambda(_, body) => body.walk(visit),
            Expr::Name(_)
            | Expr::Str { .. }
            | Expr::Num(_)
            | Expr::Bool(_)
            | Expr::NoneLit
            | Expr::Ellipsis => {}
        }
    }

    /// Variable names read by the expression, in source order, deduplicated.
    /// Lambda parameters are not reads.
    pub fn names(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let mut bound: Vec<&str> = Vec::new();
        self.walk(&mut |e| {
            if let Expr::Lambda(params, _) = e {
                bound.extend(params.iter().map(String::as_str));
            }
            if let Expr::Name(n) = e {
                if !bound.contains(&n.as_str()) && !out.contains(n) {
                    out.push(n.clone());
                }
            }
        });
        out
    }

    pub fn as_str_literal(&self) -> Option<&str> {
        match self {
            Expr::Str { value, fstring: false } => Some(value),
            _ => None,
        }
    }

    /// A list/tuple made only of plain string literals.
    pub fn as_str_list(&self) -> Option<Vec<String>> {
        match self {
            Expr::List(items) | Expr::Tuple(items) if !items.is_empty() => items
                .iter()
                .map(|i| i.as_str_literal().map(str::to_string))
                .collect(),
            _ => None,
        }
    }

    /// Root variable of an attribute/subscript/call chain.
    pub fn root_name(&self) -> Option<&str> {
        match self {
            Expr::Name(n) => Some(n),
            Expr::Attr(b, _) | Expr::Subscript(b, _) | Expr::Call(b, _) => b.root_name(),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::lexer::tokenize;
    use super::*;

    fn parse(src: &str) -> Expr {
        let toks = tokenize(src).unwrap();
        let mut p = Parser::new(&toks);
        let e = p.parse_testlist().unwrap();
        assert!(p.at_end(), "trailing tokens in {src}");
        e
    }

    #[test]
    fn precedence_and_rendering() {
        assert_eq!(parse("a + b * c").to_string(), "(a + (b * c))");
        assert_eq!(parse("-x ** 2").to_string(), "(-(x ** 2))");
        assert_eq!(
            parse("(df['a'] > 1) & ~df.b.isna()").to_string(),
            "((df['a'] > 1) & (~df.b.isna()))"
        );
        assert_eq!(parse("a if b else c").to_string(), "(a if b else c)");
        assert_eq!(parse("x not in y").to_string(), "(x not in y)");
    }

    #[test]
    fn calls_subscripts_and_slices() {
        assert_eq!(
            parse("df.loc[:, ['a', 'b']]").to_string(),
            "df.loc[:, ['a', 'b']]"
        );
        assert_eq!(
            parse("f(1, *xs, key=2, **kw)").to_string(),
            "f(1, *xs, key=2, **kw)"
        );
        assert_eq!(parse("df[::2]").to_string(), "df[::2]");
    }

    #[test]
    fn comprehensions_lambdas_and_literals() {
        let e = parse("[c for c in df.columns if c != 'x']");
        assert!(matches!(e, Expr::Comprehension("list", _)));
        assert_eq!(e.names(), vec!["c", "df"]);
        let e = parse("df.apply(lambda row: row['a'] + k)");
        assert_eq!(e.names(), vec!["df", "k"]);
        assert!(matches!(parse("{'a': 1, **extra}"), Expr::Dict(_)));
        assert!(matches!(parse("{1, 2}"), Expr::Set(_)));
        assert!(matches!(parse("sum(x for x in xs)"), Expr::Call(..)));
    }

    #[test]
    fn adjacent_strings_concatenate() {
        assert_eq!(
            parse("'a' 'b'"),
            Expr::Str { value: "ab".into(), fstring: false }
        );
    }
}
