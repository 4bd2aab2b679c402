//! Recursive descent parser for constraint text.
//!
//! Precedence, loosest first: `if .. then`, `or`, `and`, relations,
//! `+ -`, `* /`, `^`, unary minus and atoms. `^` is not associative: both
//! operands must be atoms.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::str::FromStr;

use thiserror::Error;

use super::{Constraint, ConstraintSet, NumExpr, RelOp};
use crate::schema::DatasetSchema;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("unexpected character `{0}`")]
    UnexpectedChar(char),
    #[error("malformed number `{0}`")]
    BadNumber(String),
    #[error("expected {expected}, found `{found}`")]
    Unexpected { expected: &'static str, found: String },
    #[error("expected {expected}, found end of input")]
    UnexpectedEnd { expected: &'static str },
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("`{func}` takes {expected} argument(s), got {got}")]
    Arity { func: &'static str, expected: &'static str, got: usize },
    #[error("implication guard must be an inequality, not `==`")]
    EqualityGuard,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    LParen,
    RParen,
    Comma,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Rel(RelOp),
}

impl Tok {
    fn text(&self) -> String {
        match self {
            Tok::Num(v) => v.to_string(),
            Tok::Ident(s) => s.clone(),
            Tok::LParen => "(".into(),
            Tok::RParen => ")".into(),
            Tok::Comma => ",".into(),
            Tok::Plus => "+".into(),
            Tok::Minus => "-".into(),
            Tok::Star => "*".into(),
            Tok::Slash => "/".into(),
            Tok::Caret => "^".into(),
            Tok::Rel(op) => op.symbol().into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str, first_line: usize) -> Result<(Vec<Spanned>, (usize, usize)), ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut col) = (first_line, 1usize);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        let err = |kind| ParseError { line: l0, column: c0, kind };
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let mut push = |tok, len: usize| {
            out.push(Spanned { tok, line: l0, column: c0 });
            len
        };
        let two = chars.get(i + 1).copied();
        let len = match c {
            '(' => push(Tok::LParen, 1),
            ')' => push(Tok::RParen, 1),
            ',' => push(Tok::Comma, 1),
            '+' => push(Tok::Plus, 1),
            '-' => push(Tok::Minus, 1),
            '*' => push(Tok::Star, 1),
            '/' => push(Tok::Slash, 1),
            '^' => push(Tok::Caret, 1),
            '=' if two == Some('=') => push(Tok::Rel(RelOp::Eq), 2),
            '<' if two == Some('=') => push(Tok::Rel(RelOp::Le), 2),
            '>' if two == Some('=') => push(Tok::Rel(RelOp::Ge), 2),
            '<' => push(Tok::Rel(RelOp::Lt), 1),
            '>' => push(Tok::Rel(RelOp::Gt), 1),
            c if c.is_ascii_digit() || (c == '.' && two.is_some_and(|d| d.is_ascii_digit())) => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_digit() || chars[j] == '.') {
                    j += 1;
                }
                if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                    let mut k = j + 1;
                    if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                        k += 1;
                    }
                    if k < chars.len() && chars[k].is_ascii_digit() {
                        while k < chars.len() && chars[k].is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                let s: String = chars[i..j].iter().collect();
                let v = f64::from_str(&s).map_err(|_| err(ParseErrorKind::BadNumber(s.clone())))?;
                if !v.is_finite() {
                    return Err(err(ParseErrorKind::BadNumber(s)));
                }
                push(Tok::Num(v), j - i)
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                push(Tok::Ident(chars[i..j].iter().collect()), j - i)
            }
            other => return Err(err(ParseErrorKind::UnexpectedChar(other))),
        };
        i += len;
        col += len;
    }
    Ok((out, (line, col)))
}

struct Parser<'a> {
    toks: Vec<Spanned>,
    pos: usize,
    end: (usize, usize),
    schema: &'a DatasetSchema,
}

type PResult<T> = Result<T, ParseError>;

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|s| &s.tok)
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn error_here(&self, expected: &'static str) -> ParseError {
        match self.toks.get(self.pos) {
            Some(s) => ParseError {
                line: s.line,
                column: s.column,
                kind: ParseErrorKind::Unexpected { expected, found: s.tok.text() },
            },
            None => ParseError { line: self.end.0, column: self.end.1, kind: ParseErrorKind::UnexpectedEnd { expected } },
        }
    }

    fn error_at(&self, pos: usize, kind: ParseErrorKind) -> ParseError {
        let (line, column) = self.toks.get(pos).map_or(self.end, |s| (s.line, s.column));
        ParseError { line, column, kind }
    }

    fn expect(&mut self, tok: Tok, expected: &'static str) -> PResult<()> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error_here(expected))
        }
    }

    fn constraint(&mut self) -> PResult<Constraint> {
        if self.is_keyword("if") {
            self.pos += 1;
            let guard_pos = self.pos;
            let guard = self.relation()?;
            if matches!(guard, Constraint::Relation { op: RelOp::Eq, .. }) {
                return Err(self.error_at(guard_pos, ParseErrorKind::EqualityGuard));
            }
            if !self.is_keyword("then") {
                return Err(self.error_here("`then`"));
            }
            self.pos += 1;
            let body = self.disjunction()?;
            return Ok(Constraint::implies(guard, body));
        }
        self.disjunction()
    }

    fn disjunction(&mut self) -> PResult<Constraint> {
        let mut parts = alloc::vec![self.conjunction()?];
        while self.is_keyword("or") {
            self.pos += 1;
            parts.push(self.conjunction()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Constraint::Or(parts) })
    }

    fn conjunction(&mut self) -> PResult<Constraint> {
        let mut parts = alloc::vec![self.constraint_primary()?];
        while self.is_keyword("and") {
            self.pos += 1;
            parts.push(self.constraint_primary()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Constraint::And(parts) })
    }

    fn constraint_primary(&mut self) -> PResult<Constraint> {
        let start = self.pos;
        match self.relation() {
            Ok(r) => Ok(r),
            Err(rel_err) if self.toks.get(start).map(|s| &s.tok) == Some(&Tok::LParen) => {
                // Not a relation: try a parenthesised constraint instead and
                // report whichever attempt got further.
                let rel_pos = self.pos;
                self.pos = start + 1;
                let grouped = self.constraint().and_then(|c| {
                    self.expect(Tok::RParen, "`)`")?;
                    Ok(c)
                });
                match grouped {
                    Ok(c) => Ok(c),
                    Err(e) if self.pos >= rel_pos => Err(e),
                    Err(_) => Err(rel_err),
                }
            }
            Err(e) => Err(e),
        }
    }

    fn relation(&mut self) -> PResult<Constraint> {
        let left = self.expr()?;
        let op = match self.peek() {
            Some(Tok::Rel(op)) => *op,
            _ => return Err(self.error_here("a comparison operator")),
        };
        self.pos += 1;
        let right = self.expr()?;
        Ok(Constraint::Relation { op, left, right })
    }

    fn expr(&mut self) -> PResult<NumExpr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    lhs = lhs + self.term()?;
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    lhs = lhs - self.term()?;
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> PResult<NumExpr> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    lhs = lhs * self.factor()?;
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    lhs = lhs / self.factor()?;
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> PResult<NumExpr> {
        if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            return Ok(match self.factor()? {
                NumExpr::Const(v) => NumExpr::Const(-v),
                e => NumExpr::Const(0.0) - e,
            });
        }
        let base = self.atom()?;
        if self.peek() == Some(&Tok::Caret) {
            self.pos += 1;
            let exponent = self.atom()?;
            return Ok(base.pow(exponent));
        }
        Ok(base)
    }

    fn atom(&mut self) -> PResult<NumExpr> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.error_here("a number, feature or `(`"));
        };
        match tok {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(NumExpr::Const(v))
            }
            Tok::LParen => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Minus => {
                // `2 ^ -1`: allow a signed exponent/base without parentheses.
                self.pos += 1;
                Ok(match self.atom()? {
                    NumExpr::Const(v) => NumExpr::Const(-v),
                    e => NumExpr::Const(0.0) - e,
                })
            }
            Tok::Ident(name) if self.peek_at(1) == Some(&Tok::LParen) => self.call(name),
            Tok::Ident(name) => {
                let idx = self.resolve(&name).ok_or_else(|| self.error_at(self.pos, ParseErrorKind::UnknownFeature(name)))?;
                self.pos += 1;
                Ok(NumExpr::Feature(idx))
            }
            _ => Err(self.error_here("a number, feature or `(`")),
        }
    }

    fn call(&mut self, name: String) -> PResult<NumExpr> {
        let name_pos = self.pos;
        let func: &'static str = match name.as_str() {
            "log" => "log",
            "abs" => "abs",
            "min" => "min",
            "max" => "max",
            _ => return Err(self.error_at(name_pos, ParseErrorKind::UnknownFunction(name))),
        };
        self.pos += 2;
        let mut args = Vec::new();
        if self.peek() != Some(&Tok::RParen) {
            args.push(self.expr()?);
            while self.peek() == Some(&Tok::Comma) {
                self.pos += 1;
                args.push(self.expr()?);
            }
        }
        self.expect(Tok::RParen, "`,` or `)`")?;
        let arity = |expected| self.error_at(name_pos, ParseErrorKind::Arity { func, expected, got: args.len() });
        match func {
            "log" | "abs" if args.len() != 1 => Err(arity("1")),
            "min" | "max" if args.is_empty() => Err(arity("at least 1")),
            "log" => Ok(args.pop().unwrap().log()),
            "abs" => Ok(args.pop().unwrap().abs()),
            "min" => Ok(NumExpr::Min(args)),
            _ => Ok(NumExpr::Max(args)),
        }
    }

    /// Declared column names win; `F<k>` is the positional fallback.
    fn resolve(&self, name: &str) -> Option<usize> {
        if let Some(i) = self.schema.index_of(name) {
            return Some(i);
        }
        let digits = name.strip_prefix('F')?;
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || (digits.len() > 1 && digits.starts_with('0')) {
            return None;
        }
        let k: usize = digits.parse().ok()?;
        (k < self.schema.n_features()).then_some(k)
    }
}

fn parse_at(text: &str, schema: &DatasetSchema, line: usize) -> Result<Constraint, ParseError> {
    let (toks, end) = lex(text, line)?;
    let mut p = Parser { toks, pos: 0, end, schema };
    let c = p.constraint()?;
    if p.pos < p.toks.len() {
        return Err(p.error_here("end of constraint"));
    }
    Ok(c)
}

/// Parses a single constraint, resolving feature names against `schema`.
pub fn parse_constraint(text: &str, schema: &DatasetSchema) -> Result<Constraint, ParseError> {
    parse_at(text, schema, 1)
}

/// Parses a constraint file: one constraint per line, `#` starts a comment.
/// Error positions refer to lines of the whole file.
pub fn parse_constraint_file(text: &str, schema: &DatasetSchema) -> Result<ConstraintSet, ParseError> {
    let mut set = ConstraintSet::default();
    for (i, raw) in text.lines().enumerate() {
        let body = raw.split('#').next().unwrap_or("");
        if body.trim().is_empty() {
            continue;
        }
        let c = parse_at(body, schema, i + 1)?;
        set.push(c, Some(body.trim().to_string()));
    }
    Ok(set)
}
