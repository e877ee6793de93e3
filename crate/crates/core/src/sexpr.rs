//! S-expression syntax for programs.
//!
//! ```text
//! expr   = "id"
//!        | "(" "const" vector [ integer ] ")"
//!        | "(" "affine" matrix vector ")"
//!        | "(" "layer" json-object ")"
//!        | "(" "elem" name ")"
//!        | "(" "sum" expr expr { expr } ")"
//!        | "(" "prod" expr expr { expr } ")"
//!        | "(" "compose" expr expr ")"
//!        | "(" "deriv" expr integer ")"
//! vector = "[" [ number { [","] number } ] "]"
//! matrix = "[" vector { [","] vector } "]"
//! ```
//!
//! `(compose f g)` is `f . g`. Input dimensions of `id`, `elem` and `const`
//! are inferred from the surrounding expression (default 1).

use std::fmt;

use crate::error::{Error, Result};
use crate::multitensor::MultiTensor;
use crate::operators::differentiable_derivative;
use crate::program::{Primitive, Program};

/// Parsed program expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Id,
    Const {
        value: Vec<f64>,
        dim_in: Option<usize>,
    },
    Affine {
        matrix: Vec<Vec<f64>>,
        offset: Vec<f64>,
    },
    Layer(MultiTensor),
    Elem(String),
    Sum(Vec<Expr>),
    Prod(Vec<Expr>),
    Compose(Box<Expr>, Box<Expr>),
    Deriv(Box<Expr>, usize),
}

/// Syntax error with a 1-based source position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub expected: Vec<String>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.column, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected one of: {})", self.expected.join(", "))?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseError {}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

type PResult<T> = std::result::Result<T, ParseError>;

const EXPR_START: &[&str] = &["(", "id"];

impl<'a> Parser<'a> {
    fn error(&self, at: usize, message: impl Into<String>, expected: &[&str]) -> ParseError {
        let before = &self.src[..at];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        ParseError {
            line,
            column,
            message: message.into(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        loop {
            let rest = &self.src[self.pos..];
            let trimmed = rest.trim_start();
            self.pos += rest.len() - trimmed.len();
            if trimmed.starts_with(';') {
                self.pos += trimmed.find('\n').unwrap_or(trimmed.len());
            } else {
                break;
            }
        }
    }

    fn expect_char(&mut self, c: char) -> PResult<()> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            Ok(())
        } else {
            Err(self.error(self.pos, self.found(), &[&c.to_string()]))
        }
    }

    fn found(&self) -> String {
        match self.peek() {
            None => "unexpected end of input".into(),
            Some(c) => format!("unexpected {c:?}"),
        }
    }

    fn word(&mut self) -> &'a str {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let len = rest
            .find(|c: char| c.is_whitespace() || "()[],{};".contains(c))
            .unwrap_or(rest.len());
        self.pos += len;
        &rest[..len]
    }

    fn number(&mut self) -> PResult<f64> {
        self.skip_ws();
        let start = self.pos;
        let w = self.word();
        w.parse()
            .map_err(|_| self.error(start, format!("invalid number {w:?}"), &["number"]))
    }

    fn integer(&mut self) -> PResult<usize> {
        self.skip_ws();
        let start = self.pos;
        let w = self.word();
        w.parse()
            .map_err(|_| self.error(start, format!("invalid integer {w:?}"), &["integer"]))
    }

    fn vector(&mut self) -> PResult<Vec<f64>> {
        self.expect_char('[')?;
        let mut out = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                Some(']') => {
                    self.pos += 1;
                    return Ok(out);
                }
                Some(',') if !out.is_empty() => self.pos += 1,
                None => return Err(self.error(self.pos, self.found(), &["number", "]"])),
                _ => out.push(self.number()?),
            }
        }
    }

    fn matrix(&mut self) -> PResult<Vec<Vec<f64>>> {
        self.expect_char('[')?;
        let mut rows = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                Some(']') if !rows.is_empty() => {
                    self.pos += 1;
                    return Ok(rows);
                }
                Some(',') if !rows.is_empty() => self.pos += 1,
                Some('[') => rows.push(self.vector()?),
                _ => return Err(self.error(self.pos, self.found(), &["["])),
            }
        }
    }

    fn json_object(&mut self) -> PResult<MultiTensor> {
        self.skip_ws();
        let start = self.pos;
        if self.peek() != Some('{') {
            return Err(self.error(start, self.found(), &["{"]));
        }
        let mut depth = 0usize;
        let mut in_string = false;
        let mut escaped = false;
        for (i, c) in self.src[start..].char_indices() {
            if in_string {
                match (escaped, c) {
                    (true, _) => escaped = false,
                    (false, '\\') => escaped = true,
                    (false, '"') => in_string = false,
                    _ => {}
                }
                continue;
            }
            match c {
                '"' => in_string = true,
                '{' => depth += 1,
                '}' => {
                    depth -= 1;
                    if depth == 0 {
                        let end = start + i + 1;
                        self.pos = end;
                        return serde_json::from_str(&self.src[start..end]).map_err(|e| {
                            self.error(start, format!("invalid multi-tensor: {e}"), &[])
                        });
                    }
                }
                _ => {}
            }
        }
        Err(self.error(self.src.len(), "unterminated JSON object", &["}"]))
    }

    fn expr(&mut self) -> PResult<Expr> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                self.skip_ws();
                let head_at = self.pos;
                let head = self.word();
                let e = match head {
                    "const" => {
                        let value = self.vector()?;
                        self.skip_ws();
                        let dim_in = match self.peek() {
                            Some(')') => None,
                            _ => Some(self.integer()?),
                        };
                        Expr::Const { value, dim_in }
                    }
                    "affine" => {
                        let matrix = self.matrix()?;
                        let offset = self.vector()?;
                        Expr::Affine { matrix, offset }
                    }
                    "layer" => Expr::Layer(self.json_object()?),
                    "elem" => {
                        self.skip_ws();
                        let at = self.pos;
                        let name = self.word();
                        if Primitive::by_name(name).is_none() {
                            return Err(self.error(
                                at,
                                format!("unknown primitive {name:?}"),
                                &["exp", "log", "sin", "cos", "tanh", "sigmoid", "recip", "pow<n>"],
                            ));
                        }
                        Expr::Elem(name.to_string())
                    }
                    "sum" | "prod" | "compose" => {
                        let ops = self.operands()?;
                        let (min, max) = if head == "compose" { (2, 2) } else { (2, usize::MAX) };
                        if ops.len() < min || ops.len() > max {
                            let want = if min == max {
                                format!("exactly {min}")
                            } else {
                                format!("at least {min}")
                            };
                            return Err(self.error(
                                start,
                                format!("{head} takes {want} operands, got {}", ops.len()),
                                &[],
                            ));
                        }
                        match head {
                            "sum" => Expr::Sum(ops),
                            "prod" => Expr::Prod(ops),
                            _ => {
                                let mut it = ops.into_iter();
                                let f = it.next().unwrap();
                                let g = it.next().unwrap();
                                Expr::Compose(Box::new(f), Box::new(g))
                            }
                        }
                    }
                    "deriv" => {
                        let inner = self.expr()?;
                        let k = self.integer()?;
                        if k == 0 {
                            return Err(self.error(start, "derivative order must be >= 1", &[]));
                        }
                        Expr::Deriv(Box::new(inner), k)
                    }
                    _ => {
                        return Err(self.error(
                            head_at,
                            format!("unknown form {head:?}"),
                            &["const", "affine", "layer", "elem", "sum", "prod", "compose", "deriv"],
                        ))
                    }
                };
                self.expect_char(')')?;
                Ok(e)
            }
            Some(_) => {
                let w = self.word();
                if w == "id" {
                    Ok(Expr::Id)
                } else {
                    let msg = if w.is_empty() { self.found() } else { format!("unexpected {w:?}") };
                    Err(self.error(start, msg, EXPR_START))
                }
            }
            None => Err(self.error(start, self.found(), EXPR_START)),
        }
    }

    fn operands(&mut self) -> PResult<Vec<Expr>> {
        let mut out = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                Some(')') => return Ok(out),
                None => {
                    let mut expected = EXPR_START.to_vec();
                    expected.push(")");
                    return Err(self.error(self.pos, self.found(), &expected));
                }
                _ => out.push(self.expr()?),
            }
        }
    }
}

/// Parses one expression; trailing input other than whitespace is an error.
pub fn parse(text: &str) -> std::result::Result<Expr, ParseError> {
    let mut p = Parser { src: text, pos: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < text.len() {
        return Err(p.error(p.pos, "trailing input after expression", &["end of input"]));
    }
    Ok(e)
}

fn write_vector(f: &mut fmt::Formatter<'_>, v: &[f64]) -> fmt::Result {
    write!(f, "[")?;
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            write!(f, ",")?;
        }
        write!(f, "{x:?}")?;
    }
    write!(f, "]")
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Id => write!(f, "id"),
            Expr::Const { value, dim_in } => {
                write!(f, "(const ")?;
                write_vector(f, value)?;
                if let Some(m) = dim_in {
                    write!(f, " {m}")?;
                }
                write!(f, ")")
            }
            Expr::Affine { matrix, offset } => {
                write!(f, "(affine [")?;
                for (i, row) in matrix.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write_vector(f, row)?;
                }
                write!(f, "] ")?;
                write_vector(f, offset)?;
                write!(f, ")")
            }
            Expr::Layer(w) => {
                let json = serde_json::to_string(w).map_err(|_| fmt::Error)?;
                write!(f, "(layer {json})")
            }
            Expr::Elem(name) => write!(f, "(elem {name})"),
            Expr::Sum(ops) | Expr::Prod(ops) => {
                let head = if matches!(self, Expr::Sum(_)) { "sum" } else { "prod" };
                write!(f, "({head}")?;
                for op in ops {
                    write!(f, " {op}")?;
                }
                write!(f, ")")
            }
            Expr::Compose(a, b) => write!(f, "(compose {a} {b})"),
            Expr::Deriv(e, k) => write!(f, "(deriv {e} {k})"),
        }
    }
}

impl Expr {
    /// Input dimension fixed by the expression itself, if any.
    pub fn inferred_dim_in(&self) -> Option<usize> {
        match self {
            Expr::Id | Expr::Elem(_) => None,
            Expr::Const { dim_in, .. } => *dim_in,
            Expr::Affine { matrix, .. } => matrix.first().map(Vec::len),
            Expr::Layer(w) => Some(w.dim_in()),
            Expr::Sum(ops) | Expr::Prod(ops) => ops.iter().find_map(Expr::inferred_dim_in),
            Expr::Compose(f, g) => g.inferred_dim_in().or_else(|| f.inferred_dim_in()),
            Expr::Deriv(e, _) => e.inferred_dim_in(),
        }
    }

    /// Builds the program, inferring free input dimensions (default 1).
    pub fn to_program(&self) -> Result<Program> {
        self.build(self.inferred_dim_in().unwrap_or(1))
    }

    fn build(&self, m: usize) -> Result<Program> {
        match self {
            Expr::Id => Program::identity(m),
            Expr::Elem(name) => {
                let p = Primitive::by_name(name)
                    .ok_or_else(|| Error::Invalid(format!("unknown primitive {name:?}")))?;
                Program::elementwise(p, m)
            }
            Expr::Const { value, dim_in } => Program::constant(value.clone(), dim_in.unwrap_or(m)),
            Expr::Affine { matrix, offset } => {
                if matrix.len() != offset.len() {
                    return Err(Error::DimensionMismatch {
                        context: "affine rows vs offset",
                        expected: matrix.len(),
                        got: offset.len(),
                    });
                }
                let cols = matrix[0].len();
                if let Some(row) = matrix.iter().find(|r| r.len() != cols) {
                    return Err(Error::DimensionMismatch {
                        context: "affine row length",
                        expected: cols,
                        got: row.len(),
                    });
                }
                Program::affine(matrix.concat(), offset.clone())
            }
            Expr::Layer(w) => Program::contraction_layer(w.clone()),
            Expr::Sum(ops) => Program::sum(ops.iter().map(|e| e.build(m)).collect::<Result<_>>()?),
            Expr::Prod(ops) => Program::product(
                ops.iter().map(|e| e.build(m)).collect::<Result<_>>()?,
                crate::multitensor::BilinearMap::Componentwise,
            ),
            Expr::Compose(f, g) => {
                let inner = g.build(m)?;
                let outer = f.build(inner.dim_out())?;
                Program::compose(outer, inner)
            }
            Expr::Deriv(e, k) => differentiable_derivative(&e.build(m)?, *k),
        }
        .and_then(|p| {
            if p.dim_in() != m {
                Err(Error::DimensionMismatch {
                    context: "program input",
                    expected: m,
                    got: p.dim_in(),
                })
            } else {
                Ok(p)
            }
        })
    }
}

/// Parses and builds a program in one step.
pub fn parse_program(text: &str) -> Result<Program> {
    let e = parse(text).map_err(|e| Error::Invalid(e.to_string()))?;
    e.to_program()
}
