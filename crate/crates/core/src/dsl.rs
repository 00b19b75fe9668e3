//! Expression language for spray coefficients, Finsler functions, and
//! domain constraints.
//!
//! The grammar is ordinary infix arithmetic:
//!
//! ```text
//! expr     := term (('+' | '-') term)*
//! term     := unary (('*' | '/') unary)*
//! unary    := '-' unary | power
//! power    := atom ('^' exponent)?
//! atom     := number | variable | function '(' expr ')' | '(' expr ')'
//! exponent := '-'? integer | '(' '-'? integer ('/' integer)? ')'
//! ```
//!
//! Precedence from loosest to tightest: `+ -`, `* /`, unary `-`, `^`.
//! Variables are `x1..xn` and `y1..yn` for the declared dimension `n`;
//! the recognised functions are `sqrt`, `abs`, `sin`, `cos`, `exp`,
//! `log`. Exponents must be literal integers or rationals such as
//! `^2`, `^(-3)`, or `^(1/2)`.
//!
//! Definitions are read from line-oriented `key = value` files:
//!
//! ```text
//! name = poincare_half_plane
//! dim = 2
//! G1 = -(y1*y2)/x2
//! G2 = (y1^2 - y2^2)/(2*x2)
//! constraint = x2
//! ```
//!
//! A file carries either `G1..Gn` (a spray) or a single `F` (a Finsler
//! function), plus zero or more `constraint` lines; each constraint
//! expression is required to be strictly positive on the sampled
//! domain. `#` starts a comment.

use std::fmt;

use thiserror::Error;

use crate::Scalar;

/// Built-in function names applicable to one argument.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Abs,
    Sin,
    Cos,
    Exp,
    Log,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        match name {
            "sqrt" => Some(Func::Sqrt),
            "abs" => Some(Func::Abs),
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "log" => Some(Func::Log),
            _ => None,
        }
    }
}

/// Literal exponent of `^`, kept exact as a reduced rational with
/// positive denominator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Exponent {
    pub num: i64,
    pub den: i64,
}

impl Exponent {
    pub fn new(num: i64, den: i64) -> Exponent {
        assert!(den != 0, "exponent denominator must be nonzero");
        let sign = if den < 0 { -1 } else { 1 };
        let g = gcd(num.unsigned_abs(), den.unsigned_abs()).max(1) as i64;
        Exponent { num: sign * num / g, den: sign * den / g }
    }

    pub fn integer(n: i64) -> Exponent {
        Exponent { num: n, den: 1 }
    }

    pub fn is_integer(self) -> bool {
        self.den == 1
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

/// Expression tree over the coordinates of one point of the slit
/// tangent bundle.
///
/// Variable slots are numbered `0..2n`: slot `i < n` is the base
/// coordinate `x(i+1)`, slot `n + j` is the fibre coordinate `y(j+1)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Expression {
    Const(f64),
    Var(usize),
    Neg(Box<Expression>),
    Add(Box<Expression>, Box<Expression>),
    Sub(Box<Expression>, Box<Expression>),
    Mul(Box<Expression>, Box<Expression>),
    Div(Box<Expression>, Box<Expression>),
    Pow(Box<Expression>, Exponent),
    Call(Func, Box<Expression>),
}

impl Expression {
    /// Renders the variable in slot `i` for dimension `n`.
    pub fn var_name(i: usize, n: usize) -> String {
        if i < n {
            format!("x{}", i + 1)
        } else {
            format!("y{}", i + 1 - n)
        }
    }
}

/// Failure while turning source text into an [`Expression`].
#[derive(Clone, Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("syntax error at position {pos}: {detail}")]
    Syntax { pos: usize, detail: String },

    #[error("unknown identifier `{name}` at position {pos}")]
    UnknownIdentifier { pos: usize, name: String },

    #[error("variable index out of range at position {pos}: `{name}` needs dimension > {dim}")]
    IndexOutOfRange { pos: usize, name: String, dim: usize },
}

/// Failure while evaluating an [`Expression`] at a point outside its
/// domain.
#[derive(Clone, Debug, Error, PartialEq)]
#[error("{op} applied to {value} in `{context}`")]
pub struct EvalError {
    pub op: &'static str,
    pub value: f64,
    pub context: String,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(v) => write!(f, "number {v}"),
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Plus => write!(f, "`+`"),
            Tok::Minus => write!(f, "`-`"),
            Tok::Star => write!(f, "`*`"),
            Tok::Slash => write!(f, "`/`"),
            Tok::Caret => write!(f, "`^`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\r' | '\n' => i += 1,
            '+' => { toks.push((Tok::Plus, i)); i += 1; }
            '-' => { toks.push((Tok::Minus, i)); i += 1; }
            '*' => { toks.push((Tok::Star, i)); i += 1; }
            '/' => { toks.push((Tok::Slash, i)); i += 1; }
            '^' => { toks.push((Tok::Caret, i)); i += 1; }
            '(' => { toks.push((Tok::LParen, i)); i += 1; }
            ')' => { toks.push((Tok::RParen, i)); i += 1; }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() { i += 1; }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() { i += 1; }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') { j += 1; }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() { i += 1; }
                    }
                }
                let lit = &text[start..i];
                let value = lit.parse::<f64>().map_err(|_| ParseError::Syntax {
                    pos: start,
                    detail: format!("invalid number literal `{lit}`"),
                })?;
                toks.push((Tok::Num(value), start));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                toks.push((Tok::Ident(text[start..i].to_string()), start));
            }
            _ => {
                return Err(ParseError::Syntax {
                    pos: i,
                    detail: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    Ok(toks)
}

struct Parser<'a> {
    toks: &'a [(Tok, usize)],
    at: usize,
    end: usize,
    dim: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(t, _)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |&(_, p)| p)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.at).map(|(t, _)| t.clone());
        self.at += 1;
        t
    }

    fn expect(&mut self, want: &Tok) -> Result<(), ParseError> {
        match self.peek() {
            Some(t) if t == want => {
                self.at += 1;
                Ok(())
            }
            Some(t) => Err(ParseError::Syntax {
                pos: self.pos(),
                detail: format!("expected {want}, found {t}"),
            }),
            None => Err(ParseError::Syntax {
                pos: self.end,
                detail: format!("expected {want}, found end of input"),
            }),
        }
    }

    fn expr(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.at += 1;
                    lhs = Expression::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Tok::Minus) => {
                    self.at += 1;
                    lhs = Expression::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.at += 1;
                    lhs = Expression::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(Tok::Slash) => {
                    self.at += 1;
                    lhs = Expression::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expression, ParseError> {
        if let Some(Tok::Minus) = self.peek() {
            self.at += 1;
            Ok(Expression::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expression, ParseError> {
        let base = self.atom()?;
        if let Some(Tok::Caret) = self.peek() {
            self.at += 1;
            let exp = self.exponent()?;
            Ok(Expression::Pow(Box::new(base), exp))
        } else {
            Ok(base)
        }
    }

    fn integer_literal(&mut self) -> Result<i64, ParseError> {
        let pos = self.pos();
        match self.bump() {
            Some(Tok::Num(v)) if v.fract() == 0.0 && v.abs() < 9e15 => Ok(v as i64),
            Some(t) => Err(ParseError::Syntax {
                pos,
                detail: format!("expected an integer exponent, found {t}"),
            }),
            None => Err(ParseError::Syntax {
                pos,
                detail: "expected an integer exponent, found end of input".into(),
            }),
        }
    }

    fn exponent(&mut self) -> Result<Exponent, ParseError> {
        match self.peek() {
            Some(Tok::LParen) => {
                self.at += 1;
                let mut sign = 1;
                if let Some(Tok::Minus) = self.peek() {
                    self.at += 1;
                    sign = -1;
                }
                let num = self.integer_literal()?;
                let den = if let Some(Tok::Slash) = self.peek() {
                    self.at += 1;
                    let pos = self.pos();
                    let d = self.integer_literal()?;
                    if d <= 0 {
                        return Err(ParseError::Syntax {
                            pos,
                            detail: "exponent denominator must be positive".into(),
                        });
                    }
                    d
                } else {
                    1
                };
                self.expect(&Tok::RParen)?;
                Ok(Exponent::new(sign * num, den))
            }
            Some(Tok::Minus) => {
                self.at += 1;
                Ok(Exponent::integer(-self.integer_literal()?))
            }
            _ => Ok(Exponent::integer(self.integer_literal()?)),
        }
    }

    fn atom(&mut self) -> Result<Expression, ParseError> {
        let pos = self.pos();
        match self.bump() {
            Some(Tok::Num(v)) => Ok(Expression::Const(v)),
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                self.expect(&Tok::RParen)?;
                Ok(inner)
            }
            Some(Tok::Ident(name)) => {
                if let Some(func) = Func::from_name(&name) {
                    self.expect(&Tok::LParen)?;
                    let arg = self.expr()?;
                    self.expect(&Tok::RParen)?;
                    return Ok(Expression::Call(func, Box::new(arg)));
                }
                self.variable(&name, pos)
            }
            Some(t) => Err(ParseError::Syntax {
                pos,
                detail: format!("expected a value, found {t}"),
            }),
            None => Err(ParseError::Syntax {
                pos: self.end,
                detail: "expected a value, found end of input".into(),
            }),
        }
    }

    fn variable(&mut self, name: &str, pos: usize) -> Result<Expression, ParseError> {
        let mut chars = name.chars();
        let head = chars.next();
        let rest = chars.as_str();
        let base = match head {
            Some('x') => Some(0),
            Some('y') => Some(self.dim),
            _ => None,
        };
        match base {
            Some(offset) if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) => {
                let k: usize = rest.parse().map_err(|_| ParseError::UnknownIdentifier {
                    pos,
                    name: name.to_string(),
                })?;
                if k == 0 || k > self.dim {
                    return Err(ParseError::IndexOutOfRange {
                        pos,
                        name: name.to_string(),
                        dim: self.dim,
                    });
                }
                Ok(Expression::Var(offset + k - 1))
            }
            _ => Err(ParseError::UnknownIdentifier { pos, name: name.to_string() }),
        }
    }
}

/// Parses `text` into an expression over `x1..xn`, `y1..yn`.
pub fn parse_expression(text: &str, dim: usize) -> Result<Expression, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks: &toks, at: 0, end: text.len(), dim };
    let expr = p.expr()?;
    if p.at != toks.len() {
        return Err(ParseError::Syntax {
            pos: p.pos(),
            detail: format!("unexpected trailing {}", toks[p.at].0),
        });
    }
    Ok(expr)
}

/// Evaluates an expression at a point of the slit tangent bundle given
/// as the `2n` coordinates `(x1..xn, y1..yn)`.
pub fn evaluate<T: Scalar>(expr: &Expression, point: &[T]) -> Result<T, EvalError> {
    eval_inner(expr, point, point.len() / 2)
}

fn domain<T: Scalar>(op: &'static str, value: T, at: &Expression, dim: usize) -> EvalError {
    EvalError {
        op,
        value: num_traits::ToPrimitive::to_f64(&value).unwrap_or(f64::NAN),
        context: render_expression(at, dim),
    }
}

fn eval_inner<T: Scalar>(expr: &Expression, point: &[T], dim: usize) -> Result<T, EvalError> {
    match expr {
        Expression::Const(c) => Ok(T::from_f64(*c).expect("literal fits the scalar type")),
        Expression::Var(i) => Ok(point[*i]),
        Expression::Neg(a) => Ok(-eval_inner(a, point, dim)?),
        Expression::Add(a, b) => Ok(eval_inner(a, point, dim)? + eval_inner(b, point, dim)?),
        Expression::Sub(a, b) => Ok(eval_inner(a, point, dim)? - eval_inner(b, point, dim)?),
        Expression::Mul(a, b) => Ok(eval_inner(a, point, dim)? * eval_inner(b, point, dim)?),
        Expression::Div(a, b) => {
            let num = eval_inner(a, point, dim)?;
            let den = eval_inner(b, point, dim)?;
            if den == T::zero() {
                return Err(domain("division by", den, expr, dim));
            }
            Ok(num / den)
        }
        Expression::Pow(base, exp) => {
            let b = eval_inner(base, point, dim)?;
            if exp.is_integer() {
                if b == T::zero() && exp.num < 0 {
                    return Err(domain("negative power of", b, expr, dim));
                }
                Ok(powi(b, exp.num))
            } else if b > T::zero() {
                Ok(b.powf(T::from_f64(exp.as_f64()).expect("exponent fits the scalar type")))
            } else {
                Err(domain("rational power of", b, expr, dim))
            }
        }
        Expression::Call(func, arg) => {
            let a = eval_inner(arg, point, dim)?;
            match func {
                Func::Sqrt => {
                    if a < T::zero() {
                        return Err(domain("sqrt of", a, expr, dim));
                    }
                    Ok(a.sqrt())
                }
                Func::Abs => Ok(a.abs()),
                Func::Sin => Ok(a.sin()),
                Func::Cos => Ok(a.cos()),
                Func::Exp => Ok(a.exp()),
                Func::Log => {
                    if a <= T::zero() {
                        return Err(domain("log of", a, expr, dim));
                    }
                    Ok(a.ln())
                }
            }
        }
    }
}

fn powi<T: Scalar>(base: T, mut n: i64) -> T {
    let invert = n < 0;
    if invert {
        n = -n;
    }
    let mut acc = T::one();
    let mut sq = base;
    while n > 0 {
        if n & 1 == 1 {
            acc = acc * sq;
        }
        sq = sq * sq;
        n >>= 1;
    }
    if invert {
        T::one() / acc
    } else {
        acc
    }
}

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

impl Expression {
    fn precedence(&self) -> u8 {
        match self {
            Expression::Add(..) | Expression::Sub(..) => PREC_ADD,
            Expression::Mul(..) | Expression::Div(..) => PREC_MUL,
            Expression::Neg(..) => PREC_NEG,
            Expression::Pow(..) => PREC_POW,
            Expression::Const(c) if *c < 0.0 => PREC_NEG,
            _ => PREC_ATOM,
        }
    }

}

/// A spray given by closed-form coefficients: the system
/// x''^i = -2 G^i(x, x').
#[derive(Clone, Debug)]
pub struct SprayDefinition {
    pub name: String,
    pub dim: usize,
    /// The `n` coefficient expressions G^1..G^n, each positively
    /// 2-homogeneous in y on the constrained domain.
    pub g: Vec<Expression>,
    /// Expressions required to be strictly positive on the domain.
    pub constraints: Vec<Expression>,
}

/// A Finsler function given in closed form, positive and
/// 1-homogeneous in y on the constrained domain.
#[derive(Clone, Debug)]
pub struct FinslerDefinition {
    pub name: String,
    pub dim: usize,
    pub f: Expression,
    pub constraints: Vec<Expression>,
}

/// Either kind of definition file.
#[derive(Clone, Debug)]
pub enum Definition {
    Spray(SprayDefinition),
    Finsler(FinslerDefinition),
}

impl Definition {
    pub fn name(&self) -> &str {
        match self {
            Definition::Spray(s) => &s.name,
            Definition::Finsler(f) => &f.name,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Definition::Spray(s) => s.dim,
            Definition::Finsler(f) => f.dim,
        }
    }
}

/// Failure while reading a definition file.
#[derive(Clone, Debug, Error, PartialEq)]
pub enum FileError {
    #[error("line {line}: expected `key = value`")]
    Malformed { line: usize },

    #[error("line {line}: unsupported key `{key}`")]
    UnknownKey { line: usize, key: String },

    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },

    #[error("missing field `{field}`")]
    MissingField { field: &'static str },

    #[error("line {line}: invalid dimension `{value}`, need an integer between 2 and 8")]
    BadDim { line: usize, value: String },

    #[error("expected exactly G1..G{dim}, found {found}")]
    CoefficientCount { dim: usize, found: String },

    #[error("a file defines either F or G1..Gn, not both")]
    MixedKind,

    #[error("line {line} ({key}): {source}")]
    Expr {
        line: usize,
        key: String,
        source: ParseError,
    },
}

/// Parses a definition file, accepting both spray files (`G1..Gn`) and
/// Finsler files (`F`).
pub fn parse_definition_file(text: &str) -> Result<Definition, FileError> {
    let mut entries: Vec<(usize, String, String)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = match raw.find('#') {
            Some(at) => &raw[..at],
            None => raw,
        };
        if content.trim().is_empty() {
            continue;
        }
        let Some(eq) = content.find('=') else {
            return Err(FileError::Malformed { line });
        };
        let key = content[..eq].trim().to_string();
        let value = content[eq + 1..].trim().to_string();
        if key.is_empty() || value.is_empty() {
            return Err(FileError::Malformed { line });
        }
        entries.push((line, key, value));
    }

    let mut dim: Option<usize> = None;
    for (line, key, value) in &entries {
        if key == "dim" {
            if dim.is_some() {
                return Err(FileError::Duplicate { line: *line, key: key.clone() });
            }
            let parsed = value.parse::<usize>().ok().filter(|d| (2..=8).contains(d));
            match parsed {
                Some(d) => dim = Some(d),
                None => {
                    return Err(FileError::BadDim { line: *line, value: value.clone() })
                }
            }
        }
    }
    let Some(dim) = dim else {
        return Err(FileError::MissingField { field: "dim" });
    };

    let mut name: Option<String> = None;
    let mut f_expr: Option<Expression> = None;
    let mut coeffs: Vec<(usize, usize, Expression)> = Vec::new();
    let mut constraints: Vec<Expression> = Vec::new();

    let parse = |line: usize, key: &str, value: &str| {
        parse_expression(value, dim).map_err(|source| FileError::Expr {
            line,
            key: key.to_string(),
            source,
        })
    };

    for (line, key, value) in &entries {
        match key.as_str() {
            "dim" => {}
            "name" => {
                if name.is_some() {
                    return Err(FileError::Duplicate { line: *line, key: key.clone() });
                }
                name = Some(value.clone());
            }
            "F" => {
                if f_expr.is_some() {
                    return Err(FileError::Duplicate { line: *line, key: key.clone() });
                }
                f_expr = Some(parse(*line, key, value)?);
            }
            "constraint" => constraints.push(parse(*line, key, value)?),
            _ => {
                let index = key
                    .strip_prefix('G')
                    .and_then(|s| s.parse::<usize>().ok())
                    .filter(|k| *k >= 1);
                match index {
                    Some(k) => {
                        if coeffs.iter().any(|(_, seen, _)| *seen == k) {
                            return Err(FileError::Duplicate {
                                line: *line,
                                key: key.clone(),
                            });
                        }
                        coeffs.push((*line, k, parse(*line, key, value)?));
                    }
                    None => {
                        return Err(FileError::UnknownKey {
                            line: *line,
                            key: key.clone(),
                        })
                    }
                }
            }
        }
    }

    let name = name.unwrap_or_else(|| "unnamed".to_string());
    match (f_expr, coeffs.is_empty()) {
        (Some(_), false) => Err(FileError::MixedKind),
        (Some(f), true) => Ok(Definition::Finsler(FinslerDefinition {
            name,
            dim,
            f,
            constraints,
        })),
        (None, true) => Err(FileError::MissingField { field: "G1..Gn or F" }),
        (None, false) => {
            let mut seen: Vec<usize> = coeffs.iter().map(|(_, k, _)| *k).collect();
            seen.sort_unstable();
            let expected: Vec<usize> = (1..=dim).collect();
            if seen != expected {
                let found = seen
                    .iter()
                    .map(|k| format!("G{k}"))
                    .collect::<Vec<_>>()
                    .join(", ");
                return Err(FileError::CoefficientCount { dim, found });
            }
            let mut g = vec![Expression::Const(0.0); dim];
            for (_, k, expr) in coeffs {
                g[k - 1] = expr;
            }
            Ok(Definition::Spray(SprayDefinition { name, dim, g, constraints }))
        }
    }
}

/// Parses a file that must define a spray.
pub fn parse_spray_file(text: &str) -> Result<SprayDefinition, FileError> {
    match parse_definition_file(text)? {
        Definition::Spray(s) => Ok(s),
        Definition::Finsler(_) => Err(FileError::MissingField { field: "G1..Gn" }),
    }
}

/// Parses a file that must define a Finsler function.
pub fn parse_finsler_file(text: &str) -> Result<FinslerDefinition, FileError> {
    match parse_definition_file(text)? {
        Definition::Finsler(f) => Ok(f),
        Definition::Spray(_) => Err(FileError::MissingField { field: "F" }),
    }
}

/// Writes a definition back out in the file format.
pub fn render_definition(def: &Definition) -> String {
    let mut out = String::new();
    let (name, dim, constraints) = match def {
        Definition::Spray(s) => (&s.name, s.dim, &s.constraints),
        Definition::Finsler(f) => (&f.name, f.dim, &f.constraints),
    };
    out.push_str(&format!("name = {name}\n"));
    out.push_str(&format!("dim = {dim}\n"));
    match def {
        Definition::Spray(s) => {
            for (i, g) in s.g.iter().enumerate() {
                out.push_str(&format!("G{} = {}\n", i + 1, render_expression(g, dim)));
            }
        }
        Definition::Finsler(f) => {
            out.push_str(&format!("F = {}\n", render_expression(&f.f, dim)));
        }
    }
    for c in constraints {
        out.push_str(&format!("constraint = {}\n", render_expression(c, dim)));
    }
    out
}

/// Renders an expression with `x1..xn`, `y1..yn` variable names.
pub fn render_expression(expr: &Expression, dim: usize) -> String {
    struct R<'a>(&'a Expression, usize);
    impl fmt::Display for R<'_> {
        fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            fmt_named(self.0, self.1, f, 0)
        }
    }
    R(expr, dim).to_string()
}

fn fmt_named(
    expr: &Expression,
    dim: usize,
    f: &mut fmt::Formatter<'_>,
    min: u8,
) -> fmt::Result {
    let prec = expr.precedence();
    if prec < min {
        write!(f, "(")?;
    }
    match expr {
        Expression::Const(c) => write!(f, "{c}")?,
        Expression::Var(i) => write!(f, "{}", Expression::var_name(*i, dim))?,
        Expression::Neg(a) => {
            write!(f, "-")?;
            fmt_named(a, dim, f, PREC_NEG)?;
        }
        Expression::Add(a, b) => {
            fmt_named(a, dim, f, PREC_ADD)?;
            write!(f, " + ")?;
            fmt_named(b, dim, f, PREC_ADD + 1)?;
        }
        Expression::Sub(a, b) => {
            fmt_named(a, dim, f, PREC_ADD)?;
            write!(f, " - ")?;
            fmt_named(b, dim, f, PREC_ADD + 1)?;
        }
        Expression::Mul(a, b) => {
            fmt_named(a, dim, f, PREC_MUL)?;
            write!(f, "*")?;
            fmt_named(b, dim, f, PREC_MUL + 1)?;
        }
        Expression::Div(a, b) => {
            fmt_named(a, dim, f, PREC_MUL)?;
            write!(f, "/")?;
            fmt_named(b, dim, f, PREC_MUL + 1)?;
        }
        Expression::Pow(base, exp) => {
            fmt_named(base, dim, f, PREC_ATOM)?;
            if exp.is_integer() && exp.num >= 0 {
                write!(f, "^{}", exp.num)?;
            } else if exp.is_integer() {
                write!(f, "^({})", exp.num)?;
            } else {
                write!(f, "^({}/{})", exp.num, exp.den)?;
            }
        }
        Expression::Call(func, arg) => {
            write!(f, "{}(", func.name())?;
            fmt_named(arg, dim, f, 0)?;
            write!(f, ")")?;
        }
    }
    if prec < min {
        write!(f, ")")?;
    }
    Ok(())
}
