//! Scalar field expressions in `q1, q2, q3`: parsing, exact differentiation,
//! evaluation and Taylor-mode expansion into jets.
//!
//! Grammar (no implicit multiplication):
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := base ('^' integer)?
//! base   := number | var | func '(' expr ')' | '(' expr ')' | '-' base
//! ```
//!
//! Unary minus sits inside `base`, so `-q1^2` reads as `(-q1)^2`.

use std::fmt;
use std::sync::Arc;

use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, Float, NumCast, One, Zero};
use thiserror::Error;

use crate::jet::{Jet, JetError};
use crate::scalar::{Rational, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sqrt,
    Sin,
    Cos,
    Exp,
    Log,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(Rational),
    /// Variable index 0, 1, 2 for q1, q2, q3.
    Var(usize),
    Neg(Arc<Expr>),
    Add(Arc<Expr>, Arc<Expr>),
    Sub(Arc<Expr>, Arc<Expr>),
    Mul(Arc<Expr>, Arc<Expr>),
    Div(Arc<Expr>, Arc<Expr>),
    Pow(Arc<Expr>, u32),
    Call(Func, Arc<Expr>),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("`{func}` takes one argument, got {got} (offset {offset})")]
    Arity { func: String, got: usize, offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownIdentifier { offset, .. }
            | ParseError::Arity { offset, .. } => *offset,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("division by zero in `{0}`")]
    DivisionByZero(String),
    #[error("{op} outside its domain in `{expr}`")]
    Domain { op: &'static str, expr: String },
    #[error("jet expansion of `{expr}` failed: {source}")]
    Jet { expr: String, source: JetError },
}

// ---------------------------------------------------------------- builders

impl Expr {
    pub fn var(i: usize) -> Expr {
        assert!(i < 3, "variables are q1, q2, q3");
        Expr::Var(i)
    }

    pub fn int(n: i64) -> Expr {
        Expr::Const(Rational::from_integer(n))
    }

    pub fn rational(n: i64, d: i64) -> Expr {
        Expr::Const(Rational::new(n, d))
    }

    pub fn as_const(&self) -> Option<Rational> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    fn is_const(&self, v: i64) -> bool {
        self.as_const() == Some(Rational::from_integer(v))
    }

    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Const(c) => Expr::Const(-c),
            Expr::Neg(inner) => (*inner).clone(),
            a => Expr::Neg(Arc::new(a)),
        }
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        if a.is_const(0) {
            return b;
        }
        if b.is_const(0) {
            return a;
        }
        if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
            if let Some(s) = x.checked_add(&y) {
                return Expr::Const(s);
            }
        }
        Expr::Add(Arc::new(a), Arc::new(b))
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        if b.is_const(0) {
            return a;
        }
        if a.is_const(0) {
            return Expr::neg(b);
        }
        if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
            if let Some(s) = x.checked_sub(&y) {
                return Expr::Const(s);
            }
        }
        Expr::Sub(Arc::new(a), Arc::new(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        if a.is_const(0) || b.is_const(0) {
            return Expr::int(0);
        }
        if a.is_const(1) {
            return b;
        }
        if b.is_const(1) {
            return a;
        }
        if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
            if let Some(s) = x.checked_mul(&y) {
                return Expr::Const(s);
            }
        }
        Expr::Mul(Arc::new(a), Arc::new(b))
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        if b.is_const(1) {
            return a;
        }
        if a.is_const(0) && !b.is_const(0) {
            return Expr::int(0);
        }
        if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
            if !y.is_zero() {
                if let Some(s) = x.checked_div(&y) {
                    return Expr::Const(s);
                }
            }
        }
        Expr::Div(Arc::new(a), Arc::new(b))
    }

    pub fn pow(a: Expr, n: u32) -> Expr {
        if n == 0 {
            return Expr::int(1);
        }
        if n == 1 {
            return a;
        }
        if let Some(x) = a.as_const() {
            let mut acc = Some(Rational::one());
            for _ in 0..n {
                acc = acc.and_then(|v| v.checked_mul(&x));
            }
            if let Some(v) = acc {
                return Expr::Const(v);
            }
        }
        Expr::Pow(Arc::new(a), n)
    }

    pub fn call(f: Func, a: Expr) -> Expr {
        Expr::Call(f, Arc::new(a))
    }

    pub fn sqrt(a: Expr) -> Expr {
        Expr::call(Func::Sqrt, a)
    }

    /// Number of nodes, a rough size measure.
    pub fn size(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => 1 + a.size(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => 1 + a.size() + b.size(),
        }
    }
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::add(self, rhs)
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::sub(self, rhs)
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::mul(self, rhs)
    }
}

impl std::ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::div(self, rhs)
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

// ---------------------------------------------------------------- parser

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num { value: Rational, integer: Option<u32> },
    Ident(String),
    Sym(char),
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(Tok, usize)>, ParseError> {
        let mut lx = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        loop {
            let t = lx.next()?;
            let end = t.0 == Tok::End;
            out.push(t);
            if end {
                return Ok(out);
            }
        }
    }

    fn next(&mut self) -> Result<(Tok, usize), ParseError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        if start >= bytes.len() {
            return Ok((Tok::End, start));
        }
        let c = bytes[start];
        if c.is_ascii_digit() || c == b'.' {
            let mut end = start;
            while end < bytes.len() && bytes[end].is_ascii_digit() {
                end += 1;
            }
            let int_part = &self.src[start..end];
            let mut frac_part = "";
            if end < bytes.len() && bytes[end] == b'.' {
                let fs = end + 1;
                let mut fe = fs;
                while fe < bytes.len() && bytes[fe].is_ascii_digit() {
                    fe += 1;
                }
                frac_part = &self.src[fs..fe];
                end = fe;
                if int_part.is_empty() && frac_part.is_empty() {
                    return Err(ParseError::Syntax { offset: start, message: "lone `.`".into() });
                }
            }
            self.pos = end;
            let value = decimal_to_rational(int_part, frac_part).ok_or_else(|| ParseError::Syntax {
                offset: start,
                message: "numeric literal out of range".into(),
            })?;
            let integer = if end == start + int_part.len() { int_part.parse::<u32>().ok() } else { None };
            return Ok((Tok::Num { value, integer }, start));
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let mut end = start;
            while end < bytes.len() && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_') {
                end += 1;
            }
            self.pos = end;
            return Ok((Tok::Ident(self.src[start..end].to_string()), start));
        }
        if b"+-*/^(),".contains(&c) {
            self.pos += 1;
            return Ok((Tok::Sym(c as char), start));
        }
        let ch = self.src[start..].chars().next().unwrap_or('?');
        Err(ParseError::Syntax { offset: start, message: format!("unexpected character `{ch}`") })
    }
}

fn decimal_to_rational(int_part: &str, frac_part: &str) -> Option<Rational> {
    let digits = format!("{int_part}{frac_part}");
    let num: i64 = if digits.is_empty() { 0 } else { digits.parse().ok()? };
    let den = 10i64.checked_pow(frac_part.len() as u32)?;
    Some(Rational::new(num, den))
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn offset(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn syntax<T>(&self, message: &str) -> Result<T, ParseError> {
        let what = match self.peek() {
            Tok::End => "end of input".to_string(),
            Tok::Num { .. } => "number".to_string(),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Sym(c) => format!("`{c}`"),
        };
        Err(ParseError::Syntax { offset: self.offset(), message: format!("{message}, found {what}") })
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Sym('+') => {
                    self.bump();
                    lhs = Expr::Add(Arc::new(lhs), Arc::new(self.term()?));
                }
                Tok::Sym('-') => {
                    self.bump();
                    lhs = Expr::Sub(Arc::new(lhs), Arc::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Tok::Sym('*') => {
                    self.bump();
                    lhs = Expr::Mul(Arc::new(lhs), Arc::new(self.factor()?));
                }
                Tok::Sym('/') => {
                    self.bump();
                    lhs = Expr::Div(Arc::new(lhs), Arc::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let base = self.base()?;
        if self.peek() == &Tok::Sym('^') {
            self.bump();
            match self.peek().clone() {
                Tok::Num { integer: Some(n), .. } => {
                    self.bump();
                    return Ok(Expr::Pow(Arc::new(base), n));
                }
                _ => return self.syntax("expected a non-negative integer exponent"),
            }
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Expr, ParseError> {
        let (tok, offset) = (self.peek().clone(), self.offset());
        match tok {
            Tok::Num { value, .. } => {
                self.bump();
                Ok(Expr::Const(value))
            }
            Tok::Sym('-') => {
                self.bump();
                Ok(Expr::Neg(Arc::new(self.base()?)))
            }
            Tok::Sym('(') => {
                self.bump();
                let e = self.expr()?;
                self.expect_close()?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                match name.as_str() {
                    "q1" => return Ok(Expr::Var(0)),
                    "q2" => return Ok(Expr::Var(1)),
                    "q3" => return Ok(Expr::Var(2)),
                    _ => {}
                }
                let func = Func::from_name(&name).ok_or(ParseError::UnknownIdentifier { name: name.clone(), offset })?;
                if self.peek() != &Tok::Sym('(') {
                    return self.syntax(&format!("expected `(` after `{name}`"));
                }
                self.bump();
                let mut args = Vec::new();
                if self.peek() != &Tok::Sym(')') {
                    args.push(self.expr()?);
                    while self.peek() == &Tok::Sym(',') {
                        self.bump();
                        args.push(self.expr()?);
                    }
                }
                self.expect_close()?;
                if args.len() != 1 {
                    return Err(ParseError::Arity { func: name, got: args.len(), offset });
                }
                Ok(Expr::Call(func, Arc::new(args.pop().expect("one argument"))))
            }
            _ => self.syntax("expected a number, variable, function or `(`"),
        }
    }

    fn expect_close(&mut self) -> Result<(), ParseError> {
        if self.peek() == &Tok::Sym(')') {
            self.bump();
            Ok(())
        } else {
            self.syntax("expected `)`")
        }
    }
}

pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    let toks = Lexer::tokens(text)?;
    let mut p = Parser { toks, at: 0 };
    let e = p.expr()?;
    if p.peek() != &Tok::End {
        return p.syntax("unexpected trailing input");
    }
    Ok(e)
}

impl std::str::FromStr for Expr {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Expr, ParseError> {
        parse_expr(s)
    }
}

// ---------------------------------------------------------------- printer

/// Terminating decimal text for rationals whose denominator is `2^a 5^b`.
fn decimal_text(c: Rational) -> Option<String> {
    let (n, mut d) = (*c.numer() as i128, *c.denom() as i128);
    let (mut twos, mut fives) = (0u32, 0u32);
    while d % 2 == 0 {
        d /= 2;
        twos += 1;
    }
    while d % 5 == 0 {
        d /= 5;
        fives += 1;
    }
    if d != 1 {
        return None;
    }
    let k = twos.max(fives);
    let scale = 10i128.checked_pow(k)? / (*c.denom() as i128);
    let scaled = n.checked_mul(scale)?;
    if k == 0 {
        return Some(scaled.to_string());
    }
    let p = 10i128.pow(k);
    let sign = if scaled < 0 { "-" } else { "" };
    let a = scaled.abs();
    Some(format!("{sign}{}.{:0width$}", a / p, a % p, width = k as usize))
}

impl Expr {
    fn write_at(&self, f: &mut fmt::Formatter<'_>, level: u8) -> fmt::Result {
        let (own, body): (u8, Box<dyn Fn(&mut fmt::Formatter<'_>) -> fmt::Result + '_>) = match self {
            Expr::Add(a, b) => (1, Box::new(move |f| {
                a.write_at(f, 1)?;
                write!(f, " + ")?;
                b.write_at(f, 2)
            })),
            Expr::Sub(a, b) => (1, Box::new(move |f| {
                a.write_at(f, 1)?;
                write!(f, " - ")?;
                b.write_at(f, 2)
            })),
            Expr::Mul(a, b) => (2, Box::new(move |f| {
                a.write_at(f, 2)?;
                write!(f, "*")?;
                b.write_at(f, 3)
            })),
            Expr::Div(a, b) => (2, Box::new(move |f| {
                a.write_at(f, 2)?;
                write!(f, "/")?;
                b.write_at(f, 3)
            })),
            Expr::Pow(a, n) => (3, Box::new(move |f| {
                a.write_at(f, 4)?;
                write!(f, "^{n}")
            })),
            Expr::Neg(a) => (4, Box::new(move |f| {
                write!(f, "-")?;
                a.write_at(f, 4)
            })),
            Expr::Var(i) => (4, Box::new(move |f| write!(f, "q{}", i + 1))),
            Expr::Call(func, a) => (4, Box::new(move |f| {
                write!(f, "{}(", func.name())?;
                a.write_at(f, 1)?;
                write!(f, ")")
            })),
            Expr::Const(c) => {
                let c = *c;
                match decimal_text(c) {
                    Some(t) if c >= Rational::zero() => (4, Box::new(move |f| write!(f, "{t}"))),
                    Some(t) => (0, Box::new(move |f| write!(f, "{t}"))),
                    None => (0, Box::new(move |f| write!(f, "{}/{}", c.numer(), c.denom()))),
                }
            }
        };
        if own < level {
            write!(f, "(")?;
            body(f)?;
            write!(f, ")")
        } else {
            body(f)
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_at(f, 1)
    }
}

// ---------------------------------------------------------------- calculus

pub fn diff_expr(e: &Expr, v: usize) -> Expr {
    assert!(v < 3, "variables are q1, q2, q3");
    let d = |x: &Arc<Expr>| diff_expr(x, v);
    let c = |x: &Arc<Expr>| (**x).clone();
    match e {
        Expr::Const(_) => Expr::int(0),
        Expr::Var(i) => Expr::int((*i == v) as i64),
        Expr::Neg(a) => Expr::neg(d(a)),
        Expr::Add(a, b) => Expr::add(d(a), d(b)),
        Expr::Sub(a, b) => Expr::sub(d(a), d(b)),
        Expr::Mul(a, b) => Expr::add(Expr::mul(d(a), c(b)), Expr::mul(c(a), d(b))),
        Expr::Div(a, b) => Expr::div(
            Expr::sub(Expr::mul(d(a), c(b)), Expr::mul(c(a), d(b))),
            Expr::pow(c(b), 2),
        ),
        Expr::Pow(a, n) => Expr::mul(Expr::mul(Expr::int(*n as i64), Expr::pow(c(a), n - 1)), d(a)),
        Expr::Call(func, a) => {
            let da = d(a);
            match func {
                Func::Sqrt => Expr::div(da, Expr::mul(Expr::int(2), e.clone())),
                Func::Sin => Expr::mul(Expr::call(Func::Cos, c(a)), da),
                Func::Cos => Expr::neg(Expr::mul(Expr::call(Func::Sin, c(a)), da)),
                Func::Exp => Expr::mul(e.clone(), da),
                Func::Log => Expr::div(da, c(a)),
            }
        }
    }
}

fn const_to<T: Float>(c: Rational) -> T {
    let n: T = NumCast::from(*c.numer()).expect("numerator representable");
    let d: T = NumCast::from(*c.denom()).expect("denominator representable");
    n / d
}

pub fn eval_expr<T: Float>(e: &Expr, q: &[T; 3]) -> Result<T, EvalError> {
    Ok(match e {
        Expr::Const(c) => const_to(*c),
        Expr::Var(i) => q[*i],
        Expr::Neg(a) => -eval_expr(a, q)?,
        Expr::Add(a, b) => eval_expr(a, q)? + eval_expr(b, q)?,
        Expr::Sub(a, b) => eval_expr(a, q)? - eval_expr(b, q)?,
        Expr::Mul(a, b) => eval_expr(a, q)? * eval_expr(b, q)?,
        Expr::Div(a, b) => {
            let den = eval_expr(b, q)?;
            if den == T::zero() {
                return Err(EvalError::DivisionByZero(e.to_string()));
            }
            eval_expr(a, q)? / den
        }
        Expr::Pow(a, n) => eval_expr(a, q)?.powi(*n as i32),
        Expr::Call(func, a) => {
            let x = eval_expr(a, q)?;
            match func {
                Func::Sqrt if x < T::zero() => {
                    return Err(EvalError::Domain { op: "sqrt", expr: e.to_string() });
                }
                Func::Log if x <= T::zero() => {
                    return Err(EvalError::Domain { op: "log", expr: e.to_string() });
                }
                Func::Sqrt => x.sqrt(),
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Exp => x.exp(),
                Func::Log => x.ln(),
            }
        }
    })
}

/// Taylor-mode expansion of `e` about `center` into a jet in the three
/// displacement variables, valid to total degree `cap`.
pub fn jet_from_expr<T: Float + Scalar>(e: &Expr, center: &[T; 3], cap: i32) -> Result<Jet<T>, EvalError> {
    let wrap = |source: JetError| EvalError::Jet { expr: e.to_string(), source };
    Ok(match e {
        Expr::Const(c) => Jet::constant(3, cap, const_to(*c)),
        Expr::Var(i) => Jet::variable(3, cap, *i, center[*i]),
        Expr::Neg(a) => -jet_from_expr(a, center, cap)?,
        Expr::Add(a, b) => &jet_from_expr(a, center, cap)? + &jet_from_expr(b, center, cap)?,
        Expr::Sub(a, b) => &jet_from_expr(a, center, cap)? - &jet_from_expr(b, center, cap)?,
        Expr::Mul(a, b) => jet_from_expr(a, center, cap)?.mul_jet(&jet_from_expr(b, center, cap)?),
        Expr::Div(a, b) => {
            let den = jet_from_expr(b, center, cap)?;
            if den.constant_term() == T::zero() {
                return Err(EvalError::DivisionByZero(e.to_string()));
            }
            jet_from_expr(a, center, cap)?.div_jet(&den).map_err(wrap)?
        }
        Expr::Pow(a, n) => jet_from_expr(a, center, cap)?.powi(*n),
        Expr::Call(func, a) => {
            let x = jet_from_expr(a, center, cap)?;
            let x0 = x.constant_term();
            match func {
                Func::Sqrt if x0 <= T::zero() => {
                    return Err(EvalError::Domain { op: "sqrt", expr: e.to_string() });
                }
                Func::Log if x0 <= T::zero() => {
                    return Err(EvalError::Domain { op: "log", expr: e.to_string() });
                }
                Func::Sqrt => x.sqrt().map_err(wrap)?,
                Func::Log => x.ln().map_err(wrap)?,
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Exp => x.exp(),
            }
        }
    })
}

impl Expr {
    pub fn diff(&self, v: usize) -> Expr {
        diff_expr(self, v)
    }

    pub fn eval<T: Float>(&self, q: &[T; 3]) -> Result<T, EvalError> {
        eval_expr(self, q)
    }

    pub fn jet<T: Float + Scalar>(&self, center: &[T; 3], cap: i32) -> Result<Jet<T>, EvalError> {
        jet_from_expr(self, center, cap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Expr {
        parse_expr(s).unwrap()
    }

    #[test]
    fn division_by_constant() {
        assert_eq!(p("q2/2"), Expr::Div(Arc::new(Expr::Var(1)), Arc::new(Expr::int(2))));
    }

    #[test]
    fn sqrt_of_shifted_square() {
        let want = Expr::Call(
            Func::Sqrt,
            Arc::new(Expr::Add(Arc::new(Expr::int(1)), Arc::new(Expr::Pow(Arc::new(Expr::Var(0)), 2)))),
        );
        assert_eq!(p("sqrt(1+q1^2)"), want);
    }

    #[test]
    fn incomplete_input_offset() {
        let err = parse_expr("q1 + ").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { offset: 5, .. }), "{err:?}");
    }

    #[test]
    fn unknown_identifier_and_arity() {
        assert_eq!(
            parse_expr("2*q4").unwrap_err(),
            ParseError::UnknownIdentifier { name: "q4".into(), offset: 2 }
        );
        assert!(matches!(parse_expr("sin(q1, q2)").unwrap_err(), ParseError::Arity { got: 2, .. }));
        assert!(matches!(parse_expr("q1^1.5").unwrap_err(), ParseError::Syntax { offset: 3, .. }));
        assert!(matches!(parse_expr("2 q1").unwrap_err(), ParseError::Syntax { offset: 2, .. }));
    }

    #[test]
    fn unary_minus_binds_inside_base() {
        assert_eq!(p("-q1^2"), Expr::Pow(Arc::new(Expr::Neg(Arc::new(Expr::Var(0)))), 2));
        assert_eq!(p("-q1^2").eval(&[3.0, 0.0, 0.0]).unwrap(), 9.0);
        assert_eq!(p("-(q1^2)").eval(&[3.0, 0.0, 0.0]).unwrap(), -9.0);
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(p("q1^3").diff(0), Expr::mul(Expr::int(3), Expr::pow(Expr::Var(0), 2)));
        assert_eq!(p("q2/2").diff(2), Expr::int(0));
        let d = p("sqrt(1+q1^2)").diff(0);
        for x in [-1.3, 0.0, 0.4, 2.0] {
            let got = d.eval(&[x, 0.0, 0.0]).unwrap();
            let want = x / (1.0f64 + x * x).sqrt();
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn evaluation_examples() {
        let q0 = [0.5, 0.6, 0.7];
        assert!((p("sqrt(1+q1^2)").eval(&q0).unwrap() - 1.118_033_988_749_895).abs() < 1e-15);
        assert!((p("q2/2").eval(&q0).unwrap() - 0.3).abs() < 1e-16);
        assert!(matches!(p("1/q1").eval(&[0.0, 0.0, 0.0]), Err(EvalError::DivisionByZero(_))));
        assert!(matches!(p("log(q1 - 1)").eval(&[0.5, 0.0, 0.0]), Err(EvalError::Domain { op: "log", .. })));
    }

    #[test]
    fn printer_round_trip() {
        for s in ["q1 - (q2 - q3)", "-(q1^2)", "-q1^2", "2.5*q1/(q3*0.125)", "sqrt(1 + q1^2)", "q1 - -q2", "(q1/q2)/q3"] {
            let e = p(s);
            assert_eq!(p(&e.to_string()), e, "{s} -> {e}");
        }
        assert_eq!(p("0.50").to_string(), "0.5");
    }

    #[test]
    fn taylor_examples() {
        let j = p("sqrt(1+q1^2)").jet(&[0.0, 0.0, 0.0], 4).unwrap();
        assert_eq!(j.coeff(&[2, 0, 0]), 0.5);
        assert_eq!(j.coeff(&[4, 0, 0]), -0.125);
        let e = p("exp(q3)").jet(&[0.0, 0.0, 0.0], 3).unwrap();
        assert!((e.coeff(&[0, 0, 3]) - 1.0 / 6.0).abs() < 1e-16);
    }
}
