//! Arithmetic expressions over complex literals, `x` and state variables.
//!
//! Grammar (whitespace insensitive):
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' int)*
//! int   := ['-' | '+'] digits | '(' int ')'
//! atom  := number ['i'] | 'i' | ident | '(' expr ')'
//! ```
//!
//! `i` is the imaginary unit and cannot be used as a variable name.
//! Literal-only subtrees are folded at parse time, so `1+2i` is a single
//! literal; the printer relies on this to round-trip parsed trees exactly.

use std::collections::BTreeSet;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Lit(Complex64),
    Sym(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
}

fn finite(z: Complex64) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

impl Expr {
    pub fn lit(re: f64) -> Expr {
        Expr::Lit(Complex64::new(re, 0.0))
    }

    pub fn sym(name: &str) -> Expr {
        Expr::Sym(name.to_string())
    }

    pub fn as_lit(&self) -> Option<Complex64> {
        match self {
            Expr::Lit(z) => Some(*z),
            _ => None,
        }
    }

    fn is_zero(&self) -> bool {
        matches!(self, Expr::Lit(z) if *z == Complex64::new(0.0, 0.0))
    }

    fn is_one(&self) -> bool {
        matches!(self, Expr::Lit(z) if *z == Complex64::new(1.0, 0.0))
    }

    // Folding constructors: collapse literal-only nodes, nothing else.

    fn fold_neg(a: Expr) -> Expr {
        match a {
            Expr::Lit(z) => Expr::Lit(-z),
            a => Expr::Neg(Box::new(a)),
        }
    }

    fn fold_bin(op: char, a: Expr, b: Expr) -> Expr {
        if let (Some(x), Some(y)) = (a.as_lit(), b.as_lit()) {
            let v = match op {
                '+' => Some(x + y),
                '-' => Some(x - y),
                '*' => Some(x * y),
                _ if y != Complex64::new(0.0, 0.0) => Some(x / y),
                _ => None,
            };
            if let Some(v) = v.filter(|v| finite(*v)) {
                return Expr::Lit(v);
            }
        }
        let (a, b) = (Box::new(a), Box::new(b));
        match op {
            '+' => Expr::Add(a, b),
            '-' => Expr::Sub(a, b),
            '*' => Expr::Mul(a, b),
            _ => Expr::Div(a, b),
        }
    }

    fn fold_pow(a: Expr, k: i32) -> Expr {
        if let Some(x) = a.as_lit() {
            if x != Complex64::new(0.0, 0.0) || k >= 0 {
                let v = x.powi(k);
                if finite(v) {
                    return Expr::Lit(v);
                }
            }
        }
        Expr::Pow(Box::new(a), k)
    }

    // Simplifying constructors used by the differentiator.

    fn s_add(a: Expr, b: Expr) -> Expr {
        if a.is_zero() {
            b
        } else if b.is_zero() {
            a
        } else {
            Expr::fold_bin('+', a, b)
        }
    }

    fn s_sub(a: Expr, b: Expr) -> Expr {
        if b.is_zero() {
            a
        } else if a.is_zero() {
            Expr::fold_neg(b)
        } else {
            Expr::fold_bin('-', a, b)
        }
    }

    fn s_mul(a: Expr, b: Expr) -> Expr {
        if a.is_zero() || b.is_zero() {
            Expr::lit(0.0)
        } else if a.is_one() {
            b
        } else if b.is_one() {
            a
        } else {
            Expr::fold_bin('*', a, b)
        }
    }

    fn s_div(a: Expr, b: Expr) -> Expr {
        if a.is_zero() {
            Expr::lit(0.0)
        } else if b.is_one() {
            a
        } else {
            Expr::fold_bin('/', a, b)
        }
    }

    fn s_pow(a: Expr, k: i32) -> Expr {
        match k {
            0 => Expr::lit(1.0),
            1 => a,
            _ => Expr::fold_pow(a, k),
        }
    }

    /// Exact symbolic derivative with light simplification of zeros and ones.
    pub fn differentiate(&self, var: &str) -> Expr {
        match self {
            Expr::Lit(_) => Expr::lit(0.0),
            Expr::Sym(s) => Expr::lit(if s == var { 1.0 } else { 0.0 }),
            Expr::Neg(a) => {
                let d = a.differentiate(var);
                if d.is_zero() {
                    d
                } else {
                    Expr::fold_neg(d)
                }
            }
            Expr::Add(a, b) => Expr::s_add(a.differentiate(var), b.differentiate(var)),
            Expr::Sub(a, b) => Expr::s_sub(a.differentiate(var), b.differentiate(var)),
            Expr::Mul(a, b) => Expr::s_add(
                Expr::s_mul(a.differentiate(var), (**b).clone()),
                Expr::s_mul((**a).clone(), b.differentiate(var)),
            ),
            Expr::Div(a, b) => {
                let da = a.differentiate(var);
                let db = b.differentiate(var);
                let num = Expr::s_sub(
                    Expr::s_mul(da, (**b).clone()),
                    Expr::s_mul((**a).clone(), db),
                );
                Expr::s_div(num, Expr::s_pow((**b).clone(), 2))
            }
            Expr::Pow(a, k) => {
                if *k == 0 {
                    return Expr::lit(0.0);
                }
                let outer = Expr::s_mul(Expr::lit(*k as f64), Expr::s_pow((**a).clone(), k - 1));
                Expr::s_mul(outer, a.differentiate(var))
            }
        }
    }

    /// Evaluates with symbol values supplied by `lookup`.
    pub fn eval_with(&self, lookup: &dyn Fn(&str) -> Option<Complex64>) -> Result<Complex64> {
        Ok(match self {
            Expr::Lit(z) => *z,
            Expr::Sym(s) => lookup(s).ok_or_else(|| Error::UnknownSymbol(s.clone()))?,
            Expr::Neg(a) => -a.eval_with(lookup)?,
            Expr::Add(a, b) => a.eval_with(lookup)? + b.eval_with(lookup)?,
            Expr::Sub(a, b) => a.eval_with(lookup)? - b.eval_with(lookup)?,
            Expr::Mul(a, b) => a.eval_with(lookup)? * b.eval_with(lookup)?,
            Expr::Div(a, b) => {
                let num = a.eval_with(lookup)?;
                let den = b.eval_with(lookup)?;
                let v = num / den;
                if den == Complex64::new(0.0, 0.0) || !finite(v) {
                    return Err(Error::DivisionByZero);
                }
                v
            }
            Expr::Pow(a, k) => {
                let base = a.eval_with(lookup)?;
                if base == Complex64::new(0.0, 0.0) && *k < 0 {
                    return Err(Error::DivisionByZero);
                }
                base.powi(*k)
            }
        })
    }

    pub fn eval(&self, bindings: &[(&str, Complex64)]) -> Result<Complex64> {
        self.eval_with(&|s| bindings.iter().find(|b| b.0 == s).map(|b| b.1))
    }

    pub fn symbols(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Lit(_) => {}
            Expr::Sym(s) => {
                out.insert(s.clone());
            }
            Expr::Neg(a) | Expr::Pow(a, _) => a.collect_symbols(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.collect_symbols(out);
                b.collect_symbols(out);
            }
        }
    }

    fn starts_with_minus(&self) -> bool {
        match self {
            Expr::Neg(_) => true,
            Expr::Lit(_) => self.precedence() == 3,
            Expr::Add(a, _) | Expr::Sub(a, _) => a.starts_with_minus(),
            Expr::Mul(a, _) | Expr::Div(a, _) => a.precedence() >= 2 && a.starts_with_minus(),
            _ => false,
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(..) => 3,
            Expr::Pow(..) => 4,
            Expr::Sym(_) => 5,
            Expr::Lit(z) => {
                if z.im == 0.0 && !z.im.is_sign_negative() {
                    if z.re.is_sign_negative() {
                        3
                    } else {
                        5
                    }
                } else if z.re == 0.0 && !z.re.is_sign_negative() {
                    if z.im.is_sign_negative() {
                        3
                    } else {
                        5
                    }
                } else {
                    1
                }
            }
        }
    }
}

fn fmt_real(v: f64) -> String {
    let s = format!("{v:?}");
    s.strip_suffix(".0").map(str::to_string).unwrap_or(s)
}

/// Formats a complex number as `a`, `bi` or `a+bi` with round-trip precision.
pub fn format_complex(z: Complex64) -> String {
    if z.im == 0.0 && !z.im.is_sign_negative() {
        fmt_real(z.re)
    } else if z.re == 0.0 && !z.re.is_sign_negative() {
        format!("{}i", fmt_real(z.im))
    } else if z.im.is_sign_negative() {
        format!("{}-{}i", fmt_real(z.re), fmt_real(-z.im))
    } else {
        format!("{}+{}i", fmt_real(z.re), fmt_real(z.im))
    }
}

struct Wrapped<'a>(&'a Expr, bool);

impl fmt::Display for Wrapped<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.1 {
            write!(f, "({})", self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bin = |f: &mut fmt::Formatter<'_>, a: &Expr, op: &str, b: &Expr, p: u8| {
            write!(
                f,
                "{}{}{}",
                Wrapped(a, a.precedence() < p),
                op,
                Wrapped(b, b.precedence() <= p || b.starts_with_minus())
            )
        };
        match self {
            Expr::Lit(z) => write!(f, "{}", format_complex(*z)),
            Expr::Sym(s) => write!(f, "{s}"),
            Expr::Neg(a) => write!(f, "-{}", Wrapped(a, a.precedence() <= 3 || a.starts_with_minus())),
            Expr::Add(a, b) => bin(f, a, " + ", b, 1),
            Expr::Sub(a, b) => bin(f, a, " - ", b, 1),
            Expr::Mul(a, b) => bin(f, a, "*", b, 2),
            Expr::Div(a, b) => bin(f, a, "/", b, 2),
            Expr::Pow(a, k) => write!(f, "{}^{}", Wrapped(a, a.precedence() < 5), k),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num { value: f64, imag: bool, integer: bool },
    Ident(String),
    Op(char),
    End,
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
}

impl Lexer {
    fn err<T>(&self, pos: usize, msg: impl Into<String>) -> Result<T> {
        Err(Error::Syntax { pos, msg: msg.into() })
    }

    fn tokens(mut self) -> Result<Vec<(usize, Tok)>> {
        let mut out = Vec::new();
        loop {
            while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
                self.pos += 1;
            }
            let start = self.pos;
            let Some(&ch) = self.chars.get(self.pos) else {
                out.push((start, Tok::End));
                return Ok(out);
            };
            let next_is_digit = self.chars.get(self.pos + 1).is_some_and(|c| c.is_ascii_digit());
            if ch.is_ascii_digit() || (ch == '.' && next_is_digit) {
                out.push((start, self.number()?));
            } else if ch.is_alphabetic() || ch == '_' {
                let mut s = String::new();
                while let Some(&c) = self.chars.get(self.pos) {
                    if c.is_alphanumeric() || c == '_' {
                        s.push(c);
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                if s == "i" {
                    out.push((start, Tok::Num { value: 1.0, imag: true, integer: false }));
                } else {
                    out.push((start, Tok::Ident(s)));
                }
            } else {
                let op = match ch {
                    '+' | '-' | '*' | '/' | '^' | '(' | ')' => ch,
                    '\u{2212}' => '-',
                    _ => return self.err(start, format!("unexpected character `{ch}`")),
                };
                self.pos += 1;
                out.push((start, Tok::Op(op)));
            }
        }
    }

    fn number(&mut self) -> Result<Tok> {
        let start = self.pos;
        let mut integer = true;
        let digits = |lx: &mut Lexer| {
            while lx.chars.get(lx.pos).is_some_and(|c| c.is_ascii_digit()) {
                lx.pos += 1;
            }
        };
        digits(self);
        if self.chars.get(self.pos) == Some(&'.') {
            integer = false;
            self.pos += 1;
            digits(self);
        }
        if matches!(self.chars.get(self.pos), Some('e') | Some('E')) {
            let mut p = self.pos + 1;
            if matches!(self.chars.get(p), Some('+') | Some('-')) {
                p += 1;
            }
            if self.chars.get(p).is_some_and(|c| c.is_ascii_digit()) {
                integer = false;
                self.pos = p;
                digits(self);
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        let value: f64 = match text.parse() {
            Ok(v) => v,
            Err(_) => return self.err(start, format!("malformed number `{text}`")),
        };
        let mut imag = false;
        if self.chars.get(self.pos) == Some(&'i')
            && !self.chars.get(self.pos + 1).is_some_and(|c| c.is_alphanumeric() || *c == '_')
        {
            imag = true;
            integer = false;
            self.pos += 1;
        }
        Ok(Tok::Num { value, imag, integer })
    }
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].1
    }

    fn pos(&self) -> usize {
        self.toks[self.at].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].1.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Syntax { pos: self.pos(), msg: msg.into() })
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Tok::Op(op @ ('+' | '-')) = *self.peek() {
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::fold_bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Tok::Op(op @ ('*' | '/')) = *self.peek() {
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::fold_bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if *self.peek() == Tok::Op('-') {
            self.bump();
            return Ok(Expr::fold_neg(self.unary()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let mut base = self.atom()?;
        while *self.peek() == Tok::Op('^') {
            self.bump();
            let k = self.int_exponent()?;
            base = Expr::fold_pow(base, k);
        }
        Ok(base)
    }

    fn int_exponent(&mut self) -> Result<i32> {
        match self.peek().clone() {
            Tok::Op('(') => {
                self.bump();
                let k = self.int_exponent()?;
                if self.bump() != Tok::Op(')') {
                    return self.err("expected `)` after exponent");
                }
                Ok(k)
            }
            Tok::Op(s @ ('-' | '+')) => {
                self.bump();
                let k = self.int_exponent()?;
                Ok(if s == '-' { -k } else { k })
            }
            Tok::Num { value, integer: true, .. } if value <= i32::MAX as f64 => {
                self.bump();
                Ok(value as i32)
            }
            _ => self.err("exponent must be an integer"),
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek().clone() {
            Tok::Num { value, imag, .. } => {
                self.bump();
                Ok(Expr::Lit(if imag { Complex64::new(0.0, value) } else { Complex64::new(value, 0.0) }))
            }
            Tok::Ident(s) => {
                self.bump();
                Ok(Expr::Sym(s))
            }
            Tok::Op('(') => {
                self.bump();
                let e = self.expr()?;
                if *self.peek() != Tok::Op(')') {
                    return self.err("expected `)`");
                }
                self.bump();
                Ok(e)
            }
            Tok::End => self.err("unexpected end of input"),
            Tok::Op(c) => self.err(format!("unexpected `{c}`")),
        }
    }
}

/// Parses `text`; unknown symbols are accepted here and rejected by model
/// validation.
pub fn parse_expression(text: &str) -> Result<Expr> {
    let toks = Lexer { chars: text.chars().collect(), pos: 0 }.tokens()?;
    let mut p = Parser { toks, at: 0 };
    let e = p.expr()?;
    match p.peek() {
        Tok::End => Ok(e),
        Tok::Ident(s) => p.err(format!("unexpected identifier `{s}`")),
        Tok::Num { .. } => p.err("unexpected number"),
        Tok::Op(c) => p.err(format!("unexpected `{c}`")),
    }
}

/// Parses a constant such as `1.5`, `-2i` or `0.3-0.1i`.
pub fn parse_complex(text: &str) -> Result<Complex64> {
    let e = parse_expression(text)?;
    if let Some(s) = e.symbols().into_iter().next() {
        return Err(Error::UnknownSymbol(s));
    }
    e.eval(&[])
}

impl std::str::FromStr for Expr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_expression(s)
    }
}
