//! Closed-form scalar fields: sums of products of one-variable factors, with
//! exact first and second derivatives.
//!
//! Grammar:
//!
//! ```text
//! expr   := ['+'|'-'] term (('+'|'-') term)*
//! term   := atom ('*' atom)*
//! atom   := number | var | '(' expr ')' | name '(' var (',' number)* ')'
//! var    := t | rho | rbar | theta | phi
//! name   := gauss(var, c, w)  exp(−((x−c)/w)²)
//!         | poly(var, c0, c1, …)  Σ cₖxᵏ
//!         | cos(var, k) | sin(var, k)  cos(kx), sin(kx)
//!         | exp(var, k)  e^{kx}
//!         | pow(var, p)  x^p
//! ```

use crate::error::{Error, Result};
use std::fmt;

/// Number of independent variables.
pub const N_VARS: usize = 5;

/// Independent variables of an expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    T = 0,
    Rho = 1,
    Rbar = 2,
    Theta = 3,
    Phi = 4,
}

impl Var {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "t" => Var::T,
            "rho" => Var::Rho,
            "rbar" => Var::Rbar,
            "theta" => Var::Theta,
            "phi" => Var::Phi,
            _ => return None,
        })
    }
}

/// Values of (t, ρ, r̄, θ, φ).
pub type Point = [f64; N_VARS];

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Gauss { c: f64, w: f64 },
    Poly(Vec<f64>),
    Cos(f64),
    Sin(f64),
    Exp(f64),
    Pow(f64),
}

#[derive(Debug, Clone, PartialEq)]
struct Factor {
    var: Var,
    kind: Kind,
}

impl Factor {
    /// (f, f′, f″) at x.
    fn eval(&self, x: f64) -> (f64, f64, f64) {
        match &self.kind {
            Kind::Gauss { c, w } => {
                let y = (x - c) / w;
                let g = (-y * y).exp();
                (g, -2.0 * y / w * g, (4.0 * y * y - 2.0) / (w * w) * g)
            }
            Kind::Poly(cs) => {
                let (mut f, mut d, mut dd) = (0.0, 0.0, 0.0);
                for c in cs.iter().rev() {
                    dd = dd * x + 2.0 * d;
                    d = d * x + f;
                    f = f * x + c;
                }
                (f, d, dd)
            }
            Kind::Cos(k) => {
                let (s, c) = (k * x).sin_cos();
                (c, -k * s, -k * k * c)
            }
            Kind::Sin(k) => {
                let (s, c) = (k * x).sin_cos();
                (s, k * c, -k * k * s)
            }
            Kind::Exp(k) => {
                let e = (k * x).exp();
                (e, k * e, k * k * e)
            }
            Kind::Pow(p) => (x.powf(*p), p * x.powf(p - 1.0), p * (p - 1.0) * x.powf(p - 2.0)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Term {
    coef: f64,
    factors: Vec<Factor>,
}

/// Value, gradient and Hessian of an expression at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: [f64; N_VARS],
    pub hess: [[f64; N_VARS]; N_VARS],
}

impl Jet {
    pub fn zero() -> Self {
        Self { value: 0.0, grad: [0.0; N_VARS], hess: [[0.0; N_VARS]; N_VARS] }
    }

    pub fn d(&self, v: Var) -> f64 {
        self.grad[v as usize]
    }

    pub fn dd(&self, a: Var, b: Var) -> f64 {
        self.hess[a as usize][b as usize]
    }
}

/// Parsed closed-form expression.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    terms: Vec<Term>,
    source: String,
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Expr {
    /// The zero expression.
    pub fn zero() -> Self {
        Self { terms: Vec::new(), source: "0".into() }
    }

    /// Constant expression.
    pub fn constant(c: f64) -> Self {
        Self { terms: vec![Term { coef: c, factors: Vec::new() }], source: format!("{c}") }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let tokens = tokenize(text)?;
        let mut p = Parser { tokens, pos: 0 };
        let terms = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Parse(format!("unexpected trailing input in '{text}'")));
        }
        Ok(Self { terms, source: text.trim().to_string() })
    }

    /// True if no term has a nonzero coefficient.
    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.coef == 0.0)
    }

    /// True if some term involves the variable.
    pub fn depends_on(&self, v: Var) -> bool {
        self.terms.iter().any(|t| t.coef != 0.0 && t.factors.iter().any(|f| f.var == v))
    }

    pub fn eval(&self, p: &Point) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coef * t.factors.iter().map(|f| f.eval(p[f.var as usize]).0).product::<f64>())
            .sum()
    }

    pub fn jet(&self, p: &Point) -> Jet {
        let mut out = Jet::zero();
        for t in &self.terms {
            let ev: Vec<(f64, f64, f64)> = t.factors.iter().map(|f| f.eval(p[f.var as usize])).collect();
            let n = ev.len();
            let prod_except = |skip: &[usize]| -> f64 {
                (0..n).filter(|k| !skip.contains(k)).map(|k| ev[k].0).product()
            };
            out.value += t.coef * prod_except(&[]);
            for i in 0..n {
                let a = t.factors[i].var as usize;
                let rest = prod_except(&[i]);
                out.grad[a] += t.coef * ev[i].1 * rest;
                out.hess[a][a] += t.coef * ev[i].2 * rest;
                for j in 0..n {
                    if j != i {
                        let b = t.factors[j].var as usize;
                        out.hess[a][b] += t.coef * ev[i].1 * ev[j].1 * prod_except(&[i, j]);
                    }
                }
            }
        }
        out
    }
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
}

fn tokenize(s: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '(' => {
                out.push(Tok::LParen);
                i += 1
            }
            ')' => {
                out.push(Tok::RParen);
                i += 1
            }
            ',' | ';' => {
                out.push(Tok::Comma);
                i += 1
            }
            '+' => {
                out.push(Tok::Plus);
                i += 1
            }
            '-' => {
                out.push(Tok::Minus);
                i += 1
            }
            '*' => {
                out.push(Tok::Star);
                i += 1
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let v = text.parse::<f64>().map_err(|_| Error::Parse(format!("bad number '{text}'")))?;
                out.push(Tok::Num(v));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(Tok::Ident(chars[start..i].iter().collect()));
            }
            other => return Err(Error::Parse(format!("unexpected character '{other}'"))),
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, t: Tok) -> Result<()> {
        match self.next() {
            Some(ref x) if *x == t => Ok(()),
            other => Err(Error::Parse(format!("expected {t:?}, found {other:?}"))),
        }
    }

    fn expr(&mut self) -> Result<Vec<Term>> {
        let mut sign = 1.0;
        match self.peek() {
            Some(Tok::Minus) => {
                sign = -1.0;
                self.pos += 1;
            }
            Some(Tok::Plus) => self.pos += 1,
            _ => {}
        }
        let mut out = scale(self.term()?, sign);
        loop {
            let s = match self.peek() {
                Some(Tok::Plus) => 1.0,
                Some(Tok::Minus) => -1.0,
                _ => break,
            };
            self.pos += 1;
            out.extend(scale(self.term()?, s));
        }
        Ok(out)
    }

    fn term(&mut self) -> Result<Vec<Term>> {
        let mut acc = self.atom()?;
        while let Some(Tok::Star) = self.peek() {
            self.pos += 1;
            let rhs = self.atom()?;
            acc = multiply(&acc, &rhs);
        }
        Ok(acc)
    }

    fn atom(&mut self) -> Result<Vec<Term>> {
        match self.next() {
            Some(Tok::Num(v)) => Ok(vec![Term { coef: v, factors: Vec::new() }]),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Minus) => Ok(scale(self.atom()?, -1.0)),
            Some(Tok::Ident(name)) => {
                if let Some(v) = Var::parse(&name) {
                    return Ok(vec![Term { coef: 1.0, factors: vec![Factor { var: v, kind: Kind::Poly(vec![0.0, 1.0]) }] }]);
                }
                self.expect(Tok::LParen)?;
                let var = match self.next() {
                    Some(Tok::Ident(s)) => {
                        Var::parse(&s).ok_or_else(|| Error::Parse(format!("unknown variable '{s}'")))?
                    }
                    other => return Err(Error::Parse(format!("expected variable, found {other:?}"))),
                };
                let mut args = Vec::new();
                while let Some(Tok::Comma) = self.peek() {
                    self.pos += 1;
                    let mut s = 1.0;
                    if let Some(Tok::Minus) = self.peek() {
                        s = -1.0;
                        self.pos += 1;
                    }
                    match self.next() {
                        Some(Tok::Num(v)) => args.push(s * v),
                        other => return Err(Error::Parse(format!("expected number, found {other:?}"))),
                    }
                }
                self.expect(Tok::RParen)?;
                let need = |n: usize| -> Result<()> {
                    if args.len() == n {
                        Ok(())
                    } else {
                        Err(Error::Parse(format!("{name} takes {n} numeric arguments, got {}", args.len())))
                    }
                };
                let kind = match name.as_str() {
                    "gauss" => {
                        need(2)?;
                        if args[1] == 0.0 {
                            return Err(Error::Parse("gauss width must be nonzero".into()));
                        }
                        Kind::Gauss { c: args[0], w: args[1] }
                    }
                    "poly" => {
                        if args.is_empty() {
                            return Err(Error::Parse("poly needs coefficients".into()));
                        }
                        Kind::Poly(args)
                    }
                    "cos" => {
                        need(1)?;
                        Kind::Cos(args[0])
                    }
                    "sin" => {
                        need(1)?;
                        Kind::Sin(args[0])
                    }
                    "exp" => {
                        need(1)?;
                        Kind::Exp(args[0])
                    }
                    "pow" => {
                        need(1)?;
                        Kind::Pow(args[0])
                    }
                    other => return Err(Error::Parse(format!("unknown function '{other}'"))),
                };
                Ok(vec![Term { coef: 1.0, factors: vec![Factor { var, kind }] }])
            }
            other => Err(Error::Parse(format!("unexpected token {other:?}"))),
        }
    }
}

fn scale(mut terms: Vec<Term>, s: f64) -> Vec<Term> {
    for t in &mut terms {
        t.coef *= s;
    }
    terms
}

fn multiply(a: &[Term], b: &[Term]) -> Vec<Term> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            let mut factors = x.factors.clone();
            factors.extend(y.factors.iter().cloned());
            out.push(Term { coef: x.coef * y.coef, factors });
        }
    }
    out
}
