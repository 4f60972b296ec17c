//! A small arithmetic expression language used by scenario files to describe
//! coefficient fields `σ(x, y)` and boundary parametrizations `Φ(θ)`.
//!
//! Grammar (whitespace insensitive):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := ('-' | '+') unary | power
//! power  := atom ('^' unary)?
//! atom   := number | name | name '(' expr ')' | '(' expr ')'
//! ```
//!
//! Names are either one of the variables declared when parsing, the constants
//! `pi` and `e`, or one of the functions `sin cos tan exp log sqrt abs`.
//! `^` is right associative and binds tighter than unary minus, so `-x^2`
//! reads as `-(x^2)`.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{message} at offset {offset} in `{source_text}`")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
    pub source_text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Const(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// Numeric type an [`Expression`] can be evaluated over.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn constant(value: f64) -> Self;
    fn value(self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tan(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn powf(self, exponent: Self) -> Self;
}

impl Scalar for f64 {
    fn constant(value: f64) -> Self {
        value
    }
    fn value(self) -> f64 {
        self
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn tan(self) -> Self {
        f64::tan(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn powf(self, exponent: Self) -> Self {
        f64::powf(self, exponent)
    }
}

/// Forward-mode dual number `value + deriv·ε`, used to differentiate
/// boundary parametrizations exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual {
    pub value: f64,
    pub deriv: f64,
}

impl Dual {
    pub fn variable(value: f64) -> Self {
        Dual { value, deriv: 1.0 }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual { value: self.value + o.value, deriv: self.deriv + o.deriv }
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual { value: self.value - o.value, deriv: self.deriv - o.deriv }
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual {
            value: self.value * o.value,
            deriv: self.deriv * o.value + self.value * o.deriv,
        }
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        Dual {
            value: self.value / o.value,
            deriv: (self.deriv * o.value - self.value * o.deriv) / (o.value * o.value),
        }
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual { value: -self.value, deriv: -self.deriv }
    }
}

impl Scalar for Dual {
    fn constant(value: f64) -> Self {
        Dual { value, deriv: 0.0 }
    }
    fn value(self) -> f64 {
        self.value
    }
    fn sin(self) -> Self {
        Dual { value: self.value.sin(), deriv: self.deriv * self.value.cos() }
    }
    fn cos(self) -> Self {
        Dual { value: self.value.cos(), deriv: -self.deriv * self.value.sin() }
    }
    fn tan(self) -> Self {
        let t = self.value.tan();
        Dual { value: t, deriv: self.deriv * (1.0 + t * t) }
    }
    fn exp(self) -> Self {
        let e = self.value.exp();
        Dual { value: e, deriv: self.deriv * e }
    }
    fn ln(self) -> Self {
        Dual { value: self.value.ln(), deriv: self.deriv / self.value }
    }
    fn sqrt(self) -> Self {
        let s = self.value.sqrt();
        Dual { value: s, deriv: self.deriv / (2.0 * s) }
    }
    fn abs(self) -> Self {
        if self.value < 0.0 {
            -self
        } else {
            self
        }
    }
    fn powf(self, exponent: Self) -> Self {
        let value = self.value.powf(exponent.value);
        let mut deriv = 0.0;
        if self.deriv != 0.0 {
            deriv += exponent.value * self.value.powf(exponent.value - 1.0) * self.deriv;
        }
        if exponent.deriv != 0.0 {
            deriv += value * self.value.ln() * exponent.deriv;
        }
        Dual { value, deriv }
    }
}

/// A parsed expression together with its source text and variable names.
#[derive(Debug, Clone)]
pub struct Expression {
    source: String,
    variables: Vec<String>,
    root: Node,
}

impl PartialEq for Expression {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source && self.variables == other.variables
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Expression {
    /// Parses `source`, resolving free names against `variables`.
    pub fn parse(source: &str, variables: &[&str]) -> Result<Self, ParseError> {
        let mut parser = Parser { src: source, bytes: source.as_bytes(), pos: 0, variables };
        let root = parser.expr()?;
        parser.skip_ws();
        if parser.pos != parser.bytes.len() {
            return Err(parser.error("unexpected trailing input"));
        }
        Ok(Expression {
            source: source.to_string(),
            variables: variables.iter().map(|v| v.to_string()).collect(),
            root,
        })
    }

    /// A constant expression; its source text is the shortest round-trip repr.
    pub fn constant(value: f64, variables: &[&str]) -> Self {
        Expression {
            source: format!("{value:?}"),
            variables: variables.iter().map(|v| v.to_string()).collect(),
            root: Node::Const(value),
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    /// Returns the value if the expression does not depend on any variable.
    pub fn as_constant(&self) -> Option<f64> {
        fn uses_var(n: &Node) -> bool {
            match n {
                Node::Const(_) => false,
                Node::Var(_) => true,
                Node::Neg(a) | Node::Call(_, a) => uses_var(a),
                Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
                    uses_var(a) || uses_var(b)
                }
            }
        }
        if uses_var(&self.root) {
            None
        } else {
            Some(eval_node::<f64>(&self.root, &[]))
        }
    }

    /// Evaluates with `args[i]` bound to the i-th declared variable.
    pub fn eval<S: Scalar>(&self, args: &[S]) -> S {
        debug_assert_eq!(args.len(), self.variables.len());
        eval_node(&self.root, args)
    }
}

fn eval_node<S: Scalar>(node: &Node, args: &[S]) -> S {
    match node {
        Node::Const(c) => S::constant(*c),
        Node::Var(i) => args[*i],
        Node::Neg(a) => -eval_node(a, args),
        Node::Add(a, b) => eval_node(a, args) + eval_node(b, args),
        Node::Sub(a, b) => eval_node(a, args) - eval_node(b, args),
        Node::Mul(a, b) => eval_node(a, args) * eval_node(b, args),
        Node::Div(a, b) => eval_node(a, args) / eval_node(b, args),
        Node::Pow(a, b) => {
            let base = eval_node(a, args);
            // integer exponents by repeated multiplication keep negative bases valid
            if let Node::Const(c) = **b {
                if c.fract() == 0.0 && c.abs() <= 16.0 {
                    return powi(base, c as i32);
                }
            }
            base.powf(eval_node(b, args))
        }
        Node::Call(f, a) => {
            let x = eval_node(a, args);
            match f {
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Tan => x.tan(),
                Func::Exp => x.exp(),
                Func::Log => x.ln(),
                Func::Sqrt => x.sqrt(),
                Func::Abs => x.abs(),
            }
        }
    }
}

fn powi<S: Scalar>(base: S, n: i32) -> S {
    let mut acc = S::constant(1.0);
    for _ in 0..n.unsigned_abs() {
        acc = acc * base;
    }
    if n < 0 {
        S::constant(1.0) / acc
    } else {
        acc
    }
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    variables: &'a [&'a str],
}

impl Parser<'_> {
    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError { offset: self.pos, message: message.into(), source_text: self.src.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if self.eat(b'-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let exponent = self.unary()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        match self.peek() {
            None => Err(self.error("unexpected end of expression")),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.name(),
            Some(c) => Err(self.error(format!("unexpected character `{}`", c as char))),
        }
    }

    fn number(&mut self) -> Result<Node, ParseError> {
        let start = self.pos;
        let b = self.bytes;
        while self.pos < b.len() && (b[self.pos].is_ascii_digit() || b[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < b.len() && (b[self.pos] == b'e' || b[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < b.len() && (b[self.pos] == b'+' || b[self.pos] == b'-') {
                self.pos += 1;
            }
            if self.pos < b.len() && b[self.pos].is_ascii_digit() {
                while self.pos < b.len() && b[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            } else {
                // not an exponent, e.g. `2e` is rejected below as a name follows
                self.pos = save;
            }
        }
        let text = &self.src[start..self.pos];
        text.parse::<f64>().map(Node::Const).map_err(|_| ParseError {
            offset: start,
            message: format!("malformed number `{text}`"),
            source_text: self.src.to_string(),
        })
    }

    fn name(&mut self) -> Result<Node, ParseError> {
        let start = self.pos;
        let b = self.bytes;
        while self.pos < b.len() && (b[self.pos].is_ascii_alphanumeric() || b[self.pos] == b'_') {
            self.pos += 1;
        }
        let name = &self.src[start..self.pos];
        if let Some(func) = Func::from_name(name) {
            if !self.eat(b'(') {
                return Err(self.error(format!("expected `(` after function `{name}`")));
            }
            let arg = self.expr()?;
            if !self.eat(b')') {
                return Err(self.error("expected `)`"));
            }
            return Ok(Node::Call(func, Box::new(arg)));
        }
        if let Some(i) = self.variables.iter().position(|v| *v == name) {
            return Ok(Node::Var(i));
        }
        match name {
            "pi" => Ok(Node::Const(std::f64::consts::PI)),
            "e" => Ok(Node::Const(std::f64::consts::E)),
            _ => Err(ParseError {
                offset: start,
                message: format!("unknown name `{name}`"),
                source_text: self.src.to_string(),
            }),
        }
    }
}
