//! A tiny arithmetic language for user-supplied coefficients.
//!
//! Grammar: `+ - * / ^`, parentheses, numbers, `abs(e)`, `exp(e)`,
//! `smoothpow(s, x)` and `smoothpow(s, e)`. Variables are `s` (time), `x`
//! (the coordinate in 1D, the point inside `smoothpow`), `x1`, `x2`, ... and
//! `r` (the Euclidean norm). `pi` is predefined.

use std::fmt;

use super::power::{norm, SmoothPower};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Time,
    Coord(usize),
    Radius,
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Abs(Box<Node>),
    Exp(Box<Node>),
    /// `smoothpow(s, x)`: smoothed power of the point norm.
    PowPoint(Box<Node>),
    /// `smoothpow(s, e)`: smoothed power of a scalar.
    PowScalar(Box<Node>, Box<Node>),
}

/// A parsed coefficient expression.
#[derive(Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
    dim: usize,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?})", self.source)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
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
            let v = text
                .parse::<f64>()
                .map_err(|_| Error::Expression(format!("bad number '{text}' in '{src}'")))?;
            out.push(Tok::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else {
            let tok = match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '−' => Tok::Op('-'),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                ',' => Tok::Comma,
                _ => {
                    return Err(Error::Expression(format!(
                        "unexpected character '{c}' in '{src}'"
                    )))
                }
            };
            out.push(tok);
            i += 1;
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Tok>,
    pos: usize,
    src: &'a str,
    dim: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Expression(format!("{msg} in '{}'", self.src))
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, tok: Tok) -> Result<()> {
        match self.next() {
            Some(t) if t == tok => Ok(()),
            _ => Err(self.err(&format!("expected {tok:?}"))),
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(op @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(op @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek() {
            Some(Tok::Op('-')) => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some(Tok::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    // `^` is right associative and binds tighter than unary minus.
    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Bin('^', Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.next() {
            Some(Tok::Num(v)) => Ok(Node::Num(v)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => self.ident(&name),
            _ => Err(self.err("unexpected end or token")),
        }
    }

    fn ident(&mut self, name: &str) -> Result<Node> {
        match name {
            "abs" | "exp" => {
                self.expect(Tok::LParen)?;
                let arg = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(if name == "abs" {
                    Node::Abs(Box::new(arg))
                } else {
                    Node::Exp(Box::new(arg))
                })
            }
            "smoothpow" => {
                self.expect(Tok::LParen)?;
                let s = self.expr()?;
                self.expect(Tok::Comma)?;
                let node = if self.peek() == Some(&Tok::Ident("x".into()))
                    && self.toks.get(self.pos + 1) == Some(&Tok::RParen)
                {
                    self.pos += 1;
                    Node::PowPoint(Box::new(s))
                } else {
                    Node::PowScalar(Box::new(s), Box::new(self.expr()?))
                };
                self.expect(Tok::RParen)?;
                Ok(node)
            }
            "s" | "t" => Ok(Node::Time),
            "r" => Ok(Node::Radius),
            "pi" => Ok(Node::Num(std::f64::consts::PI)),
            "x" if self.dim == 1 => Ok(Node::Coord(0)),
            "x" => Err(self.err("bare 'x' is only a scalar in dimension 1; use x1, x2")),
            _ => {
                if let Some(idx) = name.strip_prefix('x').and_then(|n| n.parse::<usize>().ok()) {
                    if idx >= 1 && idx <= self.dim {
                        return Ok(Node::Coord(idx - 1));
                    }
                }
                Err(self.err(&format!("unknown identifier '{name}'")))
            }
        }
    }
}

impl Expr {
    /// Parses `src` for points of dimension `dim`.
    pub fn parse(src: &str, dim: usize) -> Result<Self> {
        let mut p = Parser {
            toks: tokenize(src)?,
            pos: 0,
            src,
            dim,
        };
        let root = p.expr()?;
        if p.pos != p.toks.len() {
            return Err(p.err("trailing input"));
        }
        Ok(Self {
            source: src.to_string(),
            root,
            dim,
        })
    }

    pub fn constant(v: f64) -> Self {
        Self {
            source: format!("{v}"),
            root: Node::Num(v),
            dim: 0,
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// True when the expression references `s`.
    pub fn depends_on_time(&self) -> bool {
        fn walk(n: &Node) -> bool {
            match n {
                Node::Time => true,
                Node::Num(_) | Node::Coord(_) | Node::Radius => false,
                Node::Neg(a) | Node::Abs(a) | Node::Exp(a) | Node::PowPoint(a) => walk(a),
                Node::Bin(_, a, b) | Node::PowScalar(a, b) => walk(a) || walk(b),
            }
        }
        walk(&self.root)
    }

    pub fn eval(&self, s: f64, x: &[f64]) -> f64 {
        debug_assert!(self.dim == 0 || x.len() == self.dim);
        eval(&self.root, s, x)
    }
}

fn smooth_pow(exponent: f64, x: &[f64]) -> f64 {
    match SmoothPower::new(exponent) {
        Ok(p) => p.value(x),
        Err(_) => f64::NAN,
    }
}

fn eval(n: &Node, s: f64, x: &[f64]) -> f64 {
    match n {
        Node::Num(v) => *v,
        Node::Time => s,
        Node::Coord(i) => x[*i],
        Node::Radius => norm(x),
        Node::Neg(a) => -eval(a, s, x),
        Node::Abs(a) => eval(a, s, x).abs(),
        Node::Exp(a) => eval(a, s, x).exp(),
        Node::Bin(op, a, b) => {
            let (a, b) = (eval(a, s, x), eval(b, s, x));
            match op {
                '+' => a + b,
                '-' => a - b,
                '*' => a * b,
                '/' => a / b,
                _ => {
                    if b.fract() == 0.0 && b.abs() <= 64.0 {
                        a.powi(b as i32)
                    } else {
                        a.powf(b)
                    }
                }
            }
        }
        Node::PowPoint(e) => smooth_pow(eval(e, s, x), x),
        Node::PowScalar(e, a) => smooth_pow(eval(e, s, x), &[eval(a, s, x)]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_associativity() {
        let e = Expr::parse("1 + 2*3^2 - 4/2", 1).unwrap();
        assert_eq!(e.eval(0.0, &[0.0]), 17.0);
        let e = Expr::parse("2^3^2", 1).unwrap();
        assert_eq!(e.eval(0.0, &[0.0]), 512.0);
        let e = Expr::parse("-x^2", 1).unwrap();
        assert_eq!(e.eval(0.0, &[3.0]), -9.0);
    }

    #[test]
    fn variables_and_functions() {
        let e = Expr::parse("x1*x2 + r + s", 2).unwrap();
        assert!((e.eval(0.5, &[3.0, 4.0]) - 17.5).abs() < 1e-14);
        let e = Expr::parse("abs(x) + exp(0)", 1).unwrap();
        assert_eq!(e.eval(0.0, &[-2.0]), 3.0);
        let e = Expr::parse("1 + smoothpow(2, x)", 2).unwrap();
        assert!((e.eval(0.0, &[1.0, 2.0]) - 6.0).abs() < 1e-14);
        let e = Expr::parse("smoothpow(3, x1 - 1)", 2).unwrap();
        assert!((e.eval(0.0, &[3.0, 0.0]) - 8.0).abs() < 1e-14);
        let e = Expr::parse("1.5e-1 * 2", 1).unwrap();
        assert!((e.eval(0.0, &[0.0]) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn time_dependence_detection() {
        assert!(Expr::parse("1 + s*x", 1).unwrap().depends_on_time());
        assert!(!Expr::parse("1 + x", 1).unwrap().depends_on_time());
    }

    #[test]
    fn rejects_garbage() {
        assert!(Expr::parse("1 +", 1).is_err());
        assert!(Expr::parse("foo(x)", 1).is_err());
        assert!(Expr::parse("x3", 2).is_err());
        assert!(Expr::parse("x", 2).is_err());
        assert!(Expr::parse("(1", 1).is_err());
        assert!(Expr::parse("1 $ 2", 1).is_err());
    }
}
