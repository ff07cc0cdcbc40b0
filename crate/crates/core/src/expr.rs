//! A tiny complex arithmetic expression grammar for coefficient fields.
//!
//! Grammar (precedence climbing): `+ - * / ^`, unary minus, parentheses,
//! functions `sin cos exp`, variables `x1 x y`, the imaginary unit `i` and
//! decimal literals. `^` accepts integer exponents only and binds tightest.
//!
//! Expressions are compiled once into a small instruction tree and evaluated
//! at `(x1, x, y)` points; evaluation allocates nothing.

use crate::{Error, Result};
use num_complex::Complex64;

type C = Complex64;

#[derive(Debug, Clone)]
enum Node {
    Const(C),
    X1,
    X,
    Y,
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, i32),
    Sin(Box<Node>),
    Cos(Box<Node>),
    Exp(Box<Node>),
}

/// A compiled scalar expression over `(x1, x, y)`.
#[derive(Debug, Clone)]
pub struct Expr {
    root: Node,
    source: String,
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = lex(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let root = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Config(format!(
                "trailing input in expression `{src}`"
            )));
        }
        Ok(Expr {
            root,
            source: src.to_string(),
        })
    }

    pub fn eval(&self, x1: f64, x: f64, y: f64) -> C {
        eval_node(&self.root, x1, x, y)
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

fn eval_node(n: &Node, x1: f64, x: f64, y: f64) -> C {
    match n {
        Node::Const(c) => *c,
        Node::X1 => C::new(x1, 0.0),
        Node::X => C::new(x, 0.0),
        Node::Y => C::new(y, 0.0),
        Node::Neg(a) => -eval_node(a, x1, x, y),
        Node::Add(a, b) => eval_node(a, x1, x, y) + eval_node(b, x1, x, y),
        Node::Sub(a, b) => eval_node(a, x1, x, y) - eval_node(b, x1, x, y),
        Node::Mul(a, b) => eval_node(a, x1, x, y) * eval_node(b, x1, x, y),
        Node::Div(a, b) => eval_node(a, x1, x, y) / eval_node(b, x1, x, y),
        Node::Pow(a, k) => eval_node(a, x1, x, y).powi(*k),
        Node::Sin(a) => eval_node(a, x1, x, y).sin(),
        Node::Cos(a) => eval_node(a, x1, x, y).cos(),
        Node::Exp(a) => eval_node(a, x1, x, y).exp(),
    }
}

#[derive(Debug, Clone, PartialEq)]
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

fn lex(src: &str) -> Result<Vec<Tok>> {
    let mut out = Vec::new();
    let bytes: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < bytes.len() {
        let ch = bytes[i];
        match ch {
            ' ' | '\t' | '\n' => i += 1,
            '+' => {
                out.push(Tok::Plus);
                i += 1;
            }
            '-' | '−' => {
                out.push(Tok::Minus);
                i += 1;
            }
            '*' => {
                out.push(Tok::Star);
                i += 1;
            }
            '/' => {
                out.push(Tok::Slash);
                i += 1;
            }
            '^' => {
                out.push(Tok::Caret);
                i += 1;
            }
            '(' => {
                out.push(Tok::LParen);
                i += 1;
            }
            ')' => {
                out.push(Tok::RParen);
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_digit()
                        || bytes[i] == '.'
                        || (bytes[i] == 'e' || bytes[i] == 'E')
                            && i + 1 < bytes.len()
                            && (bytes[i + 1].is_ascii_digit()
                                || bytes[i + 1] == '-'
                                || bytes[i + 1] == '+'))
                {
                    if bytes[i] == 'e' || bytes[i] == 'E' {
                        i += 2;
                    } else {
                        i += 1;
                    }
                }
                let text: String = bytes[start..i].iter().collect();
                let v: f64 = text
                    .parse()
                    .map_err(|_| Error::Config(format!("bad number `{text}`")))?;
                out.push(Tok::Num(v));
            }
            c if c.is_ascii_alphabetic() => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == '_') {
                    i += 1;
                }
                out.push(Tok::Ident(bytes[start..i].iter().collect()));
            }
            other => {
                return Err(Error::Config(format!(
                    "unexpected character `{other}` in expression"
                )))
            }
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

    fn bump(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(tok) = self.peek() {
            match tok {
                Tok::Plus => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Node::Add(Box::new(lhs), Box::new(rhs));
                }
                Tok::Minus => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Node::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(tok) = self.peek() {
            match tok {
                Tok::Star => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = Node::Mul(Box::new(lhs), Box::new(rhs));
                }
                Tok::Slash => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = Node::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.pos += 1;
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if matches!(self.peek(), Some(Tok::Caret)) {
            self.pos += 1;
            let neg = if matches!(self.peek(), Some(Tok::Minus)) {
                self.pos += 1;
                true
            } else {
                false
            };
            match self.bump() {
                Some(Tok::Num(v)) if v.fract() == 0.0 => {
                    let k = v as i32 * if neg { -1 } else { 1 };
                    Ok(Node::Pow(Box::new(base), k))
                }
                other => Err(Error::Config(format!(
                    "`^` needs an integer exponent, got {other:?}"
                ))),
            }
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Node> {
        match self.bump() {
            Some(Tok::Num(v)) => Ok(Node::Const(C::new(v, 0.0))),
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                match self.bump() {
                    Some(Tok::RParen) => Ok(inner),
                    _ => Err(Error::Config("missing `)`".into())),
                }
            }
            Some(Tok::Ident(name)) => match name.as_str() {
                "x1" => Ok(Node::X1),
                "x" => Ok(Node::X),
                "y" => Ok(Node::Y),
                "i" => Ok(Node::Const(C::new(0.0, 1.0))),
                "pi" => Ok(Node::Const(C::new(std::f64::consts::PI, 0.0))),
                "sin" | "cos" | "exp" => {
                    match self.bump() {
                        Some(Tok::LParen) => {}
                        _ => {
                            return Err(Error::Config(format!(
                                "function `{name}` needs parentheses"
                            )))
                        }
                    }
                    let arg = self.expr()?;
                    match self.bump() {
                        Some(Tok::RParen) => {}
                        _ => return Err(Error::Config("missing `)`".into())),
                    }
                    Ok(match name.as_str() {
                        "sin" => Node::Sin(Box::new(arg)),
                        "cos" => Node::Cos(Box::new(arg)),
                        _ => Node::Exp(Box::new(arg)),
                    })
                }
                other => Err(Error::Config(format!("unknown identifier `{other}`"))),
            },
            other => Err(Error::Config(format!("unexpected token {other:?}"))),
        }
    }
}
