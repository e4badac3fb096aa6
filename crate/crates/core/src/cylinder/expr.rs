//! Small exact-arithmetic expression language for chain generators.
//!
//! Grammar (whitespace ignored):
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | 'n' | '(' expr ')'
//! ```
//!
//! `×`, `÷` and `−` are accepted as aliases. Numbers may be decimals and are
//! read exactly. Exponents must evaluate to integers.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

const MAX_EXPONENT: i64 = 4096;

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Const(BigRational),
    Index,
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
}

/// A parsed generator formula in the index variable `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
}

impl Expr {
    pub fn parse(source: &str) -> Result<Self> {
        let tokens = tokenize(source)?;
        let mut parser = Parser { tokens, pos: 0 };
        let root = parser.expr()?;
        if parser.pos != parser.tokens.len() {
            return Err(Error::Expr(format!(
                "unexpected trailing input in {source:?} at token {}",
                parser.pos
            )));
        }
        Ok(Self {
            source: source.to_string(),
            root,
        })
    }

    /// A constant expression.
    pub fn constant(value: BigRational) -> Self {
        Self {
            source: value.to_string(),
            root: Node::Const(value),
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, n: u64) -> Result<BigRational> {
        eval(&self.root, &BigRational::from_integer(BigInt::from(n)))
    }
}

impl FromStr for Expr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Expr::parse(s)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

fn eval(node: &Node, n: &BigRational) -> Result<BigRational> {
    Ok(match node {
        Node::Const(c) => c.clone(),
        Node::Index => n.clone(),
        Node::Neg(a) => -eval(a, n)?,
        Node::Add(a, b) => eval(a, n)? + eval(b, n)?,
        Node::Sub(a, b) => eval(a, n)? - eval(b, n)?,
        Node::Mul(a, b) => eval(a, n)? * eval(b, n)?,
        Node::Div(a, b) => {
            let d = eval(b, n)?;
            if d.is_zero() {
                return Err(Error::Expr("division by zero".into()));
            }
            eval(a, n)? / d
        }
        Node::Pow(a, b) => {
            let base = eval(a, n)?;
            let e = eval(b, n)?;
            if !e.is_integer() {
                return Err(Error::Expr(format!("non-integer exponent {e}")));
            }
            let e = e
                .to_integer()
                .to_i64()
                .filter(|e| e.abs() <= MAX_EXPONENT)
                .ok_or_else(|| Error::Expr("exponent out of range".into()))?;
            if base.is_zero() && e < 0 {
                return Err(Error::Expr("zero to a negative power".into()));
            }
            let mut out = BigRational::one();
            for _ in 0..e.unsigned_abs() {
                out *= &base;
            }
            if e < 0 {
                out.recip()
            } else {
                out
            }
        }
    })
}

/// Exact rational value of a decimal literal such as `2.5` or `1e-3`.
pub fn parse_decimal(text: &str) -> Result<BigRational> {
    let bad = || Error::Expr(format!("invalid number {text:?}"));
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(i) => (&text[..i], text[i + 1..].parse::<i64>().map_err(|_| bad())?),
        None => (text, 0),
    };
    let (int_part, frac_part) = match mantissa.find('.') {
        Some(i) => (&mantissa[..i], &mantissa[i + 1..]),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let digits = digits.trim_start_matches('+');
    let value: BigInt = if digits.is_empty() || digits == "-" {
        BigInt::zero()
    } else {
        digits.parse().map_err(|_| bad())?
    };
    let scale = exponent - frac_part.len() as i64;
    if scale.abs() > MAX_EXPONENT {
        return Err(bad());
    }
    let ten = BigInt::from(10);
    let pow = num_traits::pow(ten, scale.unsigned_abs() as usize);
    let value = BigRational::from_integer(value);
    Ok(if scale >= 0 {
        value * BigRational::from_integer(pow)
    } else {
        value / BigRational::from_integer(pow)
    })
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(BigRational),
    Index,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        let tok = match ch {
            c if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '+' => Token::Plus,
            '-' | '−' => Token::Minus,
            '*' | '×' => Token::Star,
            '/' | '÷' => Token::Slash,
            '^' => Token::Caret,
            '(' => Token::LParen,
            ')' => Token::RParen,
            'n' => Token::Index,
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                out.push(Token::Num(parse_decimal(&text)?));
                continue;
            }
            other => return Err(Error::Expr(format!("unexpected character {other:?} in {src:?}"))),
        };
        out.push(tok);
        i += 1;
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn eat(&mut self, tok: &Token) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(&Token::Plus) {
                lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(&Token::Minus) {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(&Token::Star) {
                lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(&Token::Slash) {
                lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat(&Token::Minus) {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat(&Token::Caret) {
            return Ok(Node::Pow(Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.tokens.get(self.pos).cloned() {
            Some(Token::Num(v)) => {
                self.pos += 1;
                Ok(Node::Const(v))
            }
            Some(Token::Index) => {
                self.pos += 1;
                Ok(Node::Index)
            }
            Some(Token::LParen) => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(&Token::RParen) {
                    return Err(Error::Expr("missing ')'".into()));
                }
                Ok(inner)
            }
            other => Err(Error::Expr(format!("expected a number, 'n' or '(' but found {other:?}"))),
        }
    }
}
