//! A small arithmetic language for ledger right-hand sides.
//!
//! Supports `+ - * / × ÷`, unary minus, parentheses, numeric constants,
//! field identifiers, `sqrt(x)` / `√x`, `min(..)` and `max(..)`.

use std::collections::BTreeSet;
use std::fmt;

use crate::report::FieldId;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Field(FieldId),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Sqrt(Box<Expr>),
    Min(Vec<Expr>),
    Max(Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("expression error at offset {offset}: {message}")]
pub struct ExprError {
    pub offset: usize,
    pub message: String,
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr, ExprError> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        if let Some((off, tok)) = p.tokens.get(p.pos) {
            return Err(ExprError {
                offset: *off,
                message: format!("unexpected {tok:?}"),
            });
        }
        Ok(e)
    }

    /// Evaluates with `lookup` supplying field values. Returns `None` when a
    /// field is missing, a denominator is zero, a square root is negative or
    /// the result is not finite.
    pub fn eval(&self, lookup: &impl Fn(FieldId) -> Option<f64>) -> Option<f64> {
        let v = match self {
            Expr::Const(c) => *c,
            Expr::Field(f) => lookup(*f)?,
            Expr::Neg(e) => -e.eval(lookup)?,
            Expr::Add(a, b) => a.eval(lookup)? + b.eval(lookup)?,
            Expr::Sub(a, b) => a.eval(lookup)? - b.eval(lookup)?,
            Expr::Mul(a, b) => a.eval(lookup)? * b.eval(lookup)?,
            Expr::Div(a, b) => {
                let d = b.eval(lookup)?;
                if d == 0.0 {
                    return None;
                }
                a.eval(lookup)? / d
            }
            Expr::Sqrt(e) => {
                let x = e.eval(lookup)?;
                if x < 0.0 {
                    return None;
                }
                x.sqrt()
            }
            Expr::Min(args) => fold(args, lookup, f64::min)?,
            Expr::Max(args) => fold(args, lookup, f64::max)?,
        };
        v.is_finite().then_some(v)
    }

    /// Fields referenced anywhere in the expression.
    pub fn fields(&self) -> BTreeSet<FieldId> {
        let mut out = BTreeSet::new();
        self.collect(&mut out);
        out
    }

    fn collect(&self, out: &mut BTreeSet<FieldId>) {
        match self {
            Expr::Const(_) => {}
            Expr::Field(f) => {
                out.insert(*f);
            }
            Expr::Neg(e) | Expr::Sqrt(e) => e.collect(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.collect(out);
                b.collect(out);
            }
            Expr::Min(args) | Expr::Max(args) => args.iter().for_each(|a| a.collect(out)),
        }
    }
}

fn fold(
    args: &[Expr],
    lookup: &impl Fn(FieldId) -> Option<f64>,
    op: fn(f64, f64) -> f64,
) -> Option<f64> {
    let mut acc: Option<f64> = None;
    for a in args {
        let v = a.eval(lookup)?;
        acc = Some(acc.map_or(v, |x| op(x, v)));
    }
    acc
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Field(id) => write!(f, "{id}"),
            Expr::Neg(e) => write!(f, "-({e})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Sqrt(e) => write!(f, "sqrt({e})"),
            Expr::Min(args) | Expr::Max(args) => {
                f.write_str(if matches!(self, Expr::Min(_)) { "min(" } else { "max(" })?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
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
    Root,
    LParen,
    RParen,
    Comma,
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>, ExprError> {
    let mut out = Vec::new();
    let mut chars = src.char_indices().peekable();
    while let Some(&(off, c)) = chars.peek() {
        let simple = match c {
            '+' => Some(Tok::Plus),
            '-' | '−' => Some(Tok::Minus),
            '*' | '×' => Some(Tok::Star),
            '/' | '÷' => Some(Tok::Slash),
            '√' => Some(Tok::Root),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(t) = simple {
            chars.next();
            out.push((off, t));
        } else if c.is_whitespace() {
            chars.next();
        } else if c.is_ascii_digit() || c == '.' {
            let mut end = off;
            while let Some(&(o, d)) = chars.peek() {
                if d.is_ascii_digit() || d == '.' {
                    end = o + d.len_utf8();
                    chars.next();
                } else {
                    break;
                }
            }
            let text = &src[off..end];
            let n = text.parse().map_err(|_| ExprError {
                offset: off,
                message: format!("bad number `{text}`"),
            })?;
            out.push((off, Tok::Num(n)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let mut end = off;
            while let Some(&(o, d)) = chars.peek() {
                if d.is_ascii_alphanumeric() || d == '_' {
                    end = o + d.len_utf8();
                    chars.next();
                } else {
                    break;
                }
            }
            out.push((off, Tok::Ident(src[off..end].to_string())));
        } else {
            return Err(ExprError {
                offset: off,
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(usize::MAX, |(o, _)| *o)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ExprError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected {tok:?}"))
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Some(Tok::Minus) => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(Tok::Root) => {
                self.pos += 1;
                Ok(Expr::Sqrt(Box::new(self.unary()?)))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        let Some(tok) = self.peek().cloned() else {
            return self.err("unexpected end of expression");
        };
        self.pos += 1;
        match tok {
            Tok::Num(n) => Ok(Expr::Const(n)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => match name.to_ascii_lowercase().as_str() {
                "sqrt" => {
                    let mut args = self.args()?;
                    if args.len() != 1 {
                        return self.err("sqrt takes one argument");
                    }
                    Ok(Expr::Sqrt(Box::new(args.remove(0))))
                }
                "min" => Ok(Expr::Min(self.args()?)),
                "max" => Ok(Expr::Max(self.args()?)),
                _ => match name.parse::<FieldId>() {
                    Ok(f) => Ok(Expr::Field(f)),
                    Err(_) => {
                        self.pos -= 1;
                        self.err(format!("unknown identifier `{name}`"))
                    }
                },
            },
            other => {
                self.pos -= 1;
                self.err(format!("unexpected {other:?}"))
            }
        }
    }

    fn args(&mut self) -> Result<Vec<Expr>, ExprError> {
        self.expect(Tok::LParen)?;
        let mut args = vec![self.expr()?];
        while self.peek() == Some(&Tok::Comma) {
            self.pos += 1;
            args.push(self.expr()?);
        }
        self.expect(Tok::RParen)?;
        Ok(args)
    }
}
