//! Recursive-descent parser for the expression grammar:
//!
//! ```text
//! expr   := term (("+" | "-") term)*
//! term   := factor (("*" | "/") factor)*
//! factor := base ("^" factor)?
//! base   := number | ident | "(" expr ")" | func "(" expr ")" | "-" factor
//! func   := "sin" | "cos" | "tan" | "exp" | "ln" | "sqrt"
//! number := integer ("." digits)?
//! ident  := letter (letter | digit | "_")*
//! ```
//!
//! Exponents must fold to rational constants. Decimals become exact
//! rationals.

use num_bigint::BigInt;
use num_traits::{One, Pow};

use super::expr::{Expr, Func, Rational};
use super::table::SymbolTable;
use super::{ParseError, ParseErrorKind};

pub fn parse(text: &str, table: &SymbolTable) -> Result<Expr, ParseError> {
    let tokens = tokenize(text)?;
    let mut p = Parser { tokens, pos: 0, table, len: text.len() };
    let e = p.expr()?;
    if let Some(tok) = p.peek() {
        return Err(ParseError::new(ParseErrorKind::UnexpectedToken(tok.text()), tok.pos));
    }
    Ok(e)
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Num(Rational),
    Ident(String),
    Op(char),
}

#[derive(Debug, Clone)]
struct Token {
    kind: Kind,
    pos: usize,
}

impl Token {
    fn text(&self) -> String {
        match &self.kind {
            Kind::Num(r) => r.to_string(),
            Kind::Ident(s) => s.clone(),
            Kind::Op(c) => c.to_string(),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let int_part = &text[start..i];
            let mut value = Rational::from_integer(int_part.parse::<BigInt>().unwrap());
            if i < bytes.len() && bytes[i] == b'.' {
                i += 1;
                let frac_start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i == frac_start {
                    return Err(ParseError::new(
                        ParseErrorKind::MalformedNumber(text[start..i].to_string()),
                        start,
                    ));
                }
                let digits = &text[frac_start..i];
                let numer: BigInt = digits.parse().unwrap();
                let denom: BigInt = Pow::pow(BigInt::from(10), digits.len() as u32);
                value += Rational::new(numer, denom);
            }
            if i < bytes.len() && (bytes[i] == b'.' || bytes[i].is_ascii_alphabetic()) {
                return Err(ParseError::new(
                    ParseErrorKind::MalformedNumber(text[start..=i].to_string()),
                    start,
                ));
            }
            out.push(Token { kind: Kind::Num(value), pos: start });
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token { kind: Kind::Ident(text[start..i].to_string()), pos: start });
        } else if "+-*/^()".contains(c) {
            out.push(Token { kind: Kind::Op(c), pos: i });
            i += 1;
        } else {
            return Err(ParseError::new(ParseErrorKind::UnexpectedChar(c), i));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    table: &'a SymbolTable,
    len: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_op(&self) -> Option<char> {
        match self.peek() {
            Some(Token { kind: Kind::Op(c), .. }) => Some(*c),
            _ => None,
        }
    }

    fn here(&self) -> usize {
        self.peek().map(|t| t.pos).unwrap_or(self.len)
    }

    fn expect(&mut self, op: char) -> Result<(), ParseError> {
        if self.peek_op() == Some(op) {
            self.pos += 1;
            Ok(())
        } else {
            Err(ParseError::new(ParseErrorKind::Expected(op), self.here()))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut terms = vec![self.term()?];
        while let Some(op) = self.peek_op() {
            match op {
                '+' => {
                    self.pos += 1;
                    terms.push(self.term()?);
                }
                '-' => {
                    self.pos += 1;
                    terms.push(Expr::neg(self.term()?));
                }
                _ => break,
            }
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { Expr::add(terms) })
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.factor()?;
        while let Some(op) = self.peek_op() {
            match op {
                '*' => {
                    self.pos += 1;
                    acc = Expr::mul(vec![acc, self.factor()?]);
                }
                '/' => {
                    self.pos += 1;
                    acc = Expr::div(acc, self.factor()?);
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let base = self.base()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let at = self.here();
            let exponent = self.factor()?;
            return match exponent {
                Expr::Num(r) => Ok(Expr::pow(base, r)),
                _ => Err(ParseError::new(ParseErrorKind::NonConstantExponent, at)),
            };
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Expr, ParseError> {
        let tok = match self.peek() {
            Some(t) => t.clone(),
            None => return Err(ParseError::new(ParseErrorKind::UnexpectedEnd, self.len)),
        };
        self.pos += 1;
        match tok.kind {
            Kind::Num(r) => Ok(Expr::Num(r)),
            Kind::Op('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Kind::Op('-') => Ok(Expr::neg(self.factor()?)),
            Kind::Op(c) => Err(ParseError::new(ParseErrorKind::UnexpectedToken(c.to_string()), tok.pos)),
            Kind::Ident(name) => {
                if self.peek_op() == Some('(') {
                    if let Some(apply) = function(&name) {
                        self.pos += 1;
                        let arg = self.expr()?;
                        self.expect(')')?;
                        return Ok(apply(arg));
                    }
                }
                match self.table.lookup(&name) {
                    Some(id) => Ok(Expr::sym(id)),
                    None => Err(ParseError::new(ParseErrorKind::UnknownIdentifier(name), tok.pos)),
                }
            }
        }
    }
}

fn function(name: &str) -> Option<fn(Expr) -> Expr> {
    Some(match name {
        "sin" => |a| Expr::func(Func::Sin, a),
        "cos" => |a| Expr::func(Func::Cos, a),
        "tan" => |a| Expr::func(Func::Tan, a),
        "exp" => |a| Expr::func(Func::Exp, a),
        "ln" => |a| Expr::func(Func::Ln, a),
        "sqrt" => |a| Expr::pow(a, Rational::new(BigInt::one(), BigInt::from(2))),
        _ => return None,
    })
}
