//! Exact symbolic expressions over rational coefficients.
//!
//! Expressions are kept in a canonical form by their smart constructors, so
//! structural equality is a cheap (incomplete) equality test. `simplify`
//! adds expansion of products over sums.

mod eval;
mod expr;
mod parse;
mod print;
mod simplify;
mod table;

use thiserror::Error;

pub use eval::{Compiled, TAN_POLE_GUARD};
pub use expr::{Expr, Func, Rational};
#[allow(unused_imports)]
pub(crate) use expr::{rat, ratio};
pub use parse::parse;
pub use print::Printed;
pub use table::{Role, SymId, Symbol, SymbolTable};
#[allow(unused_imports)]
pub(crate) use table::is_identifier;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SymbolError {
    #[error("duplicate symbol `{0}`")]
    Duplicate(String),
    #[error("invalid symbol name `{0}`")]
    InvalidName(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("fractional power of a negative number")]
    NegativeBaseFractionalPower,
    #[error("tan evaluated at a pole")]
    TanPole,
    #[error("logarithm of a non-positive number")]
    LogOfNonPositive,
    #[error("unbound symbol #{}", .0 .0)]
    Unbound(SymId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    UnexpectedChar(char),
    UnexpectedToken(String),
    UnexpectedEnd,
    Expected(char),
    UnknownIdentifier(String),
    MalformedNumber(String),
    NonConstantExponent,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{} at byte {position}", describe(.kind))]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub position: usize,
}

impl ParseError {
    pub(crate) fn new(kind: ParseErrorKind, position: usize) -> Self {
        ParseError { kind, position }
    }
}

fn describe(k: &ParseErrorKind) -> String {
    match k {
        ParseErrorKind::UnexpectedChar(c) => format!("unexpected character `{c}`"),
        ParseErrorKind::UnexpectedToken(s) => format!("unexpected `{s}`"),
        ParseErrorKind::UnexpectedEnd => "unexpected end of input".into(),
        ParseErrorKind::Expected(c) => format!("expected `{c}`"),
        ParseErrorKind::UnknownIdentifier(s) => format!("unknown identifier `{s}`"),
        ParseErrorKind::MalformedNumber(s) => format!("malformed number `{s}`"),
        ParseErrorKind::NonConstantExponent => "exponent must be a rational constant".into(),
    }
}
