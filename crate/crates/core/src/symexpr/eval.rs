use std::collections::BTreeMap;

use num_traits::ToPrimitive;

use super::expr::{Expr, Func, Rational};
use super::table::SymId;
use super::EvalError;

/// Guard band around the poles of `tan`: `|cos(a)|` below this is an error.
pub const TAN_POLE_GUARD: f64 = 1e-9;

fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// An expression lowered to floating point for repeated evaluation.
///
/// Values are read from a slice indexed by symbol id; `NaN` marks an unbound
/// symbol.
#[derive(Debug, Clone)]
pub struct Compiled {
    root: Node,
}

#[derive(Debug, Clone)]
enum Node {
    Const(f64),
    Var(usize),
    Add(Vec<Node>),
    Mul(Vec<Node>),
    PowI(Box<Node>, i32),
    PowR(Box<Node>, f64),
    Func(Func, Box<Node>),
}

impl Compiled {
    pub fn new(e: &Expr) -> Self {
        Compiled { root: lower(e) }
    }

    pub fn eval(&self, values: &[f64]) -> Result<f64, EvalError> {
        eval_node(&self.root, values)
    }

    /// True when the expression is the constant zero.
    pub fn is_const_zero(&self) -> bool {
        matches!(self.root, Node::Const(c) if c == 0.0)
    }
}

fn lower(e: &Expr) -> Node {
    match e {
        Expr::Num(r) => Node::Const(to_f64(r)),
        Expr::Sym(s) => Node::Var(s.index()),
        Expr::Add(ts) => Node::Add(ts.iter().map(lower).collect()),
        Expr::Mul(fs) => Node::Mul(fs.iter().map(lower).collect()),
        Expr::Pow(b, p) => {
            let base = Box::new(lower(b));
            if p.is_integer() {
                if let Some(k) = p.to_integer().to_i32() {
                    return Node::PowI(base, k);
                }
            }
            Node::PowR(base, to_f64(p))
        }
        Expr::Func(f, a) => Node::Func(*f, Box::new(lower(a))),
    }
}

fn eval_node(n: &Node, v: &[f64]) -> Result<f64, EvalError> {
    Ok(match n {
        Node::Const(c) => *c,
        Node::Var(i) => {
            let x = v.get(*i).copied().unwrap_or(f64::NAN);
            if x.is_nan() {
                return Err(EvalError::Unbound(SymId(*i as u32)));
            }
            x
        }
        Node::Add(ts) => {
            let mut s = 0.0;
            for t in ts {
                s += eval_node(t, v)?;
            }
            s
        }
        Node::Mul(fs) => {
            let mut p = 1.0;
            for f in fs {
                p *= eval_node(f, v)?;
            }
            p
        }
        Node::PowI(b, k) => {
            let x = eval_node(b, v)?;
            if *k < 0 && x == 0.0 {
                return Err(EvalError::DivisionByZero);
            }
            x.powi(*k)
        }
        Node::PowR(b, p) => {
            let x = eval_node(b, v)?;
            if x < 0.0 {
                return Err(EvalError::NegativeBaseFractionalPower);
            }
            if x == 0.0 && *p < 0.0 {
                return Err(EvalError::DivisionByZero);
            }
            x.powf(*p)
        }
        Node::Func(f, a) => {
            let x = eval_node(a, v)?;
            match f {
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Tan => {
                    if x.cos().abs() < TAN_POLE_GUARD {
                        return Err(EvalError::TanPole);
                    }
                    x.tan()
                }
                Func::Exp => x.exp(),
                Func::Ln => {
                    if x <= 0.0 {
                        return Err(EvalError::LogOfNonPositive);
                    }
                    x.ln()
                }
            }
        }
    })
}

impl Expr {
    /// Evaluates at a point given as a symbol → value map.
    pub fn eval(&self, point: &BTreeMap<SymId, f64>) -> Result<f64, EvalError> {
        let len = point.keys().map(|s| s.index() + 1).max().unwrap_or(0);
        let mut values = vec![f64::NAN; len];
        for (s, x) in point {
            values[s.index()] = *x;
        }
        self.eval_slice(&values)
    }

    /// Evaluates with values indexed by symbol id.
    pub fn eval_slice(&self, values: &[f64]) -> Result<f64, EvalError> {
        Compiled::new(self).eval(values)
    }

    /// Exact value if the expression is constant (no symbols, no irrational
    /// powers).
    pub fn const_value(&self) -> Option<f64> {
        if !self.free_symbols().is_empty() {
            return None;
        }
        Compiled::new(self).eval(&[]).ok()
    }
}
