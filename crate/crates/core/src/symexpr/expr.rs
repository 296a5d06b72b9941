use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::table::SymId;

pub type Rational = BigRational;

/// Unary functions available in the expression grammar. `sqrt` is not a
/// variant: it is stored as a power with exponent `1/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Ln => "ln",
        }
    }
}

/// Immutable symbolic expression in canonical form.
///
/// Constants are exact rationals. Sums and products are flat with sorted
/// children, like terms and like factors are collected, a quotient `a/b` is
/// stored as `a * b^(-1)` and a negation `-a` as `(-1) * a`. Structural
/// equality (`==`) is therefore meaningful for golden comparisons; it does
/// not detect identities that need expansion (see [`Expr::simplify`]).
///
/// Build values through the constructors ([`Expr::add`], [`Expr::mul`],
/// [`Expr::pow`], ...) which maintain the canonical form.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expr {
    Num(Rational),
    Sym(SymId),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Pow(Box<Expr>, Rational),
    Func(Func, Box<Expr>),
}

pub(crate) fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub(crate) fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

impl Expr {
    pub fn zero() -> Expr {
        Expr::Num(Rational::zero())
    }

    pub fn one() -> Expr {
        Expr::Num(Rational::one())
    }

    pub fn int(n: i64) -> Expr {
        Expr::Num(rat(n))
    }

    pub fn frac(n: i64, d: i64) -> Expr {
        Expr::Num(ratio(n, d))
    }

    pub fn num(r: Rational) -> Expr {
        Expr::Num(r)
    }

    pub fn sym(id: SymId) -> Expr {
        Expr::Sym(id)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Num(r) if r.is_zero())
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Expr::Num(r) if r.is_one())
    }

    pub fn as_rational(&self) -> Option<&Rational> {
        match self {
            Expr::Num(r) => Some(r),
            _ => None,
        }
    }

    pub fn neg(e: Expr) -> Expr {
        Expr::mul(vec![Expr::int(-1), e])
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::add(vec![a, Expr::neg(b)])
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::mul(vec![a, Expr::pow(b, rat(-1))])
    }

    pub fn scale(c: Rational, e: Expr) -> Expr {
        Expr::mul(vec![Expr::Num(c), e])
    }

    pub fn powi(base: Expr, k: i64) -> Expr {
        Expr::pow(base, rat(k))
    }

    pub fn sqrt(e: Expr) -> Expr {
        Expr::pow(e, ratio(1, 2))
    }

    pub fn sin(e: Expr) -> Expr {
        Expr::func(Func::Sin, e)
    }

    pub fn cos(e: Expr) -> Expr {
        Expr::func(Func::Cos, e)
    }

    pub fn tan(e: Expr) -> Expr {
        Expr::func(Func::Tan, e)
    }

    pub fn exp(e: Expr) -> Expr {
        Expr::func(Func::Exp, e)
    }

    pub fn ln(e: Expr) -> Expr {
        Expr::func(Func::Ln, e)
    }

    /// Canonical sum: flattens, folds constants, and collects like terms.
    pub fn add(terms: Vec<Expr>) -> Expr {
        let mut constant = Rational::zero();
        let mut collected: BTreeMap<Expr, Rational> = BTreeMap::new();
        let mut stack = terms;
        while let Some(t) = stack.pop() {
            match t {
                Expr::Add(inner) => stack.extend(inner),
                Expr::Num(r) => constant += r,
                other => {
                    let (c, rest) = split_coefficient(other);
                    *collected.entry(rest).or_insert_with(Rational::zero) += c;
                }
            }
        }
        let mut out: Vec<Expr> = collected
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(rest, c)| with_coefficient(c, rest))
            .collect();
        if !constant.is_zero() {
            out.push(Expr::Num(constant));
        }
        match out.len() {
            0 => Expr::zero(),
            1 => out.pop().unwrap(),
            _ => {
                out.sort();
                Expr::Add(out)
            }
        }
    }

    /// Canonical product: flattens, folds constants, and collects like
    /// factors by summing exponents.
    pub fn mul(factors: Vec<Expr>) -> Expr {
        let mut coeff = Rational::one();
        let mut collected: BTreeMap<Expr, Rational> = BTreeMap::new();
        let mut stack = factors;
        let mut has_zero = false;
        while let Some(f) = stack.pop() {
            match f {
                Expr::Mul(inner) => stack.extend(inner),
                Expr::Num(r) => {
                    has_zero |= r.is_zero();
                    coeff *= r;
                }
                Expr::Pow(b, e) => *collected.entry(*b).or_insert_with(Rational::zero) += e,
                other => *collected.entry(other).or_insert_with(Rational::zero) += Rational::one(),
            }
        }
        // a division by zero absorbs the whole product, even a zero factor
        let undefined = Expr::Num(Rational::zero());
        if let Some(e) = collected.get(&undefined) {
            if e.is_negative() {
                return Expr::pow(undefined, -Rational::one());
            }
        }
        if has_zero {
            return Expr::zero();
        }
        let mut rebuilt: Vec<Expr> = Vec::new();
        let mut needs_pass = false;
        for (base, e) in collected {
            if e.is_zero() {
                continue;
            }
            match Expr::pow(base, e) {
                Expr::Num(r) => coeff *= r,
                m @ Expr::Mul(_) => {
                    needs_pass = true;
                    rebuilt.push(m);
                }
                other => rebuilt.push(other),
            }
        }
        if coeff.is_zero() {
            return Expr::zero();
        }
        if needs_pass {
            rebuilt.push(Expr::Num(coeff));
            return Expr::mul(rebuilt);
        }
        if rebuilt.is_empty() {
            return Expr::Num(coeff);
        }
        if !coeff.is_one() {
            rebuilt.push(Expr::Num(coeff));
        }
        if rebuilt.len() == 1 {
            return rebuilt.pop().unwrap();
        }
        rebuilt.sort();
        Expr::Mul(rebuilt)
    }

    /// Canonical power with rational exponent.
    pub fn pow(base: Expr, e: Rational) -> Expr {
        if e.is_zero() {
            return Expr::one();
        }
        if e.is_one() {
            return base;
        }
        let integer_exp = e.is_integer();
        match base {
            Expr::Num(b) => {
                if integer_exp {
                    // every negative power of zero is the same undefined node
                    if b.is_zero() && e.is_negative() {
                        return Expr::Pow(Box::new(Expr::Num(b)), -Rational::one());
                    }
                    if let Some(k) = e.to_integer().to_i32() {
                        if k.unsigned_abs() <= 64 {
                            return Expr::Num(num_traits::pow::Pow::pow(&b, k));
                        }
                    }
                }
                if b.is_one() {
                    return Expr::one();
                }
                if b.is_zero() && e.is_positive() {
                    return Expr::zero();
                }
                Expr::Pow(Box::new(Expr::Num(b)), e)
            }
            Expr::Pow(b2, e2) => {
                if integer_exp || !e2.is_integer() {
                    Expr::pow(*b2, e2 * e)
                } else {
                    Expr::Pow(Box::new(Expr::Pow(b2, e2)), e)
                }
            }
            Expr::Mul(fs) if integer_exp => {
                Expr::mul(fs.into_iter().map(|f| Expr::pow(f, e.clone())).collect())
            }
            other => Expr::Pow(Box::new(other), e),
        }
    }

    pub fn func(f: Func, arg: Expr) -> Expr {
        if let Expr::Num(r) = &arg {
            if r.is_zero() {
                return match f {
                    Func::Sin | Func::Tan => Expr::zero(),
                    Func::Cos | Func::Exp => Expr::one(),
                    Func::Ln => Expr::Func(f, Box::new(arg)),
                };
            }
            if r.is_one() && f == Func::Ln {
                return Expr::zero();
            }
        }
        if f == Func::Ln {
            if let Expr::Func(Func::Exp, inner) = arg {
                return *inner;
            }
        }
        Expr::Func(f, Box::new(arg))
    }

    /// Children of the node, in stored order.
    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Num(_) | Expr::Sym(_) => vec![],
            Expr::Add(v) | Expr::Mul(v) => v.iter().collect(),
            Expr::Pow(b, _) => vec![b],
            Expr::Func(_, a) => vec![a],
        }
    }

    /// Does the expression mention `id`?
    pub fn contains(&self, id: SymId) -> bool {
        match self {
            Expr::Sym(s) => *s == id,
            Expr::Num(_) => false,
            _ => self.children().into_iter().any(|c| c.contains(id)),
        }
    }

    pub fn contains_any(&self, pred: &dyn Fn(SymId) -> bool) -> bool {
        match self {
            Expr::Sym(s) => pred(*s),
            Expr::Num(_) => false,
            _ => self.children().into_iter().any(|c| c.contains_any(pred)),
        }
    }

    /// Free symbols in ascending id order.
    pub fn free_symbols(&self) -> Vec<SymId> {
        let mut out = std::collections::BTreeSet::new();
        self.collect_symbols(&mut out);
        out.into_iter().collect()
    }

    fn collect_symbols(&self, out: &mut std::collections::BTreeSet<SymId>) {
        match self {
            Expr::Sym(s) => {
                out.insert(*s);
            }
            Expr::Num(_) => {}
            _ => {
                for c in self.children() {
                    c.collect_symbols(out);
                }
            }
        }
    }

    /// Bases of negative powers anywhere in the tree (candidate poles).
    pub fn denominators(&self) -> Vec<Expr> {
        let mut out = Vec::new();
        self.collect_denominators(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_denominators(&self, out: &mut Vec<Expr>) {
        if let Expr::Pow(b, e) = self {
            if e.is_negative() && !matches!(**b, Expr::Num(_)) {
                out.push((**b).clone());
            }
        }
        for c in self.children() {
            c.collect_denominators(out);
        }
    }

    /// Number of nodes; used to bound expansion work.
    pub fn size(&self) -> usize {
        1 + self.children().into_iter().map(Expr::size).sum::<usize>()
    }
}

/// Splits `c * rest` with `c` rational; non-products get coefficient 1.
pub(crate) fn split_coefficient(e: Expr) -> (Rational, Expr) {
    match e {
        Expr::Mul(mut fs) => {
            if let Some(Expr::Num(_)) = fs.first() {
                let c = match fs.remove(0) {
                    Expr::Num(c) => c,
                    _ => unreachable!(),
                };
                let rest = if fs.len() == 1 { fs.pop().unwrap() } else { Expr::Mul(fs) };
                (c, rest)
            } else {
                (Rational::one(), Expr::Mul(fs))
            }
        }
        Expr::Num(r) => (r, Expr::one()),
        other => (Rational::one(), other),
    }
}

fn with_coefficient(c: Rational, rest: Expr) -> Expr {
    if c.is_one() {
        return rest;
    }
    match rest {
        Expr::Mul(mut fs) => {
            fs.insert(0, Expr::Num(c));
            Expr::Mul(fs)
        }
        Expr::Num(r) => Expr::Num(r * c),
        other => Expr::Mul(vec![Expr::Num(c), other]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(i: u32) -> Expr {
        Expr::Sym(SymId(i))
    }

    #[test]
    fn like_terms_collect() {
        assert_eq!(Expr::add(vec![x(0), x(0)]), Expr::mul(vec![Expr::int(2), x(0)]));
        assert_eq!(Expr::sub(x(0), x(0)), Expr::zero());
        assert_eq!(Expr::add(vec![Expr::mul(vec![Expr::zero(), Expr::sin(x(1))]), x(2)]), x(2));
    }

    #[test]
    fn like_factors_collect() {
        assert_eq!(Expr::mul(vec![x(0), x(0)]), Expr::powi(x(0), 2));
        assert_eq!(Expr::div(x(0), x(0)), Expr::one());
        assert_eq!(Expr::mul(vec![x(0), Expr::powi(x(0), -3)]), Expr::powi(x(0), -2));
        let s = Expr::sqrt(x(1));
        assert_eq!(Expr::mul(vec![s.clone(), s]), x(1));
    }

    #[test]
    fn canonical_order_is_independent_of_input_order() {
        let a = Expr::add(vec![x(2), Expr::cos(x(0)), x(1)]);
        let b = Expr::add(vec![x(1), x(2), Expr::cos(x(0))]);
        assert_eq!(a, b);
        let a = Expr::mul(vec![x(2), Expr::int(3), x(1)]);
        let b = Expr::mul(vec![x(1), x(2), Expr::int(3)]);
        assert_eq!(a, b);
    }

    #[test]
    fn flat_sums_and_products() {
        let inner = Expr::add(vec![x(0), x(1)]);
        match Expr::add(vec![inner, x(2)]) {
            Expr::Add(v) => assert!(v.iter().all(|c| !matches!(c, Expr::Add(_)))),
            _ => panic!(),
        }
        let inner = Expr::mul(vec![x(0), x(1)]);
        match Expr::mul(vec![inner, x(2)]) {
            Expr::Mul(v) => assert!(v.iter().all(|c| !matches!(c, Expr::Mul(_)))),
            _ => panic!(),
        }
    }

    #[test]
    fn power_rules() {
        assert_eq!(Expr::pow(Expr::int(2), rat(3)), Expr::int(8));
        assert_eq!(Expr::pow(Expr::int(2), rat(-1)), Expr::frac(1, 2));
        assert_eq!(Expr::pow(Expr::powi(x(0), 2), rat(3)), Expr::powi(x(0), 6));
        // (x^2)^(1/2) = |x| must not fold to x
        assert!(matches!(Expr::sqrt(Expr::powi(x(0), 2)), Expr::Pow(ref b, _) if matches!(**b, Expr::Pow(..))));
        assert_eq!(
            Expr::powi(Expr::mul(vec![Expr::int(2), x(0)]), -1),
            Expr::mul(vec![Expr::frac(1, 2), Expr::powi(x(0), -1)])
        );
    }

    #[test]
    fn function_folding() {
        assert_eq!(Expr::sin(Expr::zero()), Expr::zero());
        assert_eq!(Expr::cos(Expr::zero()), Expr::one());
        assert_eq!(Expr::ln(Expr::exp(x(0))), x(0));
        assert_eq!(Expr::ln(Expr::one()), Expr::zero());
    }
}
