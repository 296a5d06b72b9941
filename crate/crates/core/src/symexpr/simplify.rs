use std::collections::BTreeMap;

use num_traits::{Signed, ToPrimitive};

use super::expr::{rat, Expr, Func};
use super::table::SymId;

/// Largest positive integer power of a sum that `simplify` multiplies out.
const MAX_EXPANDED_POWER: i64 = 12;
/// Term budget for a single expansion; larger products are left factored.
const MAX_EXPANDED_TERMS: usize = 50_000;

impl Expr {
    /// Shallow simplification: canonical collection plus distribution of
    /// products over sums and expansion of small positive integer powers of
    /// sums. No trigonometric identities and no factorization.
    pub fn simplify(&self) -> Expr {
        let mut cur = self.simplify_pass();
        for _ in 0..4 {
            let next = cur.simplify_pass();
            if next == cur {
                break;
            }
            cur = next;
        }
        cur
    }

    fn simplify_pass(&self) -> Expr {
        match self {
            Expr::Num(_) | Expr::Sym(_) => self.clone(),
            Expr::Add(ts) => Expr::add(ts.iter().map(Expr::simplify_pass).collect()),
            Expr::Mul(fs) => expand_product(fs.iter().map(Expr::simplify_pass).collect()),
            Expr::Pow(b, e) => {
                let b = b.simplify_pass();
                expand_product(vec![Expr::pow(b, e.clone())])
            }
            Expr::Func(f, a) => Expr::func(*f, a.simplify_pass()),
        }
    }

    /// Simultaneous substitution of symbols by expressions.
    pub fn substitute(&self, bindings: &BTreeMap<SymId, Expr>) -> Expr {
        if bindings.is_empty() {
            return self.clone();
        }
        match self {
            Expr::Num(_) => self.clone(),
            Expr::Sym(s) => bindings.get(s).cloned().unwrap_or_else(|| self.clone()),
            Expr::Add(ts) => Expr::add(ts.iter().map(|t| t.substitute(bindings)).collect()),
            Expr::Mul(fs) => Expr::mul(fs.iter().map(|f| f.substitute(bindings)).collect()),
            Expr::Pow(b, e) => Expr::pow(b.substitute(bindings), e.clone()),
            Expr::Func(f, a) => Expr::func(*f, a.substitute(bindings)),
        }
    }

    /// Partial derivative with respect to `s`; all other symbols are
    /// independent.
    pub fn differentiate(&self, s: SymId) -> Expr {
        if !self.contains(s) {
            return Expr::zero();
        }
        match self {
            Expr::Num(_) => Expr::zero(),
            Expr::Sym(id) => {
                if *id == s {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Expr::Add(ts) => Expr::add(ts.iter().map(|t| t.differentiate(s)).collect()),
            Expr::Mul(fs) => {
                let mut terms = Vec::new();
                for (i, f) in fs.iter().enumerate() {
                    let df = f.differentiate(s);
                    if df.is_zero() {
                        continue;
                    }
                    let mut prod: Vec<Expr> = Vec::with_capacity(fs.len());
                    prod.push(df);
                    prod.extend(fs.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, g)| g.clone()));
                    terms.push(Expr::mul(prod));
                }
                Expr::add(terms)
            }
            Expr::Pow(b, e) => Expr::mul(vec![
                Expr::Num(e.clone()),
                Expr::pow((**b).clone(), e - rat(1)),
                b.differentiate(s),
            ]),
            Expr::Func(f, a) => {
                let da = a.differentiate(s);
                let a = (**a).clone();
                let outer = match f {
                    Func::Sin => Expr::cos(a),
                    Func::Cos => Expr::neg(Expr::sin(a)),
                    Func::Tan => Expr::add(vec![Expr::one(), Expr::powi(Expr::tan(a), 2)]),
                    Func::Exp => Expr::exp(a),
                    Func::Ln => Expr::powi(a, -1),
                };
                Expr::mul(vec![outer, da])
            }
        }
    }
}

fn expand_product(factors: Vec<Expr>) -> Expr {
    let collected = Expr::mul(factors);
    let fs = match collected {
        Expr::Mul(fs) => fs,
        p @ Expr::Pow(..) => vec![p],
        other => return other,
    };
    let mut terms: Vec<Expr> = vec![Expr::one()];
    for f in fs {
        let parts: Vec<Expr> = match f {
            Expr::Add(ts) => ts,
            Expr::Pow(b, e) if matches!(*b, Expr::Add(_)) && e.is_integer() && e.is_positive() => {
                let k = e.to_integer().to_i64().unwrap_or(i64::MAX);
                if k > MAX_EXPANDED_POWER {
                    vec![Expr::Pow(b, e)]
                } else {
                    let base_terms = match *b {
                        Expr::Add(ts) => ts,
                        _ => unreachable!(),
                    };
                    let mut acc = vec![Expr::one()];
                    for _ in 0..k {
                        match distribute(&acc, &base_terms) {
                            Some(next) => acc = next,
                            None => {
                                acc = vec![Expr::powi(Expr::Add(base_terms.clone()), k)];
                                break;
                            }
                        }
                    }
                    vec![Expr::add(acc)]
                        .into_iter()
                        .flat_map(|e| match e {
                            Expr::Add(ts) => ts,
                            other => vec![other],
                        })
                        .collect()
                }
            }
            other => vec![other],
        };
        match distribute(&terms, &parts) {
            Some(next) => terms = next,
            None => {
                // too large: keep this factor unexpanded
                let packed = Expr::add(parts);
                terms = terms.into_iter().map(|t| Expr::mul(vec![t, packed.clone()])).collect();
            }
        }
    }
    Expr::add(terms)
}

fn distribute(left: &[Expr], right: &[Expr]) -> Option<Vec<Expr>> {
    if left.len().saturating_mul(right.len()) > MAX_EXPANDED_TERMS {
        return None;
    }
    let mut out = Vec::with_capacity(left.len() * right.len());
    for a in left {
        for b in right {
            out.push(Expr::mul(vec![a.clone(), b.clone()]));
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::SymbolTable;

    #[test]
    fn expands_products_of_sums() {
        let t = SymbolTable::standard(2, 0);
        let (x, y) = (Expr::sym(t.state(1)), Expr::sym(t.state(2)));
        let sq = Expr::powi(Expr::add(vec![x.clone(), y.clone()]), 2);
        let expected = Expr::add(vec![
            Expr::powi(x.clone(), 2),
            Expr::mul(vec![Expr::int(2), x.clone(), y.clone()]),
            Expr::powi(y.clone(), 2),
        ]);
        assert_eq!(sq.simplify(), expected);
        let diff = Expr::sub(sq, expected);
        assert_eq!(diff.simplify(), Expr::zero());
    }

    #[test]
    fn substitution_is_simultaneous() {
        let t = SymbolTable::standard(2, 0);
        let (x, y) = (t.state(1), t.state(2));
        let e = Expr::sub(Expr::sym(x), Expr::sym(y));
        let mut b = BTreeMap::new();
        b.insert(x, Expr::sym(y));
        b.insert(y, Expr::sym(x));
        assert_eq!(e.substitute(&b), Expr::sub(Expr::sym(y), Expr::sym(x)));
        assert_eq!(e.substitute(&BTreeMap::new()), e);
    }

    #[test]
    fn derivative_table() {
        let t = SymbolTable::standard(3, 0);
        let x3 = t.state(3);
        let c = Expr::cos(Expr::sym(x3));
        assert_eq!(c.differentiate(x3), Expr::neg(Expr::sin(Expr::sym(x3))));
        assert_eq!(c.differentiate(t.time()), Expr::zero());
        let tn = Expr::tan(Expr::sym(x3)).differentiate(x3);
        assert_eq!(tn, Expr::add(vec![Expr::one(), Expr::powi(Expr::tan(Expr::sym(x3)), 2)]));
    }
}
