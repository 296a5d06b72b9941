use std::fmt;

use num_traits::{One, Signed};

use super::expr::{ratio, Expr, Rational};
use super::table::SymbolTable;

/// Display adapter pairing an expression with the table that names its
/// symbols. Output re-parses to a structurally equal expression.
pub struct Printed<'a> {
    expr: &'a Expr,
    table: &'a SymbolTable,
}

impl Expr {
    pub fn display<'a>(&'a self, table: &'a SymbolTable) -> Printed<'a> {
        Printed { expr: self, table }
    }

    pub fn print(&self, table: &SymbolTable) -> String {
        self.display(table).to_string()
    }
}

impl fmt::Display for Printed<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(self.expr, self.table))
    }
}

// Precedence of the rendered string, used to decide parenthesization.
const PREC_SUM: u8 = 1;
const PREC_PRODUCT: u8 = 2;
const PREC_UNARY: u8 = 3;
const PREC_ATOM: u8 = 5;

fn render(e: &Expr, t: &SymbolTable) -> String {
    render_prec(e, t).0
}

fn render_prec(e: &Expr, t: &SymbolTable) -> (String, u8) {
    match e {
        Expr::Num(r) => render_num(r),
        Expr::Sym(s) => (t.name(*s).to_string(), PREC_ATOM),
        Expr::Func(func, a) => (format!("{}({})", func.name(), render(a, t)), PREC_ATOM),
        Expr::Add(ts) => {
            // constants print last: `x1 + 1`
            let ordered = ts
                .iter()
                .filter(|t| !matches!(t, Expr::Num(_)))
                .chain(ts.iter().filter(|t| matches!(t, Expr::Num(_))));
            let mut out = String::new();
            for (k, term) in ordered.enumerate() {
                let (neg, abs) = split_sign(term);
                let (mut s, prec) = render_prec(&abs, t);
                if prec <= PREC_SUM {
                    s = format!("({s})");
                }
                if k == 0 {
                    if neg {
                        out.push('-');
                    }
                } else {
                    out.push_str(if neg { " - " } else { " + " });
                }
                out.push_str(&s);
            }
            (out, PREC_SUM)
        }
        Expr::Mul(_) | Expr::Pow(..) => render_product(e, t),
    }
}

fn render_num(r: &Rational) -> (String, u8) {
    if r.is_integer() {
        let s = r.to_integer().to_string();
        let p = if r.is_negative() { PREC_UNARY } else { PREC_ATOM };
        (s, p)
    } else {
        let s = format!("{}/{}", r.numer(), r.denom());
        let p = if r.is_negative() { PREC_UNARY } else { PREC_PRODUCT };
        (s, p)
    }
}

/// A sum term is printed with a leading minus when its coefficient is
/// negative.
fn split_sign(e: &Expr) -> (bool, Expr) {
    match e {
        Expr::Num(r) if r.is_negative() => (true, Expr::Num(-r.clone())),
        Expr::Mul(fs) => match fs.first() {
            Some(Expr::Num(c)) if c.is_negative() => {
                let mut v = fs.clone();
                v[0] = Expr::Num(-c.clone());
                (true, Expr::mul(v))
            }
            _ => (false, e.clone()),
        },
        _ => (false, e.clone()),
    }
}

fn render_product(e: &Expr, t: &SymbolTable) -> (String, u8) {
    let factors: Vec<Expr> = match e {
        Expr::Mul(fs) => fs.clone(),
        other => vec![other.clone()],
    };
    let mut coeff = Rational::one();
    let mut numer: Vec<String> = Vec::new();
    let mut denom: Vec<String> = Vec::new();
    for f in &factors {
        match f {
            Expr::Num(c) => coeff = c.clone(),
            Expr::Pow(b, p) if p.is_negative() => {
                denom.push(render_factor(&Expr::pow((**b).clone(), -p.clone()), t));
            }
            other => numer.push(render_factor(other, t)),
        }
    }
    let negative = coeff.is_negative();
    let num_abs = coeff.numer().abs();
    let den_abs = coeff.denom().clone();
    let mut num_parts: Vec<String> = Vec::new();
    if !num_abs.is_one() || numer.is_empty() {
        num_parts.push(num_abs.to_string());
    }
    num_parts.extend(numer);
    let mut den_parts: Vec<String> = Vec::new();
    if !den_abs.is_one() {
        den_parts.push(den_abs.to_string());
    }
    den_parts.extend(denom);
    let mut s = String::new();
    if negative {
        s.push('-');
    }
    s.push_str(&num_parts.join("*"));
    if !den_parts.is_empty() {
        s.push('/');
        if den_parts.len() == 1 {
            s.push_str(&den_parts[0]);
        } else {
            s.push('(');
            s.push_str(&den_parts.join("*"));
            s.push(')');
        }
    }
    let single_atom = !negative && den_parts.is_empty() && num_parts.len() == 1;
    let prec = if negative {
        PREC_UNARY
    } else if single_atom {
        // a lone power like x^2 or sqrt(x)
        PREC_UNARY + 1
    } else {
        PREC_PRODUCT
    };
    (s, prec)
}

/// Renders a factor that appears inside a product or a denominator.
fn render_factor(e: &Expr, t: &SymbolTable) -> String {
    match e {
        Expr::Pow(b, p) => render_power(b, p, t),
        other => {
            let (s, prec) = render_prec(other, t);
            if prec <= PREC_PRODUCT {
                format!("({s})")
            } else {
                s
            }
        }
    }
}

fn render_power(b: &Expr, p: &Rational, t: &SymbolTable) -> String {
    if *p == ratio(1, 2) {
        return format!("sqrt({})", render(b, t));
    }
    if p.is_negative() {
        return format!("1/{}", render_factor(&Expr::pow(b.clone(), -p.clone()), t));
    }
    let (bs, bprec) = render_prec(b, t);
    let base = if bprec < PREC_ATOM || matches!(b, Expr::Pow(..)) {
        format!("({bs})")
    } else {
        bs
    };
    if p.is_integer() {
        format!("{base}^{}", p.to_integer())
    } else {
        format!("{base}^({}/{})", p.numer(), p.denom())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::parse;

    #[test]
    fn renders_naturally() {
        let t = SymbolTable::standard(3, 2);
        let cases = [
            ("psi1*cos(x3) + psi2*sin(x3)", "psi1*cos(x3) + psi2*sin(x3)"),
            ("x1^2/2", "x1^2/2"),
            ("-x1 - 3*x2/(2*x3)", "-3*x2/(2*x3) - x1"),
            ("1/(1+x1)", "1/(x1 + 1)"),
            ("sqrt(x1)", "sqrt(x1)"),
        ];
        for (src, want) in cases {
            let e = parse(src, &t).unwrap();
            assert_eq!(e.print(&t), want, "{src}");
        }
    }
}
