use crate::symexpr::{Expr, Rational, SymId, SymbolTable};

/// Which generator a term belongs to: the time generator `𝒯` or the space
/// generator `𝒳_i` (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Template {
    Time,
    Space(usize),
}

/// One coefficient of the ansatz: `C · v^power` inside `template`, or the
/// template's constant when `variable` is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnsatzTerm {
    pub template: Template,
    pub variable: Option<SymId>,
    pub power: u32,
}

/// Separated polynomial generators: every template is a constant plus
/// `Σ_v Σ_{μ=1..p} C·v^μ` over single variables `v ∈ {t, x_1.., psi_1..}`.
///
/// Terms are ordered with the `𝒳_i` constants first, then the `𝒯`
/// constant, then the non-constant terms; extraction uses this order to
/// choose pivots, so plain integrals like `psi_i` and `ℋ` come out first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ansatz {
    pub n: usize,
    pub degree: u32,
    pub include_time: bool,
    pub terms: Vec<AnsatzTerm>,
}

pub fn build_ansatz(n: usize, degree: u32, include_time: bool) -> Ansatz {
    let mut variables: Vec<SymId> = (0..2 * n as u32).map(SymId).collect();
    if include_time {
        // t sits right after the phase coordinates in every table
        variables.insert(0, SymId(2 * n as u32));
    }
    let templates: Vec<Template> = (1..=n).map(Template::Space).chain([Template::Time]).collect();
    let mut terms: Vec<AnsatzTerm> = templates
        .iter()
        .map(|&template| AnsatzTerm { template, variable: None, power: 0 })
        .collect();
    for &template in &templates {
        for &v in &variables {
            for power in 1..=degree {
                terms.push(AnsatzTerm { template, variable: Some(v), power });
            }
        }
    }
    Ansatz { n, degree, include_time, terms }
}

impl Ansatz {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficients per template.
    pub fn per_template(&self) -> usize {
        self.len() / (self.n + 1)
    }

    /// `v^power` of term `k`.
    pub fn monomial(&self, k: usize) -> Expr {
        let term = &self.terms[k];
        match term.variable {
            None => Expr::one(),
            Some(v) => Expr::powi(Expr::sym(v), term.power as i64),
        }
    }

    /// Contribution of term `k` to `F = psi·𝒳 - ℋ·𝒯`, with `ℋ` written as
    /// the placeholder `H`.
    pub fn column(&self, k: usize, table: &SymbolTable) -> Expr {
        let m = self.monomial(k);
        match self.terms[k].template {
            Template::Space(i) => Expr::mul(vec![Expr::sym(table.costate(i)), m]),
            Template::Time => Expr::neg(Expr::mul(vec![Expr::sym(table.hamiltonian()), m])),
        }
    }

    /// `(𝒯, [𝒳_1..𝒳_n])` for a coefficient vector.
    pub fn templates(&self, c: &[Rational]) -> (Expr, Vec<Expr>) {
        let mut time = Vec::new();
        let mut space = vec![Vec::new(); self.n];
        for (k, ck) in c.iter().enumerate() {
            let t = Expr::mul(vec![Expr::num(ck.clone()), self.monomial(k)]);
            match self.terms[k].template {
                Template::Time => time.push(t),
                Template::Space(i) => space[i - 1].push(t),
            }
        }
        (Expr::add(time), space.into_iter().map(Expr::add).collect())
    }

    /// `psi·𝒳 - H·𝒯` for a coefficient vector.
    pub fn conserved_quantity(&self, c: &[Rational], table: &SymbolTable) -> Expr {
        Expr::add(
            c.iter()
                .enumerate()
                .map(|(k, ck)| Expr::mul(vec![Expr::num(ck.clone()), self.column(k, table)]))
                .collect(),
        )
    }

    /// Human-readable coefficient label, e.g. `X2[x1^2]` or `T[1]`.
    pub fn label(&self, k: usize, table: &SymbolTable) -> String {
        let term = &self.terms[k];
        let which = match term.template {
            Template::Time => "T".to_string(),
            Template::Space(i) => format!("X{i}"),
        };
        format!("{which}[{}]", self.monomial(k).print(table))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::{parse, ratio};

    #[test]
    fn counts() {
        let a = build_ansatz(1, 1, true);
        assert_eq!(a.len(), 2 * 4);
        assert_eq!(a.per_template(), 4);
        let a = build_ansatz(3, 2, true);
        assert_eq!(a.per_template(), 15);
        assert_eq!(a.len(), 60);
        let a = build_ansatz(3, 2, false);
        assert_eq!(a.per_template(), 13);
        let a = build_ansatz(2, 0, true);
        assert_eq!(a.len(), 3);
    }

    #[test]
    fn one_dimensional_time_template() {
        let t = SymbolTable::standard(1, 0);
        let a = build_ansatz(1, 1, true);
        let mut c = vec![ratio(0, 1); a.len()];
        for (k, term) in a.terms.iter().enumerate() {
            if term.template == Template::Time {
                c[k] = ratio(1, 1);
            }
        }
        let (time, space) = a.templates(&c);
        assert_eq!(time, parse("1 + t + x1 + psi1", &t).unwrap());
        assert_eq!(space[0], Expr::zero());
    }

    #[test]
    fn rotation_generator_gives_rotation_integral() {
        let t = SymbolTable::standard(3, 2);
        let a = build_ansatz(3, 2, true);
        let mut c = vec![ratio(0, 1); a.len()];
        let find = |tpl: Template, v: Option<SymId>, p: u32| {
            a.terms.iter().position(|x| x.template == tpl && x.variable == v && x.power == p).unwrap()
        };
        c[find(Template::Space(1), Some(t.state(2)), 1)] = ratio(-1, 1);
        c[find(Template::Space(2), Some(t.state(1)), 1)] = ratio(1, 1);
        c[find(Template::Space(3), None, 0)] = ratio(1, 1);
        assert_eq!(a.conserved_quantity(&c, &t), parse("-psi1*x2 + psi2*x1 + psi3", &t).unwrap());
    }
}
