#![allow(dead_code)]

pub mod oracles;

use extremal_integrals::cli::builtin;
use extremal_integrals::noether::{discover_family, DiscoveryOptions, Family};
use extremal_integrals::ocp::{Backend, Problem, TrueHamiltonian};
use extremal_integrals::symexpr::{parse, Expr, SymId, SymbolTable};
use proptest::prelude::*;

pub fn problem(name: &str) -> Problem {
    builtin(name).unwrap().to_problem().unwrap()
}

pub fn hamiltonian(p: &Problem) -> TrueHamiltonian {
    TrueHamiltonian::from_problem(p, Backend::Auto).unwrap()
}

pub fn family(p: &Problem, th: &TrueHamiltonian, include_time: bool) -> Family {
    let opts = DiscoveryOptions { include_time, ..DiscoveryOptions::default() };
    discover_family(th, &p.sampler(), &opts).unwrap()
}

pub fn expr(s: &str, t: &SymbolTable) -> Expr {
    parse(s, t).unwrap()
}

/// Values vector for `table` with the phase slice set.
pub fn env(table: &SymbolTable, phase: &[f64]) -> Vec<f64> {
    let mut v = vec![f64::NAN; table.len()];
    v[..phase.len()].copy_from_slice(phase);
    v
}

/// Random smooth functions of `(x1, x2, psi1, psi2)`: sums of
/// integer-weighted monomials of degree ≤ 3, optionally times sin or cos of
/// one coordinate.
pub fn smooth_fn() -> impl Strategy<Value = Expr> {
    let factor = (0u32..4, 0i64..3);
    let term = (-3i64..=3, prop::collection::vec(factor, 0..3), 0u8..3, 0u32..4);
    prop::collection::vec(term, 1..4).prop_map(|terms| {
        Expr::add(
            terms
                .into_iter()
                .map(|(c, fs, trig, v)| {
                    let mut parts = vec![Expr::int(c)];
                    for (s, k) in fs {
                        parts.push(Expr::powi(Expr::sym(SymId(s)), k + 1));
                    }
                    match trig {
                        1 => parts.push(Expr::sin(Expr::sym(SymId(v)))),
                        2 => parts.push(Expr::cos(Expr::sym(SymId(v)))),
                        _ => {}
                    }
                    Expr::mul(parts)
                })
                .collect(),
        )
    })
}

/// Random polynomials of degree ≤ 2 in `(x1, x2, psi1, psi2)`.
pub fn low_degree_poly() -> impl Strategy<Value = Expr> {
    let term = (-2i64..=2, prop::option::of(0u32..4), prop::option::of(0u32..4));
    prop::collection::vec(term, 1..4).prop_map(|terms| {
        Expr::add(
            terms
                .into_iter()
                .map(|(c, a, b)| {
                    let mut parts = vec![Expr::int(c)];
                    parts.extend(a.map(|s| Expr::sym(SymId(s))));
                    parts.extend(b.map(|s| Expr::sym(SymId(s))));
                    Expr::mul(parts)
                })
                .collect(),
        )
    })
}

/// Phase points `(x1, x2, psi1, psi2, t)` in `[-1, 1]^4 × {0}`.
pub fn phase_point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 4).prop_map(|mut v| {
        v.push(0.0);
        v
    })
}
