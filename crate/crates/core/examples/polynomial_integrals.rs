//! Searches all monomials up to degree 4 for the quartic integral of the
//! sub-Riemannian (2,3,5) problem, leaving out coordinates it cannot use.

use extremal_integrals::cli::builtin;
use extremal_integrals::noether::{discover_polynomial_integrals, DiscoveryOptions};
use extremal_integrals::ocp::{Backend, TrueHamiltonian};

fn main() {
    let p = builtin("sr-2-3-5").unwrap().to_problem().unwrap();
    let th = TrueHamiltonian::from_problem(&p, Backend::Auto).unwrap();
    let t = &th.table;
    let excluded: Vec<_> = ["x3", "x4", "x5"].iter().map(|s| t.lookup(s).unwrap()).collect();
    let fam = discover_polynomial_integrals(&th, &p.sampler(), 4, false, &excluded, &DiscoveryOptions::default())
        .unwrap();
    println!("{} polynomial integrals of degree <= 4", fam.m());
    // products of psi3, psi4, psi5 and H are expected; show the rest
    let base: Vec<_> = ["x1", "x2", "psi1", "psi2"].iter().map(|s| t.lookup(s).unwrap()).collect();
    for c in fam.components.iter().filter(|c| base.iter().any(|&s| c.expr.contains(s))) {
        println!("  {}", c.expr.print(t));
    }
}
