//! Integrates trailer extremals with RK4 and measures how well each
//! first integral is conserved along them.

use extremal_integrals::cli::builtin;
use extremal_integrals::ocp::{Backend, TrueHamiltonian};
use extremal_integrals::symexpr::parse;
use extremal_integrals::verify::{expr_drift, random_extremals};

fn main() {
    let p = builtin("trailer").unwrap().to_problem().unwrap();
    let th = TrueHamiltonian::from_problem(&p, Backend::Auto).unwrap();
    let t = &th.table;
    let trajs = random_extremals(&th, &p.sampler(), 7, 3, 1.0, 1e-3).unwrap();
    for g in ["H", "psi1", "psi2", "-psi1*x2 + psi2*x1 + psi3 + psi4", "x1"] {
        let e = parse(g, t).unwrap();
        let worst = trajs.iter().map(|tr| expr_drift(&e, t, tr).unwrap()).fold(0.0, f64::max);
        println!("{g:36} drift {worst:.2e}");
    }
}
