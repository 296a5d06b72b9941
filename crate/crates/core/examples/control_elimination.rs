//! Builds a problem from expressions, forms the pseudo-Hamiltonian, and
//! eliminates the control symbolically. The trailer builtin shows the
//! Newton fallback when no closed form exists.

use extremal_integrals::cli::builtin;
use extremal_integrals::ocp::{
    build_hamiltonian, solve_stationarity, true_hamiltonian, Backend, Problem, TrueHamiltonian,
};
use extremal_integrals::symexpr::{parse, SymbolTable};

fn main() {
    let t = SymbolTable::standard(3, 2);
    let e = |s: &str| parse(s, &t).unwrap();
    let dubins = Problem::new(
        "dubins",
        t.clone(),
        e("(u1^2 + u2^2)/2"),
        vec![e("u1*cos(x3)"), e("u1*sin(x3)"), e("u2")],
    )
    .unwrap();
    let h = build_hamiltonian(&dubins);
    println!("H     = {}", h.print(&t));
    let law = solve_stationarity(&dubins, &h).unwrap();
    let th = true_hamiltonian(&dubins, &h, law).unwrap();
    println!("H_red = {}", th.reduced.as_ref().unwrap().print(&t));

    let trailer = builtin("trailer").unwrap().to_problem().unwrap();
    let th = TrueHamiltonian::from_problem(&trailer, Backend::Auto).unwrap();
    println!("trailer closed form: {}", th.is_closed_form());
    let mut eval = th.evaluator();
    // (x1..x4, psi1..psi4, t)
    let p = eval.eval(&[0.1, -0.2, 0.3, 0.4, 0.2, -0.1, 0.3, 0.1, 0.0]).unwrap();
    println!("trailer H = {:.12} with controls {:?}", p.hamiltonian, eval.last_controls().unwrap());
}
