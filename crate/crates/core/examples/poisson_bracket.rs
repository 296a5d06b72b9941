//! Parse phase functions, differentiate them, and take Poisson brackets.

use extremal_integrals::poisson::bracket;
use extremal_integrals::symexpr::{parse, SymbolTable};

fn main() {
    let t = SymbolTable::standard(3, 0);
    let f = parse("-psi1*x2 + psi2*x1 + psi3", &t).unwrap();
    for g in ["psi1", "psi2", "x1*psi1 + x2*psi2", "sin(x3)*psi1"] {
        let g = parse(g, &t).unwrap();
        println!("{{{}, {}}} = {}", f.print(&t), g.print(&t), bracket(&f, &g, &t).print(&t));
    }
    let h = parse("((cos(x3)*psi1 + sin(x3)*psi2)^2 + psi3^2)/2", &t).unwrap();
    println!("dH/dx3 = {}", h.differentiate(t.state(3)).simplify().print(&t));
}
