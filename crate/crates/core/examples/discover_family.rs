//! Noether-ansatz discovery: the Martinet problem yields a first integral
//! with explicit time dependence next to the autonomous ones.

use extremal_integrals::cli::builtin;
use extremal_integrals::noether::{discover_family, DiscoveryOptions};
use extremal_integrals::ocp::{Backend, TrueHamiltonian};

fn main() {
    let p = builtin("martinet").unwrap().to_problem().unwrap();
    let th = TrueHamiltonian::from_problem(&p, Backend::Auto).unwrap();
    for include_time in [true, false] {
        let opts = DiscoveryOptions { include_time, ..DiscoveryOptions::default() };
        let fam = discover_family(&th, &p.sampler(), &opts).unwrap();
        println!("include_time = {include_time}: {} integrals, {} pruned", fam.m(), fam.pruned);
        for c in &fam.components {
            println!("  {}  (holdout {:.1e})", c.expr.print(&th.table), c.holdout_residual);
        }
    }
}
