//! Runs the certificate search on Dubins and prints the structure
//! constants, the solvability class, and the admissible levels.

use extremal_integrals::cli::builtin;
use extremal_integrals::kk::{find_certificate, CertificateOptions};
use extremal_integrals::noether::{discover_family, DiscoveryOptions};
use extremal_integrals::ocp::{Backend, TrueHamiltonian};

fn main() {
    let p = builtin("dubins").unwrap().to_problem().unwrap();
    let th = TrueHamiltonian::from_problem(&p, Backend::Auto).unwrap();
    let s = p.sampler();
    let fam = discover_family(&th, &s, &DiscoveryOptions::default()).unwrap();
    let cert = find_certificate(&fam, &th, &s, th.n(), &CertificateOptions::default()).unwrap();
    println!("verdict: {:?} after {} candidates", cert.verdict, cert.candidates_tried);
    for l in &cert.lambdas {
        println!("  F = {}", fam.combine(l).print(&th.table));
    }
    if let Some(xi) = &cert.xi {
        for (i, j) in xi.pairs() {
            let v: Vec<String> = xi.get(i, j).iter().map(ToString::to_string).collect();
            println!("  xi^{}{} = ({})", i + 1, j + 1, v.join(", "));
        }
    }
    println!("solvability: {:?}", cert.solvability.map(|s| s.class));
    for r in &cert.r_basis {
        let v: Vec<String> = r.iter().map(ToString::to_string).collect();
        println!("  level direction ({})", v.join(", "));
    }
}
