//! Exact solvability of small Lie algebras given by structure constants.

use extremal_integrals::kk::{admissible_levels, check_solvable_lie, derived_series, StructureTensor};
use extremal_integrals::symexpr::Rational;

fn v(x: [i64; 3]) -> Vec<Rational> {
    x.iter().map(|&k| Rational::from_integer(k.into())).collect()
}

fn main() {
    let algebras = [
        ("heisenberg", StructureTensor::from_pairs(3, &[((0, 1), v([0, 0, 1]))])),
        ("plane motions", StructureTensor::from_pairs(3, &[((0, 2), v([0, -1, 0])), ((1, 2), v([1, 0, 0]))])),
        (
            "so(3)",
            StructureTensor::from_pairs(3, &[((0, 1), v([0, 0, 1])), ((1, 2), v([1, 0, 0])), ((0, 2), v([0, -1, 0]))]),
        ),
    ];
    for (name, xi) in algebras {
        let s = check_solvable_lie(&xi);
        println!(
            "{name:14} series {:?}  class {:?}  levels {:?}",
            derived_series(&xi),
            s.class,
            admissible_levels(&xi).len()
        );
    }
}
