//! Independent oracles shared by the property and acceptance suites.

use extremal_integrals::kk::StructureTensor;
use extremal_integrals::noether::Ansatz;
use extremal_integrals::ocp::{symbolic_flow, TrueHamiltonian};
use extremal_integrals::symexpr::{Expr, Rational};
use num_traits::Zero;
use proptest::prelude::*;

pub fn r(k: i64) -> Rational {
    Rational::from_integer(k.into())
}

pub fn v(x: &[i64]) -> Vec<Rational> {
    x.iter().map(|&k| r(k)).collect()
}

pub fn unit(m: usize, k: usize) -> Vec<Rational> {
    (0..m).map(|i| if i == k { r(1) } else { r(0) }).collect()
}

// ---- exact linear algebra for the brute-force oracle ----

pub fn rank(rows: &[Vec<Rational>]) -> usize {
    let mut a: Vec<Vec<Rational>> = rows.to_vec();
    let cols = a.first().map_or(0, Vec::len);
    let mut rk = 0;
    for c in 0..cols {
        let Some(p) = (rk..a.len()).find(|&i| !a[i][c].is_zero()) else { continue };
        a.swap(rk, p);
        for i in 0..a.len() {
            if i != rk && !a[i][c].is_zero() {
                let f = &a[i][c] / &a[rk][c];
                let pivot = a[rk].clone();
                for (x, y) in a[i].iter_mut().zip(&pivot) {
                    *x -= &f * y;
                }
            }
        }
        rk += 1;
    }
    rk
}

pub fn inverse(m: &[Vec<Rational>]) -> Option<Vec<Vec<Rational>>> {
    let n = m.len();
    let mut a: Vec<Vec<Rational>> = m.iter().enumerate().map(|(i, row)| [row.clone(), unit(n, i)].concat()).collect();
    for c in 0..n {
        let p = (c..n).find(|&i| !a[i][c].is_zero())?;
        a.swap(c, p);
        let d = a[c][c].clone();
        for x in a[c].iter_mut() {
            *x /= &d;
        }
        for i in 0..n {
            if i != c && !a[i][c].is_zero() {
                let f = a[i][c].clone();
                let pivot = a[c].clone();
                for (x, y) in a[i].iter_mut().zip(&pivot) {
                    *x -= &f * y;
                }
            }
        }
    }
    Some(a.into_iter().map(|row| row[n..].to_vec()).collect())
}

/// `[a, b] = Σ_{i,j} a_i b_j ξ^{ij}` over all ordered pairs.
pub fn lie(xi: &StructureTensor, a: &[Rational], b: &[Rational]) -> Vec<Rational> {
    let n = xi.n();
    let mut out = vec![r(0); n];
    for i in 0..n {
        for j in 0..n {
            let c = &a[i] * &b[j];
            for (o, x) in out.iter_mut().zip(xi.get(i, j)) {
                *o += &c * x;
            }
        }
    }
    out
}

/// Derived-series dimensions by spanning sets, without reduction to a basis.
pub fn brute_series(xi: &StructureTensor) -> Vec<usize> {
    let n = xi.n();
    let mut span: Vec<Vec<Rational>> = (0..n).map(|k| unit(n, k)).collect();
    let mut dims = vec![n];
    loop {
        let next: Vec<Vec<Rational>> =
            span.iter().flat_map(|a| span.iter().map(|b| lie(xi, a, b))).filter(|w| w.iter().any(|x| !x.is_zero())).collect();
        let d = rank(&next);
        let last = *dims.last().unwrap();
        dims.push(d);
        if d == 0 || d == last {
            return dims;
        }
        span = next;
    }
}

/// Structure constants after the change of basis `f_a = Σ_k p[a][k] e_k`.
pub fn rebase(xi: &StructureTensor, p: &[Vec<Rational>]) -> Option<StructureTensor> {
    let n = xi.n();
    let inv = inverse(p)?;
    let mut out = StructureTensor::zero(n);
    for a in 0..n {
        for b in a + 1..n {
            let w = lie(xi, &p[a], &p[b]);
            // w = Σ_c y_c f_c = pᵀ y
            let y: Vec<Rational> = (0..n).map(|c| (0..n).map(|k| &w[k] * &inv[k][c]).sum()).collect();
            out.set(a, b, y);
        }
    }
    Some(out)
}

pub fn algebra(kind: usize, n: usize) -> StructureTensor {
    let pairs: Vec<((usize, usize), Vec<Rational>)> = match (kind, n) {
        // Heisenberg
        (1, 3) => vec![((0, 1), v(&[0, 0, 1]))],
        // rigid motions of the plane
        (2, 3) => vec![((0, 2), v(&[0, -1, 0])), ((1, 2), v(&[1, 0, 0]))],
        // the simple algebra
        (3, 3) => vec![((0, 1), v(&[0, 0, 1])), ((1, 2), v(&[1, 0, 0])), ((0, 2), v(&[0, -1, 0]))],
        // derived length three
        (4, 4) => vec![
            ((0, 1), v(&[0, 0, 1, 0])),
            ((0, 3), v(&[-1, 0, 0, 0])),
            ((1, 3), v(&[0, -1, 0, 0])),
            ((2, 3), v(&[0, 0, -2, 0])),
        ],
        // the simple algebra plus a center
        (5, 4) => vec![((0, 1), v(&[0, 0, 1, 0])), ((1, 2), v(&[1, 0, 0, 0])), ((0, 2), v(&[0, -1, 0, 0]))],
        // affine line
        (6, 2) => vec![((0, 1), v(&[1, 0]))],
        _ => vec![],
    };
    StructureTensor::from_pairs(n, &pairs)
}

pub fn jacobi_tensor() -> impl Strategy<Value = StructureTensor> {
    let base = prop_oneof![
        (1usize..=4).prop_map(|n| (0usize, n)),
        Just((1, 3)),
        Just((2, 3)),
        Just((3, 3)),
        Just((4, 4)),
        Just((5, 4)),
        Just((6, 2)),
    ];
    base.prop_flat_map(|(kind, n)| {
        prop::collection::vec(prop::collection::vec(-2i64..=2, n), n).prop_filter_map("singular change of basis", move |p| {
            let p: Vec<Vec<Rational>> = p.into_iter().map(|row| v(&row)).collect();
            rebase(&algebra(kind, n), &p)
        })
    })
}

/// Total derivative along the flow of a closed-form `ℋ`.
pub fn along_flow(g: &Expr, th: &TrueHamiltonian, flow: &[Expr]) -> Expr {
    let t = &th.table;
    let mut terms = vec![g.differentiate(t.time())];
    for i in 1..=t.n() {
        terms.push(Expr::mul(vec![g.differentiate(t.state(i)), flow[i - 1].clone()]));
        terms.push(Expr::mul(vec![g.differentiate(t.costate(i)), flow[t.n() + i - 1].clone()]));
    }
    Expr::add(terms)
}

/// `dℋ/dt·𝒯 - psi'·𝒳 - psi·d𝒳/dt + ℋ·d𝒯/dt` built directly from the
/// templates.
pub fn invariance_form(a: &Ansatz, c: &[Rational], th: &TrueHamiltonian) -> Expr {
    let t = &th.table;
    let h = th.reduced.clone().unwrap();
    let flow = symbolic_flow(th).unwrap();
    let (time, space) = a.templates(c);
    let mut terms = vec![
        Expr::mul(vec![along_flow(&h, th, &flow), time.clone()]),
        Expr::mul(vec![h.clone(), along_flow(&time, th, &flow)]),
    ];
    for i in 1..=t.n() {
        terms.push(Expr::neg(Expr::mul(vec![flow[t.n() + i - 1].clone(), space[i - 1].clone()])));
        terms.push(Expr::neg(Expr::mul(vec![Expr::sym(t.costate(i)), along_flow(&space[i - 1], th, &flow)])));
    }
    Expr::add(terms)
}

