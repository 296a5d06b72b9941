//! Exact structure-constant algebra: derived series, the pairwise
//! parallelism identity, and admissible level values.

use num_traits::Zero;

use crate::linalg::{rational_nullspace, rational_rref};
use crate::symexpr::Rational;

/// Structure constants `ξ^{ij}` with `{F_i, F_j} = Σ_s ξ^{ij}_s F_s`,
/// stored for `i < j` (0-based) and extended antisymmetrically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructureTensor {
    n: usize,
    xi: Vec<Vec<Rational>>,
}

fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

impl StructureTensor {
    pub fn zero(n: usize) -> Self {
        StructureTensor { n, xi: vec![vec![Rational::zero(); n]; n * n.saturating_sub(1) / 2] }
    }

    /// From integer constants, `entries[(i, j)] = ξ^{ij}` with `i < j`
    /// 0-based.
    pub fn from_pairs(n: usize, entries: &[((usize, usize), Vec<Rational>)]) -> Self {
        let mut s = Self::zero(n);
        for ((i, j), v) in entries {
            s.set(*i, *j, v.clone());
        }
        s
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn set(&mut self, i: usize, j: usize, v: Vec<Rational>) {
        assert_eq!(v.len(), self.n);
        if i < j {
            self.xi[pair_index(self.n, i, j)] = v;
        } else if j < i {
            self.xi[pair_index(self.n, j, i)] = v.into_iter().map(|x| -x).collect();
        } else {
            assert!(v.iter().all(Zero::is_zero), "diagonal structure constants vanish");
        }
    }

    pub fn get(&self, i: usize, j: usize) -> Vec<Rational> {
        match i.cmp(&j) {
            std::cmp::Ordering::Less => self.xi[pair_index(self.n, i, j)].clone(),
            std::cmp::Ordering::Greater => self.xi[pair_index(self.n, j, i)].iter().map(|x| -x).collect(),
            std::cmp::Ordering::Equal => vec![Rational::zero(); self.n],
        }
    }

    /// Pairs `(i, j)`, `i < j`, in lexicographic order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let n = self.n;
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.xi.iter().all(|v| v.iter().all(Zero::is_zero))
    }

    /// `[a, b] = Σ_{i,j} a_i b_j ξ^{ij}`.
    pub fn bracket(&self, a: &[Rational], b: &[Rational]) -> Vec<Rational> {
        let mut out = vec![Rational::zero(); self.n];
        for (i, j) in self.pairs() {
            let c = &a[i] * &b[j] - &a[j] * &b[i];
            if c.is_zero() {
                continue;
            }
            for (o, x) in out.iter_mut().zip(&self.xi[pair_index(self.n, i, j)]) {
                *o += &c * x;
            }
        }
        out
    }

    /// Does the bracket satisfy the Jacobi identity on basis triples?
    pub fn satisfies_jacobi(&self) -> bool {
        let n = self.n;
        let e = |k: usize| -> Vec<Rational> {
            (0..n).map(|i| if i == k { Rational::from_integer(1.into()) } else { Rational::zero() }).collect()
        };
        for a in 0..n {
            for b in a + 1..n {
                for c in b + 1..n {
                    let t1 = self.bracket(&e(a), &self.bracket(&e(b), &e(c)));
                    let t2 = self.bracket(&e(b), &self.bracket(&e(c), &e(a)));
                    let t3 = self.bracket(&e(c), &self.bracket(&e(a), &e(b)));
                    if t1.iter().zip(&t2).zip(&t3).any(|((x, y), z)| !(x + y + z).is_zero()) {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Stacked rows `ξ^{ij}` for `i < j`.
    pub fn rows(&self) -> Vec<Vec<Rational>> {
        self.xi.clone()
    }
}

/// Dimensions of `L ⊇ [L,L] ⊇ [[L,L],[L,L]] ⊇ …`, stopping at 0 or when
/// the dimension stops dropping.
pub fn derived_series(xi: &StructureTensor) -> Vec<usize> {
    let n = xi.n();
    let mut basis: Vec<Vec<Rational>> = (0..n)
        .map(|k| (0..n).map(|i| if i == k { Rational::from_integer(1.into()) } else { Rational::zero() }).collect())
        .collect();
    let mut dims = vec![n];
    while !basis.is_empty() {
        let mut images = Vec::new();
        for a in 0..basis.len() {
            for b in a + 1..basis.len() {
                images.push(xi.bracket(&basis[a], &basis[b]));
            }
        }
        let (next, _) = if images.is_empty() { (Vec::new(), Vec::new()) } else { rational_rref(&images) };
        let stalled = next.len() == basis.len();
        dims.push(next.len());
        basis = next;
        if stalled {
            break;
        }
    }
    dims
}

/// Smallest `k` with the `k`-th derived algebra zero; `None` if the series
/// stabilizes at a nonzero algebra.
pub fn derived_depth(xi: &StructureTensor) -> Option<usize> {
    let dims = derived_series(xi);
    (*dims.last().unwrap() == 0).then(|| dims.len() - 1)
}

/// Checks `ξ^{ab}_i ξ^{pq}_j = ξ^{pq}_i ξ^{ab}_j` for all pairs
/// `(a,b) < (p,q)` and all `i, j`: every structure vector is parallel to
/// every other, which forces `[L,L]` to be at most one-dimensional and so
/// abelian. Returns the first violation `(a, b, p, q, i, j)`, 1-based.
pub fn pairwise_identity(xi: &StructureTensor) -> Option<[usize; 6]> {
    let pairs = xi.pairs();
    let n = xi.n();
    for (k, &(a, b)) in pairs.iter().enumerate() {
        let u = xi.get(a, b);
        for &(p, q) in &pairs[k + 1..] {
            let v = xi.get(p, q);
            for i in 0..n {
                for j in 0..n {
                    if &u[i] * &v[j] != &v[i] * &u[j] {
                        return Some([a + 1, b + 1, p + 1, q + 1, i + 1, j + 1]);
                    }
                }
            }
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolvabilityClass {
    Abelian,
    /// The pairwise parallelism identity holds.
    SufficientIdentity,
    DerivedSeries(usize),
    NotSolvable,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Solvability {
    pub class: SolvabilityClass,
    pub abelian: bool,
    pub sufficient_identity: bool,
    pub identity_violation: Option<[usize; 6]>,
    pub derived_series_depth: Option<usize>,
}

impl Solvability {
    pub fn is_solvable(&self) -> bool {
        self.class != SolvabilityClass::NotSolvable
    }
}

/// Solvability is decided by the exact derived series; the parallelism
/// identity is reported alongside.
pub fn check_solvable_lie(xi: &StructureTensor) -> Solvability {
    let abelian = xi.is_zero();
    let violation = pairwise_identity(xi);
    let depth = derived_depth(xi);
    let class = if abelian {
        SolvabilityClass::Abelian
    } else if violation.is_none() {
        SolvabilityClass::SufficientIdentity
    } else if let Some(d) = depth {
        SolvabilityClass::DerivedSeries(d)
    } else {
        SolvabilityClass::NotSolvable
    };
    Solvability {
        class,
        abelian,
        sufficient_identity: violation.is_none(),
        identity_violation: violation,
        derived_series_depth: depth,
    }
}

/// Basis of `{r : Σ_s r_s ξ^{ij}_s = 0 for all i < j}`.
pub fn admissible_levels(xi: &StructureTensor) -> Vec<Vec<Rational>> {
    let rows: Vec<Vec<Rational>> = xi.rows().into_iter().filter(|r| r.iter().any(|x| !x.is_zero())).collect();
    rational_nullspace(&rows, xi.n())
}
