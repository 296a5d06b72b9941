//! Dense numeric and exact linear algebra used by the discovery pipeline.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::symexpr::Rational;

/// Best continued-fraction convergent of `x` with denominator at most
/// `max_den`, accepted only when it lies within `tol·max(1, |x|)` of `x`.
pub fn rationalize(x: f64, max_den: i64, tol: f64) -> Option<Rational> {
    if !x.is_finite() {
        return None;
    }
    let bound = tol * x.abs().max(1.0);
    let (mut h0, mut h1): (i128, i128) = (0, 1);
    let (mut k0, mut k1): (i128, i128) = (1, 0);
    let mut frac = x;
    for _ in 0..64 {
        let a = frac.floor();
        if a.abs() > 1e15 {
            break;
        }
        let a = a as i128;
        let h2 = a * h1 + h0;
        let k2 = a * k1 + k0;
        if k2 > max_den as i128 {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if (x - h1 as f64 / k1 as f64).abs() <= bound {
            break;
        }
        let rem = frac - a as f64;
        if rem.abs() < 1e-300 {
            break;
        }
        frac = 1.0 / rem;
    }
    if k1 == 0 || (x - h1 as f64 / k1 as f64).abs() > bound {
        return None;
    }
    Some(Rational::new(BigInt::from(h1), BigInt::from(k1)))
}

/// Rationalizes every entry or none.
pub fn rationalize_vec(v: &[f64], max_den: i64, tol: f64) -> Option<Vec<Rational>> {
    v.iter().map(|&x| rationalize(x, max_den, tol)).collect()
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Singular values of `a`, largest first.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Count of singular values above `rel_tol·σ_max`.
pub fn numeric_rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    let s = singular_values(a);
    match s.first() {
        Some(&max) if max > 0.0 => s.iter().filter(|&&x| x > rel_tol * max).count(),
        _ => 0,
    }
}

/// Orthonormal basis (as columns) of the right nullspace of `a`, using the
/// cutoff `rel_tol·σ_max`. A zero matrix yields the full space.
pub fn svd_nullspace(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let cols = a.ncols();
    if cols == 0 {
        return DMatrix::zeros(0, 0);
    }
    // pad to at least square so the SVD returns a full right basis
    let rows = a.nrows().max(cols);
    let mut padded = DMatrix::zeros(rows, cols);
    padded.view_mut((0, 0), (a.nrows(), cols)).copy_from(a);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let s = &svd.singular_values;
    let max = s.iter().copied().fold(0.0, f64::max);
    let null: Vec<usize> = (0..s.len()).filter(|&i| max == 0.0 || s[i] <= rel_tol * max).collect();
    let mut basis = DMatrix::zeros(cols, null.len());
    for (k, &i) in null.iter().enumerate() {
        basis.set_column(k, &v_t.row(i).transpose());
    }
    basis
}

/// Least-squares solution of `a·x ≈ b` by SVD.
pub fn least_squares(a: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let cols = a.ncols();
    if cols == 0 {
        return Vec::new();
    }
    let rhs = DMatrix::from_column_slice(b.len(), 1, b);
    let svd = a.clone().svd(true, true);
    let max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let eps = (1e-12 * max).max(f64::MIN_POSITIVE);
    match svd.solve(&rhs, eps) {
        Ok(x) => x.column(0).iter().copied().collect(),
        Err(_) => vec![0.0; cols],
    }
}

/// Moore–Penrose pseudo-inverse with relative cutoff.
pub fn pseudo_inverse(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let max = singular_values(a).first().copied().unwrap_or(0.0);
    if max == 0.0 {
        return DMatrix::zeros(a.ncols(), a.nrows());
    }
    a.clone()
        .pseudo_inverse(rel_tol * max)
        .unwrap_or_else(|_| DMatrix::zeros(a.ncols(), a.nrows()))
}

/// Reduced row echelon form of the rows of `rows` (each of length `cols`),
/// visiting columns in `order`. Pivots are chosen by magnitude among the
/// remaining rows; entries below `tol` count as zero. Returns the reduced
/// rows paired with their pivot column; every row is 1 at its own pivot
/// and 0 at the other pivots.
pub fn rref_f64(rows: &[Vec<f64>], order: &[usize], tol: f64) -> Vec<(usize, Vec<f64>)> {
    let mut m: Vec<Vec<f64>> = rows.to_vec();
    let mut out_pivots: Vec<usize> = Vec::new();
    let mut r = 0;
    for &c in order {
        if r == m.len() {
            break;
        }
        let (best, val) = (r..m.len())
            .map(|i| (i, m[i][c].abs()))
            .fold((r, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if val <= tol {
            continue;
        }
        m.swap(r, best);
        let p = m[r][c];
        for x in m[r].iter_mut() {
            *x /= p;
        }
        m[r][c] = 1.0;
        for i in 0..m.len() {
            if i != r {
                let f = m[i][c];
                if f != 0.0 {
                    let pivot_row = m[r].clone();
                    for (x, y) in m[i].iter_mut().zip(pivot_row.iter()) {
                        *x -= f * y;
                    }
                    m[i][c] = 0.0;
                }
            }
        }
        out_pivots.push(c);
        r += 1;
    }
    out_pivots.into_iter().zip(m).collect()
}

/// Exact reduced row echelon form. Returns the nonzero rows and their pivot
/// columns.
pub fn rational_rref(rows: &[Vec<Rational>]) -> (Vec<Vec<Rational>>, Vec<usize>) {
    let mut m: Vec<Vec<Rational>> = rows.to_vec();
    let cols = m.first().map_or(0, |r| r.len());
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == m.len() {
            break;
        }
        let Some(p) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = m[r][c].recip();
        for x in m[r].iter_mut() {
            *x *= &inv;
        }
        for i in 0..m.len() {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                let pivot_row = m[r].clone();
                for (x, y) in m[i].iter_mut().zip(pivot_row.iter()) {
                    *x -= &f * y;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    m.truncate(r);
    (m, pivots)
}

/// Exact basis of `{v : rows·v = 0}`.
pub fn rational_nullspace(rows: &[Vec<Rational>], cols: usize) -> Vec<Vec<Rational>> {
    let (rref, pivots) = rational_rref(rows);
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![Rational::zero(); cols];
            v[f] = Rational::from_integer(1.into());
            for (row, &p) in rref.iter().zip(pivots.iter()) {
                v[p] = -row[f].clone();
            }
            v
        })
        .collect()
}

pub fn rational_rank(rows: &[Vec<Rational>]) -> usize {
    rational_rref(rows).1.len()
}

/// Max-norm of a vector.
pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `true` when every entry is an exact zero.
pub fn is_zero_vec(v: &[Rational]) -> bool {
    v.iter().all(|x| x.is_zero())
}

/// Largest absolute entry of a rational vector, as a float.
pub fn rational_inf_norm(v: &[Rational]) -> f64 {
    v.iter().map(|x| to_f64(&x.abs())).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::ratio;

    #[test]
    fn rationalizes_small_fractions() {
        assert_eq!(rationalize(0.5, 64, 1e-9), Some(ratio(1, 2)));
        assert_eq!(rationalize(-2.0 / 3.0, 64, 1e-9), Some(ratio(-2, 3)));
        assert_eq!(rationalize(3.0, 64, 1e-9), Some(ratio(3, 1)));
        assert_eq!(rationalize(std::f64::consts::PI, 64, 1e-9), None);
        assert_eq!(rationalize(1.0 / 127.0, 64, 1e-9), None);
    }

    #[test]
    fn nullspace_of_zero_and_dense_row() {
        let z = DMatrix::<f64>::zeros(3, 4);
        assert_eq!(svd_nullspace(&z, 1e-9).ncols(), 4);
        let row = DMatrix::from_row_slice(1, 4, &[1.0, 2.0, 3.0, 4.0]);
        let ns = svd_nullspace(&row, 1e-9);
        assert_eq!(ns.ncols(), 3);
        assert!((&row * &ns).amax() < 1e-12);
    }

    #[test]
    fn rref_prefers_order() {
        let rows = vec![vec![1.0, 1.0, 0.0], vec![0.0, 1.0, 1.0]];
        let r = rref_f64(&rows, &[2, 1, 0], 1e-12);
        assert_eq!(r[0].0, 2);
        assert_eq!(r[1].0, 1);
        assert!((r[0].1[1]).abs() < 1e-15);
    }

    #[test]
    fn exact_nullspace() {
        let rows = vec![vec![ratio(1, 1), ratio(0, 1), ratio(-1, 1)]];
        let ns = rational_nullspace(&rows, 3);
        assert_eq!(ns.len(), 2);
        for v in &ns {
            let dot: Rational = rows[0].iter().zip(v).map(|(a, b)| a * b).sum();
            assert!(dot.is_zero());
        }
    }

    #[test]
    fn least_squares_recovers_exact_fit() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let x = least_squares(&a, &[2.0, 3.0, 5.0]);
        assert!((x[0] - 2.0).abs() < 1e-12 && (x[1] - 3.0).abs() < 1e-12);
    }
}
