//! Discovery of first integrals from a linear ansatz.
//!
//! A candidate integral is a linear combination `F = Σ_k C_k B_k` of fixed
//! basis functions. Since `R(F) = Σ_k C_k R(B_k)`, sampling `R(B_k)` at `N`
//! points gives an `N × |C|` matrix whose nullspace holds the coefficient
//! vectors of first integrals. Two bases are provided: the separated
//! generator ansatz `F = psi·𝒳 - ℋ·𝒯` and a full multivariate polynomial.

mod ansatz;

pub use ansatz::{build_ansatz, Ansatz, AnsatzTerm, Template};

use nalgebra::DMatrix;
use num_traits::{FromPrimitive, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::linalg::{inf_norm, numeric_rank, rationalize_vec, rref_f64, svd_nullspace, to_f64};
use crate::ocp::{OcpError, PhasePoint, TrueHamiltonian};
use crate::poisson::{close, PhaseFunction};
use crate::sampling::{Sampler, SamplingError, Stream};
use crate::symexpr::{EvalError, Expr, Rational, SymId, SymbolTable};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NoetherError {
    #[error("no first integrals in this ansatz (empty nullspace)")]
    EmptyNullspace,
    #[error("every nullspace candidate was pruned")]
    AllPruned,
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Ocp(#[from] OcpError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscoveryOptions {
    /// Degree `p` of the generator templates.
    pub degree: u32,
    pub include_time: bool,
    /// Rows of the system; default `3·|C|`.
    pub samples: Option<usize>,
    pub holdout: usize,
    pub seed: u64,
    /// Holdout residual bound for accepted components.
    pub tol: f64,
    /// Singular values below `svd_tol·σ_max` span the nullspace.
    pub svd_tol: f64,
    pub max_denominator: i64,
}

impl Default for DiscoveryOptions {
    fn default() -> Self {
        DiscoveryOptions {
            degree: 2,
            include_time: true,
            samples: None,
            holdout: 100,
            seed: 42,
            tol: 1e-8,
            svd_tol: 1e-9,
            max_denominator: 64,
        }
    }
}

/// Distinct basis functions `B_k(x, psi, t, H)`.
#[derive(Debug, Clone)]
pub struct CandidateBasis {
    pub table: SymbolTable,
    pub columns: Vec<Expr>,
    /// `-1` where the column is `-H·m`, so a pivot there is normalized to
    /// make `ℋ` appear with a positive sign.
    pub pivot_sign: Vec<f64>,
    /// Ansatz term → column (duplicates share a column).
    pub source: Vec<usize>,
    funcs: Vec<PhaseFunction>,
}

impl CandidateBasis {
    fn build(table: &SymbolTable, raw: Vec<(Expr, f64)>) -> Self {
        let mut columns: Vec<Expr> = Vec::new();
        let mut pivot_sign = Vec::new();
        let mut source = Vec::with_capacity(raw.len());
        for (e, sign) in raw {
            match columns.iter().position(|c| *c == e) {
                Some(k) => source.push(k),
                None => {
                    source.push(columns.len());
                    columns.push(e);
                    pivot_sign.push(sign);
                }
            }
        }
        let funcs = columns.par_iter().map(|c| PhaseFunction::new(c, table)).collect();
        CandidateBasis { table: table.clone(), columns, pivot_sign, source, funcs }
    }

    /// Columns `psi_i·m` and `-H·m` of the separated ansatz. Identical
    /// columns (such as `psi_i psi_j` from both `𝒳_i` and `𝒳_j`) are merged.
    pub fn from_ansatz(a: &Ansatz, table: &SymbolTable) -> Self {
        let raw = (0..a.len())
            .map(|k| {
                let sign = if a.terms[k].template == Template::Time { -1.0 } else { 1.0 };
                (a.column(k, table), sign)
            })
            .collect();
        Self::build(table, raw)
    }

    /// All monomials of total degree `≤ d` in the phase coordinates (and
    /// `t` if requested), skipping `excluded` symbols.
    pub fn polynomial(table: &SymbolTable, d: u32, include_time: bool, excluded: &[SymId]) -> Self {
        let mut vars: Vec<SymId> = table.phase_coordinates().filter(|s| !excluded.contains(s)).collect();
        if include_time && !excluded.contains(&table.time()) {
            vars.push(table.time());
        }
        let mut monomials: Vec<Vec<u32>> = vec![vec![0; vars.len()]];
        let mut frontier = monomials.clone();
        for _ in 0..d {
            let mut next = Vec::new();
            for m in &frontier {
                // extend only at or after the last nonzero exponent: each monomial once
                let start = m.iter().rposition(|&e| e > 0).unwrap_or(0);
                for v in start..vars.len() {
                    let mut m2 = m.clone();
                    m2[v] += 1;
                    next.push(m2);
                }
            }
            monomials.extend(next.iter().cloned());
            frontier = next;
        }
        let raw = monomials
            .iter()
            .map(|m| {
                let factors = vars
                    .iter()
                    .zip(m)
                    .filter(|(_, &e)| e > 0)
                    .map(|(&v, &e)| Expr::powi(Expr::sym(v), e as i64))
                    .collect();
                (Expr::mul(factors), 1.0)
            })
            .collect();
        Self::build(table, raw)
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// Collects ansatz coefficients onto the merged columns.
    pub fn lift(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (k, &ck) in c.iter().enumerate() {
            out[self.source[k]] += ck;
        }
        out
    }

    /// Residual row `R(B_k)` and value row `B_k` at one point.
    pub fn evaluate(&self, p: &PhasePoint) -> Result<(Vec<f64>, Vec<f64>), EvalError> {
        let mut res = Vec::with_capacity(self.len());
        let mut val = Vec::with_capacity(self.len());
        for f in &self.funcs {
            res.push(f.residual(p)?);
            val.push(f.value(p)?);
        }
        Ok((res, val))
    }

    /// `Σ v_k B_k`.
    pub fn combination(&self, v: &[Rational]) -> Expr {
        Expr::add(
            v.iter()
                .zip(&self.columns)
                .filter(|(c, _)| !c.is_zero())
                .map(|(c, b)| Expr::mul(vec![Expr::num(c.clone()), b.clone()]))
                .collect(),
        )
        .simplify()
    }
}

/// Residual evaluator of the separated ansatz: `R(F_C)` is the residual row
/// of the merged basis dotted with the lifted coefficients.
pub fn noether_residual(a: &Ansatz, th: &TrueHamiltonian) -> CandidateBasis {
    CandidateBasis::from_ansatz(a, &th.table)
}

/// Residual and value matrices at a set of points.
#[derive(Debug, Clone)]
pub struct SampledSystem {
    pub residuals: DMatrix<f64>,
    pub values: DMatrix<f64>,
}

/// Rows `R(B_k)(z)` for each point; rows are computed in parallel and kept
/// in point order.
pub fn assemble_system(basis: &CandidateBasis, points: &[PhasePoint]) -> Result<SampledSystem, EvalError> {
    let rows: Result<Vec<(Vec<f64>, Vec<f64>)>, EvalError> = points.par_iter().map(|p| basis.evaluate(p)).collect();
    let rows = rows?;
    let (n, c) = (rows.len(), basis.len());
    let residuals = DMatrix::from_fn(n, c, |i, j| rows[i].0[j]);
    let values = DMatrix::from_fn(n, c, |i, j| rows[i].1[j]);
    Ok(SampledSystem { residuals, values })
}

/// A nullspace direction in reduced form.
#[derive(Debug, Clone, PartialEq)]
pub struct NullVector {
    pub coefficients: Vec<f64>,
    /// Present when rationalization passed the holdout check.
    pub exact: Option<Vec<Rational>>,
    pub holdout_residual: f64,
    pub pivot: usize,
}

/// Nullspace of `system`, reduced to echelon form over `order`, each vector
/// rationalized and checked against `holdout`.
pub fn nullspace(
    system: &DMatrix<f64>,
    holdout: &DMatrix<f64>,
    svd_tol: f64,
    pivot_sign: &[f64],
    max_den: i64,
    tol: f64,
) -> Result<Vec<NullVector>, NoetherError> {
    let basis = svd_nullspace(system, svd_tol);
    if basis.ncols() == 0 {
        return Err(NoetherError::EmptyNullspace);
    }
    let rows: Vec<Vec<f64>> = (0..basis.ncols()).map(|k| basis.column(k).iter().copied().collect()).collect();
    let order: Vec<usize> = (0..system.ncols()).collect();
    let reduced = rref_f64(&rows, &order, 1e-8);
    let residual = |v: &[f64]| -> f64 {
        let x = DMatrix::from_column_slice(v.len(), 1, v);
        inf_norm((holdout * x).as_slice())
    };
    Ok(reduced
        .into_iter()
        .map(|(pivot, mut v)| {
            let s = pivot_sign[pivot];
            for x in v.iter_mut() {
                *x *= s;
            }
            let exact = rationalize_vec(&v, max_den, 1e-7).and_then(|r| {
                let f: Vec<f64> = r.iter().map(to_f64).collect();
                (residual(&f) < tol).then_some(r)
            });
            let holdout_residual = match &exact {
                Some(r) => residual(&r.iter().map(to_f64).collect::<Vec<_>>()),
                None => residual(&v),
            };
            NullVector { coefficients: v, exact, holdout_residual, pivot }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyComponent {
    /// May contain the Hamiltonian placeholder `H`.
    pub expr: Expr,
    pub coefficients: Vec<f64>,
    pub exact: bool,
    pub holdout_residual: f64,
}

/// Linearly independent first integrals `ϝ_1..ϝ_m`; `ϝ(λ) = Σ λ_k ϝ_k`.
#[derive(Debug, Clone)]
pub struct Family {
    pub table: SymbolTable,
    pub columns: Vec<Expr>,
    pub components: Vec<FamilyComponent>,
    /// Nullspace directions dropped as zero, constant, or dependent.
    pub pruned: usize,
}

impl Family {
    pub fn m(&self) -> usize {
        self.components.len()
    }

    pub fn exprs(&self) -> Vec<Expr> {
        self.components.iter().map(|c| c.expr.clone()).collect()
    }

    /// Components with `H` replaced by the closed-form `ℋ`.
    pub fn closed_exprs(&self, th: &TrueHamiltonian) -> Option<Vec<Expr>> {
        self.components.iter().map(|c| close(&c.expr, th)).collect()
    }

    /// `ϝ(λ)`.
    pub fn combine(&self, lambda: &[Rational]) -> Expr {
        Expr::add(
            lambda
                .iter()
                .zip(&self.components)
                .map(|(l, c)| Expr::mul(vec![Expr::num(l.clone()), c.expr.clone()]))
                .collect(),
        )
        .simplify()
    }

    /// Lowered components for numeric evaluation.
    pub fn functions(&self) -> Vec<PhaseFunction> {
        self.components.par_iter().map(|c| PhaseFunction::new(&c.expr, &self.table)).collect()
    }
}

/// Builds components from reduced nullspace vectors, dropping zero or
/// constant functions, functions dependent on earlier ones (sampled value
/// rank), and any whose holdout residual exceeds `tol`.
pub fn extract_family(
    basis: &CandidateBasis,
    vectors: &[NullVector],
    holdout_values: &DMatrix<f64>,
    tol: f64,
) -> Result<Family, NoetherError> {
    let mut components = Vec::new();
    let mut accepted: Vec<Vec<f64>> = Vec::new();
    let mut pruned = 0;
    for v in vectors {
        let coeffs: Vec<f64> = match &v.exact {
            Some(r) => r.iter().map(to_f64).collect(),
            None => v.coefficients.clone(),
        };
        let x = DMatrix::from_column_slice(coeffs.len(), 1, &coeffs);
        let vals: Vec<f64> = (holdout_values * x).iter().copied().collect();
        let max = inf_norm(&vals);
        let (lo, hi) = vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
        if max < 1e-9 || hi - lo < 1e-9 * (1.0 + max) || v.holdout_residual >= tol {
            pruned += 1;
            continue;
        }
        let mut trial = accepted.clone();
        trial.push(vals.clone());
        let m = DMatrix::from_fn(vals.len(), trial.len(), |i, j| trial[j][i]);
        if numeric_rank(&m, 1e-9) < trial.len() {
            pruned += 1;
            continue;
        }
        accepted = trial;
        let rational: Vec<Rational> = match &v.exact {
            Some(r) => r.clone(),
            None => coeffs.iter().map(|&c| Rational::from_f64(c).unwrap_or_else(Rational::zero)).collect(),
        };
        components.push(FamilyComponent {
            expr: basis.combination(&rational),
            coefficients: coeffs,
            exact: v.exact.is_some(),
            holdout_residual: v.holdout_residual,
        });
    }
    if components.is_empty() {
        return Err(NoetherError::AllPruned);
    }
    Ok(Family { table: basis.table.clone(), columns: basis.columns.clone(), components, pruned })
}

/// Runs sampling, nullspace, and extraction over a candidate basis.
pub fn discover_with_basis(
    basis: &CandidateBasis,
    th: &TrueHamiltonian,
    sampler: &Sampler,
    opts: &DiscoveryOptions,
) -> Result<Family, NoetherError> {
    let n_rows = opts.samples.unwrap_or(3 * basis.len());
    let points = th.sample_points(sampler, opts.seed, Stream::System, n_rows)?;
    let hold = th.sample_points(sampler, opts.seed, Stream::Holdout, opts.holdout)?;
    let sys = assemble_system(basis, &points)?;
    let hsys = assemble_system(basis, &hold)?;
    let vectors = nullspace(
        &sys.residuals,
        &hsys.residuals,
        opts.svd_tol,
        &basis.pivot_sign,
        opts.max_denominator,
        opts.tol,
    )?;
    extract_family(basis, &vectors, &hsys.values, opts.tol)
}

/// Separated-generator discovery with `opts.degree`.
pub fn discover_family(
    th: &TrueHamiltonian,
    sampler: &Sampler,
    opts: &DiscoveryOptions,
) -> Result<Family, NoetherError> {
    let a = build_ansatz(th.n(), opts.degree, opts.include_time);
    discover_with_basis(&noether_residual(&a, th), th, sampler, opts)
}

/// Discovery over all monomials of total degree `≤ d`.
pub fn discover_polynomial_integrals(
    th: &TrueHamiltonian,
    sampler: &Sampler,
    d: u32,
    include_time: bool,
    excluded: &[SymId],
    opts: &DiscoveryOptions,
) -> Result<Family, NoetherError> {
    let basis = CandidateBasis::polynomial(&th.table, d, include_time, excluded);
    discover_with_basis(&basis, th, sampler, opts)
}
