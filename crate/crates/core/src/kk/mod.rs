//! Integrability certificates from a family of first integrals.
//!
//! Given `ϝ_1..ϝ_m`, a certificate picks `n` combinations `ϝ(λ^i)` whose
//! brackets close linearly, `{ϝ(λ^i), ϝ(λ^j)} = Σ_s ξ^{ij}_s ϝ(λ^s)`, span a
//! solvable Lie algebra, admit nonzero level values `r` with `r·ξ^{ij} = 0`,
//! and are functionally independent on the level set.

mod certificate;
mod lie;

pub use certificate::{
    certify_selection, find_certificate, independence_rank, Certificate, CertificateOptions, Gate, RankEvidence,
    RankSample, Strategy, Verdict,
};
pub use lie::{
    admissible_levels, check_solvable_lie, derived_depth, derived_series, pairwise_identity, Solvability,
    SolvabilityClass, StructureTensor,
};

use nalgebra::DMatrix;
use thiserror::Error;

use crate::linalg::{inf_norm, least_squares, rationalize_vec, to_f64};
use crate::noether::Family;
use crate::ocp::{OcpError, PhasePoint, TrueHamiltonian};
use crate::poisson::{bracket, bracket_from_gradients, PhaseFunction};
use crate::sampling::{Sampler, SamplingError, Stream};
use crate::symexpr::{EvalError, Expr, Rational};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KkError {
    #[error("the family is empty")]
    EmptyFamily,
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Ocp(#[from] OcpError),
}

/// Evaluator for `A_pq = {ϝ_p, ϝ_q}`.
#[derive(Debug, Clone)]
pub struct BracketMatrix {
    funcs: Vec<PhaseFunction>,
    n: usize,
}

pub fn bracket_matrix(fam: &Family) -> Result<BracketMatrix, KkError> {
    if fam.m() == 0 {
        return Err(KkError::EmptyFamily);
    }
    Ok(BracketMatrix { funcs: fam.functions(), n: fam.table.n() })
}

impl BracketMatrix {
    pub fn m(&self) -> usize {
        self.funcs.len()
    }

    pub fn functions(&self) -> &[PhaseFunction] {
        &self.funcs
    }

    /// Family values and the antisymmetric bracket matrix at `p`.
    pub fn eval(&self, p: &PhasePoint) -> Result<(Vec<f64>, DMatrix<f64>), EvalError> {
        let m = self.m();
        let values = self.funcs.iter().map(|f| f.value(p)).collect::<Result<Vec<_>, _>>()?;
        let grads = self.funcs.iter().map(|f| f.gradient(p)).collect::<Result<Vec<_>, _>>()?;
        let mut a = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i + 1..m {
                let v = bracket_from_gradients(&grads[i], &grads[j], self.n);
                a[(i, j)] = v;
                a[(j, i)] = -v;
            }
        }
        Ok((values, a))
    }
}

/// Symbolic `A` for a closed-form `ℋ`; entries are simplified brackets of
/// the closed components.
pub fn symbolic_bracket_matrix(fam: &Family, th: &TrueHamiltonian) -> Option<Vec<Vec<Expr>>> {
    let exprs = fam.closed_exprs(th)?;
    let m = exprs.len();
    let mut a = vec![vec![Expr::zero(); m]; m];
    for i in 0..m {
        for j in i + 1..m {
            let b = bracket(&exprs[i], &exprs[j], &th.table);
            a[j][i] = Expr::neg(b.clone()).simplify();
            a[i][j] = b;
        }
    }
    Some(a)
}

/// A least-squares fit accepted on the holdout set.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanFit {
    pub coefficients: Vec<f64>,
    /// Present when the rationalized coefficients also pass the holdout.
    pub exact: Option<Vec<Rational>>,
    /// `‖g - V·c‖_∞ / max(1, ‖g‖_∞)` on the holdout.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decomposition {
    Member(SpanFit),
    Fail { residual: f64 },
}

impl Decomposition {
    pub fn member(&self) -> Option<&SpanFit> {
        match self {
            Decomposition::Member(f) => Some(f),
            Decomposition::Fail { .. } => None,
        }
    }
}

fn relative_residual(g: &[f64], v: &DMatrix<f64>, c: &[f64]) -> f64 {
    let x = DMatrix::from_column_slice(c.len(), 1, c);
    let r: Vec<f64> = (v * x).iter().zip(g).map(|(a, b)| b - a).collect();
    inf_norm(&r) / inf_norm(g).max(1.0)
}

/// Fits `g ≈ V·c` (no constant term) on the fit rows and judges it on the
/// holdout rows. Rows are sample points, columns span functions.
pub fn fit_in_span(
    fit_g: &[f64],
    fit_v: &DMatrix<f64>,
    hold_g: &[f64],
    hold_v: &DMatrix<f64>,
    max_den: i64,
    tol: f64,
) -> Decomposition {
    let c = least_squares(fit_v, fit_g);
    if let Some(r) = rationalize_vec(&c, max_den, 1e-6) {
        let cf: Vec<f64> = r.iter().map(to_f64).collect();
        let residual = relative_residual(hold_g, hold_v, &cf);
        if residual < tol {
            return Decomposition::Member(SpanFit { coefficients: cf, exact: Some(r), residual });
        }
    }
    let residual = relative_residual(hold_g, hold_v, &c);
    if residual < tol {
        Decomposition::Member(SpanFit { coefficients: c, exact: None, residual })
    } else {
        Decomposition::Fail { residual }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpanOptions {
    pub seed: u64,
    /// Fit rows; default `3m + 10`.
    pub samples: Option<usize>,
    pub holdout: usize,
    pub tol: f64,
    pub max_denominator: i64,
}

impl Default for SpanOptions {
    fn default() -> Self {
        SpanOptions { seed: 42, samples: None, holdout: 100, tol: 1e-7, max_denominator: 64 }
    }
}

/// Writes `g` (which may mention the placeholder `H`) in the span of the
/// family, if it lies there.
pub fn decompose_in_span(
    g: &Expr,
    fam: &Family,
    th: &TrueHamiltonian,
    sampler: &Sampler,
    opts: &SpanOptions,
) -> Result<Decomposition, KkError> {
    if fam.m() == 0 {
        return Err(KkError::EmptyFamily);
    }
    let gf = PhaseFunction::new(g, &fam.table);
    let funcs = fam.functions();
    let sample = |stream, count| -> Result<(Vec<f64>, DMatrix<f64>), KkError> {
        let pts = th.sample_points(sampler, opts.seed, stream, count)?;
        let g = pts.iter().map(|p| gf.value(p)).collect::<Result<Vec<_>, _>>()?;
        let mut v = DMatrix::zeros(pts.len(), funcs.len());
        for (i, p) in pts.iter().enumerate() {
            for (j, f) in funcs.iter().enumerate() {
                v[(i, j)] = f.value(p)?;
            }
        }
        Ok((g, v))
    };
    let (fg, fv) = sample(Stream::Gram, opts.samples.unwrap_or(3 * fam.m() + 10))?;
    let (hg, hv) = sample(Stream::Check, opts.holdout)?;
    Ok(fit_in_span(&fg, &fv, &hg, &hv, opts.max_denominator, opts.tol))
}
