//! Canonical Poisson bracket and the first-integral residual.
//!
//! Convention: `{F, G} = Σ_i (∂F/∂x_i ∂G/∂psi_i - ∂F/∂psi_i ∂G/∂x_i)` and
//! `R(F) = ∂F/∂t + {F, ℋ}`. Along the flow `ẋ = ∂ℋ/∂psi`,
//! `psi' = -∂ℋ/∂x` this is exactly `dF/dt`.
//!
//! Functions may mention the Hamiltonian placeholder `H`; numerically it is
//! bound to `ℋ` and differentiated through the chain rule, which needs only
//! the value and gradient of `ℋ` and so works with either backend.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::linalg::rationalize;
use crate::ocp::{OcpError, PhasePoint, TrueHamiltonian};
use crate::sampling::{Sampler, SamplingError, Stream};
use crate::symexpr::{Compiled, EvalError, Expr, Rational, SymId, SymbolTable};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PoissonError {
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Ocp(#[from] OcpError),
}

/// Symbolic canonical bracket. `F` and `G` must not contain the
/// Hamiltonian placeholder (see [`close`]).
pub fn bracket(f: &Expr, g: &Expr, table: &SymbolTable) -> Expr {
    let mut terms = Vec::with_capacity(2 * table.n());
    for i in 1..=table.n() {
        let (x, p) = (table.state(i), table.costate(i));
        terms.push(Expr::mul(vec![f.differentiate(x), g.differentiate(p)]));
        terms.push(Expr::neg(Expr::mul(vec![f.differentiate(p), g.differentiate(x)])));
    }
    Expr::add(terms).simplify()
}

/// Bracket on the extended phase space where `theta` is a position
/// conjugate to the momentum `t`.
pub fn extended_bracket(f: &Expr, g: &Expr, table: &SymbolTable) -> Expr {
    let theta = table.autonomization().expect("table has an autonomization symbol");
    let t = table.time();
    let extra = Expr::sub(
        Expr::mul(vec![f.differentiate(theta), g.differentiate(t)]),
        Expr::mul(vec![f.differentiate(t), g.differentiate(theta)]),
    );
    Expr::add(vec![bracket(f, g, table), extra]).simplify()
}

/// Replaces the placeholder `H` by the closed-form `ℋ`.
pub fn close(e: &Expr, th: &TrueHamiltonian) -> Option<Expr> {
    let h = th.table.hamiltonian();
    if !e.contains(h) {
        return Some(e.clone());
    }
    let mut b = BTreeMap::new();
    b.insert(h, th.reduced.clone()?);
    Some(e.substitute(&b))
}

/// Bracket from two total gradients over `(x, psi, t)`.
pub fn bracket_from_gradients(gf: &[f64], gg: &[f64], n: usize) -> f64 {
    (0..n).map(|i| gf[i] * gg[n + i] - gf[n + i] * gg[i]).sum()
}

/// `R(F)` from the total gradient of `F` and the gradient of `ℋ`.
pub fn residual_from_gradients(gf: &[f64], gh: &[f64], n: usize) -> f64 {
    gf[2 * n] + bracket_from_gradients(gf, gh, n)
}

/// A function of `(x, psi, t, H)` lowered for value and total-gradient
/// evaluation at phase points.
#[derive(Debug, Clone)]
pub struct PhaseFunction {
    value: Compiled,
    partials: Vec<Compiled>,
    d_h: Option<Compiled>,
    n: usize,
}

impl PhaseFunction {
    pub fn new(e: &Expr, table: &SymbolTable) -> Self {
        let partials = (0..table.phase_len() as u32).map(|k| Compiled::new(&e.differentiate(SymId(k)))).collect();
        let h = table.hamiltonian();
        let d_h = e.contains(h).then(|| Compiled::new(&e.differentiate(h)));
        PhaseFunction { value: Compiled::new(e), partials, d_h, n: table.n() }
    }

    pub fn value(&self, p: &PhasePoint) -> Result<f64, EvalError> {
        self.value.eval(&p.values)
    }

    /// Total gradient over `(x, psi, t)`: `∂F + ∂F/∂H · ∇ℋ`.
    pub fn gradient(&self, p: &PhasePoint) -> Result<Vec<f64>, EvalError> {
        let mut g = self.partials.iter().map(|c| c.eval(&p.values)).collect::<Result<Vec<_>, _>>()?;
        if let Some(dh) = &self.d_h {
            let s = dh.eval(&p.values)?;
            for (gi, hi) in g.iter_mut().zip(&p.gradient) {
                *gi += s * hi;
            }
        }
        Ok(g)
    }

    pub fn residual(&self, p: &PhasePoint) -> Result<f64, EvalError> {
        Ok(residual_from_gradients(&self.gradient(p)?, &p.gradient, self.n))
    }
}

/// `R(F)`: symbolic when `ℋ` is closed-form, numeric otherwise.
#[derive(Debug, Clone)]
pub enum Residual {
    Symbolic { expr: Expr, compiled: Compiled },
    Numeric(PhaseFunction),
}

impl Residual {
    pub fn eval(&self, p: &PhasePoint) -> Result<f64, EvalError> {
        match self {
            Residual::Symbolic { compiled, .. } => compiled.eval(&p.values),
            Residual::Numeric(f) => f.residual(p),
        }
    }

    pub fn symbolic(&self) -> Option<&Expr> {
        match self {
            Residual::Symbolic { expr, .. } => Some(expr),
            Residual::Numeric(_) => None,
        }
    }
}

pub fn integral_residual(f: &Expr, th: &TrueHamiltonian) -> Residual {
    let t = &th.table;
    match (th.reduced.as_ref(), close(f, th)) {
        (Some(h), Some(fc)) => {
            let expr = Expr::add(vec![fc.differentiate(t.time()), bracket(&fc, h, t)]).simplify();
            let compiled = Compiled::new(&expr);
            Residual::Symbolic { expr, compiled }
        }
        _ => Residual::Numeric(PhaseFunction::new(f, t)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FirstIntegral {
    SymbolicZero,
    NumericZero(f64),
    Nonzero { witness: Vec<f64>, residual: f64 },
}

impl FirstIntegral {
    pub fn holds(&self) -> bool {
        !matches!(self, FirstIntegral::Nonzero { .. })
    }
}

/// Decides whether `F` is a first integral: symbolically when the residual
/// simplifies to zero, otherwise by sampling.
pub fn is_first_integral(
    f: &Expr,
    th: &TrueHamiltonian,
    sampler: &Sampler,
    tol: f64,
    n_samples: usize,
    seed: u64,
) -> Result<FirstIntegral, PoissonError> {
    let r = integral_residual(f, th);
    if matches!(r.symbolic(), Some(e) if e.is_zero()) {
        return Ok(FirstIntegral::SymbolicZero);
    }
    let points = th.sample_points(sampler, seed, Stream::Check, n_samples)?;
    let mut worst = 0.0f64;
    for p in &points {
        let v = r.eval(p)?;
        if !(v.abs() < tol) {
            return Ok(FirstIntegral::Nonzero { witness: p.phase().to_vec(), residual: v });
        }
        worst = worst.max(v.abs());
    }
    Ok(FirstIntegral::NumericZero(worst))
}

/// Fits `R(G) = c·ℋ` for a constant `c`. When the fit holds on a holdout
/// set, returns `c` and `F = G - c·t·H`, which is a first integral of an
/// autonomous `ℋ`. `H` in the result is the Hamiltonian placeholder.
pub fn homogeneous_correction(
    g: &Expr,
    th: &TrueHamiltonian,
    sampler: &Sampler,
    seed: u64,
    tol: f64,
) -> Result<Option<(Rational, Expr)>, PoissonError> {
    if th.reduced.is_none() {
        return Err(OcpError::NeedsClosedForm.into());
    }
    let r = integral_residual(g, th);
    let fit = th.sample_points(sampler, seed, Stream::System, 60)?;
    let (mut num, mut den) = (0.0, 0.0);
    for p in &fit {
        let v = r.eval(p)?;
        num += v * p.hamiltonian;
        den += p.hamiltonian * p.hamiltonian;
    }
    if den == 0.0 {
        return Ok(None);
    }
    let Some(c) = rationalize(num / den, 64, 1e-6) else {
        return Ok(None);
    };
    let cf = crate::linalg::to_f64(&c);
    let holdout = th.sample_points(sampler, seed, Stream::Holdout, 100)?;
    for p in &holdout {
        let v = r.eval(p)?;
        if (v - cf * p.hamiltonian).abs() > tol * v.abs().max(1.0) {
            return Ok(None);
        }
    }
    let t = &th.table;
    let f = Expr::sub(
        g.clone(),
        Expr::mul(vec![Expr::num(c.clone()), Expr::sym(t.time()), Expr::sym(t.hamiltonian())]),
    );
    Ok(Some((c, f)))
}
