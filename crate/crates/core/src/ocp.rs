//! Optimal control problems, Hamiltonian formation and control elimination.
//!
//! The Hamiltonian is `H = -L + psi·phi`. The true Hamiltonian `ℋ(x, psi, t)`
//! is `H` with the control replaced by the stationary point of `u ↦ H`,
//! either symbolically ([`ControlLaw::ClosedForm`]) or by Newton's method
//! at each evaluation point ([`ControlLaw::Implicit`]).

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use rayon::prelude::*;

use crate::sampling::{point_rng, Sampler, SamplingError, Stream};
use crate::symexpr::{Compiled, EvalError, Expr, Rational, Role, SymId, SymbolError, SymbolTable};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OcpError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("dH/d{control} is not affine in the controls; supply a control law")]
    NotAffineInControl { control: String },
    #[error("the coefficient of {control} in dH/d{control} vanishes")]
    SingularControlHessian { control: String },
    #[error("the control Hessian is not diagonal; supply a control law")]
    CoupledControlHessian,
    #[error("Newton iteration for the stationary control diverged at {point:?}")]
    NewtonDivergence { point: Vec<f64> },
    #[error("control Hessian singular at {point:?}")]
    SingularHessianAt { point: Vec<f64> },
    #[error("stationary control is not a strict maximum at {point:?}")]
    NotAMaximum { point: Vec<f64> },
    #[error("this operation needs a closed-form control law")]
    NeedsClosedForm,
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Symbol(#[from] SymbolError),
}

/// How the stationary control `ū` is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum ControlLaw {
    /// `ū_j(x, psi, t)`, one per control, control-free.
    ClosedForm(Vec<Expr>),
    /// Initial guess for Newton's method on `∂H/∂u = 0`.
    Implicit(Vec<f64>),
}

/// Which elimination path to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    /// Closed form when available, Newton otherwise.
    #[default]
    Auto,
    Closed,
    Implicit,
}

#[derive(Debug, Clone)]
pub struct Problem {
    pub name: String,
    pub table: SymbolTable,
    pub lagrangian: Expr,
    pub dynamics: Vec<Expr>,
    /// Parameter values already substituted into the expressions.
    pub parameters: BTreeMap<String, Rational>,
    pub sampling_box: BTreeMap<SymId, (f64, f64)>,
    pub excluded_denominators: Vec<Expr>,
    /// User-supplied control law, if any.
    pub control_law: Option<ControlLaw>,
    /// Order of the stationarity condition the supplied law satisfies.
    pub k_u: u32,
    pub control_guess: Option<Vec<f64>>,
}

impl Problem {
    /// Builds a problem with the default box (`[-1, 1]` for states and
    /// costates, `[0, 1]` for time) and the denominators of the dynamics
    /// and Lagrangian excluded.
    pub fn new(name: &str, table: SymbolTable, lagrangian: Expr, dynamics: Vec<Expr>) -> Result<Self, OcpError> {
        let mut sampling_box = BTreeMap::new();
        for s in table.phase_coordinates() {
            sampling_box.insert(s, (-1.0, 1.0));
        }
        sampling_box.insert(table.time(), (0.0, 1.0));
        for u in table.controls() {
            sampling_box.insert(u, (-1.0, 1.0));
        }
        let mut p = Problem {
            name: name.to_string(),
            table,
            lagrangian,
            dynamics,
            parameters: BTreeMap::new(),
            sampling_box,
            excluded_denominators: Vec::new(),
            control_law: None,
            k_u: 0,
            control_guess: None,
        };
        p.validate()?;
        p.collect_denominators();
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.table.n()
    }

    fn validate(&self) -> Result<(), OcpError> {
        let n = self.table.n();
        if self.dynamics.len() != n {
            return Err(OcpError::InvalidProblem(format!(
                "{} dynamics for {} states",
                self.dynamics.len(),
                n
            )));
        }
        let costate = |s: SymId| matches!(self.table.role(s), Role::Costate(_) | Role::Hamiltonian);
        if self.lagrangian.contains_any(&costate) || self.dynamics.iter().any(|d| d.contains_any(&costate)) {
            return Err(OcpError::InvalidProblem("lagrangian and dynamics must not contain costates".into()));
        }
        let param = |s: SymId| self.table.role(s) == Role::Parameter;
        if self.lagrangian.contains_any(&param) || self.dynamics.iter().any(|d| d.contains_any(&param)) {
            return Err(OcpError::InvalidProblem("unsubstituted parameter".into()));
        }
        Ok(())
    }

    /// Adds every non-constant, control-free denominator of the dynamics and
    /// Lagrangian to the excluded list, keeping it sorted and free of
    /// duplicates. Control-dependent denominators cannot be checked at phase
    /// points and are left to the stationarity solver.
    pub fn collect_denominators(&mut self) {
        let mut all = self.excluded_denominators.clone();
        all.extend(self.lagrangian.denominators());
        for d in &self.dynamics {
            all.extend(d.denominators());
        }
        let is_control = |s: SymId| matches!(self.table.role(s), Role::Control(_));
        all.retain(|d| !d.contains_any(&is_control));
        all.sort();
        all.dedup();
        self.excluded_denominators = all;
    }

    pub fn with_box(mut self, s: SymId, lo: f64, hi: f64) -> Self {
        self.sampling_box.insert(s, (lo, hi));
        self
    }

    pub fn with_control_law(mut self, law: ControlLaw) -> Self {
        self.control_law = Some(law);
        self
    }

    pub fn with_guess(mut self, guess: Vec<f64>) -> Self {
        self.control_guess = Some(guess);
        self
    }

    /// Sampler over `(x, psi, t)`; controls are left unbound.
    pub fn sampler(&self) -> Sampler {
        let phase: BTreeMap<SymId, (f64, f64)> = self
            .sampling_box
            .iter()
            .filter(|(s, _)| self.table.is_phase_or_time(**s))
            .map(|(s, b)| (*s, *b))
            .collect();
        Sampler::new(self.table.len(), &phase, &self.excluded_denominators)
    }
}

/// `H = -L + Σ psi_i·phi_i`.
pub fn build_hamiltonian(p: &Problem) -> Expr {
    let mut terms = vec![Expr::neg(p.lagrangian.clone())];
    for (i, phi) in p.dynamics.iter().enumerate() {
        terms.push(Expr::mul(vec![Expr::sym(p.table.costate(i + 1)), phi.clone()]));
    }
    Expr::add(terms).simplify()
}

/// Solves `∂H/∂u = 0` symbolically when it is affine in `u` with a
/// diagonal, nonzero coefficient matrix. A law supplied with the problem is
/// passed through unchanged.
pub fn solve_stationarity(p: &Problem, h: &Expr) -> Result<ControlLaw, OcpError> {
    if let Some(law) = &p.control_law {
        return Ok(law.clone());
    }
    let t = &p.table;
    let controls: Vec<SymId> = t.controls().collect();
    let is_control = |s: SymId| matches!(t.role(s), Role::Control(_));
    let zero_controls: BTreeMap<SymId, Expr> = controls.iter().map(|&u| (u, Expr::zero())).collect();
    let mut law = Vec::with_capacity(controls.len());
    for (j, &uj) in controls.iter().enumerate() {
        let g = h.differentiate(uj).simplify();
        let mut diag = Expr::zero();
        for (k, &uk) in controls.iter().enumerate() {
            let a = g.differentiate(uk).simplify();
            if a.contains_any(&is_control) {
                return Err(OcpError::NotAffineInControl { control: t.name(uj).to_string() });
            }
            if k == j {
                diag = a;
            } else if !a.is_zero() {
                return Err(OcpError::CoupledControlHessian);
            }
        }
        if diag.is_zero() {
            return Err(OcpError::SingularControlHessian { control: t.name(uj).to_string() });
        }
        let b = g.substitute(&zero_controls).simplify();
        law.push(Expr::neg(Expr::div(b, diag)).simplify());
    }
    Ok(ControlLaw::ClosedForm(law))
}

/// Newton settings for the implicit backend.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { max_iterations: 50, tolerance: 1e-12 }
    }
}

#[derive(Debug, Clone)]
enum Lowered {
    Closed {
        value: Compiled,
        grad: Vec<Compiled>,
    },
    Implicit {
        value: Compiled,
        grad: Vec<Compiled>,
        h_u: Vec<Compiled>,
        h_uu: Vec<Vec<Compiled>>,
    },
}

/// The Hamiltonian with its control eliminated.
#[derive(Debug, Clone)]
pub struct TrueHamiltonian {
    pub table: SymbolTable,
    /// `H(x, u, psi, t)`.
    pub hamiltonian: Expr,
    pub law: ControlLaw,
    /// `ℋ(x, psi, t)`, present iff the law is closed-form.
    pub reduced: Option<Expr>,
    pub k_u: u32,
    pub newton: NewtonOptions,
    guards: Vec<Compiled>,
    lowered: Lowered,
}

/// Builds the true Hamiltonian for a given law.
pub fn true_hamiltonian(p: &Problem, h: &Expr, law: ControlLaw) -> Result<TrueHamiltonian, OcpError> {
    let t = &p.table;
    let phase: Vec<SymId> = (0..t.phase_len() as u32).map(SymId).collect();
    let guards = p.excluded_denominators.iter().map(Compiled::new).collect();
    let (reduced, lowered) = match &law {
        ControlLaw::ClosedForm(ubar) => {
            if ubar.len() != t.m_ctl() {
                return Err(OcpError::InvalidProblem(format!(
                    "control law has {} entries for {} controls",
                    ubar.len(),
                    t.m_ctl()
                )));
            }
            let is_control = |s: SymId| matches!(t.role(s), Role::Control(_));
            if ubar.iter().any(|e| e.contains_any(&is_control)) {
                return Err(OcpError::InvalidProblem("control law must be control-free".into()));
            }
            let bindings: BTreeMap<SymId, Expr> = t.controls().zip(ubar.iter().cloned()).collect();
            let reduced = h.substitute(&bindings).simplify();
            let grad = phase.iter().map(|&s| Compiled::new(&reduced.differentiate(s))).collect();
            let value = Compiled::new(&reduced);
            (Some(reduced), Lowered::Closed { value, grad })
        }
        ControlLaw::Implicit(guess) => {
            if guess.len() != t.m_ctl() {
                return Err(OcpError::InvalidProblem(format!(
                    "control guess has {} entries for {} controls",
                    guess.len(),
                    t.m_ctl()
                )));
            }
            let controls: Vec<SymId> = t.controls().collect();
            let h_u_exprs: Vec<Expr> = controls.iter().map(|&u| h.differentiate(u)).collect();
            let h_uu = h_u_exprs
                .iter()
                .map(|g| controls.iter().map(|&u| Compiled::new(&g.differentiate(u))).collect())
                .collect();
            let lowered = Lowered::Implicit {
                value: Compiled::new(h),
                grad: phase.iter().map(|&s| Compiled::new(&h.differentiate(s))).collect(),
                h_u: h_u_exprs.iter().map(Compiled::new).collect(),
                h_uu,
            };
            (None, lowered)
        }
    };
    Ok(TrueHamiltonian {
        table: t.clone(),
        hamiltonian: h.clone(),
        law,
        reduced,
        k_u: p.k_u,
        newton: NewtonOptions::default(),
        guards,
        lowered,
    })
}

impl TrueHamiltonian {
    /// Runs the whole elimination for a problem under the chosen backend.
    pub fn from_problem(p: &Problem, backend: Backend) -> Result<Self, OcpError> {
        let h = build_hamiltonian(p);
        let guess = || p.control_guess.clone().unwrap_or_else(|| vec![0.0; p.table.m_ctl()]);
        let law = match backend {
            Backend::Implicit => match &p.control_law {
                Some(ControlLaw::Implicit(g)) => ControlLaw::Implicit(g.clone()),
                _ => ControlLaw::Implicit(guess()),
            },
            Backend::Closed => match solve_stationarity(p, &h)? {
                ControlLaw::Implicit(_) => return Err(OcpError::NeedsClosedForm),
                law => law,
            },
            Backend::Auto => match solve_stationarity(p, &h) {
                Ok(law) => law,
                Err(OcpError::NotAffineInControl { .. })
                | Err(OcpError::CoupledControlHessian)
                | Err(OcpError::SingularControlHessian { .. }) => ControlLaw::Implicit(guess()),
                Err(e) => return Err(e),
            },
        };
        true_hamiltonian(p, &h, law)
    }

    pub fn n(&self) -> usize {
        self.table.n()
    }

    pub fn is_closed_form(&self) -> bool {
        self.reduced.is_some()
    }

    /// Is `ℋ` free of explicit time dependence (symbolically, or for the
    /// implicit backend, `H` itself is)?
    pub fn is_autonomous(&self) -> bool {
        let t = self.table.time();
        match &self.reduced {
            Some(r) => r.differentiate(t).simplify().is_zero(),
            None => self.hamiltonian.differentiate(t).simplify().is_zero(),
        }
    }

    /// True when every excluded denominator stays at least `threshold` in
    /// magnitude at `values`.
    pub fn away_from_poles(&self, values: &[f64], threshold: f64) -> bool {
        self.guards.iter().all(|g| matches!(g.eval(values), Ok(v) if v.abs() >= threshold))
    }

    pub fn evaluator(&self) -> HamEval<'_> {
        HamEval { th: self, warm: None }
    }

    /// `count` sample points of a stage at which `ℋ` evaluates. Points are
    /// processed in fixed chunks, each with its own warm-start state, so the
    /// result does not depend on the number of worker threads.
    pub fn sample_points(
        &self,
        sampler: &Sampler,
        seed: u64,
        stream: Stream,
        count: usize,
    ) -> Result<Vec<PhasePoint>, SamplingError> {
        let chunks: Vec<usize> = (0..count.div_ceil(CHUNK)).collect();
        let parts: Result<Vec<Vec<PhasePoint>>, SamplingError> = chunks
            .par_iter()
            .map(|&c| {
                let mut ev = self.evaluator();
                let end = ((c + 1) * CHUNK).min(count);
                (c * CHUNK..end)
                    .map(|k| {
                        let mut rng = point_rng(seed, stream, k as u64);
                        let mut got = None;
                        sampler.draw_with(&mut rng, |v| match ev.eval(v) {
                            Ok(p) => {
                                got = Some(p);
                                true
                            }
                            Err(_) => false,
                        })?;
                        Ok(got.expect("accepted point was evaluated"))
                    })
                    .collect()
            })
            .collect();
        Ok(parts?.into_iter().flatten().collect())
    }
}

/// Points per warm-start chunk in batch evaluation.
pub const CHUNK: usize = 16;

/// `ℋ` and its gradient at one phase point.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    /// Symbol-indexed values: `(x, psi, t)`, the Hamiltonian placeholder set
    /// to `ℋ`, and the stationary controls when solved numerically.
    pub values: Vec<f64>,
    pub hamiltonian: f64,
    /// `(∂ℋ/∂x, ∂ℋ/∂psi, ∂ℋ/∂t)`.
    pub gradient: Vec<f64>,
}

impl PhasePoint {
    pub fn phase(&self) -> &[f64] {
        &self.values[..self.gradient.len()]
    }
}

/// Evaluator with warm-start state for the implicit backend. One per
/// worker; not shared.
#[derive(Debug, Clone)]
pub struct HamEval<'a> {
    th: &'a TrueHamiltonian,
    warm: Option<Vec<f64>>,
}

impl HamEval<'_> {
    pub fn reset(&mut self) {
        self.warm = None;
    }

    /// Stationary controls of the last successful implicit evaluation.
    pub fn last_controls(&self) -> Option<&[f64]> {
        self.warm.as_deref()
    }

    /// Evaluates at `z = (x, psi, t)` (extra trailing entries ignored).
    pub fn eval(&mut self, z: &[f64]) -> Result<PhasePoint, OcpError> {
        let th = self.th;
        let t = &th.table;
        let k = t.phase_len();
        let mut values = vec![f64::NAN; t.len()];
        values[..k].copy_from_slice(&z[..k]);
        match &th.lowered {
            Lowered::Closed { value, grad } => {
                let hv = value.eval(&values)?;
                let g = grad.iter().map(|c| c.eval(&values)).collect::<Result<Vec<_>, _>>()?;
                values[t.hamiltonian().index()] = hv;
                Ok(PhasePoint { values, hamiltonian: hv, gradient: g })
            }
            Lowered::Implicit { value, grad, h_u, h_uu } => {
                let guess = match &th.law {
                    ControlLaw::Implicit(g) => g.clone(),
                    ControlLaw::ClosedForm(_) => unreachable!("closed law lowers to Closed"),
                };
                let starts: Vec<Vec<f64>> = match self.warm.take() {
                    Some(w) if w != guess => vec![w, guess],
                    _ => vec![guess],
                };
                let mut last_err = None;
                for start in starts {
                    match newton(th, &mut values, &start, h_u, h_uu) {
                        Ok(u) => {
                            let hv = value.eval(&values)?;
                            let g = grad.iter().map(|c| c.eval(&values)).collect::<Result<Vec<_>, _>>()?;
                            values[t.hamiltonian().index()] = hv;
                            self.warm = Some(u);
                            return Ok(PhasePoint { values, hamiltonian: hv, gradient: g });
                        }
                        Err(e) => last_err = Some(e),
                    }
                }
                Err(last_err.expect("at least one start"))
            }
        }
    }
}

fn control_slots(t: &SymbolTable) -> Vec<usize> {
    t.controls().map(|u| u.index()).collect()
}

/// Damped Newton on `∂H/∂u = 0` from `start`, writing the controls into
/// `values`. Accepts only points where `∂²H/∂u²` is negative definite.
fn newton(
    th: &TrueHamiltonian,
    values: &mut [f64],
    start: &[f64],
    h_u: &[Compiled],
    h_uu: &[Vec<Compiled>],
) -> Result<Vec<f64>, OcpError> {
    let slots = control_slots(&th.table);
    let m = slots.len();
    let set = |values: &mut [f64], u: &[f64]| {
        for (s, x) in slots.iter().zip(u) {
            values[*s] = *x;
        }
    };
    let residual = |values: &[f64]| -> Result<DVector<f64>, EvalError> {
        let g: Result<Vec<f64>, _> = h_u.iter().map(|c| c.eval(values)).collect();
        Ok(DVector::from_vec(g?))
    };
    let hessian = |values: &[f64]| -> Result<DMatrix<f64>, EvalError> {
        let mut hm = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                hm[(i, j)] = h_uu[i][j].eval(values)?;
            }
        }
        Ok(hm)
    };
    let mut u = DVector::from_column_slice(start);
    set(values, u.as_slice());
    let mut g = residual(values).map_err(|_| OcpError::NewtonDivergence { point: values_phase(th, values) })?;
    let mut converged = g.amax() < th.newton.tolerance;
    let mut iterations = 0;
    while !converged && iterations < th.newton.max_iterations {
        iterations += 1;
        let hm = hessian(values).map_err(|_| OcpError::NewtonDivergence { point: values_phase(th, values) })?;
        let Some(step) = hm.clone().lu().solve(&g) else {
            return Err(OcpError::SingularHessianAt { point: values_phase(th, values) });
        };
        let norm = g.norm();
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial = &u - alpha * &step;
            set(values, trial.as_slice());
            if let Ok(gt) = residual(values) {
                if gt.iter().all(|x| x.is_finite()) && (gt.norm() < norm || gt.amax() < th.newton.tolerance) {
                    u = trial;
                    g = gt;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(OcpError::NewtonDivergence { point: values_phase(th, values) });
        }
        converged = g.amax() < th.newton.tolerance;
    }
    if !converged {
        return Err(OcpError::NewtonDivergence { point: values_phase(th, values) });
    }
    set(values, u.as_slice());
    let hm = hessian(values).map_err(|_| OcpError::NewtonDivergence { point: values_phase(th, values) })?;
    if (-hm).cholesky().is_none() {
        return Err(OcpError::NotAMaximum { point: values_phase(th, values) });
    }
    Ok(u.iter().copied().collect())
}

fn values_phase(th: &TrueHamiltonian, values: &[f64]) -> Vec<f64> {
    values[..th.table.phase_len()].to_vec()
}

/// `ℋ` value and gradient over `(x, psi, t)` at one point.
pub fn eval_true_hamiltonian(th: &TrueHamiltonian, z: &[f64]) -> Result<(f64, Vec<f64>), OcpError> {
    let p = th.evaluator().eval(z)?;
    Ok((p.hamiltonian, p.gradient))
}

/// The Hamiltonian vector field `ẋ = ∂ℋ/∂psi`, `psi' = -∂ℋ/∂x`.
pub struct VectorField<'a> {
    eval: HamEval<'a>,
    n: usize,
}

/// Numeric vector field of the true Hamiltonian.
pub fn hamiltonian_flow(th: &TrueHamiltonian) -> VectorField<'_> {
    VectorField { eval: th.evaluator(), n: th.n() }
}

impl VectorField<'_> {
    /// `(ẋ, psi')` at `z = (x, psi, t)`, together with the evaluated point.
    pub fn rhs(&mut self, z: &[f64]) -> Result<(Vec<f64>, PhasePoint), OcpError> {
        let p = self.eval.eval(z)?;
        let n = self.n;
        let mut out = Vec::with_capacity(2 * n);
        out.extend_from_slice(&p.gradient[n..2 * n]);
        out.extend(p.gradient[..n].iter().map(|g| -g));
        Ok((out, p))
    }
}

/// Symbolic right-hand side `(∂ℋ/∂psi, -∂ℋ/∂x)`; closed form only.
pub fn symbolic_flow(th: &TrueHamiltonian) -> Option<Vec<Expr>> {
    let r = th.reduced.as_ref()?;
    let t = &th.table;
    let n = t.n();
    let mut out: Vec<Expr> = (1..=n).map(|i| r.differentiate(t.costate(i)).simplify()).collect();
    out.extend((1..=n).map(|i| Expr::neg(r.differentiate(t.state(i))).simplify()));
    Some(out)
}

/// The autonomous Hamiltonian `K = ℋ - theta` on the extended phase space,
/// where `theta` is conjugate to `t`.
#[derive(Debug, Clone)]
pub struct Autonomized {
    pub table: SymbolTable,
    pub theta: SymId,
    pub k: Expr,
}

pub fn autonomize(th: &TrueHamiltonian) -> Result<Autonomized, OcpError> {
    let reduced = th.reduced.as_ref().ok_or(OcpError::NeedsClosedForm)?;
    let table = th.table.with_autonomization("theta")?;
    let theta = table.autonomization().expect("just added");
    let k = Expr::sub(reduced.clone(), Expr::sym(theta));
    Ok(Autonomized { table, theta, k })
}
