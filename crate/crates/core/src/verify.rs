//! Numerical oracles: fixed-step RK4 extremals, conservation drift, and a
//! finite-difference Poisson bracket.

use rayon::prelude::*;
use thiserror::Error;

use crate::ocp::{hamiltonian_flow, OcpError, PhasePoint, TrueHamiltonian};
use crate::poisson::PhaseFunction;
use crate::sampling::{point_rng, Sampler, SamplingError, Stream};
use crate::symexpr::{EvalError, Expr, SymbolTable};

/// Excluded denominators must stay at least this large along a trajectory.
pub const POLE_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("trajectory approached a pole at t = {t}")]
    PoleEncountered { t: f64 },
    #[error("invalid integration grid: {0}")]
    InvalidGrid(String),
    #[error("only {got} of {wanted} extremals stayed clear of poles")]
    TooFewExtremals { got: usize, wanted: usize },
    #[error(transparent)]
    Ocp(#[from] OcpError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
}

/// An extremal on a uniform grid. `theta` integrates `θ' = ∂ℋ/∂t` from
/// `θ(t₀) = ℋ(z₀, t₀)`, so `ℋ - θ` is conserved.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `(x, psi)` per node.
    pub states: Vec<Vec<f64>>,
    /// Stationary controls per node (implicit backend only).
    pub controls: Vec<Vec<f64>>,
    pub hamiltonian_values: Vec<f64>,
    pub theta: Vec<f64>,
    /// Evaluated points, with `H` and the controls bound.
    pub points: Vec<PhasePoint>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Integrates the flow of `ℋ` from `(x, psi) = z0` at `t0` over a
/// duration `span` with `round(span / h)` equal steps.
pub fn integrate_extremal(
    th: &TrueHamiltonian,
    z0: &[f64],
    t0: f64,
    span: f64,
    h: f64,
) -> Result<Trajectory, VerifyError> {
    let dim = 2 * th.n();
    if z0.len() != dim {
        return Err(VerifyError::InvalidGrid(format!("initial state has {} entries, expected {dim}", z0.len())));
    }
    if !(h > 0.0 && span >= 0.0 && h.is_finite() && span.is_finite()) {
        return Err(VerifyError::InvalidGrid(format!("step {h} over span {span}")));
    }
    let steps = (span / h).round().max(1.0) as usize;
    let dt = span / steps as f64;

    let mut flow = hamiltonian_flow(th);
    // derivative of (x, psi, theta) at (z, t)
    let mut rhs = |z: &[f64], t: f64| -> Result<(Vec<f64>, PhasePoint), VerifyError> {
        let mut full = z[..dim].to_vec();
        full.push(t);
        let pole = || VerifyError::PoleEncountered { t };
        match flow.rhs(&full) {
            Ok((mut d, p)) => {
                if !th.away_from_poles(&p.values, POLE_THRESHOLD) {
                    return Err(pole());
                }
                d.push(p.gradient[dim]);
                Ok((d, p))
            }
            Err(OcpError::Eval(_)) => Err(pole()),
            Err(e) => Err(e.into()),
        }
    };

    let mut traj = Trajectory {
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        controls: Vec::new(),
        hamiltonian_values: Vec::with_capacity(steps + 1),
        theta: Vec::with_capacity(steps + 1),
        points: Vec::with_capacity(steps + 1),
    };
    let implicit = !th.is_closed_form();
    let record = |traj: &mut Trajectory, y: &[f64], t: f64, p: PhasePoint| {
        traj.times.push(t);
        traj.states.push(y[..dim].to_vec());
        traj.hamiltonian_values.push(p.hamiltonian);
        traj.theta.push(y[dim]);
        if implicit {
            let ctl = th.table.controls().map(|u| p.values[u.index()]).collect();
            traj.controls.push(ctl);
        }
        traj.points.push(p);
    };

    let mut y = z0.to_vec();
    let (mut k1, p0) = rhs(&y, t0)?;
    y.push(p0.hamiltonian);
    record(&mut traj, &y, t0, p0);
    let axpy = |y: &[f64], k: &[f64], a: f64| -> Vec<f64> { y.iter().zip(k).map(|(y, k)| y + a * k).collect() };
    for s in 0..steps {
        let t = t0 + s as f64 * dt;
        let (k2, _) = rhs(&axpy(&y, &k1, dt / 2.0), t + dt / 2.0)?;
        let (k3, _) = rhs(&axpy(&y, &k2, dt / 2.0), t + dt / 2.0)?;
        let (k4, _) = rhs(&axpy(&y, &k3, dt), t + dt)?;
        for i in 0..y.len() {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let t_next = t0 + (s + 1) as f64 * dt;
        let (k, p) = rhs(&y, t_next)?;
        record(&mut traj, &y, t_next, p);
        k1 = k;
    }
    Ok(traj)
}

/// Integrates `count` extremals from seeded random starts, skipping starts
/// whose trajectory meets a pole or loses the maximizing control. Gives up
/// after `8·count` starts.
pub fn random_extremals(
    th: &TrueHamiltonian,
    sampler: &Sampler,
    seed: u64,
    count: usize,
    span: f64,
    h: f64,
) -> Result<Vec<Trajectory>, VerifyError> {
    let dim = 2 * th.n();
    let budget = 8 * count.max(1);
    let starts: Vec<Vec<f64>> = (0..budget)
        .map(|k| sampler.draw(&mut point_rng(seed, Stream::Extremals, k as u64)))
        .collect::<Result<_, _>>()?;
    let results: Vec<Result<Trajectory, VerifyError>> = starts
        .par_iter()
        .map(|z| {
            let t0 = if z[dim].is_nan() { 0.0 } else { z[dim] };
            integrate_extremal(th, &z[..dim], t0, span, h)
        })
        .collect();
    let mut out = Vec::with_capacity(count);
    for r in results {
        match r {
            Ok(t) if out.len() < count => out.push(t),
            Ok(_) => break,
            Err(VerifyError::PoleEncountered { .. })
            | Err(VerifyError::Ocp(OcpError::NewtonDivergence { .. } | OcpError::NotAMaximum { .. })) => {}
            Err(e) => return Err(e),
        }
    }
    if out.len() < count {
        return Err(VerifyError::TooFewExtremals { got: out.len(), wanted: count });
    }
    Ok(out)
}

/// `max_k |F(z_k, t_k) - F(z_0, t_0)|` over the grid.
pub fn conservation_drift(f: &PhaseFunction, traj: &Trajectory) -> Result<f64, EvalError> {
    let Some(first) = traj.points.first() else {
        return Ok(0.0);
    };
    let f0 = f.value(first)?;
    let mut worst = 0.0f64;
    for p in &traj.points {
        worst = worst.max((f.value(p)? - f0).abs());
    }
    Ok(worst)
}

/// Drift of `ℋ - θ`, which is conserved whether or not `ℋ` depends on `t`.
pub fn autonomized_drift(traj: &Trajectory) -> f64 {
    let k0 = traj.hamiltonian_values[0] - traj.theta[0];
    traj.hamiltonian_values.iter().zip(&traj.theta).map(|(h, th)| (h - th - k0).abs()).fold(0.0, f64::max)
}

/// Drift of an expression (which may mention the placeholder `H`).
pub fn expr_drift(f: &Expr, table: &SymbolTable, traj: &Trajectory) -> Result<f64, EvalError> {
    conservation_drift(&PhaseFunction::new(f, table), traj)
}

/// Central-difference bracket `Σ_i (∂F/∂x_i ∂G/∂psi_i - ∂F/∂psi_i ∂G/∂x_i)`
/// at a phase point `(x, psi, t)`. `F` and `G` must be functions of the
/// phase coordinates only.
pub fn fd_bracket_oracle(f: &Expr, g: &Expr, table: &SymbolTable, point: &[f64], h: f64) -> Result<f64, EvalError> {
    let n = table.n();
    let mut values = vec![f64::NAN; table.len()];
    values[..point.len()].copy_from_slice(point);
    let mut partial = |e: &Expr, k: usize| -> Result<f64, EvalError> {
        let base = values[k];
        values[k] = base + h;
        let up = e.eval_slice(&values);
        values[k] = base - h;
        let down = e.eval_slice(&values);
        values[k] = base;
        Ok((up? - down?) / (2.0 * h))
    };
    let mut total = 0.0;
    for i in 0..n {
        let (fx, fp) = (partial(f, i)?, partial(f, n + i)?);
        let (gx, gp) = (partial(g, i)?, partial(g, n + i)?);
        total += fx * gp - fp * gx;
    }
    Ok(total)
}
