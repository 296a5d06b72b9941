//! Structured search for a certificate and the gates it must pass.

use nalgebra::DMatrix;
use num_traits::{One, Zero};
use rand::Rng;
use rayon::prelude::*;

use super::lie::{admissible_levels, check_solvable_lie, Solvability, StructureTensor};
use super::{bracket_matrix, fit_in_span, BracketMatrix, Decomposition, KkError};
use crate::linalg::{numeric_rank, pseudo_inverse, to_f64};
use crate::noether::Family;
use crate::ocp::TrueHamiltonian;
use crate::poisson::PhaseFunction;
use crate::sampling::{point_rng, Sampler, Stream};
use crate::symexpr::Rational;

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateOptions {
    pub seed: u64,
    /// Fit rows for the closure decomposition; default `3m + 10`.
    pub fit_points: Option<usize>,
    pub holdout: usize,
    /// Level-set points for the rank gate.
    pub rank_points: usize,
    pub closure_tol: f64,
    pub max_denominator: i64,
    /// Cap on candidates per deterministic strategy.
    pub max_subsets: usize,
    pub random_trials: usize,
}

impl Default for CertificateOptions {
    fn default() -> Self {
        CertificateOptions {
            seed: 42,
            fit_points: None,
            holdout: 100,
            rank_points: 5,
            closure_tol: 1e-7,
            max_denominator: 64,
            max_subsets: 2000,
            random_trials: 64,
        }
    }
}

/// How a selection was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    StandardBasis,
    WithHamiltonian,
    Random,
    Given,
}

/// Gates in the order they are checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Gate {
    FamilySize,
    Selection,
    Independence,
    Closure,
    Solvability,
    Levels,
    Rank,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    SolvableOnLevelSet,
    Inconclusive { gate: Gate, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankSample {
    /// Projected phase point `(x, psi, t)`.
    pub point: Vec<f64>,
    pub rank: usize,
    pub level_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RankEvidence {
    pub samples: Vec<RankSample>,
    /// Seeds whose projection diverged or left the evaluable region.
    pub skipped: usize,
}

impl RankEvidence {
    pub fn full_rank(&self, n: usize) -> bool {
        !self.samples.is_empty() && self.samples.iter().all(|s| s.rank == n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    /// Rows `λ^i` of `Λ`, each over the `m` family components.
    pub lambdas: Vec<Vec<Rational>>,
    pub strategy: Strategy,
    pub xi: Option<StructureTensor>,
    /// Worst relative holdout error of the closure fits.
    pub closure_residual: Option<f64>,
    pub solvability: Option<Solvability>,
    pub r_basis: Vec<Vec<Rational>>,
    pub rank_evidence: Option<RankEvidence>,
    pub verdict: Verdict,
    /// Selections examined by the search.
    pub candidates_tried: usize,
}

impl Certificate {
    pub fn is_solvable(&self) -> bool {
        self.verdict == Verdict::SolvableOnLevelSet
    }

    /// Last gate reached; passing certificates report past every gate.
    fn depth(&self) -> Option<Gate> {
        match &self.verdict {
            Verdict::SolvableOnLevelSet => None,
            Verdict::Inconclusive { gate, .. } => Some(*gate),
        }
    }

    fn empty(lambdas: Vec<Vec<Rational>>, strategy: Strategy, gate: Gate, reason: String) -> Self {
        Certificate {
            lambdas,
            strategy,
            xi: None,
            closure_residual: None,
            solvability: None,
            r_basis: Vec::new(),
            rank_evidence: None,
            verdict: Verdict::Inconclusive { gate, reason },
            candidates_tried: 0,
        }
    }
}

/// Family values and bracket matrices at a set of points.
struct Samples {
    values: Vec<Vec<f64>>,
    brackets: Vec<DMatrix<f64>>,
    hamiltonian: Vec<f64>,
}

fn sample(
    bm: &BracketMatrix,
    th: &TrueHamiltonian,
    sampler: &Sampler,
    seed: u64,
    stream: Stream,
    count: usize,
) -> Result<Samples, KkError> {
    let pts = th.sample_points(sampler, seed, stream, count)?;
    let rows = pts.par_iter().map(|p| bm.eval(p)).collect::<Result<Vec<_>, _>>()?;
    let (values, brackets) = rows.into_iter().unzip();
    Ok(Samples { values, brackets, hamiltonian: pts.iter().map(|p| p.hamiltonian).collect() })
}

struct Context<'a> {
    th: &'a TrueHamiltonian,
    sampler: &'a Sampler,
    bm: BracketMatrix,
    fit: Samples,
    hold: Samples,
    opts: &'a CertificateOptions,
    n: usize,
}

impl Samples {
    /// `P × n` matrix of `ϝ(λ^i)` values.
    fn selection_values(&self, lam: &[Vec<f64>]) -> DMatrix<f64> {
        DMatrix::from_fn(self.values.len(), lam.len(), |p, i| dot(&lam[i], &self.values[p]))
    }

    /// `(λ^i)ᵀ A λ^j` at every point.
    fn selection_bracket(&self, li: &[f64], lj: &[f64]) -> Vec<f64> {
        self.brackets
            .iter()
            .map(|a| {
                let x = DMatrix::from_column_slice(lj.len(), 1, lj);
                let ax = a * x;
                dot(li, ax.as_slice())
            })
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn floats(lambdas: &[Vec<Rational>]) -> Vec<Vec<f64>> {
    lambdas.iter().map(|l| l.iter().map(to_f64).collect()).collect()
}

impl Context<'_> {
    fn evaluate(&self, lambdas: Vec<Vec<Rational>>, strategy: Strategy) -> Certificate {
        let n = self.n;
        if lambdas.len() != n {
            let reason = format!("{} combinations given for n = {n}", lambdas.len());
            return Certificate::empty(lambdas, strategy, Gate::Selection, reason);
        }
        for i in 0..n {
            if lambdas[i].iter().all(Zero::is_zero) {
                let reason = format!("combination {} is zero", i + 1);
                return Certificate::empty(lambdas, strategy, Gate::Selection, reason);
            }
            if let Some(j) = (0..i).find(|&j| lambdas[j] == lambdas[i]) {
                let reason = format!("combinations {} and {} coincide", j + 1, i + 1);
                return Certificate::empty(lambdas, strategy, Gate::Selection, reason);
            }
        }
        let lam = floats(&lambdas);
        let fv = self.fit.selection_values(&lam);
        let rank = numeric_rank(&fv, 1e-9);
        if rank < n {
            let reason = format!("selected integrals span only {rank} of {n} dimensions");
            return Certificate::empty(lambdas, strategy, Gate::Independence, reason);
        }
        let hv = self.hold.selection_values(&lam);
        let mut xi = StructureTensor::zero(n);
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                let fg = self.fit.selection_bracket(&lam[i], &lam[j]);
                let hg = self.hold.selection_bracket(&lam[i], &lam[j]);
                match fit_in_span(&fg, &fv, &hg, &hv, self.opts.max_denominator, self.opts.closure_tol) {
                    Decomposition::Member(f) if f.exact.is_some() => {
                        worst = worst.max(f.residual);
                        xi.set(i, j, f.exact.unwrap());
                    }
                    Decomposition::Member(f) => {
                        let reason = format!(
                            "bracket ({}, {}) closes only with irrational constants (residual {:.3e})",
                            i + 1,
                            j + 1,
                            f.residual
                        );
                        let mut c = Certificate::empty(lambdas, strategy, Gate::Closure, reason);
                        c.closure_residual = Some(worst.max(f.residual));
                        return c;
                    }
                    Decomposition::Fail { residual } => {
                        let reason =
                            format!("bracket ({}, {}) leaves the span (residual {residual:.3e})", i + 1, j + 1);
                        let mut c = Certificate::empty(lambdas, strategy, Gate::Closure, reason);
                        c.closure_residual = Some(residual);
                        return c;
                    }
                }
            }
        }
        let solv = check_solvable_lie(&xi);
        let mut c = Certificate::empty(lambdas, strategy, Gate::Solvability, String::new());
        c.closure_residual = Some(worst);
        c.solvability = Some(solv.clone());
        c.xi = Some(xi.clone());
        if !solv.is_solvable() {
            c.verdict = Verdict::Inconclusive {
                gate: Gate::Solvability,
                reason: "derived series stabilizes at a nonzero algebra".into(),
            };
            return c;
        }
        c.r_basis = admissible_levels(&xi);
        if c.r_basis.is_empty() {
            c.verdict = Verdict::Inconclusive { gate: Gate::Levels, reason: "only r = 0 is admissible".into() };
            return c;
        }
        let funcs = self.bm.functions();
        let ev = independence_rank(
            funcs,
            &lam,
            self.th,
            self.sampler,
            &c.r_basis,
            self.opts.rank_points,
            self.opts.seed,
        );
        let full = ev.full_rank(n);
        c.verdict = if full {
            Verdict::SolvableOnLevelSet
        } else if ev.samples.is_empty() {
            Verdict::Inconclusive { gate: Gate::Rank, reason: "no level-set point could be reached".into() }
        } else {
            let low = ev.samples.iter().map(|s| s.rank).min().unwrap_or(0);
            Verdict::Inconclusive { gate: Gate::Rank, reason: format!("rank {low} < {n} on the level set") }
        };
        c.rank_evidence = Some(ev);
        c
    }
}

fn build_context<'a>(
    fam: &Family,
    th: &'a TrueHamiltonian,
    sampler: &'a Sampler,
    n: usize,
    opts: &'a CertificateOptions,
) -> Result<Context<'a>, KkError> {
    let bm = bracket_matrix(fam)?;
    let fit_count = opts.fit_points.unwrap_or(3 * fam.m() + 10);
    let fit = sample(&bm, th, sampler, opts.seed, Stream::Certificate, fit_count)?;
    let hold = sample(&bm, th, sampler, opts.seed, Stream::CertificateHoldout, opts.holdout)?;
    Ok(Context { th, sampler, bm, fit, hold, opts, n })
}

/// Runs every gate on a given `Λ` (rows over the family components).
pub fn certify_selection(
    fam: &Family,
    th: &TrueHamiltonian,
    sampler: &Sampler,
    lambdas: &[Vec<Rational>],
    opts: &CertificateOptions,
) -> Result<Certificate, KkError> {
    let ctx = build_context(fam, th, sampler, th.n(), opts)?;
    let mut c = ctx.evaluate(lambdas.to_vec(), Strategy::Given);
    c.candidates_tried = 1;
    Ok(c)
}

fn unit(m: usize, k: usize) -> Vec<Rational> {
    (0..m).map(|i| if i == k { Rational::one() } else { Rational::zero() }).collect()
}

/// Advances `c` to the next `k`-subset of `0..m` in lexicographic order.
fn next_combination(c: &mut [usize], m: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < m - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn subsets(m: usize, k: usize, cap: usize) -> Vec<Vec<usize>> {
    if k > m {
        return Vec::new();
    }
    let mut c: Vec<usize> = (0..k).collect();
    let mut out = vec![c.clone()];
    while out.len() < cap && next_combination(&mut c, m) {
        out.push(c.clone());
    }
    out
}

/// Searches selections in a fixed order: standard-basis subsets, subsets
/// of size `n - 1` completed by `ℋ`'s coordinates, then seeded random
/// combinations with entries in `-2..=2`. The first passing selection
/// wins; otherwise the selection that got furthest through the gates is
/// returned.
pub fn find_certificate(
    fam: &Family,
    th: &TrueHamiltonian,
    sampler: &Sampler,
    n: usize,
    opts: &CertificateOptions,
) -> Result<Certificate, KkError> {
    let m = fam.m();
    if m < n {
        let reason = format!("family has {m} independent integrals, fewer than n = {n}");
        return Ok(Certificate::empty(Vec::new(), Strategy::StandardBasis, Gate::FamilySize, reason));
    }
    let ctx = build_context(fam, th, sampler, n, opts)?;
    let mut best: Option<Certificate> = None;
    let mut tried = 0usize;

    let mut consider = |c: Certificate, tried: usize| -> Option<Certificate> {
        if c.is_solvable() {
            let mut c = c;
            c.candidates_tried = tried;
            return Some(c);
        }
        if best.as_ref().is_none_or(|b| c.depth() > b.depth()) {
            best = Some(c);
        }
        None
    };

    // evaluated in parallel batches; the earliest passing index wins
    let mut run = |cands: Vec<Vec<Vec<Rational>>>, strategy: Strategy, tried: &mut usize| -> Option<Certificate> {
        for batch in cands.chunks(64) {
            let results: Vec<Certificate> = batch.par_iter().map(|l| ctx.evaluate(l.clone(), strategy)).collect();
            for c in results {
                *tried += 1;
                if let Some(ok) = consider(c, *tried) {
                    return Some(ok);
                }
            }
        }
        None
    };

    let standard: Vec<Vec<Vec<Rational>>> =
        subsets(m, n, opts.max_subsets).into_iter().map(|s| s.iter().map(|&k| unit(m, k)).collect()).collect();
    if let Some(c) = run(standard, Strategy::StandardBasis, &mut tried) {
        return Ok(c);
    }

    let h_fit = DMatrix::from_fn(ctx.fit.values.len(), m, |p, k| ctx.fit.values[p][k]);
    let h_hold = DMatrix::from_fn(ctx.hold.values.len(), m, |p, k| ctx.hold.values[p][k]);
    let lam_h = match fit_in_span(
        &ctx.fit.hamiltonian,
        &h_fit,
        &ctx.hold.hamiltonian,
        &h_hold,
        opts.max_denominator,
        opts.closure_tol,
    ) {
        Decomposition::Member(f) => f.exact,
        Decomposition::Fail { .. } => None,
    };
    if let Some(lh) = lam_h {
        let with_h: Vec<Vec<Vec<Rational>>> = subsets(m, n - 1, opts.max_subsets)
            .into_iter()
            .map(|s| {
                let mut l: Vec<Vec<Rational>> = s.iter().map(|&k| unit(m, k)).collect();
                l.push(lh.clone());
                l
            })
            .collect();
        if let Some(c) = run(with_h, Strategy::WithHamiltonian, &mut tried) {
            return Ok(c);
        }
    }

    let random: Vec<Vec<Vec<Rational>>> = (0..opts.random_trials)
        .map(|k| {
            let mut rng = point_rng(opts.seed, Stream::Search, k as u64);
            (0..n)
                .map(|_| (0..m).map(|_| Rational::from_integer(rng.random_range(-2i64..=2).into())).collect())
                .collect()
        })
        .collect();
    if let Some(c) = run(random, Strategy::Random, &mut tried) {
        return Ok(c);
    }

    let mut c = best.expect("at least one candidate was examined");
    c.candidates_tried = tried;
    Ok(c)
}

/// Projects `k_points` random seeds onto the level set
/// `{ϝ(λ^i)(z) = r*_i}` (time held fixed), where `r*` is the seed's level
/// vector projected onto the admissible subspace, and records the rank of
/// the `n × 2n` Jacobian there. `funcs` are the family components and
/// `lambdas` the selection rows over them.
pub fn independence_rank(
    funcs: &[PhaseFunction],
    lambdas: &[Vec<f64>],
    th: &TrueHamiltonian,
    sampler: &Sampler,
    r_basis: &[Vec<Rational>],
    k_points: usize,
    seed: u64,
) -> RankEvidence {
    let n = th.n();
    let two_n = 2 * n;
    let sel = lambdas.len();
    let r = DMatrix::from_fn(sel, r_basis.len(), |i, k| to_f64(&r_basis[k][i]));
    let proj = if r_basis.is_empty() { DMatrix::zeros(sel, sel) } else { &r * pseudo_inverse(&r, 1e-12) };

    let mut ev = th.evaluator();
    // values and Jacobian of the selection at z
    let mut eval = |z: &[f64]| -> Option<(Vec<f64>, DMatrix<f64>)> {
        let p = ev.eval(z).ok()?;
        let vals: Vec<f64> = funcs.iter().map(|f| f.value(&p)).collect::<Result<_, _>>().ok()?;
        let grads: Vec<Vec<f64>> = funcs.iter().map(|f| f.gradient(&p)).collect::<Result<_, _>>().ok()?;
        let f: Vec<f64> = lambdas.iter().map(|l| dot(l, &vals)).collect();
        let j = DMatrix::from_fn(sel, two_n, |i, c| lambdas[i].iter().zip(&grads).map(|(a, g)| a * g[c]).sum());
        (f.iter().chain(j.iter()).all(|x| x.is_finite())).then_some((f, j))
    };

    let mut out = RankEvidence::default();
    for k in 0..k_points {
        let mut rng = point_rng(seed, Stream::Rank, k as u64);
        let Ok(z0) = sampler.draw(&mut rng) else {
            out.skipped += 1;
            continue;
        };
        let mut z = z0[..=two_n].to_vec();
        let Some((f0, _)) = eval(&z) else {
            out.skipped += 1;
            continue;
        };
        let target: Vec<f64> = (&proj * DMatrix::from_column_slice(sel, 1, &f0)).iter().copied().collect();
        let mut alive = true;
        for _ in 0..200 {
            let Some((f, j)) = eval(&z) else {
                alive = false;
                break;
            };
            let res = DMatrix::from_fn(sel, 1, |i, _| f[i] - target[i]);
            let step = pseudo_inverse(&j, 1e-12) * res;
            if !step.iter().all(|s| s.is_finite()) {
                alive = false;
                break;
            }
            for c in 0..two_n {
                z[c] -= step[c];
            }
            if step.amax() < 1e-15 {
                break;
            }
        }
        let accepted = alive
            && th.away_from_poles(&z, 1e-3)
            && match eval(&z) {
                Some((f, j)) => {
                    let level_residual = f.iter().zip(&target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    if level_residual < 1e-10 {
                        out.samples.push(RankSample { point: z.clone(), rank: numeric_rank(&j, 1e-8), level_residual });
                        true
                    } else {
                        false
                    }
                }
                None => false,
            };
        if !accepted {
            out.skipped += 1;
        }
    }
    out
}
