//! Problem files, the built-in examples, and the end-to-end analysis that
//! the command-line tool drives.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use num_traits::FromPrimitive;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kk::{find_certificate, Certificate, CertificateOptions, KkError, SolvabilityClass, Verdict};
use crate::linalg::rationalize;
use crate::noether::{discover_family, discover_polynomial_integrals, DiscoveryOptions, Family, NoetherError};
use crate::ocp::{Backend, ControlLaw, OcpError, Problem, TrueHamiltonian};
use crate::symexpr::{parse, Expr, ParseError, Rational, SymId, SymbolError, SymbolTable};
use crate::verify::{autonomized_drift, conservation_drift, random_extremals};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid problem file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema: {0}")]
    Schema(String),
    #[error("in {field}: {source}")]
    Parse { field: String, source: ParseError },
    #[error("unknown builtin `{0}` (known: dubins, trailer, martinet, sr-2-3, sr-2-3-4, sr-2-3-5)")]
    UnknownBuiltin(String),
    #[error("symbols: {0}")]
    Symbol(#[from] SymbolError),
    #[error("ocp: {0}")]
    Ocp(#[from] OcpError),
    #[error("noether: {0}")]
    Noether(#[from] NoetherError),
    #[error("kk: {0}")]
    Kk(#[from] KkError),
}

fn default_time() -> String {
    "t".into()
}

/// JSON description of an optimal control problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub name: String,
    pub states: Vec<String>,
    pub controls: Vec<String>,
    #[serde(default = "default_time")]
    pub time: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub parameters: BTreeMap<String, f64>,
    pub lagrangian: String,
    pub dynamics: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control_solution: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control_guess: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling_box: Option<BTreeMap<String, [f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excluded_denominators: Option<Vec<String>>,
}

fn param_value(name: &str, x: f64) -> Result<Rational, CliError> {
    if !x.is_finite() {
        return Err(CliError::Schema(format!("parameter `{name}` is not finite")));
    }
    Ok(rationalize(x, 1_000_000, 1e-12).unwrap_or_else(|| Rational::from_f64(x).expect("finite")))
}

impl ProblemFile {
    pub fn from_json(s: &str) -> Result<Self, CliError> {
        let f: ProblemFile = serde_json::from_str(s)?;
        f.validate()?;
        Ok(f)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let s = std::fs::read_to_string(path)
            .map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem files serialize")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let n = self.states.len();
        if n == 0 {
            return Err(CliError::Schema("no states".into()));
        }
        if self.dynamics.len() != n {
            return Err(CliError::Schema(format!("{} dynamics for {} states", self.dynamics.len(), n)));
        }
        if let Some(c) = &self.control_solution {
            if c.len() != self.controls.len() {
                return Err(CliError::Schema(format!(
                    "control_solution has {} entries for {} controls",
                    c.len(),
                    self.controls.len()
                )));
            }
        }
        if let Some(g) = &self.control_guess {
            if g.len() != self.controls.len() {
                return Err(CliError::Schema(format!(
                    "control_guess has {} entries for {} controls",
                    g.len(),
                    self.controls.len()
                )));
            }
        }
        if let Some(b) = &self.sampling_box {
            for (s, [lo, hi]) in b {
                if !(lo <= hi) {
                    return Err(CliError::Schema(format!("empty sampling interval for `{s}`")));
                }
            }
        }
        Ok(())
    }

    /// Copy with parameter values replaced; unknown names are rejected.
    pub fn with_params(&self, overrides: &[(String, f64)]) -> Result<Self, CliError> {
        let mut out = self.clone();
        for (k, v) in overrides {
            match out.parameters.get_mut(k) {
                Some(slot) => *slot = *v,
                None => return Err(CliError::Schema(format!("unknown parameter `{k}`"))),
            }
        }
        Ok(out)
    }

    /// Parses the expressions, substitutes parameter values, and builds the
    /// problem.
    pub fn to_problem(&self) -> Result<Problem, CliError> {
        self.validate()?;
        let names = |v: &[String]| v.iter().map(String::clone).collect::<Vec<_>>();
        let states = names(&self.states);
        let controls = names(&self.controls);
        let params: Vec<&str> = self.parameters.keys().map(String::as_str).collect();
        let table = SymbolTable::new(
            &states.iter().map(String::as_str).collect::<Vec<_>>(),
            &controls.iter().map(String::as_str).collect::<Vec<_>>(),
            &self.time,
            &params,
        )?;
        let mut values = BTreeMap::new();
        for (k, &v) in &self.parameters {
            let id = table.lookup(k).expect("parameter was just registered");
            values.insert(id, Expr::num(param_value(k, v)?));
        }
        let read = |field: String, s: &str| -> Result<Expr, CliError> {
            let e = parse(s, &table).map_err(|source| CliError::Parse { field, source })?;
            Ok(e.substitute(&values).simplify())
        };
        let lagrangian = read("lagrangian".into(), &self.lagrangian)?;
        let dynamics = self
            .dynamics
            .iter()
            .enumerate()
            .map(|(i, s)| read(format!("dynamics[{i}]"), s))
            .collect::<Result<Vec<_>, _>>()?;
        let mut p = Problem::new(&self.name, table.clone(), lagrangian, dynamics)?;
        p.parameters = self
            .parameters
            .iter()
            .map(|(k, &v)| Ok((k.clone(), param_value(k, v)?)))
            .collect::<Result<_, CliError>>()?;
        if let Some(b) = &self.sampling_box {
            for (s, [lo, hi]) in b {
                let id = table.lookup(s).ok_or_else(|| CliError::Schema(format!("unknown symbol `{s}` in box")))?;
                if !table.is_phase_or_time(id) && !table.controls().any(|u| u == id) {
                    return Err(CliError::Schema(format!("`{s}` cannot be boxed")));
                }
                p.sampling_box.insert(id, (*lo, *hi));
            }
        }
        if let Some(ex) = &self.excluded_denominators {
            for (i, s) in ex.iter().enumerate() {
                p.excluded_denominators.push(read(format!("excluded_denominators[{i}]"), s)?);
            }
            p.collect_denominators();
        }
        if let Some(sol) = &self.control_solution {
            let law = sol
                .iter()
                .enumerate()
                .map(|(i, s)| read(format!("control_solution[{i}]"), s))
                .collect::<Result<Vec<_>, _>>()?;
            p.control_law = Some(ControlLaw::ClosedForm(law));
        }
        p.control_guess = self.control_guess.clone();
        Ok(p)
    }
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn sub_riemannian(name: &str, alpha: bool, beta: bool) -> ProblemFile {
    let n = 3 + alpha as usize + beta as usize;
    let states: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    let mut dynamics = strings(&["u1", "u2", "x1*u2"]);
    let mut parameters = BTreeMap::new();
    if alpha {
        dynamics.push("alpha*x1^2/2*u2".into());
        parameters.insert("alpha".into(), 1.0);
    }
    if beta {
        dynamics.push("beta*x1*x2*u2".into());
        parameters.insert("beta".into(), 1.0);
    }
    ProblemFile {
        name: name.into(),
        states,
        controls: strings(&["u1", "u2"]),
        time: default_time(),
        parameters,
        lagrangian: "(u1^2 + u2^2)/2".into(),
        dynamics,
        control_solution: None,
        control_guess: None,
        sampling_box: None,
        excluded_denominators: None,
    }
}

pub const BUILTINS: [&str; 6] = ["dubins", "trailer", "martinet", "sr-2-3", "sr-2-3-4", "sr-2-3-5"];

/// The example problems shipped with the tool.
pub fn builtin(name: &str) -> Result<ProblemFile, CliError> {
    let base = |name: &str, dynamics: &[&str]| ProblemFile {
        name: name.into(),
        states: (1..=dynamics.len()).map(|i| format!("x{i}")).collect(),
        controls: strings(&["u1", "u2"]),
        time: default_time(),
        parameters: BTreeMap::new(),
        lagrangian: "(u1^2 + u2^2)/2".into(),
        dynamics: strings(dynamics),
        control_solution: None,
        control_guess: None,
        sampling_box: None,
        excluded_denominators: None,
    };
    Ok(match name {
        "dubins" => base("dubins", &["u1*cos(x3)", "u1*sin(x3)", "u2"]),
        "martinet" => {
            let mut f = base("martinet", &["u1", "u2/(1 + alpha*x1)", "x2^2*u1"]);
            f.parameters.insert("alpha".into(), 1.0);
            f
        }
        "trailer" => {
            let mut f = base(
                "trailer",
                &[
                    "u1*cos(x3)",
                    "u1*sin(x3)",
                    "u1*tan(u2)/c",
                    "u1*(a/c*tan(u2)*cos(x3 - x4) - sin(x3 - x4))/b",
                ],
            );
            f.lagrangian = "u1^2 + u2^2".into();
            f.parameters = [("a", 1.0), ("b", 1.0), ("c", 1.0)].into_iter().map(|(k, v)| (k.into(), v)).collect();
            f.control_guess = Some(vec![0.0, 0.0]);
            // keeps the stationary steering angle well inside (-pi/2, pi/2)
            let mut b = BTreeMap::new();
            for i in 1..=4 {
                b.insert(format!("psi{i}"), [-0.5, 0.5]);
            }
            f.sampling_box = Some(b);
            f
        }
        "sr-2-3" => sub_riemannian("sr-2-3", false, false),
        "sr-2-3-4" => sub_riemannian("sr-2-3-4", true, false),
        "sr-2-3-5" => sub_riemannian("sr-2-3-5", true, true),
        other => return Err(CliError::UnknownBuiltin(other.into())),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Json,
    Text,
}

/// Pipeline settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Flags {
    pub degree: u32,
    pub samples: Option<usize>,
    pub holdout: usize,
    pub seed: u64,
    pub tol: f64,
    pub include_time: bool,
    pub poly_degree: Option<u32>,
    /// Symbols left out of the polynomial basis.
    pub poly_exclude: Vec<String>,
    pub backend: Backend,
    pub format: Format,
    pub params: Vec<(String, f64)>,
    /// Extremals integrated for the drift check; 0 skips verification.
    pub extremals: usize,
    pub horizon: f64,
    pub step: f64,
    pub timings: bool,
}

impl Default for Flags {
    fn default() -> Self {
        Flags {
            degree: 2,
            samples: None,
            holdout: 100,
            seed: 42,
            tol: 1e-8,
            include_time: true,
            poly_degree: None,
            poly_exclude: Vec::new(),
            backend: Backend::Auto,
            format: Format::Json,
            params: Vec::new(),
            extremals: 3,
            horizon: 1.0,
            step: 1e-3,
            timings: false,
        }
    }
}

impl Flags {
    fn discovery(&self) -> DiscoveryOptions {
        DiscoveryOptions {
            degree: self.degree,
            include_time: self.include_time,
            samples: self.samples,
            holdout: self.holdout,
            seed: self.seed,
            tol: self.tol,
            ..DiscoveryOptions::default()
        }
    }
}

/// Drift of one function over the verification extremals.
#[derive(Debug, Clone, PartialEq)]
pub struct Drift {
    pub expr: String,
    pub max_drift: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verification {
    Skipped,
    Failed(String),
    Done {
        extremals: usize,
        integrals: Vec<Drift>,
        /// Only for autonomous `ℋ`.
        hamiltonian_drift: Option<f64>,
        autonomized_drift: f64,
    },
}

/// Typed results of one run.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub file: ProblemFile,
    pub flags: Flags,
    pub problem: Problem,
    pub th: TrueHamiltonian,
    pub family: Option<Family>,
    /// Why discovery produced no family.
    pub family_error: Option<String>,
    pub certificate: Certificate,
    pub polynomial: Option<Result<Family, String>>,
    pub verification: Verification,
    pub timings: BTreeMap<String, f64>,
}

impl Analysis {
    pub fn is_solvable(&self) -> bool {
        self.certificate.is_solvable()
    }

    /// 0 for a certificate, 2 for an inconclusive run.
    pub fn exit_code(&self) -> i32 {
        if self.is_solvable() {
            0
        } else {
            2
        }
    }
}

/// Runs ocp → noether → kk → verify on a problem file.
pub fn analyze(file: &ProblemFile, flags: &Flags) -> Result<Analysis, CliError> {
    let mut timings = BTreeMap::new();
    let mut clock = Instant::now();
    let mut lap = |name: &str, timings: &mut BTreeMap<String, f64>| {
        timings.insert(name.to_string(), clock.elapsed().as_secs_f64() * 1e3);
        clock = Instant::now();
    };

    let file = file.with_params(&flags.params)?;
    let problem = file.to_problem()?;
    let th = TrueHamiltonian::from_problem(&problem, flags.backend)?;
    let sampler = problem.sampler();
    lap("ocp_ms", &mut timings);

    let (family, family_error) = match discover_family(&th, &sampler, &flags.discovery()) {
        Ok(f) => (Some(f), None),
        Err(e @ (NoetherError::EmptyNullspace | NoetherError::AllPruned)) => (None, Some(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    lap("noether_ms", &mut timings);

    let opts = CertificateOptions { seed: flags.seed, holdout: flags.holdout, ..CertificateOptions::default() };
    let certificate = match &family {
        Some(f) => find_certificate(f, &th, &sampler, th.n(), &opts)?,
        None => Certificate {
            lambdas: Vec::new(),
            strategy: crate::kk::Strategy::StandardBasis,
            xi: None,
            closure_residual: None,
            solvability: None,
            r_basis: Vec::new(),
            rank_evidence: None,
            verdict: Verdict::Inconclusive {
                gate: crate::kk::Gate::FamilySize,
                reason: "no first integrals were found".into(),
            },
            candidates_tried: 0,
        },
    };
    lap("kk_ms", &mut timings);

    let polynomial = match flags.poly_degree {
        None => None,
        Some(d) => {
            let excluded = flags
                .poly_exclude
                .iter()
                .map(|s| {
                    problem.table.lookup(s).ok_or_else(|| CliError::Schema(format!("unknown symbol `{s}` to exclude")))
                })
                .collect::<Result<Vec<SymId>, _>>()?;
            let mut o = flags.discovery();
            o.include_time = flags.include_time;
            Some(
                discover_polynomial_integrals(&th, &sampler, d, flags.include_time, &excluded, &o)
                    .map_err(|e| e.to_string()),
            )
        }
    };
    lap("polynomial_ms", &mut timings);

    let verification = if flags.extremals == 0 {
        Verification::Skipped
    } else {
        match random_extremals(&th, &sampler, flags.seed, flags.extremals, flags.horizon, flags.step) {
            Err(e) => Verification::Failed(e.to_string()),
            Ok(trajs) => {
                let mut integrals = Vec::new();
                let mut failure = None;
                if let Some(f) = &family {
                    for (c, func) in f.components.iter().zip(f.functions()) {
                        let mut worst = 0.0f64;
                        for tr in &trajs {
                            match conservation_drift(&func, tr) {
                                Ok(d) => worst = worst.max(d),
                                Err(e) => failure = Some(e.to_string()),
                            }
                        }
                        integrals.push(Drift { expr: c.expr.print(&problem.table), max_drift: worst });
                    }
                }
                let max_of = |g: &dyn Fn(&crate::verify::Trajectory) -> f64| trajs.iter().map(g).fold(0.0, f64::max);
                let hamiltonian_drift = th.is_autonomous().then(|| {
                    max_of(&|tr| {
                        let h0 = tr.hamiltonian_values[0];
                        tr.hamiltonian_values.iter().map(|h| (h - h0).abs()).fold(0.0, f64::max)
                    })
                });
                match failure {
                    Some(e) => Verification::Failed(e),
                    None => Verification::Done {
                        extremals: trajs.len(),
                        integrals,
                        hamiltonian_drift,
                        autonomized_drift: max_of(&autonomized_drift),
                    },
                }
            }
        }
    };
    lap("verify_ms", &mut timings);

    Ok(Analysis {
        file,
        flags: flags.clone(),
        problem,
        th,
        family,
        family_error,
        certificate,
        polynomial,
        verification,
        timings,
    })
}

// ---- report ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub seed: u64,
    pub degree: u32,
    pub include_time: bool,
    pub samples: Option<usize>,
    pub holdout: usize,
    pub tol: f64,
    pub closure_tol: f64,
    pub backend: String,
    pub poly_degree: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentReport {
    pub expr: String,
    pub exact: bool,
    pub holdout_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyReport {
    pub components: Vec<ComponentReport>,
    pub pruned: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    /// 1-based pairs `(i, j)`, `i < j`.
    pub pairs: Vec<[usize; 2]>,
    pub xi: Vec<Vec<String>>,
    pub closure_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub point: Vec<f64>,
    pub rank: usize,
    pub level_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolvabilityReport {
    /// `Abelian`, `SufficientIdentity`, `DerivedSeries(k)`, or `NotSolvable`.
    pub class: String,
    pub abelian: bool,
    /// The pairwise parallelism identity `ξ^{ab}_i ξ^{pq}_j = ξ^{pq}_i ξ^{ab}_j`.
    pub sufficient_identity: bool,
    /// First violation `(a, b, p, q, i, j)`, 1-based.
    pub identity_violation: Option<[usize; 6]>,
    pub derived_series_depth: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub verdict: String,
    pub gate: Option<String>,
    pub reason: Option<String>,
    pub strategy: String,
    pub candidates_tried: usize,
    pub lambdas: Vec<Vec<String>>,
    /// `ϝ(λ^i)` printed.
    pub selection: Vec<String>,
    pub structure: Option<StructureReport>,
    pub solvability: Option<SolvabilityReport>,
    pub r_basis: Vec<Vec<String>>,
    pub rank_evidence: Vec<RankReport>,
    pub rank_points_skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub expr: String,
    pub max_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub status: String,
    pub extremals: usize,
    pub horizon: f64,
    pub step: f64,
    pub integrals: Vec<DriftReport>,
    pub hamiltonian_drift: Option<f64>,
    pub autonomized_drift: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub problem: ProblemFile,
    pub settings: Settings,
    pub true_hamiltonian: String,
    pub autonomous: bool,
    pub family: FamilyReport,
    pub polynomial_family: Option<FamilyReport>,
    pub certificate: CertificateReport,
    pub verification: VerificationReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<BTreeMap<String, f64>>,
}

fn family_report(f: Option<&Family>, error: Option<String>, table: &SymbolTable) -> FamilyReport {
    FamilyReport {
        components: f
            .map(|f| {
                f.components
                    .iter()
                    .map(|c| ComponentReport {
                        expr: c.expr.print(table),
                        exact: c.exact,
                        holdout_residual: c.holdout_residual,
                    })
                    .collect()
            })
            .unwrap_or_default(),
        pruned: f.map_or(0, |f| f.pruned),
        error,
    }
}

fn rational_rows(rows: &[Vec<Rational>]) -> Vec<Vec<String>> {
    rows.iter().map(|r| r.iter().map(|x| x.to_string()).collect()).collect()
}

pub fn solvability_label(c: SolvabilityClass) -> String {
    match c {
        SolvabilityClass::Abelian => "Abelian".into(),
        SolvabilityClass::SufficientIdentity => "SufficientIdentity".into(),
        SolvabilityClass::DerivedSeries(k) => format!("DerivedSeries({k})"),
        SolvabilityClass::NotSolvable => "NotSolvable".into(),
    }
}

impl Analysis {
    pub fn report(&self) -> Report {
        let table = &self.problem.table;
        let c = &self.certificate;
        let (verdict, gate, reason) = match &c.verdict {
            Verdict::SolvableOnLevelSet => ("SolvableOnLevelSet".to_string(), None, None),
            Verdict::Inconclusive { gate, reason } => {
                ("Inconclusive".to_string(), Some(format!("{gate:?}")), Some(reason.clone()))
            }
        };
        let selection = match &self.family {
            Some(f) if !c.lambdas.is_empty() => c.lambdas.iter().map(|l| f.combine(l).print(table)).collect(),
            _ => Vec::new(),
        };
        let structure = c.xi.as_ref().map(|xi| StructureReport {
            pairs: xi.pairs().into_iter().map(|(i, j)| [i + 1, j + 1]).collect(),
            xi: rational_rows(&xi.pairs().into_iter().map(|(i, j)| xi.get(i, j)).collect::<Vec<_>>()),
            closure_residual: c.closure_residual,
        });
        let solvability = c.solvability.as_ref().map(|s| SolvabilityReport {
            class: solvability_label(s.class),
            abelian: s.abelian,
            sufficient_identity: s.sufficient_identity,
            identity_violation: s.identity_violation,
            derived_series_depth: s.derived_series_depth,
        });
        let (rank_evidence, rank_points_skipped) = match &c.rank_evidence {
            Some(e) => (
                e.samples
                    .iter()
                    .map(|s| RankReport { point: s.point.clone(), rank: s.rank, level_residual: s.level_residual })
                    .collect(),
                e.skipped,
            ),
            None => (Vec::new(), 0),
        };
        let f = &self.flags;
        let verification = match &self.verification {
            Verification::Skipped => VerificationReport {
                status: "skipped".into(),
                extremals: 0,
                horizon: f.horizon,
                step: f.step,
                integrals: Vec::new(),
                hamiltonian_drift: None,
                autonomized_drift: None,
                error: None,
            },
            Verification::Failed(e) => VerificationReport {
                status: "failed".into(),
                extremals: 0,
                horizon: f.horizon,
                step: f.step,
                integrals: Vec::new(),
                hamiltonian_drift: None,
                autonomized_drift: None,
                error: Some(e.clone()),
            },
            Verification::Done { extremals, integrals, hamiltonian_drift, autonomized_drift } => VerificationReport {
                status: "done".into(),
                extremals: *extremals,
                horizon: f.horizon,
                step: f.step,
                integrals: integrals.iter().map(|d| DriftReport { expr: d.expr.clone(), max_drift: d.max_drift }).collect(),
                hamiltonian_drift: *hamiltonian_drift,
                autonomized_drift: Some(*autonomized_drift),
                error: None,
            },
        };
        Report {
            problem: self.file.clone(),
            settings: Settings {
                seed: f.seed,
                degree: f.degree,
                include_time: f.include_time,
                samples: f.samples,
                holdout: f.holdout,
                tol: f.tol,
                closure_tol: CertificateOptions::default().closure_tol,
                backend: if self.th.is_closed_form() { "closed".into() } else { "implicit".into() },
                poly_degree: f.poly_degree,
            },
            true_hamiltonian: match &self.th.reduced {
                Some(h) => h.print(table),
                None => "implicit".into(),
            },
            autonomous: self.th.is_autonomous(),
            family: family_report(self.family.as_ref(), self.family_error.clone(), table),
            polynomial_family: self.polynomial.as_ref().map(|p| match p {
                Ok(f) => family_report(Some(f), None, table),
                Err(e) => family_report(None, Some(e.clone()), table),
            }),
            certificate: CertificateReport {
                verdict,
                gate,
                reason,
                strategy: format!("{:?}", c.strategy),
                candidates_tried: c.candidates_tried,
                lambdas: rational_rows(&c.lambdas),
                selection,
                structure,
                solvability,
                r_basis: rational_rows(&c.r_basis),
                rank_evidence,
                rank_points_skipped,
            },
            verification,
            timings_ms: f.timings.then(|| self.timings.clone()),
        }
    }
}

/// `analyze` followed by [`Analysis::report`].
pub fn run_analyze(file: &ProblemFile, flags: &Flags) -> Result<Report, CliError> {
    Ok(analyze(file, flags)?.report())
}

impl Report {
    pub fn is_solvable(&self) -> bool {
        self.certificate.verdict == "SolvableOnLevelSet"
    }

    pub fn exit_code(&self) -> i32 {
        if self.is_solvable() {
            0
        } else {
            2
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => self.to_json(),
            Format::Text => self.to_text(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let c = &self.certificate;
        let _ = writeln!(s, "problem: {}", self.problem.name);
        let _ = writeln!(s, "seed: {}  degree: {}  time terms: {}", self.settings.seed, self.settings.degree, self.settings.include_time);
        let _ = writeln!(s, "true Hamiltonian ({}): {}", self.settings.backend, self.true_hamiltonian);
        let _ = writeln!(s, "autonomous: {}", self.autonomous);
        let _ = writeln!(s, "\nfirst integrals ({}, {} pruned):", self.family.components.len(), self.family.pruned);
        for (k, comp) in self.family.components.iter().enumerate() {
            let tag = if comp.exact { "" } else { "  [float]" };
            let _ = writeln!(s, "  F{} = {}   (holdout {:.1e}){tag}", k + 1, comp.expr, comp.holdout_residual);
        }
        if let Some(e) = &self.family.error {
            let _ = writeln!(s, "  none: {e}");
        }
        if let Some(p) = &self.polynomial_family {
            let _ = writeln!(s, "\npolynomial integrals ({}):", p.components.len());
            for comp in &p.components {
                let _ = writeln!(s, "  {}", comp.expr);
            }
            if let Some(e) = &p.error {
                let _ = writeln!(s, "  none: {e}");
            }
        }
        let _ = writeln!(s, "\ncertificate: {}", c.verdict);
        if let (Some(g), Some(r)) = (&c.gate, &c.reason) {
            let _ = writeln!(s, "  stopped at gate {g}: {r}");
        }
        let _ = writeln!(s, "  strategy {} after {} candidates", c.strategy, c.candidates_tried);
        for (i, f) in c.selection.iter().enumerate() {
            let _ = writeln!(s, "  G{} = {}", i + 1, f);
        }
        if let Some(st) = &c.structure {
            for (p, xi) in st.pairs.iter().zip(&st.xi) {
                let _ = writeln!(s, "  xi^{}{} = ({})", p[0], p[1], xi.join(", "));
            }
            if let Some(r) = st.closure_residual {
                let _ = writeln!(s, "  closure residual {r:.1e}");
            }
        }
        if let Some(sv) = &c.solvability {
            let _ = writeln!(
                s,
                "  solvability {}; pairwise identity {}{}",
                sv.class,
                sv.sufficient_identity,
                sv.identity_violation.map(|v| format!(" (fails at {v:?})")).unwrap_or_default()
            );
        }
        if !c.r_basis.is_empty() {
            let rows: Vec<String> = c.r_basis.iter().map(|r| format!("({})", r.join(", "))).collect();
            let _ = writeln!(s, "  admissible levels span {}", rows.join(", "));
        }
        if !c.rank_evidence.is_empty() || c.rank_points_skipped > 0 {
            let ranks: Vec<String> = c.rank_evidence.iter().map(|r| r.rank.to_string()).collect();
            let _ = writeln!(s, "  level-set ranks [{}], {} skipped", ranks.join(", "), c.rank_points_skipped);
        }
        let v = &self.verification;
        let _ = writeln!(s, "\nverification: {}", v.status);
        if let Some(e) = &v.error {
            let _ = writeln!(s, "  {e}");
        }
        for d in &v.integrals {
            let _ = writeln!(s, "  drift {:.1e}  {}", d.max_drift, d.expr);
        }
        if let Some(h) = v.hamiltonian_drift {
            let _ = writeln!(s, "  Hamiltonian drift {h:.1e}");
        }
        if let Some(k) = v.autonomized_drift {
            let _ = writeln!(s, "  autonomized drift {k:.1e}");
        }
        if let Some(t) = &self.timings_ms {
            let _ = writeln!(s, "\ntimings (ms):");
            for (k, v) in t {
                let _ = writeln!(s, "  {k}: {v:.1}");
            }
        }
        s
    }
}

/// Parses `name=value`.
pub fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|_| format!("`{v}` is not a number"))?;
    Ok((k.trim().to_string(), v))
}
