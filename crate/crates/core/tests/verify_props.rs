mod common;

use common::{expr, family, hamiltonian, problem, smooth_fn};
use extremal_integrals::ocp::{Backend, Problem, TrueHamiltonian};
use extremal_integrals::poisson::PhaseFunction;
use extremal_integrals::symexpr::SymbolTable;
use extremal_integrals::verify::{
    autonomized_drift, conservation_drift, expr_drift, fd_bracket_oracle, integrate_extremal, random_extremals,
    Trajectory,
};
use proptest::prelude::*;

const DUBINS_START: [f64; 6] = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];

fn h_drift(th: &TrueHamiltonian, traj: &Trajectory) -> f64 {
    conservation_drift(&PhaseFunction::new(&expr("H", &th.table), &th.table), traj).unwrap()
}

#[test]
fn dubins_hamiltonian_is_conserved() {
    let th = hamiltonian(&problem("dubins"));
    let traj = integrate_extremal(&th, &DUBINS_START, 0.0, 1.0, 1e-3).unwrap();
    assert_eq!(traj.len(), 1001);
    assert!(h_drift(&th, &traj) < 1e-10);
}

#[test]
fn drift_converges_at_fourth_order() {
    let th = hamiltonian(&problem("dubins"));
    let drift = |h: f64| h_drift(&th, &integrate_extremal(&th, &DUBINS_START, 0.0, 4.0, h).unwrap());
    let (d1, d2, d3) = (drift(0.1), drift(0.05), drift(0.025));
    for ratio in [d1 / d2, d2 / d3] {
        assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
    }
}

#[test]
fn dubins_rotation_integral_versus_position() {
    let p = problem("dubins");
    let th = hamiltonian(&p);
    let t = &th.table;
    let trajs = random_extremals(&th, &p.sampler(), 42, 3, 1.0, 1e-3).unwrap();
    assert_eq!(trajs.len(), 3);
    for traj in &trajs {
        assert!(expr_drift(&expr("-psi1*x2 + psi2*x1 + psi3", t), t, traj).unwrap() < 1e-6);
        assert!(expr_drift(&expr("x1", t), t, traj).unwrap() > 1e-2);
    }
}

#[test]
fn every_family_component_is_conserved() {
    for name in ["dubins", "trailer", "martinet", "sr-2-3", "sr-2-3-4", "sr-2-3-5"] {
        let p = problem(name);
        let th = hamiltonian(&p);
        let fam = family(&p, &th, true);
        let trajs = random_extremals(&th, &p.sampler(), 42, 3, 1.0, 1e-3).unwrap();
        for traj in &trajs {
            for (c, f) in fam.components.iter().zip(fam.functions()) {
                let d = conservation_drift(&f, traj).unwrap();
                assert!(d < 1e-6, "{name}: {} drifts {d:e}", c.expr.print(&th.table));
            }
            if th.is_autonomous() {
                assert!(h_drift(&th, traj) < 1e-8, "{name}");
            }
            assert!(autonomized_drift(traj) < 1e-8, "{name}");
        }
    }
}

#[test]
fn autonomized_hamiltonian_of_a_time_dependent_problem() {
    // ℋ = t² psi²/2 changes along the flow, K = ℋ - theta does not
    let t = SymbolTable::standard(1, 1);
    let p = Problem::new("ramp", t.clone(), expr("u1^2/2", &t), vec![expr("t*u1", &t)]).unwrap();
    let th = TrueHamiltonian::from_problem(&p, Backend::Closed).unwrap();
    assert!(!th.is_autonomous());
    let traj = integrate_extremal(&th, &[0.3, 1.2], 0.5, 1.0, 1e-3).unwrap();
    assert!(h_drift(&th, &traj) > 0.1);
    assert!(autonomized_drift(&traj) < 1e-8);
    // theta' = ∂ℋ/∂t = t psi², with psi constant
    let last = traj.theta.last().unwrap() - traj.theta[0];
    assert!((last - 1.2f64.powi(2) * (1.5f64.powi(2) - 0.5f64.powi(2)) / 2.0).abs() < 1e-10);
}

#[test]
fn implicit_backend_tracks_closed_form() {
    let p = problem("dubins");
    let closed = TrueHamiltonian::from_problem(&p, Backend::Closed).unwrap();
    let implicit = TrueHamiltonian::from_problem(&p, Backend::Implicit).unwrap();
    let a = integrate_extremal(&closed, &DUBINS_START, 0.0, 1.0, 1e-2).unwrap();
    let b = integrate_extremal(&implicit, &DUBINS_START, 0.0, 1.0, 1e-2).unwrap();
    assert!(a.controls.is_empty());
    assert_eq!(b.controls.len(), b.len());
    for (x, y) in a.states.iter().zip(&b.states) {
        for (u, w) in x.iter().zip(y) {
            assert!((u - w).abs() < 1e-9);
        }
    }
    // stationary controls u1 = psi1 cos x3 + psi2 sin x3, u2 = psi3
    for (s, u) in b.states.iter().zip(&b.controls) {
        assert!((u[0] - (s[3] * s[2].cos() + s[4] * s[2].sin())).abs() < 1e-9);
        assert!((u[1] - s[5]).abs() < 1e-9);
    }
}

#[test]
fn martinet_pole_is_detected() {
    let p = problem("martinet");
    let th = hamiltonian(&p);
    // x1 is pushed towards -1 where 1 + x1 vanishes
    let err = integrate_extremal(&th, &[-0.9, 0.0, 0.0, -5.0, 0.0, 0.0], 0.0, 1.0, 1e-3).unwrap_err();
    assert!(matches!(err, extremal_integrals::verify::VerifyError::PoleEncountered { .. }), "{err:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn oracle_is_antisymmetric(f in smooth_fn(), g in smooth_fn(), p in common::phase_point()) {
        let t = SymbolTable::standard(2, 0);
        let a = fd_bracket_oracle(&f, &g, &t, &p, 1e-5).unwrap();
        let b = fd_bracket_oracle(&g, &f, &t, &p, 1e-5).unwrap();
        prop_assert!((a + b).abs() < 1e-9 * (1.0 + a.abs()));
    }
}
