use std::path::PathBuf;
use std::process::Command;

use extremal_integrals::cli::{builtin, run_analyze, CliError, Flags, Format, ProblemFile, BUILTINS};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_extremal-integrals"))
}

fn problems_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../problems")
}

fn scratch(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("extremal-integrals-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

#[test]
fn builtins_round_trip_through_json() {
    for name in BUILTINS {
        let file = builtin(name).unwrap();
        let back = ProblemFile::from_json(&file.to_json()).unwrap();
        assert_eq!(back, file, "{name}");
        file.to_problem().unwrap();
    }
    assert!(matches!(builtin("nope"), Err(CliError::UnknownBuiltin(_))));
}

#[test]
fn shipped_problem_files_match_builtins() {
    for name in BUILTINS {
        let path = problems_dir().join(format!("{name}.json"));
        assert_eq!(ProblemFile::load(&path).unwrap(), builtin(name).unwrap(), "{name}");
    }
}

#[test]
fn builtin_contents() {
    let d = builtin("dubins").unwrap();
    assert_eq!(d.dynamics, ["u1*cos(x3)", "u1*sin(x3)", "u2"]);
    let sr = builtin("sr-2-3-5").unwrap();
    assert_eq!(sr.parameters.get("alpha"), Some(&1.0));
    assert_eq!(sr.parameters.get("beta"), Some(&1.0));
    let tr = builtin("trailer").unwrap();
    assert!(tr.control_guess.is_some());
    for k in ["a", "b", "c"] {
        assert_eq!(tr.parameters.get(k), Some(&1.0), "{k}");
    }
}

#[test]
fn schema_violations_are_rejected() {
    let mut f = builtin("dubins").unwrap();
    f.dynamics.pop();
    assert!(matches!(ProblemFile::from_json(&f.to_json()), Err(CliError::Schema(_))));
    let mut g = builtin("dubins").unwrap();
    g.control_solution = Some(vec!["psi1".into()]);
    assert!(matches!(ProblemFile::from_json(&g.to_json()), Err(CliError::Schema(_))));
    assert!(ProblemFile::from_json(r#"{"name": "x", "bogus": 1}"#).is_err());
    assert!(builtin("martinet").unwrap().with_params(&[("gamma".into(), 2.0)]).is_err());
}

#[test]
fn reports_are_byte_identical() {
    let flags = Flags::default();
    for name in ["dubins", "martinet"] {
        let file = builtin(name).unwrap();
        let a = run_analyze(&file, &flags).unwrap();
        let b = run_analyze(&file, &flags).unwrap();
        assert_eq!(a.to_json(), b.to_json(), "{name}");
        assert_eq!(a.render(Format::Text), b.render(Format::Text), "{name}");
        assert!(a.timings_ms.is_none());
    }
}

#[test]
fn martinet_with_parameter_override() {
    let flags = Flags { params: vec![("alpha".into(), 1.0)], ..Flags::default() };
    let report = run_analyze(&builtin("martinet").unwrap(), &flags).unwrap();
    let exprs: Vec<&str> = report.family.components.iter().map(|c| c.expr.as_str()).collect();
    assert!(exprs.contains(&"psi1 - 2*t*H + x1*psi1 + x3*psi3"), "{exprs:?}");
    assert_eq!(report.exit_code(), 2);
}

#[test]
fn binary_exit_codes() {
    let out = bin().args(["analyze", "--builtin", "dubins", "--degree", "2"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["certificate"]["verdict"], "SolvableOnLevelSet");
    assert_eq!(json["settings"]["seed"], 42);

    let out = bin().args(["analyze", "--builtin", "martinet", "--param", "alpha=1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = bin().args(["analyze", "--builtin", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    let mut f = builtin("dubins").unwrap();
    f.dynamics.pop();
    let bad = scratch("bad.json", &f.to_json());
    let out = bin().arg("analyze").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dynamics"));

    let good = problems_dir().join("dubins.json");
    let out = bin().arg("analyze").arg(&good).args(["--format", "text"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("SolvableOnLevelSet"));

    let out = bin().args(["builtin", "trailer"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let printed = ProblemFile::from_json(&String::from_utf8_lossy(&out.stdout)).unwrap();
    assert_eq!(printed, builtin("trailer").unwrap());
}
