//! Helpers shared by the binary-level test targets.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_filamentlab"));
    c.env_remove("FILAMENTLAB_OUT");
    c
}

pub fn run_in(dir: &Path, mode: &str, sets: &[&str]) -> Output {
    let mut c = bin();
    c.current_dir(dir).arg(mode);
    for s in sets {
        c.arg("--set").arg(s);
    }
    c.output().expect("binary runs")
}

pub fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn json(path: PathBuf) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap()
}

/// The last stderr line is a single JSON object with the exit status.
pub fn error_line(o: &Output) -> serde_json::Value {
    let err = stderr(o);
    let line = err.lines().last().expect("an error line");
    serde_json::from_str(line).unwrap_or_else(|_| panic!("not JSON: {line}"))
}

/// `(mode, overrides, expected exit code)` for inputs that must fail.
pub fn battery(tmp: &Path) -> Vec<(&'static str, Vec<String>, i32)> {
    let garbage = tmp.join("garbage.csv");
    std::fs::write(&garbage, "s,v1,v2,v3\n0,1,0,0\n0.5,x,0,0\n1,0,0,1\n").unwrap();
    let wrong_header = tmp.join("header.csv");
    std::fs::write(&wrong_header, "s,a,b,c\n0,1,0,0\n1,0,0,1\n").unwrap();
    let not_unit = tmp.join("not_unit.csv");
    let mut text = String::from("s,v1,v2,v3\n");
    for i in 0..=8 {
        text.push_str(&format!("{},0,0,2\n", i as f64 / 8.0));
    }
    std::fs::write(&not_unit, text).unwrap();
    // a valid 32-cell datum for the grid-mismatch case
    let o = run_in(
        tmp,
        "correct-datum",
        &["datum.name=quarter-circle", "solver.eps=0.05", "n_cells=32", "out_dir=grid32"],
    );
    assert_eq!(code(&o), 0);
    let grid32 = tmp.join("grid32/corrected.csv");
    let empty_run = tmp.join("empty-run");
    std::fs::create_dir_all(&empty_run).unwrap();
    std::fs::write(empty_run.join("index.json"), "{ not json").unwrap();
    let straight = tmp.join("straight");
    let o = run_in(
        tmp,
        "simulate",
        &[
            "datum.name=constant-e3",
            "solver.eps=0",
            "solver.dt=1e-4",
            "t_end=0.001",
            "stride=1",
            &format!("out_dir={}", straight.display()),
        ],
    );
    assert_eq!(code(&o), 0);

    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    let p = |k: &str, path: &Path| format!("{k}={}", path.display());
    vec![
        // validation: simulate
        ("simulate", s(&["datum.name=nope", "solver.eps=0.1", "solver.dt=1e-4", "t_end=0.01"]), 2),
        ("simulate", s(&["datum.name=quarter-circle", "solver.eps=0.1", "solver.dt=1e-4"]), 2),
        ("simulate", s(&["datum.name=quarter-circle", "solver.eps=-1", "solver.dt=1e-4", "t_end=0.01"]), 2),
        ("simulate", s(&["datum.name=quarter-circle", "solver.eps=0.1", "solver.dt=1e-4", "t_end=0.01", "a=[0, 1, 0]"]), 2),
        ("simulate", s(&["datum.name=quarter-circle", "solver.eps=0.1", "solver.dt=1e-4", "t_end=0.01", "a=[1.001, 0, 0]"]), 2),
        ("simulate", s(&["datum.name=quarter-circle", "solver.eps=0.1", "solver.dt=1e-4", "t_end=0.01", "solver.typo=1"]), 2),
        ("simulate", s(&["datum.name=quarter-circle", "solver.eps=0.1", "solver.dt=1e-4", "t_end=0.01", "n_cells=4"]), 2),
        ("simulate", vec![p("datum.path", &garbage), "solver.eps=0.1".into(), "solver.dt=1e-4".into(), "t_end=0.01".into()], 2),
        ("simulate", vec![p("datum.path", &grid32), "n_cells=64".into(), "solver.eps=0.1".into(), "solver.dt=1e-4".into(), "t_end=0.01".into()], 2),
        // validation: check-compat
        ("check-compat", s(&["datum.name=nope"]), 2),
        ("check-compat", vec![p("datum.path", &wrong_header)], 2),
        ("check-compat", vec![p("datum.path", &not_unit)], 2),
        ("check-compat", vec![p("datum.path", &tmp.join("missing.csv"))], 2),
        ("check-compat", s(&[]), 2),
        // validation: correct-datum
        ("correct-datum", s(&["datum.name=quarter-circle", "solver.eps=0.5"]), 2),
        ("correct-datum", s(&["datum.name=bumped-quarter-circle", "solver.eps=0.05"]), 2),
        ("correct-datum", s(&["datum.name=quarter-circle"]), 2),
        // validation: sweep-eps
        ("sweep-eps", s(&["datum.name=quarter-circle", "sweep.eps=[0.05, 0.1]", "solver.dt=1e-4", "t_end=0.01"]), 2),
        ("sweep-eps", s(&["datum.name=quarter-circle", "sweep.eps=[0.1]", "solver.dt=1e-4", "t_end=0.01"]), 2),
        ("sweep-eps", s(&["datum.name=quarter-circle", "solver.dt=1e-4", "t_end=0.01"]), 2),
        // validation: diagnose
        ("diagnose", vec![p("diagnose.input", &tmp.join("nowhere"))], 2),
        ("diagnose", vec![p("diagnose.input", &empty_run)], 2),
        ("diagnose", s(&[]), 2),
        // numerical
        ("simulate", s(&["datum.name=perturbed-quarter-circle", "solver.eps=0", "solver.dt=1e-4", "t_end=0.01", "solver.max_fixed_point_iters=1"]), 3),
        ("correct-datum", s(&["datum.name=perturbed-quarter-circle", "solver.eps=0.05", "correct.newton_tol=0"]), 3),
        ("sweep-eps", s(&["datum.name=perturbed-quarter-circle", "sweep.eps=[0.1, 0.05]", "solver.dt=1e-4", "t_end=0.001", "n_cells=32", "correct.newton_tol=0"]), 3),
        ("diagnose", vec![p("diagnose.input", &straight)], 3),
    ]
}


/// Runs every battery case in `tmp`; returns `(failures, cases run)`.
pub fn run_battery(tmp: &Path) -> (Vec<String>, usize) {
    let cases = battery(tmp);
    let n = cases.len();
    let mut failures = Vec::new();
    for (k, (mode, sets, expected)) in cases.into_iter().enumerate() {
        let out_dir = tmp.join(format!("case{k}"));
        let mut all: Vec<String> = sets.clone();
        all.push(format!("out_dir={}", out_dir.display()));
        let refs: Vec<&str> = all.iter().map(String::as_str).collect();
        let o = run_in(tmp, mode, &refs);
        let got = code(&o);
        let status = if expected == 2 { "validation" } else { "numerical" };
        let line_ok = stderr(&o)
            .lines()
            .last()
            .and_then(|l| serde_json::from_str::<serde_json::Value>(l).ok())
            .is_some_and(|v| v["status"] == status && v["exit_code"] == expected);
        let report_ok = expected != 3 || {
            let f = out_dir.join("failure.json");
            f.exists() && json(f)["error"]["status"] == "numerical"
        };
        if got != expected || !line_ok || !report_ok {
            failures.push(format!("case {k} ({mode} {sets:?}): exit {got}, expected {expected}"));
        }
    }
    (failures, n)
}
