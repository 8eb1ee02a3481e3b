use std::path::Path;
use std::process::{Command, Output};

fn dmm(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dmm"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn dmm")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json_line(o: &Output) -> serde_json::Value {
    serde_json::from_str(stdout(o).trim()).expect("one JSON line")
}

#[test]
fn gen_then_solve() {
    let dir = tempfile::tempdir().unwrap();
    let g = dmm(
        &[
            "gen", "--n", "10", "--ratio", "4.3", "--seed", "7", "--out", "a.cnf",
        ],
        dir.path(),
    );
    assert!(g.status.success(), "{}", String::from_utf8_lossy(&g.stderr));
    let text = std::fs::read_to_string(dir.path().join("a.cnf")).unwrap();
    assert!(text.contains("p cnf 10 43"));
    assert!(text
        .lines()
        .any(|l| l.starts_with("c ") && l.contains("seed=7")));

    let s = dmm(
        &["solve", "a.cnf", "--seed", "1", "--require-solved"],
        dir.path(),
    );
    assert_eq!(s.status.code(), Some(0));
    let v = json_line(&s);
    assert_eq!(v["solved"], true);
    assert_eq!(v["seed"], 1);
    assert!(v["steps"].as_u64().unwrap() > 0);
    assert!(v["integrated_time"].as_f64().unwrap() > 0.0);
}

#[test]
fn unsat_formula_exits_unsolved() {
    let dir = tempfile::tempdir().unwrap();
    let mut cnf = String::from("p cnf 3 8\n");
    for mask in 0..8 {
        let lit = |i: i32| if mask >> (i - 1) & 1 == 1 { -i } else { i };
        cnf.push_str(&format!("{} {} {} 0\n", lit(1), lit(2), lit(3)));
    }
    std::fs::write(dir.path().join("u.cnf"), cnf).unwrap();
    let s = dmm(
        &["solve", "u.cnf", "--max-steps", "200", "--require-solved"],
        dir.path(),
    );
    assert_eq!(s.status.code(), Some(2));
    assert_eq!(json_line(&s)["solved"], false);
    let plain = dmm(&["solve", "u.cnf", "--max-steps", "200"], dir.path());
    assert_eq!(plain.status.code(), Some(0));
}

#[test]
fn trace_is_written() {
    let dir = tempfile::tempdir().unwrap();
    dmm(
        &["gen", "--n", "10", "--seed", "3", "--out", "a.cnf"],
        dir.path(),
    );
    let s = dmm(
        &[
            "solve",
            "a.cnf",
            "--trace",
            "t.csv",
            "--trace-every",
            "5",
            "--white-noise",
            "0.1",
        ],
        dir.path(),
    );
    assert!(s.status.success());
    let trace = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next().unwrap(), "t,v1,v2,v3,v4,v5,v6,v7,v8,v9,v10");
    let first: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|x| x.parse().unwrap())
        .collect();
    assert_eq!(first.len(), 11);
    assert_eq!(first[0], 0.0);
}

#[test]
fn bench_csv_header_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str, workers: &'static str| {
        vec![
            "bench",
            "--sizes",
            "10,20",
            "--instances",
            "6",
            "--step-cap",
            "20000",
            "--seed",
            "4",
            "--workers",
            workers,
            "--out",
            out,
        ]
    };
    let a = dmm(&args("one.csv", "1"), dir.path());
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let b = dmm(&args("many.csv", "3"), dir.path());
    assert!(b.status.success());
    let one = std::fs::read_to_string(dir.path().join("one.csv")).unwrap();
    let many = std::fs::read_to_string(dir.path().join("many.csv")).unwrap();
    assert_eq!(
        one.lines().next().unwrap(),
        "n,instances,solved,median_time,censored,dt,zeta"
    );
    assert_eq!(one.lines().count(), 3);
    assert_eq!(one, many);
}

#[test]
fn sweep_reports_peak() {
    let dir = tempfile::tempdir().unwrap();
    let s = dmm(
        &[
            "sweep",
            "--param",
            "dt",
            "--grid",
            "0.05,0.1,0.2",
            "--n",
            "10",
            "--instances",
            "4",
            "--step-cap",
            "300",
            "--out",
            "s.csv",
        ],
        dir.path(),
    );
    assert!(s.status.success(), "{}", String::from_utf8_lossy(&s.stderr));
    let v = json_line(&s);
    assert_eq!(v["param"], "dt");
    assert!(v["peak"].as_f64().unwrap() > 0.0);
    let csv = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "param,value,n,instances,solved"
    );
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn blocks_check_passes_with_builtin_and_file_graph() {
    let dir = tempfile::tempdir().unwrap();
    let s = dmm(&["blocks-check", "--out", "b.csv"], dir.path());
    assert!(s.status.success(), "{}", String::from_utf8_lossy(&s.stderr));
    let csv = std::fs::read_to_string(dir.path().join("b.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "suite,case,index,expected,actual,abs_err,rel_err,pass"
    );
    assert!(!csv.contains(",false"));

    std::fs::write(
        dir.path().join("bad.graph"),
        "in l1\nblock x adder\nout o x\n",
    )
    .unwrap();
    let bad = dmm(
        &["blocks-check", "--graph", "bad.graph", "--out", "c.csv"],
        dir.path(),
    );
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(dmm(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(dmm(&["gen"], dir.path()).status.code(), Some(1));
    assert_eq!(
        dmm(&["solve", "missing.cnf"], dir.path()).status.code(),
        Some(1)
    );
    assert_eq!(
        dmm(
            &["sweep", "--param", "eta", "--grid", "1", "--n", "10"],
            dir.path()
        )
        .status
        .code(),
        Some(1)
    );
    assert_eq!(dmm(&["--help"], dir.path()).status.code(), Some(0));
}
