use std::fs;
use std::path::PathBuf;

use wcfg::cli::{cli_main, BENCH_COLUMNS};

fn data(rel: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(rel).to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("wcfg").chain(args.iter().copied());
    let code = cli_main(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn propagate_g0() {
    let (g, d) = (data("g0.gr"), data("dom.txt"));
    for backend in ["m", "d", "de"] {
        assert_eq!(run(&["propagate", &g, &d, "--z", "3", "--backend", backend]), (0, "X1={a} X2={b} root_min=3\n".into(), String::new()));
        assert_eq!(run(&["propagate", &g, &d, "--z", "2", "--backend", backend]).0, 1);
    }
    let (code, out, _) = run(&["propagate", &g, &d, "--z", "2"]);
    assert_eq!((code, out.as_str()), (1, "infeasible\n"));
}

#[test]
fn propagate_dump() {
    let (code, out, _) = run(&["propagate", &data("g0.gr"), &data("dom.txt"), "--z", "3", "--backend", "de", "--dump"]);
    assert_eq!(code, 0);
    assert!(out.contains("RootCap n(1,2,S) l=[3,4] u=[-1,3]"), "{out}");
    assert!(out.contains("skipped="), "{out}");
    let (_, out, _) = run(&["propagate", &data("g0.gr"), &data("dom.txt"), "--z", "3", "--dump"]);
    assert!(out.starts_with("V[1][1]"), "{out}");
}

#[test]
fn usage_and_parse_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.gr");
    fs::write(&bad, "terminals: a\nnonterminals: S\nstart: S\nS -> 'a' @ x\n").unwrap();
    let (code, _, err) = run(&["propagate", bad.to_str().unwrap(), &data("dom.txt"), "--z", "1"]);
    assert_eq!(code, 2);
    assert!(err.contains("line 4"), "{err}");
    assert_eq!(run(&["propagate", &data("g0.gr")]).0, 2);
    assert_eq!(run(&["frobnicate"]).0, 2);
    assert_eq!(run(&["propagate", &data("g0.gr"), &data("dom.txt"), "--z", "1", "--backend", "x"]).0, 2);
    assert_eq!(run(&["--help"]).0, 0);
}

#[test]
fn soft_writes_encoding() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("edit.gr");
    let (code, out, _) = run(&["soft", &data("g0.gr"), "--distance", "edit", "--z", "1", "--output", out_path.to_str().unwrap()]);
    assert_eq!((code, out.as_str()), (0, ""));
    let written = fs::read_to_string(&out_path).unwrap();
    assert_eq!(written, include_str!("golden/g0_edit.gr"));
    // "aa" under A -> 'a' @ 1, B -> 'a' @ 1 (substitution) weighs 2.
    let (code, out, _) = run(&["soft", &data("g0.gr"), "--distance", "hamming", "--z", "4", "--domains", &data("dom.txt")]);
    assert_eq!((code, out.as_str()), (0, "X1={a b} X2={a b} root_min=2\n"));
}

#[test]
fn oracle_spot_checks() {
    assert_eq!(run(&["oracle", &data("g0.gr"), "--max-len", "3"]), (0, "a b 3\n".into(), String::new()));
    let (code, out, _) = run(&["oracle", &data("g0.gr"), "--domains", &data("dom.txt"), "--z", "3"]);
    assert_eq!((code, out.as_str()), (0, "X1={a} X2={b} min_weight=3\n"));
    assert_eq!(run(&["oracle", &data("g0.gr")]).0, 2);
}

#[test]
fn solve_prints_log() {
    let (code, out, _) = run(&["solve", &data("desk/d02_two_employees.inst"), "--backend", "de", "--time-limit", "30"]);
    assert_eq!(code, 0);
    let last = out.lines().last().unwrap();
    assert!(last.starts_with("status=Optimal BT="), "{out}");
    let best = out.lines().rev().nth(1).unwrap();
    assert!(best.starts_with("cost=12 time="), "{out}");
    let (code, out, _) = run(&["solve", &data("desk/d07_unsat.inst")]);
    assert_eq!((code, out.trim()), (1, "status=Unsat BT=1"));
}

#[test]
fn bench_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("bench.csv");
    let (code, _, err) = run(&["bench", &data("desk"), "--output", csv_path.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let mut rdr = csv::Reader::from_path(&csv_path).unwrap();
    assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), BENCH_COLUMNS);
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 30);
    for chunk in rows.chunks(3) {
        let backends: Vec<&str> = chunk.iter().map(|r| &r[1]).collect();
        assert_eq!(backends, ["m", "d", "de"]);
        assert!(chunk.iter().all(|r| r[0] == chunk[0][0] && r[2] == chunk[0][2] && r[5] == chunk[0][5]));
    }
}
