//! End-to-end tests of the `gtgd` binary: verdicts, exit codes, witness
//! files and machine-readable output.

use std::path::Path;
use std::process::{Command, Output};

use gtgd_core::textio::{parse_database, parse_omq};
use gtgd_core::treewidth::cq_has_treewidth_at_most;

macro_rules! fixture {
    ($file:literal) => {
        concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/", $file)
    };
}

fn gtgd(args: &[&str]) -> Output {
    gtgd_env(args, &[])
}

fn gtgd_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gtgd"));
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn classify_reports_the_example_set() {
    let o = gtgd(&["classify", "--tgds", fixture!("fold_sigma.tgd")]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("linear guarded full m=1"), "{}", stdout(&o));
}

#[test]
fn chase_prefix_of_an_infinite_chase_is_unknown() {
    let o = gtgd(&["chase", "--tgds", fixture!("lasso.tgd"), "--db", fixture!("lasso.db"), "--levels", "2"]);
    assert_eq!(code(&o), 2);
    let d = parse_database(&stdout(&o)).expect("stdout is a database document");
    assert_eq!(d.len(), 3);
    assert!(stdout(&o).contains("# level=2"));
}

#[test]
fn chase_budget_from_the_environment() {
    let args = ["chase", "--tgds", fixture!("lasso.tgd"), "--db", fixture!("lasso.db")];
    let o = gtgd_env(&args, &[("GTGD_BUDGET_CHASE_ATOMS", "2")]);
    assert_eq!(code(&o), 2);
    assert!(parse_database(&stdout(&o)).unwrap().len() <= 2);
}

#[test]
fn equivk_yes_writes_a_bounded_width_witness() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("witness.omq");
    let o = gtgd(&["equivk", "--spec", fixture!("fold_q1.omq"), "-k", "1", "-o", p(&w)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let omq = parse_omq(&std::fs::read_to_string(&w).unwrap()).unwrap();
    assert!(!omq.query.is_empty());
    for d in omq.query.disjuncts() {
        assert!(cq_has_treewidth_at_most(d, 1).unwrap(), "{d}");
    }
}

#[test]
fn equivk_no_writes_a_counterexample() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("cex.db");
    let o = gtgd(&["--machine", "equivk", "--spec", fixture!("fold_q2.omq"), "-k", "1", "-o", p(&w)]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    assert!(stdout(&o).contains("answer=no"));
    assert!(!parse_database(&std::fs::read_to_string(&w).unwrap()).unwrap().is_empty());
}

#[test]
fn below_threshold_is_refused_with_usage_code() {
    for cmd in ["approx", "equivk"] {
        let o = gtgd(&[cmd, "--spec", fixture!("fold_q1.omq"), "-k", "0"]);
        assert_eq!(code(&o), 64, "{cmd}");
        assert!(stderr(&o).contains("below the arity threshold"), "{cmd}: {}", stderr(&o));
        assert!(!stdout(&o).contains("answer"), "{cmd} printed a verdict");
    }
}

#[test]
fn usage_and_data_errors() {
    assert_eq!(code(&gtgd(&["no-such-command"])), 64);
    assert_eq!(code(&gtgd(&["classify"])), 64);
    assert_eq!(code(&gtgd(&["classify", "--tgds", "/nonexistent/file.tgd"])), 65);
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.tgd");
    std::fs::write(&bad, "R(x -> S(x)\n").unwrap();
    let o = gtgd(&["classify", "--tgds", p(&bad)]);
    assert_eq!(code(&o), 65);
    assert!(stderr(&o).contains("syntax error"), "{}", stderr(&o));
}

#[test]
fn machine_mode_is_key_value_and_deterministic() {
    let args = ["--machine", "classify", "--tgds", fixture!("fold_sigma.tgd")];
    let a = gtgd(&args);
    let b = gtgd(&args);
    assert_eq!(a.stdout, b.stdout);
    for line in stdout(&a).lines() {
        assert!(line.starts_with('[') && line.ends_with(']') || line.contains('='), "{line}");
    }
    assert!(stdout(&a).contains("class=L"));
}

#[test]
fn treewidth_prints_a_decomposition() {
    let o = gtgd(&["treewidth", "--graph", fixture!("square.edges")]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert!(s.contains("treewidth: 2"));
    assert!(s.lines().any(|l| l.starts_with("bag 0: ")));
    assert!(s.lines().any(|l| l.starts_with("edge ")));
}

#[test]
fn witness_found_and_exhausted() {
    let base = ["witness", "--db", fixture!("lasso.db"), "--tgds", fixture!("lasso.tgd")];
    let found = gtgd(&[&base[..], &["-n", "2", "--dom-cap", "5"]].concat());
    assert_eq!(code(&found), 0, "{}", stderr(&found));
    let none = gtgd(&[&base[..], &["-n", "2", "--dom-cap", "2"]].concat());
    assert_eq!(code(&none), 1, "{}", stderr(&none));
}

#[test]
fn reduce_clique_tracks_cliques() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("dstar.db");
    let q = fixture!("edge.cq");
    let yes = gtgd(&["reduce-clique", "--graph", fixture!("triangle.edges"), "-k", "2", "--query", q, "-o", p(&out)]);
    assert_eq!(code(&yes), 0, "{}", stderr(&yes));
    assert_eq!(parse_database(&std::fs::read_to_string(&out).unwrap()).unwrap().len(), 6);
    let lonely = dir.path().join("lonely.edges");
    std::fs::write(&lonely, "a\nb\n").unwrap();
    let no = gtgd(&["reduce-clique", "--graph", p(&lonely), "-k", "2", "--query", q]);
    assert_eq!(code(&no), 1, "{}", stderr(&no));
}

#[test]
fn reduce_clique_constrained_fixture() {
    let o = gtgd(&[
        "--machine",
        "reduce-clique",
        "--graph",
        fixture!("k6.edges"),
        "-k",
        "2",
        "--cqs",
        fixture!("constrained.cqs"),
        "--p",
        fixture!("constrained_p.cq"),
        "--pprime",
        fixture!("constrained_pprime.cq"),
        "--X",
        "x,y",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("dstar_models_sigma=true"));
    assert!(stdout(&o).contains("h0_surjective=true"));
}

#[test]
fn contains_and_eval() {
    let c = fixture!("constrained.cqs");
    let o = gtgd(&["contains", "--left", c, "--right", c, "--mode", "cqs"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let dir = tempfile::tempdir().unwrap();
    let q = dir.path().join("q.cq");
    std::fs::write(&q, "q(x) :- R(x,y)\n").unwrap();
    let db = fixture!("lasso.db");
    let yes = gtgd(&["eval", "--db", db, "--query", p(&q), "--tuple", "a"]);
    assert_eq!(code(&yes), 0);
    let no = gtgd(&["eval", "--db", db, "--query", p(&q), "--tuple", "b"]);
    assert_eq!(code(&no), 1);
    let omq = gtgd(&["eval", "--mode", "omq", "--db", db, "--tgds", fixture!("lasso.tgd"), "--query", p(&q), "--tuple", "b"]);
    assert_eq!(code(&omq), 0, "{}", stderr(&omq));
}

#[test]
fn validate_and_core() {
    assert_eq!(code(&gtgd(&["validate", fixture!("fold_q1.omq")])), 0);
    let dir = tempfile::tempdir().unwrap();
    let q = dir.path().join("q.cq");
    std::fs::write(&q, "q() :- E(x,y), E(y,z), E(u,v)\n").unwrap();
    let o = gtgd(&["--machine", "core", "--query", p(&q)]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("atoms_after=2"), "{}", stdout(&o));
}
