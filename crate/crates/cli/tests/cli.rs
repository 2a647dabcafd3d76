use std::path::{Path, PathBuf};
use std::process::Command;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn examples() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples")
}

fn run_env(args: &[&str], env: &[(&str, &str)]) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mvqa"));
    cmd.args(args).env_remove("MVQA_MAX_WORLDS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("spawn mvqa");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn run(args: &[&str]) -> Run {
    run_env(args, &[])
}

fn running() -> String {
    examples().join("running").display().to_string()
}

fn ok(args: &[&str]) -> String {
    let r = run(args);
    assert_eq!(r.code, 0, "{args:?}: {}", r.stderr);
    r.stdout
}

const SMALL_BID: &str = "# relation R\nblock_id\ttid\tX\tprob\nb1\tb1#1\tu\t0.25\nb1\tb1#2\tv\t0.75\nb2\tb2#1\tu\t1\n";

#[test]
fn validate_is_silent() {
    let r = run(&["validate", "--bundle", &running()]);
    assert_eq!(r.code, 0);
    assert!(r.stdout.is_empty() && r.stderr.is_empty());
}

#[test]
fn explicit_files_match_the_bundle() {
    let dir = examples().join("running");
    let p = |f: &str| dir.join(f).display().to_string();
    let a = ok(&["bid", "--schema", &p("schema.txt"), "--mg", &p("R.mg"), "--data", &format!("R={}", p("R.csv"))]);
    assert_eq!(a, ok(&["bid", "--bundle", &running()]));
}

#[test]
fn query_reports_the_most_probable_answer() {
    let q = examples().join("running/sum_c.dl").display().to_string();
    let out = ok(&["query", "--bundle", &running(), "--query-file", &q]);
    assert_eq!(out.lines().last(), Some("# most_probable_answer 5 0.28125"));
    let inline = ok(&["query", "--bundle", &running(), "--query", "sum(c) :- R(a, b, c)"]);
    assert_eq!(out, inline);
}

#[test]
fn mcc_subcommands() {
    let b = running();
    assert_eq!(ok(&["mcc", "count", "--bundle", &b]).trim(), "2");
    let solve = ok(&["mcc", "solve", "--bundle", &b]);
    assert!(solve.lines().nth(1).unwrap().starts_with("[2,3,1,2]\t0.4306"), "{solve}");
    let en = ok(&["mcc", "enum", "--bundle", &b]);
    let ks: Vec<&str> = en.lines().skip(1).map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(ks, ["[2,3,1,2]", "[2,3,2,1]"]);
    let v = ok(&["mcc", "verify", "--bundle", &b, "--class", "2,4,1,1"]);
    let cells: Vec<&str> = v.lines().nth(1).unwrap().split('\t').collect();
    assert_eq!(&cells[..3], ["[2,4,1,1]", "true", "false"]);
    let v = ok(&["mcc", "verify", "--bundle", &b, "--class", "[1,1,1,5]"]);
    assert!(v.contains("\tfalse\tfalse\t"), "{v}");
}

#[test]
fn mpc_and_brute_force_agree() {
    let b = running();
    let dp = ok(&["classes", "--bundle", &b]);
    assert_eq!(dp, ok(&["classes", "--bundle", &b, "--brute"]));
    assert_eq!(dp.lines().count(), 11);
    let mpc = ok(&["mpc", "--bundle", &b]);
    assert_eq!(mpc, ok(&["mpc", "--bundle", &b, "--brute"]));
    assert_eq!(mpc, "k\tprobability\n[2,2,2,2]\t0.1875\n[2,3,1,2]\t0.1875\n[2,3,2,1]\t0.1875\n");
}

#[test]
fn output_is_deterministic() {
    let b = running();
    for args in [
        vec!["classes", "--bundle", &b, "--distance", "hellinger"],
        vec!["query", "--bundle", &b, "--query", "ans(c) :- R(a, b, c)"],
        vec!["mcc", "enum", "--bundle", &b, "--distance", "chi2", "--report-pvalue"],
    ] {
        let first = ok(&args);
        for _ in 0..3 {
            assert_eq!(first, ok(&args));
        }
    }
}

#[test]
fn json_lines_are_objects() {
    let out = ok(&["--format", "json-lines", "query", "--bundle", &running(), "--query", "sum(c) :- R(a, b, c)"]);
    let values: Vec<serde_json::Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(values.iter().all(|v| v.is_object()));
    let last = values.last().unwrap();
    assert_eq!(last["note"], "most_probable_answer");
    assert_eq!(last["probability"], 0.28125);
    assert!(values.iter().any(|v| v["table"] == "classes" && v["k"] == serde_json::json!([2, 3, 1, 2])));
}

#[test]
fn caps_give_exit_code_two() {
    let b = running();
    let r = run_env(&["classes", "--bundle", &b, "--brute"], &[("MVQA_MAX_WORLDS", "5")]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.starts_with("error[worlds::CapExceeded]:"), "{}", r.stderr);
    let r = run(&["--max-states", "3", "classes", "--bundle", &b]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.starts_with("error[worlds::StateSpaceExceeded]:"));
    let r = run(&["--max-emissions", "1", "mcc", "enum", "--bundle", &b]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.starts_with("error[flow::EnumerationBudgetExceeded]:"), "{}", r.stderr);
    let r = run(&["--max-assignments", "10", "validate", "--bundle", &b]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.starts_with("error[mg::AssignmentSpaceExceeded]:"), "{}", r.stderr);
}

#[test]
fn input_errors_give_exit_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let src = examples().join("running");
    for f in ["schema.txt", "R.csv"] {
        std::fs::copy(src.join(f), dir.path().join(f)).unwrap();
    }
    std::fs::write(dir.path().join("R.mg"), "cpt A : a=0.5, b=0.2\n").unwrap();
    let r = run(&["validate", "--bundle", dir.path().to_str().unwrap()]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.starts_with("error[mg::"), "{}", r.stderr);
    assert_eq!(r.stderr.lines().count(), 1);

    let r = run(&["validate", "--bundle", "/definitely/not/here"]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.starts_with("error[cli::Io]:"));

    let r = run(&["query", "--bundle", &running(), "--query", "ans(x) :- "]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.starts_with("error[query::"), "{}", r.stderr);
}

#[test]
fn embed_round_trips_a_small_database() {
    let dir = tempfile::tempdir().unwrap();
    let bid = dir.path().join("in.tsv");
    std::fs::write(&bid, SMALL_BID).unwrap();
    let out = dir.path().join("out");
    let report = ok(&["embed", "--bid", bid.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(report.lines().nth(1).unwrap().ends_with("\ttrue"), "{report}");
    for f in ["schema.txt", "R.csv", "R.mg", "decode.tsv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    // The written files are a valid bundle.
    ok(&["validate", "--bundle", out.to_str().unwrap()]);
}

#[test]
fn embed_refuses_large_databases() {
    let dir = tempfile::tempdir().unwrap();
    let bid = dir.path().join("in.tsv");
    std::fs::write(&bid, ok(&["bid", "--bundle", &running()])).unwrap();
    let r = run(&["embed", "--bid", bid.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.starts_with("error[embedding::UnencodableBid]:"), "{}", r.stderr);
}

#[test]
fn tid_reduction_preserves_the_probability() {
    let e = examples().join("tid");
    let p = |f: &str| e.join(f).display().to_string();
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&[
        "tid-reduce",
        "--schema",
        &p("schema.txt"),
        "--data",
        &format!("R={}", p("R.csv")),
        "--data",
        &format!("S={}", p("S.csv")),
        "--query-file",
        &p("query.dl"),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let row: Vec<&str> = out.lines().nth(1).unwrap().split('\t').collect();
    assert_eq!(row[1], "0.5745");
    assert_eq!(row[2], "0.5745");
    ok(&["validate", "--bundle", dir.path().to_str().unwrap()]);
}

#[test]
fn gen_matchings() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("k33.txt");
    std::fs::write(&graph, "0 3\n0 4\n0 5\n1 3\n1 4\n1 5\n2 3\n2 4\n2 5\n").unwrap();
    let out = ok(&["gen-matchings", "--graph", graph.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.lines().nth(1), Some("6\t9\t6\t1\t6"));
    assert!(dir.path().join("o/bid.tsv").exists());
    let a = ok(&["gen-matchings", "--random", "4", "--seed", "5"]);
    assert_eq!(a, ok(&["gen-matchings", "--random", "4", "--seed", "5"]));
    std::fs::write(&graph, "0 1\n").unwrap();
    let r = run(&["gen-matchings", "--graph", graph.to_str().unwrap()]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.starts_with("error[flow::NotThreeRegular]:"), "{}", r.stderr);
}
