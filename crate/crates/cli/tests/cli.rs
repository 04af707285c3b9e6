use std::fs;
use std::path::{Path, PathBuf};

use bcsreach::instance::{parse_instance, serialize_instance};
use bcsreach_cli::{run, EXIT_INCONCLUSIVE, EXIT_OK, EXIT_UNSUPPORTED, EXIT_USAGE};

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn golden_files() -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(golden_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "vs"))
        .collect();
    v.sort();
    v
}

fn golden(name: &str) -> String {
    golden_dir().join(name).to_string_lossy().into_owned()
}

fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("bcsreach").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn first_line(s: &str) -> &str {
    s.lines().next().unwrap_or("")
}

// Answers frozen from runs where np, poly and oracle were cross-checked.
const EXPECTED: &[(&str, &str)] = &[
    ("blind_1.vs", "YES"),
    ("blind_2.vs", "NO"),
    ("c4_single.vs", "NO"),
    ("chain_k2.vs", "NO"),
    ("chain_k3.vs", "YES"),
    ("multipushdown_1.vs", "YES"),
    ("petri_1.vs", "YES"),
    ("pushdown_1.vs", "YES"),
    ("pushdown_2.vs", "YES"),
    ("random_1.vs", "YES"),
    ("random_2.vs", "YES"),
    ("random_3.vs", "YES"),
    ("random_4.vs", "YES"),
    ("random_5.vs", "YES"),
    ("random_6.vs", "NO"),
    ("random_7.vs", "NO"),
    ("random_8.vs", "YES"),
    ("sat_1.vs", "YES"),
    ("sat_3.vs", "YES"),
    ("stack_sample.vs", "YES"),
];

#[test]
fn golden_corpus_has_twenty_files() {
    let names: Vec<String> =
        golden_files().iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    let expected: Vec<&str> = EXPECTED.iter().map(|e| e.0).collect();
    assert_eq!(names, expected);
}

#[test]
fn golden_round_trip_is_byte_exact() {
    for path in golden_files() {
        let text = fs::read_to_string(&path).unwrap();
        let inst = parse_instance(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(serialize_instance(&inst), text, "{}", path.display());
    }
}

#[test]
fn solvers_agree_on_golden_corpus() {
    for &(name, want) in EXPECTED {
        let f = golden(name);
        let (code, out, _) = cli(&["solve", &f, "--solver", "np"]);
        assert_eq!((code, first_line(&out)), (EXIT_OK, want), "np on {name}");

        let (code, out, _) = cli(&["solve", &f, "--solver", "poly"]);
        match code {
            EXIT_OK => assert_eq!(first_line(&out), want, "poly on {name}"),
            EXIT_UNSUPPORTED => assert_eq!(first_line(&out), "INCONCLUSIVE"),
            c => panic!("poly on {name}: exit {c}"),
        }

        let (code, out, _) = cli(&["solve", &f, "--solver", "oracle"]);
        match first_line(&out) {
            "INCONCLUSIVE" => assert_eq!(code, EXIT_INCONCLUSIVE),
            ans => assert_eq!((code, ans), (EXIT_OK, want), "oracle on {name}"),
        }

        let (code, out, _) = cli(&["solve", &f]);
        assert_eq!((code, first_line(&out)), (EXIT_OK, want), "auto on {name}");
    }
}

#[test]
fn chain_needs_three_switches() {
    let f = golden("chain_k2.vs");
    let (code, out, _) = cli(&["solve", &f, "--k", "3", "--solver", "auto"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(first_line(&out), "YES");
    assert!(out.contains("solver: np"));
    let (_, out, _) = cli(&["solve", &f, "--k", "2", "--solver", "oracle"]);
    assert_eq!(first_line(&out), "NO");
}

#[test]
fn witness_for_chain() {
    let (code, out, _) = cli(&["solve", &golden("chain_k3.vs"), "--witness"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("word: +a1 +b1 -a1 -b1"), "{out}");
    assert!(out.contains("cs: 3"));
    assert!(out.contains("certificate {"));
}

#[test]
fn poly_witness_falls_back_to_np_search() {
    let (code, out, _) = cli(&["solve", &golden("stack_sample.vs"), "--solver", "poly", "--witness"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.starts_with("YES\nsolver: poly\n"));
    assert!(out.contains("certificate {"));
}

#[test]
fn json_report() {
    let (code, out, _) = cli(&["solve", &golden("chain_k3.vs"), "--solver", "np", "--witness", "--json"]);
    assert_eq!(code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["answer"], "YES");
    assert_eq!(v["solver"], "np");
    assert_eq!(v["k"], 3);
    assert_eq!(v["witness"]["cs"], 3);
    assert!(v["certificate"].as_str().unwrap().starts_with("certificate {"));
    assert!(v["stats"].is_object());

    let (_, out, _) = cli(&["solve", &golden("chain_k2.vs"), "--json"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["answer"], "NO");
    assert!(v.get("witness").is_none());
}

#[test]
fn context_switch_count() {
    let (code, out, _) = cli(&["cs", &golden("chain_k3.vs"), "--word", "+a1 +b1 -a1 -b1"]);
    assert_eq!((code, out.as_str()), (EXIT_OK, "3\n"));
    let (_, out, _) = cli(&["cs", &golden("chain_k3.vs"), "--word", "eps"]);
    assert_eq!(out, "-1\n");
}

#[test]
fn normalize_word() {
    let f = golden("stack_sample.vs");
    let (code, out, _) = cli(&["normalize", &f, "--word", "+a +b -b +c"]);
    assert_eq!((code, out.as_str()), (EXIT_OK, "+a +c\n"));
    let (_, out, _) = cli(&["normalize", &f, "--word", "+a -a"]);
    assert_eq!(out, "eps\n");
    let (code, _, err) = cli(&["normalize", &f, "--word", "+z"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(!err.is_empty());
}

#[test]
fn poly_rejects_c4() {
    let (code, out, _) = cli(&["solve", &golden("c4_single.vs"), "--k", "0", "--solver", "poly"]);
    assert_eq!(code, EXIT_UNSUPPORTED);
    assert_eq!(first_line(&out), "INCONCLUSIVE");
}

#[test]
fn saturate_output_parses() {
    let (code, out, _) = cli(&["saturate", &golden("stack_sample.vs"), "--ops", "+a -a +b -b"]);
    assert_eq!(code, EXIT_OK);
    let inst = parse_instance(&out).unwrap();
    assert!(out.contains("trans: q0 eps q2"), "{out}");
    assert!(!out.contains("+c"));
    assert_eq!(serialize_instance(&inst), out);
}

#[test]
fn gen_is_deterministic() {
    for args in [
        &["gen", "random", "--seed", "11"][..],
        &["gen", "pushdown", "3", "--seed", "4"],
        &["gen", "sat", "--vars", "3", "--clauses", "2", "--seed", "9"],
    ] {
        let (code, a, _) = cli(args);
        assert_eq!(code, EXIT_OK);
        let (_, b, _) = cli(args);
        assert_eq!(a, b);
        parse_instance(&a).unwrap();
    }
    let (code, _, _) = cli(&["gen", "torus", "3"]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn gen_sat_from_dimacs() {
    let dir = tempfile::tempdir().unwrap();
    let cnf = dir.path().join("f.cnf");
    fs::write(&cnf, "c unsat\np cnf 1 2\n1 1 1 0\n-1 -1 -1 0\n").unwrap();
    let (code, text, _) = cli(&["gen", "sat", "--cnf", cnf.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    let inst = dir.path().join("f.vs");
    fs::write(&inst, text).unwrap();
    let (code, out, _) = cli(&["solve", inst.to_str().unwrap(), "--solver", "np"]);
    assert_eq!((code, first_line(&out)), (EXIT_OK, "NO"));
}

#[test]
fn usage_errors() {
    assert_eq!(cli(&[]).0, EXIT_USAGE);
    assert_eq!(cli(&["solve"]).0, EXIT_USAGE);
    assert_eq!(cli(&["solve", "/definitely/not/here.vs"]).0, EXIT_USAGE);
    assert_eq!(cli(&["solve", &golden("chain_k3.vs"), "--solver", "magic"]).0, EXIT_USAGE);
    assert_eq!(cli(&["--help"]).0, EXIT_OK);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.vs");
    fs::write(&bad, "graph {\n  vertices: a\n}\nsystem {\n  states: p\n  initial: p\n  final: p\n  trans: p +b p\n}\n").unwrap();
    let (code, _, err) = cli(&["solve", bad.to_str().unwrap(), "--k", "1"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("8"), "{err}");

    let nok = dir.path().join("nok.vs");
    fs::write(&nok, "graph {\n  vertices: a\n}\nsystem {\n  states: p\n  initial: p\n  final: p\n}\n").unwrap();
    assert_eq!(cli(&["solve", nok.to_str().unwrap()]).0, EXIT_USAGE);
}

#[test]
fn tiny_budget_is_inconclusive() {
    let f = golden("sat_3.vs");
    let (code, out, _) = cli(&["solve", &f, "--solver", "np", "--budget", "1"]);
    assert_eq!((code, first_line(&out)), (EXIT_INCONCLUSIVE, "INCONCLUSIVE"));
}

#[test]
fn selftest_passes() {
    let (code, out, _) = cli(&["selftest", "--max-len", "4"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.starts_with("selftest: PASS"));
}
