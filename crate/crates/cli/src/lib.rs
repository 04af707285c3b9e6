//! Command-line front end for the BCSREACH solvers.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use bcsreach::bcs::{extract_run, solve_np_with, Answer, Certificate, NpOptions};
use bcsreach::generators::{preset, random_cnf, random_instance, random_instance_over, sat_to_c4, CnfFormula, Preset, RandomLimits};
use bcsreach::instance::{parse_instance, serialize_instance, Instance};
use bcsreach::monoid::{context_switches, is_identity, reduce_to_irreducible, rewrite_oracle, StorageGraph, Sym};
use bcsreach::polytime::{is_transitive_forest, solve_poly_with, PolyConfig, PolyError};
use bcsreach::saturation::saturate;
use bcsreach::system::{brute_force_with_cap, restrict, RunWitness, ORACLE_DEFAULT_MAX_LEN, ORACLE_MEMO_CAP};
use bcsreach::{Op, OpSet};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;
pub const EXIT_UNSUPPORTED: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "bcsreach", version, about = "Reachability under bounded context switching for valence systems")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SolverKind {
    Np,
    Poly,
    Oracle,
    Auto,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Decide whether the final state is reachable with at most k context switches.
    Solve {
        file: PathBuf,
        #[arg(long)]
        k: Option<u32>,
        #[arg(long, value_enum, default_value = "auto")]
        solver: SolverKind,
        /// Storage-word length bound for the oracle.
        #[arg(long, default_value_t = ORACLE_DEFAULT_MAX_LEN)]
        max_len: usize,
        /// Print a run and, for the NP solver, its certificate.
        #[arg(long)]
        witness: bool,
        /// Search budget: expansions (np), memo entries (oracle) or product states (poly).
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        json: bool,
    },
    /// Print the irreducible form of a word over the file's graph.
    Normalize {
        file: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        word: String,
    },
    /// Print the number of context switches of a word.
    Cs {
        file: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        word: String,
    },
    /// Print the saturation of the system restricted to the given operations.
    Saturate {
        file: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        ops: String,
    },
    /// Generate an instance: a preset storage (`pushdown 3`, `multipushdown 2 2`, `petri 2`, `blind 2`), `sat` or `random`.
    Gen {
        kind: String,
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// DIMACS file for `sat`; otherwise a random formula is drawn.
        #[arg(long)]
        cnf: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        vars: usize,
        #[arg(long, default_value_t = 2)]
        clauses: usize,
    },
    /// Check the word-problem solver against the rewriting oracle.
    Selftest {
        #[arg(long, default_value_t = 6)]
        max_len: usize,
    },
}

struct Failure {
    code: i32,
    msg: String,
}

impl Failure {
    fn usage(msg: impl std::fmt::Display) -> Self {
        Failure { code: EXIT_USAGE, msg: msg.to_string() }
    }
}

type CmdResult = Result<i32, Failure>;

/// Runs the command line `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let mut buf = String::new();
    let res = dispatch(cli.cmd, &mut buf);
    let _ = out.write_all(buf.as_bytes());
    match res {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.msg);
            f.code
        }
    }
}

fn load(path: &Path) -> Result<Instance, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    parse_instance(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn dispatch(cmd: Cmd, out: &mut String) -> CmdResult {
    match cmd {
        Cmd::Solve { file, k, solver, max_len, witness, budget, json } => {
            let inst = load(&file)?;
            let k = k.or(inst.k).ok_or_else(|| Failure::usage("no bound: pass --k or put `k:` in the file"))?;
            let report = solve(&inst, k, solver, max_len, budget, witness)?;
            if json {
                out.push_str(&serde_json::to_string_pretty(&report).expect("plain data"));
                out.push('\n');
            } else {
                report.write_text(out);
            }
            Ok(report.exit_code())
        }
        Cmd::Normalize { file, word } => {
            let inst = load(&file)?;
            let g = inst.graph();
            let w = g.parse_word(&word).map_err(Failure::usage)?;
            out.push_str(&g.fmt_word(&reduce_to_irreducible(g, &w)));
            out.push('\n');
            Ok(EXIT_OK)
        }
        Cmd::Cs { file, word } => {
            let inst = load(&file)?;
            let g = inst.graph();
            let w = g.parse_word(&word).map_err(Failure::usage)?;
            out.push_str(&format!("{}\n", context_switches(g, &w)));
            Ok(EXIT_OK)
        }
        Cmd::Saturate { file, ops } => {
            let inst = load(&file)?;
            let g = inst.graph();
            let ops = OpSet::from_ops(g.parse_word(&ops).map_err(Failure::usage)?);
            let sat = saturate(&restrict(&inst.system, ops)).map_err(Failure::usage)?;
            let system = sat.system();
            out.push_str(&serialize_instance(&Instance { system, ..inst }));
            Ok(EXIT_OK)
        }
        Cmd::Gen { kind, sizes, seed, cnf, vars, clauses } => {
            let inst = match kind.as_str() {
                "sat" => {
                    let phi = match cnf {
                        Some(p) => {
                            let text =
                                std::fs::read_to_string(&p).map_err(|e| Failure::usage(format!("{}: {e}", p.display())))?;
                            CnfFormula::parse_dimacs(&text).map_err(Failure::usage)?
                        }
                        None => {
                            if vars == 0 || clauses == 0 {
                                return Err(Failure::usage("--vars and --clauses must be positive"));
                            }
                            random_cnf(seed, vars, clauses)
                        }
                    };
                    sat_to_c4(&phi)
                }
                "random" => random_instance(seed, &RandomLimits::default()),
                name => {
                    let g = Preset::parse(name, &sizes).and_then(|p| preset(&p)).map_err(Failure::usage)?;
                    random_instance_over(seed, g, &RandomLimits::default())
                }
            };
            out.push_str(&serialize_instance(&inst));
            Ok(EXIT_OK)
        }
        Cmd::Selftest { max_len } => {
            let (words, bad) = selftest(max_len);
            let verdict = if bad == 0 { "PASS" } else { "FAIL" };
            out.push_str(&format!("selftest: {verdict} ({words} words, {bad} mismatches)\n"));
            Ok(if bad == 0 { EXIT_OK } else { EXIT_FAILED })
        }
    }
}

#[derive(Serialize)]
struct WitnessReport {
    transitions: Vec<String>,
    word: String,
    cs: i64,
}

#[derive(Serialize)]
struct SolveReport {
    #[serde(serialize_with = "answer_text")]
    answer: Answer,
    solver: SolverKind,
    k: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness: Option<WitnessReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    certificate: Option<String>,
    stats: serde_json::Value,
    #[serde(skip)]
    unsupported: bool,
}

impl SolveReport {
    fn exit_code(&self) -> i32 {
        match self.answer {
            _ if self.unsupported => EXIT_UNSUPPORTED,
            Answer::Yes | Answer::No => EXIT_OK,
            Answer::Inconclusive => EXIT_INCONCLUSIVE,
        }
    }

    fn write_text(&self, out: &mut String) {
        out.push_str(&format!("{}\nsolver: {}\n", self.answer, serde_json::to_value(self.solver).unwrap().as_str().unwrap()));
        if self.unsupported {
            if let Some(msg) = self.stats.get("error").and_then(|v| v.as_str()) {
                out.push_str(&format!("reason: {msg}\n"));
            }
        }
        if let Some(w) = &self.witness {
            out.push_str("witness:\n");
            for t in &w.transitions {
                out.push_str(&format!("  {t}\n"));
            }
            out.push_str(&format!("word: {}\ncs: {}\n", w.word, w.cs));
        }
        if let Some(c) = &self.certificate {
            out.push_str(c);
        }
    }
}

fn answer_text<S: serde::Serializer>(a: &Answer, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(a)
}

fn witness_report(inst: &Instance, run: &RunWitness) -> WitnessReport {
    WitnessReport {
        transitions: run.transitions.iter().map(|t| inst.system.fmt_transition(t)).collect(),
        word: inst.graph().fmt_word(&run.word),
        cs: run.cs,
    }
}

fn solve(
    inst: &Instance,
    k: u32,
    solver: SolverKind,
    max_len: usize,
    budget: Option<usize>,
    want_witness: bool,
) -> Result<SolveReport, Failure> {
    let (a, qi, qf) = (&inst.system, inst.q_init, inst.q_fin);
    let report = |answer, solver, stats| SolveReport {
        answer,
        solver,
        k,
        witness: None,
        certificate: None,
        stats,
        unsupported: false,
    };
    match solver {
        SolverKind::Np => {
            let mut opts = NpOptions::default();
            if let Some(b) = budget {
                opts.max_expansions = b;
            }
            let np = solve_np_with(a, qi, qf, k, &opts).map_err(Failure::usage)?;
            let mut r = report(np.answer, SolverKind::Np, serde_json::to_value(np.stats).unwrap());
            if want_witness {
                if let Some(cert) = &np.certificate {
                    attach_certificate(inst, k, cert, &mut r);
                }
            }
            Ok(r)
        }
        SolverKind::Oracle => {
            let bf = brute_force_with_cap(a, qi, qf, k, max_len, budget.unwrap_or(ORACLE_MEMO_CAP));
            let stats = |explored: usize| serde_json::json!({ "explored": explored, "max_len": max_len });
            match bf {
                Ok(o) => {
                    let answer = match (o.reachable, o.conclusive) {
                        (true, _) => Answer::Yes,
                        (false, true) => Answer::No,
                        (false, false) => Answer::Inconclusive,
                    };
                    let mut r = report(answer, SolverKind::Oracle, stats(o.explored));
                    if want_witness {
                        r.witness = o.witness.as_ref().map(|w| witness_report(inst, w));
                    }
                    Ok(r)
                }
                Err(bcsreach::system::SystemError::Budget(_)) => Ok(report(Answer::Inconclusive, SolverKind::Oracle, stats(0))),
                Err(e) => Err(Failure::usage(e)),
            }
        }
        SolverKind::Poly | SolverKind::Auto => {
            if solver == SolverKind::Auto && !is_transitive_forest(inst.graph()) {
                return solve(inst, k, SolverKind::Np, max_len, budget, want_witness);
            }
            let mut cfg = PolyConfig::default();
            if let Some(b) = budget {
                cfg.max_states = b;
            }
            match solve_poly_with(a, qi, qf, k, &cfg) {
                Ok(p) => {
                    let answer = if p.reachable { Answer::Yes } else { Answer::No };
                    let mut r = report(answer, SolverKind::Poly, serde_json::to_value(p.stats).unwrap());
                    if want_witness && p.reachable {
                        // The polynomial procedure decides only; a run comes from the NP search.
                        if let Ok(np) = solve_np_with(a, qi, qf, k, &NpOptions::default()) {
                            if let Some(cert) = &np.certificate {
                                attach_certificate(inst, k, cert, &mut r);
                            }
                        }
                    }
                    Ok(r)
                }
                Err(PolyError::UnsupportedGraph(msg)) => {
                    let mut r = report(Answer::Inconclusive, SolverKind::Poly, serde_json::json!({ "error": msg }));
                    r.unsupported = true;
                    Ok(r)
                }
                Err(PolyError::Budget(msg)) if solver == SolverKind::Auto => {
                    let _ = msg;
                    solve(inst, k, SolverKind::Np, max_len, None, want_witness)
                }
                Err(PolyError::Budget(msg)) => {
                    Ok(report(Answer::Inconclusive, SolverKind::Poly, serde_json::json!({ "error": msg })))
                }
                Err(e) => Err(Failure::usage(e)),
            }
        }
    }
}

fn attach_certificate(inst: &Instance, k: u32, cert: &Certificate, r: &mut SolveReport) {
    if let Ok(run) = extract_run(&inst.system, k, cert) {
        r.witness = Some(witness_report(inst, &run));
    }
    r.certificate = Some(cert.to_text(&inst.system));
}

fn selftest_graphs() -> Vec<StorageGraph> {
    let mk = |names: &[&str], edges: &[(Sym, Sym)], loops: &[Sym]| {
        let mut g = StorageGraph::new(names.iter().copied()).expect("distinct names");
        for &(a, b) in edges {
            g.add_edge(a, b);
        }
        for &s in loops {
            g.add_loop(s);
        }
        g
    };
    vec![
        mk(&["a", "b"], &[], &[]),
        mk(&["c"], &[], &[0]),
        mk(&["a", "b"], &[(0, 1)], &[]),
        mk(&["c", "d"], &[(0, 1)], &[0, 1]),
        mk(&["a1", "a2", "b1", "b2"], &[(0, 2), (0, 3), (1, 2), (1, 3)], &[]),
        mk(&["a", "c", "d"], &[(1, 2)], &[1]),
    ]
}

/// Words checked and mismatches between the normal-form test and the rewriting oracle.
fn selftest(max_len: usize) -> (usize, usize) {
    let mut words = 0;
    let mut bad = 0;
    for g in selftest_graphs() {
        let ops: Vec<Op> = g.all_ops().iter().collect();
        let mut layer: Vec<Vec<Op>> = vec![Vec::new()];
        for len in 0..=max_len {
            for w in &layer {
                words += 1;
                if rewrite_oracle(&g, w).map_or(true, |r| r != is_identity(&g, w)) {
                    bad += 1;
                }
            }
            if len < max_len {
                layer = layer
                    .iter()
                    .flat_map(|w| {
                        ops.iter().map(move |&o| {
                            let mut v = w.clone();
                            v.push(o);
                            v
                        })
                    })
                    .collect();
            }
        }
    }
    (words, bad)
}
