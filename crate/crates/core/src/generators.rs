//! Instance factories: storage presets, seeded random instances, and the 3CNF family over C4.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::instance::Instance;
use crate::monoid::{Op, StorageGraph, Sym};
use crate::system::{Label, Transition, ValenceSystem};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GenError {
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("bad CNF input: {0}")]
    BadCnf(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Preset {
    /// Edgeless graph: one stack over `n` symbols.
    Pushdown(usize),
    /// Complete multipartite graph, one part per stack.
    Multipushdown(Vec<usize>),
    /// Complete graph without loops: Petri net places.
    Petri(usize),
    /// Complete graph with all loops: blind counters.
    Blind(usize),
}

impl Preset {
    pub fn parse(name: &str, sizes: &[usize]) -> Result<Preset, GenError> {
        let one = || match sizes {
            [n] => Ok(*n),
            _ => Err(GenError::BadParams(format!("`{name}` takes one size"))),
        };
        Ok(match name {
            "pushdown" => Preset::Pushdown(one()?),
            "multipushdown" => Preset::Multipushdown(sizes.to_vec()),
            "petri" => Preset::Petri(one()?),
            "blind" => Preset::Blind(one()?),
            other => return Err(GenError::BadParams(format!("unknown preset `{other}`"))),
        })
    }
}

pub fn preset(p: &Preset) -> Result<StorageGraph, GenError> {
    let check = |n: usize| {
        if n == 0 || n > crate::monoid::MAX_VERTICES {
            Err(GenError::BadParams(format!("size {n} out of range")))
        } else {
            Ok(n)
        }
    };
    let named = |prefix: &str, n: usize| -> StorageGraph {
        StorageGraph::new((1..=n).map(|i| format!("{prefix}{i}"))).expect("distinct names")
    };
    Ok(match p {
        Preset::Pushdown(n) => named("a", check(*n)?),
        Preset::Multipushdown(sizes) => {
            if sizes.is_empty() || sizes.len() > 26 {
                return Err(GenError::BadParams("need between 1 and 26 stacks".into()));
            }
            check(sizes.iter().sum())?;
            for &s in sizes {
                check(s)?;
            }
            let mut names = Vec::new();
            let mut part = Vec::new();
            for (i, &s) in sizes.iter().enumerate() {
                for j in 1..=s {
                    names.push(format!("{}{j}", (b'a' + i as u8) as char));
                    part.push(i);
                }
            }
            let mut g = StorageGraph::new(names).expect("distinct names");
            for x in 0..part.len() {
                for y in x + 1..part.len() {
                    if part[x] != part[y] {
                        g.add_edge(x as Sym, y as Sym);
                    }
                }
            }
            g
        }
        Preset::Petri(n) | Preset::Blind(n) => {
            let prefix = if matches!(p, Preset::Petri(_)) { "p" } else { "c" };
            let mut g = named(prefix, check(*n)?);
            for x in 0..*n as Sym {
                for y in x + 1..*n as Sym {
                    g.add_edge(x, y);
                }
                if matches!(p, Preset::Blind(_)) {
                    g.add_loop(x);
                }
            }
            g
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RandomLimits {
    pub max_vertices: usize,
    pub max_states: usize,
    pub max_transitions: usize,
    pub max_k: u32,
    pub edge_prob: f64,
    pub loop_prob: f64,
    pub eps_prob: f64,
}

impl Default for RandomLimits {
    fn default() -> Self {
        RandomLimits {
            max_vertices: 3,
            max_states: 4,
            max_transitions: 6,
            max_k: 2,
            edge_prob: 0.5,
            loop_prob: 0.3,
            eps_prob: 0.15,
        }
    }
}

pub fn random_graph(rng: &mut impl Rng, limits: &RandomLimits) -> StorageGraph {
    let n = rng.gen_range(1..=limits.max_vertices.max(1));
    let mut g = StorageGraph::new((0..n).map(|i| ((b'a' + i as u8) as char).to_string())).expect("distinct names");
    for x in 0..n as Sym {
        for y in x + 1..n as Sym {
            if rng.gen_bool(limits.edge_prob) {
                g.add_edge(x, y);
            }
        }
        if rng.gen_bool(limits.loop_prob) {
            g.add_loop(x);
        }
    }
    g
}

/// Random system over a fixed graph; `q0` is initial.
pub fn random_system(rng: &mut impl Rng, g: Arc<StorageGraph>, limits: &RandomLimits) -> Instance {
    let n = rng.gen_range(1..=limits.max_states.max(1));
    let mut a = ValenceSystem::with_states(g.clone(), n);
    let t = rng.gen_range(1..=limits.max_transitions.max(1));
    for _ in 0..t {
        let from = rng.gen_range(0..n);
        let to = rng.gen_range(0..n);
        let label: Label = if rng.gen_bool(limits.eps_prob) {
            None
        } else {
            let sym = rng.gen_range(0..g.len()) as Sym;
            Some(if rng.gen_bool(0.55) { Op::pos(sym) } else { Op::neg(sym) })
        };
        a.add(Transition::new(from, label, to)).expect("valid transition");
    }
    let q_fin = rng.gen_range(0..n);
    let k = rng.gen_range(0..=limits.max_k);
    Instance { system: a, q_init: 0, q_fin, k: Some(k) }
}

/// Deterministic in `seed`.
pub fn random_instance(seed: u64, limits: &RandomLimits) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Arc::new(random_graph(&mut rng, limits));
    random_system(&mut rng, g, limits)
}

/// Random system over a preset graph.
pub fn random_instance_over(seed: u64, g: StorageGraph, limits: &RandomLimits) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_system(&mut rng, Arc::new(g), limits)
}

/// 3CNF over variables `1..=vars`; literal `-i` is the negation of `x_i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CnfFormula {
    pub vars: usize,
    pub clauses: Vec<[i32; 3]>,
}

impl CnfFormula {
    pub fn new(vars: usize, clauses: Vec<[i32; 3]>) -> Result<Self, GenError> {
        if clauses.is_empty() {
            return Err(GenError::BadCnf("no clauses".into()));
        }
        for c in &clauses {
            for &l in c {
                if l == 0 || l.unsigned_abs() as usize > vars {
                    return Err(GenError::BadCnf(format!("literal {l} out of range")));
                }
            }
        }
        Ok(CnfFormula { vars, clauses })
    }

    /// Bit `i` of `assignment` is the value of `x_{i+1}`.
    pub fn clause_holds(&self, j: usize, assignment: u64) -> bool {
        self.clauses[j].iter().any(|&l| {
            let v = assignment >> (l.unsigned_abs() - 1) & 1 == 1;
            v == (l > 0)
        })
    }

    pub fn satisfiable(&self) -> bool {
        (0..1u64 << self.vars).any(|x| (0..self.clauses.len()).all(|j| self.clause_holds(j, x)))
    }

    /// Minimal DIMACS: a `p cnf V C` header and zero-terminated clauses of exactly three literals.
    pub fn parse_dimacs(text: &str) -> Result<Self, GenError> {
        let mut vars = None;
        let mut lits: Vec<i32> = Vec::new();
        for line in text.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('c') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("p cnf") {
                let nums: Vec<&str> = rest.split_whitespace().collect();
                let v = nums.first().and_then(|x| x.parse().ok());
                vars = Some(v.ok_or_else(|| GenError::BadCnf("bad header".into()))?);
                continue;
            }
            for tok in line.split_whitespace() {
                lits.push(tok.parse().map_err(|_| GenError::BadCnf(format!("bad literal `{tok}`")))?);
            }
        }
        let vars = vars.ok_or_else(|| GenError::BadCnf("missing `p cnf` header".into()))?;
        let mut clauses = Vec::new();
        for chunk in lits.split(|&l| l == 0).filter(|c| !c.is_empty()) {
            let c: [i32; 3] = chunk.try_into().map_err(|_| GenError::BadCnf("clauses need three literals".into()))?;
            clauses.push(c);
        }
        CnfFormula::new(vars, clauses)
    }
}

pub fn random_cnf(seed: u64, vars: usize, clauses: usize) -> CnfFormula {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cs = (0..clauses)
        .map(|_| {
            [(); 3].map(|_| {
                let v = rng.gen_range(1..=vars) as i32;
                if rng.gen_bool(0.5) {
                    v
                } else {
                    -v
                }
            })
        })
        .collect();
    CnfFormula::new(vars, cs).expect("in range")
}

/// Input letters of the intersection languages.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Letter {
    Bit(u8),
    Hash,
}

/// A pushdown-style automaton: every transition reads one letter and performs at most one operation.
struct LetterAutomaton {
    init: usize,
    fin: usize,
    edges: Vec<Vec<(Letter, Label, usize)>>,
}

impl LetterAutomaton {
    fn new() -> Self {
        LetterAutomaton { init: 0, fin: 0, edges: Vec::new() }
    }

    fn state(&mut self) -> usize {
        self.edges.push(Vec::new());
        self.edges.len() - 1
    }

    fn edge(&mut self, p: usize, l: Letter, op: Label, q: usize) {
        self.edges[p].push((l, op, q));
    }
}

/// `w_1 # rev(w_1) # ... w_m # rev(w_m) #` with `w_j` satisfying clause `j`; bit `b` pushes `stack[b]`.
fn clause_automaton(phi: &CnfFormula, stack: [Sym; 2]) -> LetterAutomaton {
    let n = phi.vars;
    let mut a = LetterAutomaton::new();
    let mut entry = a.state();
    a.init = entry;
    for j in 0..phi.clauses.len() {
        // push phase: (position, satisfied so far)
        let mut push: HashMap<(usize, bool), usize> = HashMap::new();
        push.insert((0, false), entry);
        for i in 0..n {
            for sat in [false, true] {
                let Some(&p) = push.get(&(i, sat)) else { continue };
                for b in 0..2u8 {
                    let hit = phi.clauses[j].iter().any(|&l| l.unsigned_abs() as usize == i + 1 && (l > 0) == (b == 1));
                    let key = (i + 1, sat || hit);
                    let q = match push.get(&key) {
                        Some(&q) => q,
                        None => {
                            let q = a.state();
                            push.insert(key, q);
                            q
                        }
                    };
                    a.edge(p, Letter::Bit(b), Some(Op::pos(stack[b as usize])), q);
                }
            }
        }
        let mut pop = a.state();
        if let Some(&p) = push.get(&(n, true)) {
            a.edge(p, Letter::Hash, None, pop);
        }
        for _ in 0..n {
            let q = a.state();
            for b in 0..2u8 {
                a.edge(pop, Letter::Bit(b), Some(Op::neg(stack[b as usize])), q);
            }
            pop = q;
        }
        let next = a.state();
        a.edge(pop, Letter::Hash, None, next);
        entry = next;
    }
    a.fin = entry;
    a
}

/// `w_0 # w_1 # rev(w_1) # ... w_{m-1} # rev(w_{m-1}) # w_m #`.
fn copy_automaton(phi: &CnfFormula, stack: [Sym; 2]) -> LetterAutomaton {
    let n = phi.vars;
    let mut a = LetterAutomaton::new();
    let mut cur = a.state();
    a.init = cur;
    let run = |a: &mut LetterAutomaton, cur: &mut usize, op: Option<bool>| {
        for _ in 0..n {
            let q = a.state();
            for b in 0..2u8 {
                let label = op.map(|push| {
                    let s = stack[b as usize];
                    if push {
                        Op::pos(s)
                    } else {
                        Op::neg(s)
                    }
                });
                a.edge(*cur, Letter::Bit(b), label, q);
            }
            *cur = q;
        }
        let q = a.state();
        a.edge(*cur, Letter::Hash, None, q);
        *cur = q;
    };
    run(&mut a, &mut cur, None);
    for _ in 1..phi.clauses.len() {
        run(&mut a, &mut cur, Some(true));
        run(&mut a, &mut cur, Some(false));
    }
    run(&mut a, &mut cur, None);
    a.fin = cur;
    a
}

/// BCSREACH instance over C4 whose answer is the satisfiability of `phi`.
/// Per letter the system first takes a step of the clause automaton (on `a1, a2`),
/// then a step of the copy automaton (on `b1, b2`); at most `2m(n+1)` letters are read.
pub fn sat_to_c4(phi: &CnfFormula) -> Instance {
    let mut g = StorageGraph::new(["a1", "a2", "b1", "b2"]).expect("distinct names");
    for x in 0..2 {
        for y in 2..4 {
            g.add_edge(x, y);
        }
    }
    let g = Arc::new(g);
    let a0 = clause_automaton(phi, [0, 1]);
    let a1 = copy_automaton(phi, [2, 3]);
    let bound = 2 * phi.clauses.len() * (phi.vars + 1);

    // Product states: (state of a0, state of a1, letters read, letter awaiting the a1 step).
    type P = (usize, usize, usize, Option<Letter>);
    let mut ids: HashMap<P, usize> = HashMap::new();
    let mut order: Vec<P> = Vec::new();
    let mut edges: Vec<(usize, Label, usize)> = Vec::new();
    let start: P = (a0.init, a1.init, 0, None);
    ids.insert(start, 0);
    order.push(start);
    let mut queue = VecDeque::from([start]);
    let mut finals = Vec::new();
    while let Some(p) = queue.pop_front() {
        let from = ids[&p];
        let (s0, s1, cnt, mid) = p;
        let mut succ: Vec<(Label, P)> = Vec::new();
        match mid {
            None => {
                if s0 == a0.fin && s1 == a1.fin {
                    finals.push(from);
                }
                if cnt < bound {
                    for &(l, op, t) in &a0.edges[s0] {
                        succ.push((op, (t, s1, cnt, Some(l))));
                    }
                }
            }
            Some(l) => {
                for &(l1, op, t) in &a1.edges[s1] {
                    if l1 == l {
                        succ.push((op, (s0, t, cnt + 1, None)));
                    }
                }
            }
        }
        for (op, q) in succ {
            let to = *ids.entry(q).or_insert_with(|| {
                order.push(q);
                queue.push_back(q);
                order.len() - 1
            });
            edges.push((from, op, to));
        }
    }
    let fin = order.len();
    let mut a = ValenceSystem::new(g, (0..fin).map(|i| format!("c{i}")).chain(["fin".to_string()])).expect("distinct");
    for (p, op, q) in edges {
        a.add(Transition::new(p, op, q)).expect("valid");
    }
    for f in finals {
        a.add(Transition::new(f, None, fin)).expect("valid");
    }
    Instance { system: a, q_init: 0, q_fin: fin, k: Some(2 * bound as u32) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::serialize_instance;

    #[test]
    fn presets() {
        let g = preset(&Preset::Pushdown(3)).unwrap();
        assert_eq!((g.len(), g.edges().len(), g.loops().len()), (3, 0, 0));
        let g = preset(&Preset::Petri(4)).unwrap();
        assert_eq!((g.edges().len(), g.loops().len()), (6, 0));
        let g = preset(&Preset::Blind(3)).unwrap();
        assert_eq!((g.edges().len(), g.loops().len()), (3, 3));
        let g = preset(&Preset::Multipushdown(vec![2, 2])).unwrap();
        assert_eq!(g.edges(), vec![(0, 2), (0, 3), (1, 2), (1, 3)]);
        assert!(preset(&Preset::Petri(0)).is_err());
    }

    #[test]
    fn random_is_deterministic() {
        let l = RandomLimits::default();
        for seed in 0..20 {
            let a = serialize_instance(&random_instance(seed, &l));
            assert_eq!(a, serialize_instance(&random_instance(seed, &l)));
            let inst = random_instance(seed, &l);
            assert!(inst.system.num_states() <= 4 && inst.system.size() <= 6 && inst.graph().len() <= 3);
        }
    }

    #[test]
    fn cnf_basics() {
        let f = CnfFormula::new(1, vec![[1, 1, 1]]).unwrap();
        assert!(f.satisfiable());
        let g = CnfFormula::new(1, vec![[1, 1, 1], [-1, -1, -1]]).unwrap();
        assert!(!g.satisfiable());
        let d = CnfFormula::parse_dimacs("c x\np cnf 2 1\n1 -2 2 0\n").unwrap();
        assert_eq!(d, CnfFormula::new(2, vec![[1, -2, 2]]).unwrap());
        assert!(CnfFormula::parse_dimacs("p cnf 1 1\n1 0\n").is_err());
    }

    #[test]
    fn c4_shape() {
        let inst = sat_to_c4(&CnfFormula::new(1, vec![[1, 1, 1]]).unwrap());
        let g = inst.graph();
        assert_eq!(g.len(), 4);
        assert_eq!(g.edges().len(), 4);
        assert!(g.loops().is_empty());
        assert_eq!(inst.k, Some(8));
    }
}
