//! Valence systems, their run semantics and the brute-force BCSREACH oracle.

use std::collections::HashMap;
use std::sync::Arc;

use thiserror::Error;

use crate::monoid::{
    context_switches, nf_right_invertible, reduce_to_irreducible, ContextTracker, MonoidError, Op, OpSet,
    StorageGraph, Word,
};

pub type StateId = usize;

/// `None` is ε.
pub type Label = Option<Op>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Transition {
    pub from: StateId,
    pub label: Label,
    pub to: StateId,
}

impl Transition {
    pub fn new(from: StateId, label: Label, to: StateId) -> Self {
        Transition { from, label, to }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SystemError {
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("duplicate state `{0}`")]
    DuplicateState(String),
    #[error("transition not enabled: {0}")]
    NotEnabled(String),
    #[error(transparent)]
    Monoid(#[from] MonoidError),
    #[error("budget exceeded: {0}")]
    Budget(String),
}

/// `A = (Q, →)` over a storage graph. Transitions form a set; insertion order is kept.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValenceSystem {
    pub graph: Arc<StorageGraph>,
    states: Vec<String>,
    transitions: Vec<Transition>,
}

impl ValenceSystem {
    pub fn new<S: Into<String>>(
        graph: Arc<StorageGraph>,
        states: impl IntoIterator<Item = S>,
    ) -> Result<Self, SystemError> {
        let states: Vec<String> = states.into_iter().map(Into::into).collect();
        for (i, s) in states.iter().enumerate() {
            if states[..i].contains(s) {
                return Err(SystemError::DuplicateState(s.clone()));
            }
        }
        Ok(ValenceSystem { graph, states, transitions: Vec::new() })
    }

    /// States named `q0 .. q{n-1}`.
    pub fn with_states(graph: Arc<StorageGraph>, n: usize) -> Self {
        Self::new(graph, (0..n).map(|i| format!("q{i}"))).expect("distinct names")
    }

    /// Builds a system from distinct names and a duplicate-free transition list without re-checking either.
    pub(crate) fn from_parts(graph: Arc<StorageGraph>, states: Vec<String>, transitions: Vec<Transition>) -> Self {
        debug_assert!(transitions.iter().all(|t| t.from < states.len() && t.to < states.len()));
        ValenceSystem { graph, states, transitions }
    }

    /// Adds a transition; returns false if it was already present.
    pub fn add(&mut self, t: Transition) -> Result<bool, SystemError> {
        for s in [t.from, t.to] {
            if s >= self.states.len() {
                return Err(SystemError::UnknownState(format!("#{s}")));
            }
        }
        if let Some(op) = t.label {
            self.graph.check_sym(op.sym)?;
        }
        if self.transitions.contains(&t) {
            return Ok(false);
        }
        self.transitions.push(t);
        Ok(true)
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_names(&self) -> &[String] {
        &self.states
    }

    pub fn state_name(&self, s: StateId) -> &str {
        &self.states[s]
    }

    pub fn state(&self, name: &str) -> Option<StateId> {
        self.states.iter().position(|n| n == name)
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    /// `|A| = |→|`.
    pub fn size(&self) -> usize {
        self.transitions.len()
    }

    /// `Op(A)`: operations labelling some transition.
    pub fn ops(&self) -> OpSet {
        OpSet::from_ops(self.transitions.iter().filter_map(|t| t.label))
    }

    pub fn contains(&self, t: &Transition) -> bool {
        self.transitions.contains(t)
    }

    /// Outgoing transitions per state.
    pub fn adjacency(&self) -> Vec<Vec<Transition>> {
        let mut adj = vec![Vec::new(); self.states.len()];
        for t in &self.transitions {
            adj[t.from].push(*t);
        }
        adj
    }

    /// Whether `Op(A)` is a dependent set.
    pub fn is_dependent(&self) -> bool {
        self.graph.mask_dependent(self.ops().syms())
    }

    pub fn fmt_transition(&self, t: &Transition) -> String {
        let label = match t.label {
            Some(op) => self.graph.fmt_op(op),
            None => "eps".to_string(),
        };
        format!("{} {} {}", self.state_name(t.from), label, self.state_name(t.to))
    }
}

/// `A[Op']`: ε-transitions plus those labelled in `allowed`.
pub fn restrict(a: &ValenceSystem, allowed: OpSet) -> ValenceSystem {
    let mut r = ValenceSystem { graph: a.graph.clone(), states: a.states.clone(), transitions: Vec::new() };
    r.transitions = a
        .transitions
        .iter()
        .filter(|t| t.label.is_none_or(|op| allowed.contains(op)))
        .copied()
        .collect();
    r
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Configuration {
    pub state: StateId,
    pub storage: Word,
}

impl Configuration {
    pub fn initial(state: StateId) -> Self {
        Configuration { state, storage: Vec::new() }
    }
}

/// Fires `t` from `c` if it is enabled: right state and `w.x` right-invertible.
pub fn step(a: &ValenceSystem, c: &Configuration, t: &Transition) -> Result<Configuration, SystemError> {
    if !a.contains(t) {
        return Err(SystemError::NotEnabled(format!("{} is not a transition", a.fmt_transition(t))));
    }
    if c.state != t.from {
        return Err(SystemError::NotEnabled(format!(
            "{} fired from state {}",
            a.fmt_transition(t),
            a.state_name(c.state)
        )));
    }
    let mut storage = c.storage.clone();
    if let Some(op) = t.label {
        storage.push(op);
        if !nf_right_invertible(&a.graph, &reduce_to_irreducible(&a.graph, &storage)) {
            return Err(SystemError::NotEnabled(format!(
                "{} leaves a storage that is not right-invertible",
                a.fmt_transition(t)
            )));
        }
    }
    Ok(Configuration { state: t.to, storage })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunWitness {
    pub transitions: Vec<Transition>,
    pub word: Word,
    pub cs: i64,
}

impl RunWitness {
    pub fn from_transitions(g: &StorageGraph, transitions: Vec<Transition>) -> Self {
        let word: Word = transitions.iter().filter_map(|t| t.label).collect();
        let cs = context_switches(g, &word);
        RunWitness { transitions, word, cs }
    }
}

/// Replays transitions from `(start, ε)`, checking enabledness at each step.
pub fn replay(a: &ValenceSystem, start: StateId, ts: &[Transition]) -> Result<Configuration, SystemError> {
    let mut c = Configuration::initial(start);
    for t in ts {
        c = step(a, &c, t)?;
    }
    Ok(c)
}

#[derive(Clone, Debug)]
pub struct OracleOutcome {
    pub reachable: bool,
    /// False when the search was cut by the length bound and found nothing.
    pub conclusive: bool,
    pub witness: Option<RunWitness>,
    pub explored: usize,
}

pub const ORACLE_DEFAULT_MAX_LEN: usize = 12;
pub const ORACLE_MEMO_CAP: usize = 1_000_000;

type MemoKey = (StateId, Word, i32, u32);

struct Search<'a> {
    a: &'a ValenceSystem,
    adj: Vec<Vec<Transition>>,
    q_fin: StateId,
    k: i32,
    max_len: usize,
    memo_cap: usize,
    memo: HashMap<MemoKey, usize>,
    truncated: bool,
    path: Vec<Transition>,
}

impl Search<'_> {
    fn dfs(&mut self, q: StateId, nf: &Word, tr: ContextTracker, used: usize) -> Result<bool, SystemError> {
        if q == self.q_fin && nf.is_empty() {
            return Ok(true);
        }
        let remaining = self.max_len - used;
        let key = (q, nf.clone(), tr.cs, tr.syms);
        match self.memo.get(&key) {
            Some(&r) if r >= remaining => return Ok(false),
            _ => {}
        }
        if self.memo.len() >= self.memo_cap {
            return Err(SystemError::Budget(format!("oracle memo over {} entries", self.memo_cap)));
        }
        self.memo.insert(key, remaining);
        let g = self.a.graph.clone();
        for i in 0..self.adj[q].len() {
            let t = self.adj[q][i];
            match t.label {
                None => {
                    self.path.push(t);
                    if self.dfs(t.to, nf, tr, used)? {
                        return Ok(true);
                    }
                    self.path.pop();
                }
                Some(op) => {
                    if remaining == 0 {
                        self.truncated = true;
                        continue;
                    }
                    let mut tr2 = tr;
                    tr2.push(&g, op.sym);
                    if tr2.cs > self.k {
                        continue;
                    }
                    let mut w = nf.clone();
                    w.push(op);
                    let w = reduce_to_irreducible(&g, &w);
                    if !nf_right_invertible(&g, &w) {
                        continue;
                    }
                    // Each further operation cancels at most one letter.
                    if w.len() > remaining - 1 {
                        self.truncated = true;
                        continue;
                    }
                    self.path.push(t);
                    if self.dfs(t.to, &w, tr2, used + 1)? {
                        return Ok(true);
                    }
                    self.path.pop();
                }
            }
        }
        Ok(false)
    }
}

/// Depth-first search over runs whose storage word has length at most `max_len`.
pub fn brute_force_bcsreach(
    a: &ValenceSystem,
    q_init: StateId,
    q_fin: StateId,
    k: u32,
    max_len: usize,
) -> Result<OracleOutcome, SystemError> {
    brute_force_with_cap(a, q_init, q_fin, k, max_len, ORACLE_MEMO_CAP)
}

pub fn brute_force_with_cap(
    a: &ValenceSystem,
    q_init: StateId,
    q_fin: StateId,
    k: u32,
    max_len: usize,
    memo_cap: usize,
) -> Result<OracleOutcome, SystemError> {
    for s in [q_init, q_fin] {
        if s >= a.num_states() {
            return Err(SystemError::UnknownState(format!("#{s}")));
        }
    }
    let mut search = Search {
        a,
        adj: a.adjacency(),
        q_fin,
        k: k as i32,
        max_len,
        memo_cap,
        memo: HashMap::new(),
        truncated: false,
        path: Vec::new(),
    };
    let found = search.dfs(q_init, &Vec::new(), ContextTracker::new(), 0)?;
    let witness = found.then(|| RunWitness::from_transitions(&a.graph, search.path.clone()));
    Ok(OracleOutcome {
        reachable: found,
        conclusive: found || !search.truncated,
        witness,
        explored: search.memo.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monoid::{is_identity, Sym};

    fn graph(names: &[&str], edges: &[(Sym, Sym)], loops: &[Sym]) -> Arc<StorageGraph> {
        let mut g = StorageGraph::new(names.iter().copied()).unwrap();
        for &(a, b) in edges {
            g.add_edge(a, b);
        }
        for &l in loops {
            g.add_loop(l);
        }
        Arc::new(g)
    }

    fn chain(g: Arc<StorageGraph>, word: &str) -> ValenceSystem {
        let w = g.parse_word(word).unwrap();
        let mut a = ValenceSystem::with_states(g, w.len() + 1);
        for (i, &op) in w.iter().enumerate() {
            a.add(Transition::new(i, Some(op), i + 1)).unwrap();
        }
        a
    }

    #[test]
    fn step_examples() {
        let petri = graph(&["p"], &[], &[]);
        let mut a = ValenceSystem::with_states(petri, 2);
        let dec = Transition::new(0, Some(Op::neg(0)), 1);
        let inc = Transition::new(0, Some(Op::pos(0)), 1);
        a.add(dec).unwrap();
        a.add(inc).unwrap();
        let c0 = Configuration::initial(0);
        assert!(matches!(step(&a, &c0, &dec), Err(SystemError::NotEnabled(_))));
        let c1 = step(&a, &c0, &inc).unwrap();
        assert_eq!((c1.state, c1.storage.clone()), (1, vec![Op::pos(0)]));
        assert!(step(&a, &c1, &inc).is_err());

        let blind = graph(&["p"], &[], &[0]);
        let mut b = ValenceSystem::with_states(blind, 2);
        b.add(dec).unwrap();
        let c = step(&b, &c0, &dec).unwrap();
        assert_eq!(c.storage, vec![Op::neg(0)]);
    }

    #[test]
    fn restrict_examples() {
        let g = graph(&["a", "b1"], &[(0, 1)], &[]);
        let mut a = ValenceSystem::with_states(g.clone(), 2);
        a.add(Transition::new(0, Some(Op::pos(0)), 1)).unwrap();
        a.add(Transition::new(0, Some(Op::pos(1)), 1)).unwrap();
        a.add(Transition::new(1, None, 0)).unwrap();
        assert_eq!(restrict(&a, a.ops()), a);
        assert_eq!(restrict(&a, OpSet::EMPTY).transitions().len(), 1);
        let r = restrict(&a, OpSet::single(Op::pos(0)));
        assert_eq!(r.transitions(), &[a.transitions()[0], a.transitions()[2]]);
    }

    #[test]
    fn oracle_examples() {
        let stack = graph(&["a"], &[], &[]);
        let a = chain(stack, "+a -a");
        let out = brute_force_bcsreach(&a, 0, 2, 0, 12).unwrap();
        assert!(out.reachable && out.conclusive);
        let w = out.witness.unwrap();
        assert!(is_identity(&a.graph, &w.word));
        let c = replay(&a, 0, &w.transitions).unwrap();
        assert_eq!(c.state, 2);

        let bip = graph(&["a1", "a2", "b1", "b2"], &[(0, 2), (0, 3), (1, 2), (1, 3)], &[]);
        let b = chain(bip, "+a1 +b1 -a1 -b1");
        assert!(brute_force_bcsreach(&b, 0, 4, 3, 12).unwrap().reachable);
        let no = brute_force_bcsreach(&b, 0, 4, 2, 12).unwrap();
        assert!(!no.reachable && no.conclusive);

        let empty = ValenceSystem::with_states(graph(&["a"], &[], &[]), 1);
        assert!(brute_force_bcsreach(&empty, 0, 0, 0, 0).unwrap().reachable);
    }

    #[test]
    fn oracle_truncation_is_reported() {
        let g = graph(&["a"], &[], &[]);
        let mut a = ValenceSystem::with_states(g, 2);
        a.add(Transition::new(0, Some(Op::pos(0)), 0)).unwrap();
        a.add(Transition::new(0, None, 1)).unwrap();
        a.add(Transition::new(1, Some(Op::pos(0)), 1)).unwrap();
        let out = brute_force_bcsreach(&a, 0, 1, 0, 4).unwrap();
        assert!(out.reachable);
        let mut b = ValenceSystem::with_states(a.graph.clone(), 2);
        b.add(Transition::new(0, Some(Op::pos(0)), 0)).unwrap();
        b.add(Transition::new(0, Some(Op::pos(0)), 1)).unwrap();
        let out = brute_force_bcsreach(&b, 0, 1, 0, 4).unwrap();
        assert!(!out.reachable && !out.conclusive);
    }
}
