//! Tests, free automata reductions and the NP procedure for BCSREACH.

use std::collections::hash_map::Entry;
use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::monoid::{context_switches, is_identity, reverse_flip, OpSet, StorageGraph, Word};
use crate::nfa::{accepts_epsilon, block_automaton, language_signature, product_witness, reach, syninv_nfa, Nfa, NfaError};
use crate::saturation::{saturate, SaturatedSystem};
use crate::system::{replay, restrict, RunWitness, StateId, SystemError, Transition, ValenceSystem};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BcsError {
    #[error(transparent)]
    Nfa(#[from] NfaError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("slots {0} and {1} are not adjacent")]
    NotAdjacent(usize, usize),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("malformed certificate: {0}")]
    Parse(String),
    #[error("witness extraction failed: {0}")]
    Witness(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Answer {
    Yes,
    No,
    Inconclusive,
}

impl std::fmt::Display for Answer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Answer::Yes => "YES",
            Answer::No => "NO",
            Answer::Inconclusive => "INCONCLUSIVE",
        })
    }
}

/// `N_1 .. N_n` with `n = κ²`, described by boundary states and alphabets.
/// Slot `i` (0-based) belongs to context `i / κ`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Test {
    pub kappa: usize,
    pub boundaries: Vec<StateId>,
    pub contexts: Vec<OpSet>,
    pub blocks: Vec<OpSet>,
}

impl Test {
    pub fn slots(&self) -> usize {
        self.kappa * self.kappa
    }

    pub fn context_of(&self, slot: usize) -> usize {
        slot / self.kappa
    }

    /// Saturated context systems, one per context.
    pub fn saturations(&self, a: &ValenceSystem) -> Result<Vec<SaturatedSystem>, BcsError> {
        let mut cache: HashMap<OpSet, SaturatedSystem> = HashMap::new();
        let mut out = Vec::new();
        for &c in &self.contexts {
            if !a.graph.mask_dependent(c.syms()) {
                return Err(NfaError::NotDependent.into());
            }
            let sat = match cache.entry(c) {
                Entry::Occupied(e) => e.get().clone(),
                Entry::Vacant(e) => e.insert(saturate(&restrict(a, c)).map_err(NfaError::from)?).clone(),
            };
            out.push(sat);
        }
        Ok(out)
    }

    /// The automata `N(q_{i-1}, q_i, Op_j, Op_{j,i})`.
    pub fn automata(&self, a: &ValenceSystem) -> Result<Vec<Nfa>, BcsError> {
        let sats = self.saturations(a)?;
        (0..self.slots())
            .map(|i| {
                let c = self.contexts[self.context_of(i)];
                if !self.blocks[i].is_subset(c) {
                    return Err(NfaError::NotSubset.into());
                }
                Ok(block_automaton(&sats[self.context_of(i)], self.boundaries[i], self.boundaries[i + 1], self.blocks[i])?)
            })
            .collect()
    }
}

/// One free automata reduction step; slots are named by their index in the test.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FraStep {
    /// `N_first, N_second ↦ ε`, with a word of `L(N_second) ∩ L(inv(N_first))`.
    Cancel { first: usize, second: usize, witness: Word },
    /// `N_first, N_second ↦ N_second, N_first`.
    Swap { first: usize, second: usize },
    /// `N_slot ↦ ε` when `ε ∈ L(N_slot)`.
    Drop { slot: usize },
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FraCertificate {
    pub steps: Vec<FraStep>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub test: Test,
    pub reduction: FraCertificate,
}

fn adjacent_at(current: &[usize], first: usize, second: usize) -> Result<usize, BcsError> {
    match current.iter().position(|&s| s == first) {
        Some(p) if current.get(p + 1) == Some(&second) => Ok(p),
        _ => Err(BcsError::NotAdjacent(first, second)),
    }
}

/// Whether `step` applies to the current sequence (remaining slot indices, in order).
pub fn fra_step_applicable(
    g: &StorageGraph,
    automata: &[Nfa],
    current: &[usize],
    step: &FraStep,
) -> Result<bool, BcsError> {
    Ok(match step {
        FraStep::Cancel { first, second, .. } => {
            adjacent_at(current, *first, *second)?;
            product_witness(&automata[*second], &syninv_nfa(g, &automata[*first])).is_some()
        }
        FraStep::Swap { first, second } => {
            adjacent_at(current, *first, *second)?;
            g.sets_independent(automata[*first].alphabet(), automata[*second].alphabet())
        }
        FraStep::Drop { slot } => {
            if !current.contains(slot) {
                return Err(BcsError::NotAdjacent(*slot, *slot));
            }
            accepts_epsilon(&automata[*slot])
        }
    })
}

fn apply_step(current: &mut Vec<usize>, step: &FraStep) {
    match step {
        FraStep::Cancel { first, .. } => {
            let p = current.iter().position(|s| s == first).unwrap();
            current.drain(p..p + 2);
        }
        FraStep::Swap { first, .. } => {
            let p = current.iter().position(|s| s == first).unwrap();
            current.swap(p, p + 1);
        }
        FraStep::Drop { slot } => current.retain(|s| s != slot),
    }
}

pub const FRA_MEMO_CAP: usize = 1_000_000;

/// Exhaustive search for a reduction of `automata` to the empty sequence.
pub fn search_fra(g: &StorageGraph, automata: &[Nfa], memo_cap: usize) -> Result<Option<FraCertificate>, BcsError> {
    let start: Vec<usize> = (0..automata.len()).collect();
    let mut pred: HashMap<Vec<usize>, Option<(Vec<usize>, FraStep)>> = HashMap::new();
    pred.insert(start.clone(), None);
    let mut queue = VecDeque::from([start]);
    let inv: Vec<Nfa> = automata.iter().map(|n| syninv_nfa(g, n)).collect();
    while let Some(cur) = queue.pop_front() {
        if cur.is_empty() {
            let mut steps = Vec::new();
            let mut node = cur;
            while let Some(Some((prev, step))) = pred.get(&node) {
                steps.push(step.clone());
                node = prev.clone();
            }
            steps.reverse();
            return Ok(Some(FraCertificate { steps }));
        }
        let mut moves = Vec::new();
        for p in 0..cur.len().saturating_sub(1) {
            let (x, y) = (cur[p], cur[p + 1]);
            if let Some(witness) = product_witness(&automata[y], &inv[x]) {
                moves.push(FraStep::Cancel { first: x, second: y, witness });
            }
        }
        for &x in &cur {
            if accepts_epsilon(&automata[x]) {
                moves.push(FraStep::Drop { slot: x });
            }
        }
        for p in 0..cur.len().saturating_sub(1) {
            let (x, y) = (cur[p], cur[p + 1]);
            if g.sets_independent(automata[x].alphabet(), automata[y].alphabet()) {
                moves.push(FraStep::Swap { first: x, second: y });
            }
        }
        for step in moves {
            let mut next = cur.clone();
            apply_step(&mut next, &step);
            if let Entry::Vacant(e) = pred.entry(next.clone()) {
                e.insert(Some((cur.clone(), step)));
                queue.push_back(next);
            }
        }
        if pred.len() > memo_cap {
            return Err(BcsError::Budget(format!("reduction memo over {memo_cap} entries")));
        }
    }
    Ok(None)
}

/// Rebuilds every automaton from the test and replays the reduction.
pub fn verify_certificate(a: &ValenceSystem, q_init: StateId, q_fin: StateId, k: u32, cert: &Certificate) -> bool {
    verify_inner(a, q_init, q_fin, k, cert).unwrap_or(false)
}

fn verify_inner(a: &ValenceSystem, q_init: StateId, q_fin: StateId, k: u32, cert: &Certificate) -> Result<bool, BcsError> {
    let t = &cert.test;
    let kappa = k as usize + 1;
    let n = kappa * kappa;
    if t.kappa != kappa || t.contexts.len() != kappa || t.blocks.len() != n || t.boundaries.len() != n + 1 {
        return Ok(false);
    }
    if t.boundaries[0] != q_init || t.boundaries[n] != q_fin || t.boundaries.iter().any(|&q| q >= a.num_states()) {
        return Ok(false);
    }
    let ops = a.ops();
    if t.contexts.iter().any(|c| !c.is_subset(ops) || !a.graph.mask_dependent(c.syms())) {
        return Ok(false);
    }
    if (0..n).any(|i| !t.blocks[i].is_subset(t.contexts[t.context_of(i)])) {
        return Ok(false);
    }
    let automata = t.automata(a)?;
    let mut current: Vec<usize> = (0..n).collect();
    for step in &cert.reduction.steps {
        if let FraStep::Cancel { first, second, witness } = step {
            if *first >= n || *second >= n {
                return Ok(false);
            }
            if !automata[*second].accepts(witness) || !syninv_nfa(&a.graph, &automata[*first]).accepts(witness) {
                return Ok(false);
            }
        }
        if !fra_step_applicable(&a.graph, &automata, &current, step)? {
            return Ok(false);
        }
        apply_step(&mut current, step);
    }
    Ok(current.is_empty())
}

/// Concrete run from a certificate: FRA1 witnesses give the slot words, ε elsewhere.
pub fn extract_run(a: &ValenceSystem, k: u32, cert: &Certificate) -> Result<RunWitness, BcsError> {
    let t = &cert.test;
    let n = t.slots();
    let mut words: Vec<Word> = vec![Vec::new(); n];
    for step in &cert.reduction.steps {
        if let FraStep::Cancel { first, second, witness } = step {
            words[*second] = witness.clone();
            words[*first] = reverse_flip(witness);
        }
    }
    let sats = t.saturations(a)?;
    let automata = t.automata(a)?;
    let mut run = Vec::new();
    for i in 0..n {
        let path = automata[i]
            .path_for_word(&words[i])
            .ok_or_else(|| BcsError::Witness(format!("slot {i} rejects {}", a.graph.fmt_word(&words[i]))))?;
        run.extend(sats[t.context_of(i)].expand(&path));
    }
    let c = replay(a, t.boundaries[0], &run)?;
    let w = RunWitness::from_transitions(&a.graph, run);
    if c.state != t.boundaries[n] || !is_identity(&a.graph, &w.word) || w.cs > k as i64 {
        return Err(BcsError::Witness(format!("run ends in {} with {}", c.state, a.graph.fmt_word(&w.word))));
    }
    debug_assert_eq!(w.cs, context_switches(&a.graph, &w.word));
    Ok(w)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NpOptions {
    pub max_expansions: usize,
    pub max_memo: usize,
}

impl Default for NpOptions {
    fn default() -> Self {
        NpOptions { max_expansions: 10_000_000, max_memo: 1_000_000 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NpStats {
    pub expansions: usize,
    pub memo_entries: usize,
    pub descriptors: usize,
}

#[derive(Clone, Debug)]
pub struct NpOutcome {
    pub answer: Answer,
    pub certificate: Option<Certificate>,
    pub stats: NpStats,
}

struct Ctx {
    ops: OpSet,
    sys: ValenceSystem,
    /// Per state, the states ε-reachable in the saturated context (excluding itself).
    eps: Vec<Vec<StateId>>,
}

/// A nonempty block: trimmed automaton between two states of one context.
struct Desc {
    to: StateId,
    alphabet: OpSet,
    indep: OpSet,
    nfa: Nfa,
    inv: Nfa,
    /// Language class: blocks of one class cancel alike.
    class: u32,
    /// Whether some block starting after this one could cancel with it.
    future: Option<bool>,
}

#[derive(Clone, Copy, Debug)]
enum Action {
    Open(u16),
    Slot(u32),
    Eps(StateId),
    Cancel { first: u32, second: u32, fd: u32, sd: u32 },
}

struct Frame {
    id: u32,
    j: u16,
    s: u16,
    q: StateId,
    c: u16,
    pending: Vec<(u32, u32)>,
}

type Key = (StateId, u16, Vec<u32>);

struct Solver<'a> {
    a: &'a ValenceSystem,
    kappa: usize,
    q_fin: StateId,
    ctxs: Vec<Ctx>,
    descs: Vec<Desc>,
    by_origin: HashMap<(StateId, u16), Vec<u32>>,
    fra1: HashMap<(u32, u32), Option<Word>>,
    classes: HashMap<Vec<u32>, u32>,
    arena: Vec<(u32, Action)>,
}

const ROOT: u32 = u32::MAX;
const SIGNATURE_CAP: usize = 4096;

impl<'a> Solver<'a> {
    fn new(a: &'a ValenceSystem, k: u32, q_fin: StateId) -> Self {
        let ops = a.ops();
        let n = a.num_states();
        let ctxs = a
            .graph
            .maximal_dependent_subsets(ops.syms())
            .into_iter()
            .map(|m| {
                let c = OpSet::from_ops(ops.iter().filter(|op| m & (1 << op.sym) != 0));
                let sys = saturate(&restrict(a, c)).expect("maximal sets are dependent").system();
                let eps_ts: Vec<Transition> = sys.transitions().iter().filter(|t| t.label.is_none()).copied().collect();
                let eps = (0..n)
                    .map(|q| {
                        let r = reach(n, &eps_ts, q, false);
                        (0..n).filter(|&p| p != q && r[p]).collect()
                    })
                    .collect();
                Ctx { ops: c, sys, eps }
            })
            .collect();
        Solver {
            a,
            kappa: k as usize + 1,
            q_fin,
            ctxs,
            descs: Vec::new(),
            by_origin: HashMap::new(),
            fra1: HashMap::new(),
            classes: HashMap::new(),
            arena: Vec::new(),
        }
    }

    fn descriptors(&mut self, q: StateId, c: u16) -> Vec<u32> {
        if let Some(v) = self.by_origin.get(&(q, c)) {
            return v.clone();
        }
        let n = self.a.num_states();
        let ctx = &self.ctxs[c as usize];
        let mut ids = Vec::new();
        for b in ctx.ops.subsets() {
            if b.is_empty() {
                continue;
            }
            let ts: Vec<Transition> =
                ctx.sys.transitions().iter().filter(|t| t.label.is_none_or(|op| b.contains(op))).copied().collect();
            let fwd = reach(n, &ts, q, false);
            for to in (0..n).filter(|&p| fwd[p]) {
                let bwd = reach(n, &ts, to, true);
                let kept: Vec<Transition> = ts.iter().filter(|t| fwd[t.from] && bwd[t.to]).copied().collect();
                let nfa = Nfa::new(n, q, to, kept);
                if nfa.alphabet() != b {
                    continue;
                }
                let inv = syninv_nfa(&self.a.graph, &nfa);
                let id = self.descs.len() as u32;
                let class = match language_signature(&nfa, SIGNATURE_CAP) {
                    Some(sig) => {
                        let fresh = self.classes.len() as u32;
                        *self.classes.entry(sig).or_insert(fresh)
                    }
                    None => {
                        // Unique key that cannot collide with a real signature.
                        let fresh = self.classes.len() as u32;
                        self.classes.insert(vec![u32::MAX, u32::MAX, id], fresh);
                        fresh
                    }
                };
                ids.push(id);
                let indep = self.a.graph.indep_ops(b);
                self.descs.push(Desc { to, alphabet: b, indep, nfa, inv, class, future: None });
            }
        }
        self.by_origin.insert((q, c), ids.clone());
        ids
    }

    fn dep(&self, x: u32, y: u32) -> bool {
        !self.descs[y as usize].alphabet.is_subset(self.descs[x as usize].indep)
    }

    /// Witness for cancelling `first` followed by `second`.
    fn cancel(&mut self, first: u32, second: u32) -> Option<Word> {
        let key = (self.descs[first as usize].class, self.descs[second as usize].class);
        if let Some(w) = self.fra1.get(&key) {
            return w.clone();
        }
        let w = product_witness(&self.descs[second as usize].nfa, &self.descs[first as usize].inv);
        self.fra1.insert(key, w.clone());
        w
    }

    /// Lexicographically least linearization of the trace of `p`.
    fn canonical(&self, mut p: Vec<(u32, u32)>) -> Vec<(u32, u32)> {
        let mut out = Vec::with_capacity(p.len());
        while !p.is_empty() {
            let mut best: Option<usize> = None;
            for i in 0..p.len() {
                if (0..i).any(|h| self.dep(p[h].0, p[i].0)) {
                    continue;
                }
                let rank = |e: (u32, u32)| (self.descs[e.0 as usize].class, e.0);
                if best.is_none_or(|b| rank(p[i]) < rank(p[b])) {
                    best = Some(i);
                }
            }
            out.push(p.remove(best.unwrap()));
        }
        out
    }

    /// No dependence chain from position `lo` through a middle element to `hi`.
    fn bringable(&self, p: &[(u32, u32)], lo: usize, hi: usize) -> bool {
        let mut up = vec![false; hi + 1];
        up[lo] = true;
        for m in lo + 1..hi {
            up[m] = (lo..m).any(|x| up[x] && self.dep(p[x].0, p[m].0));
        }
        let mut down = vec![false; hi + 1];
        down[hi] = true;
        for m in (lo + 1..hi).rev() {
            down[m] = (m + 1..=hi).any(|y| down[y] && self.dep(p[m].0, p[y].0));
            if up[m] && down[m] {
                return false;
            }
        }
        true
    }

    /// Number of pending blocks without a partner among the others, or `None`
    /// if one of them can have no partner at all.
    fn unmatched(&mut self, p: &[(u32, u32)]) -> Option<usize> {
        let mut count = 0;
        for i in 0..p.len() {
            let partnered = (0..p.len()).any(|h| {
                h != i && {
                    let (x, y) = if h < i { (p[h].0, p[i].0) } else { (p[i].0, p[h].0) };
                    self.cancel(x, y).is_some() || (!self.dep(x, y) && self.cancel(y, x).is_some())
                }
            });
            if !partnered {
                if !self.has_future_partner(p[i].0) {
                    return None;
                }
                count += 1;
            }
        }
        Some(count)
    }

    fn has_future_partner(&mut self, e: u32) -> bool {
        if let Some(b) = self.descs[e as usize].future {
            return b;
        }
        let n = self.a.num_states();
        let after = reach(n, self.a.transitions(), self.descs[e as usize].to, false);
        let mut found = false;
        'outer: for q in (0..n).filter(|&q| after[q]) {
            for c in 0..self.ctxs.len() as u16 {
                for d in self.descriptors(q, c) {
                    if self.cancel(e, d).is_some() || (!self.dep(e, d) && self.cancel(d, e).is_some()) {
                        found = true;
                        break 'outer;
                    }
                }
            }
        }
        self.descs[e as usize].future = Some(found);
        found
    }

    fn push_node(&mut self, parent: u32, act: Action) -> u32 {
        self.arena.push((parent, act));
        (self.arena.len() - 1) as u32
    }

    fn run(&mut self, q_init: StateId, opts: &NpOptions, stats: &mut NpStats) -> Result<Option<u32>, BcsError> {
        let kappa = self.kappa;
        // Same state, alphabet and pending trace at an earlier position dominates.
        let mut visited: HashMap<Key, (u16, u16)> = HashMap::new();
        let mut stack: Vec<Frame> = Vec::new();
        for c in (0..self.ctxs.len() as u16).rev() {
            let id = self.push_node(ROOT, Action::Open(c));
            stack.push(Frame { id, j: 0, s: 0, q: q_init, c, pending: Vec::new() });
        }
        while let Some(f) = stack.pop() {
            let key: Key = (f.q, f.c, f.pending.iter().map(|x| self.descs[x.0 as usize].class).collect());
            match visited.entry(key) {
                Entry::Occupied(mut e) => {
                    if *e.get() <= (f.j, f.s) {
                        continue;
                    }
                    e.insert((f.j, f.s));
                }
                Entry::Vacant(e) => {
                    e.insert((f.j, f.s));
                }
            }
            stats.expansions += 1;
            if stats.expansions > opts.max_expansions {
                return Err(BcsError::Budget(format!("over {} search expansions", opts.max_expansions)));
            }
            if visited.len() > opts.max_memo {
                return Err(BcsError::Budget(format!("search memo over {} entries", opts.max_memo)));
            }
            if f.pending.is_empty() && f.q == self.q_fin {
                stats.memo_entries = visited.len();
                return Ok(Some(f.id));
            }
            let remaining = (kappa - f.s as usize) + (kappa - 1 - f.j as usize) * kappa;
            match self.unmatched(&f.pending) {
                Some(u) if u <= remaining => {}
                _ => continue,
            }
            let mut children: Vec<Frame> = Vec::new();
            if (f.j as usize) + 1 < kappa {
                for c in 0..self.ctxs.len() as u16 {
                    let id = self.push_node(f.id, Action::Open(c));
                    children.push(Frame { id, j: f.j + 1, s: 0, q: f.q, c, pending: f.pending.clone() });
                }
            }
            if (f.s as usize) < kappa {
                for to in self.ctxs[f.c as usize].eps[f.q].clone() {
                    let id = self.push_node(f.id, Action::Eps(to));
                    children.push(Frame { id, j: f.j, s: f.s + 1, q: to, c: f.c, pending: f.pending.clone() });
                }
                let slot = (f.j as usize * kappa + f.s as usize) as u32;
                for d in self.descriptors(f.q, f.c) {
                    let mut p = f.pending.clone();
                    p.push((d, slot));
                    let p = self.canonical(p);
                    let id = self.push_node(f.id, Action::Slot(d));
                    let to = self.descs[d as usize].to;
                    children.push(Frame { id, j: f.j, s: f.s + 1, q: to, c: f.c, pending: p });
                }
            }
            let p = &f.pending;
            for hi in (1..p.len()).rev() {
                for lo in (0..hi).rev() {
                    if !self.bringable(p, lo, hi) {
                        continue;
                    }
                    let mut orders = vec![(lo, hi)];
                    if !self.dep(p[lo].0, p[hi].0) {
                        orders.push((hi, lo));
                    }
                    for (x, y) in orders {
                        if self.cancel(p[x].0, p[y].0).is_none() {
                            continue;
                        }
                        let rest: Vec<(u32, u32)> =
                            p.iter().enumerate().filter(|&(i, _)| i != lo && i != hi).map(|(_, e)| *e).collect();
                        let act = Action::Cancel { first: p[x].1, second: p[y].1, fd: p[x].0, sd: p[y].0 };
                        let id = self.push_node(f.id, act);
                        let pending = self.canonical(rest);
                        children.push(Frame { id, j: f.j, s: f.s, q: f.q, c: f.c, pending });
                    }
                }
            }
            stack.extend(children);
        }
        stats.memo_entries = visited.len();
        Ok(None)
    }

    fn certificate(&mut self, q_init: StateId, leaf: u32) -> Certificate {
        let mut actions = Vec::new();
        let mut cur = leaf;
        while cur != ROOT {
            let (parent, act) = self.arena[cur as usize];
            actions.push(act);
            cur = parent;
        }
        actions.reverse();

        let kappa = self.kappa;
        let n = kappa * kappa;
        let mut boundaries = vec![q_init];
        let mut contexts = vec![self.ctxs[0].ops; kappa];
        let mut blocks = vec![OpSet::EMPTY; n];
        let mut real = vec![false; n];
        let mut cancels = Vec::new();
        let (mut j, mut s, mut q) = (0usize, 0usize, q_init);
        let mut started = false;
        for act in actions {
            match act {
                Action::Open(c) => {
                    if started {
                        while s < kappa {
                            boundaries.push(q);
                            s += 1;
                        }
                        j += 1;
                        s = 0;
                    }
                    started = true;
                    contexts[j] = self.ctxs[c as usize].ops;
                }
                Action::Slot(d) => {
                    let d = &self.descs[d as usize];
                    blocks[j * kappa + s] = d.alphabet;
                    real[j * kappa + s] = true;
                    q = d.to;
                    boundaries.push(q);
                    s += 1;
                }
                Action::Eps(to) => {
                    q = to;
                    boundaries.push(q);
                    s += 1;
                }
                Action::Cancel { first, second, fd, sd } => {
                    let witness = self.cancel(fd, sd).expect("checked during search");
                    cancels.push((first as usize, second as usize, witness));
                }
            }
        }
        while boundaries.len() < n + 1 {
            boundaries.push(q);
        }
        let test = Test { kappa, boundaries, contexts, blocks };

        let mut steps = Vec::new();
        let mut current: Vec<usize> = Vec::new();
        for i in 0..n {
            if real[i] {
                current.push(i);
            } else {
                steps.push(FraStep::Drop { slot: i });
            }
        }
        let g = &self.a.graph;
        let dep = |x: usize, y: usize| !g.sets_independent(test.blocks[x], test.blocks[y]);
        for (first, second, witness) in cancels {
            let pf = current.iter().position(|&x| x == first).unwrap();
            let ps = current.iter().position(|&x| x == second).unwrap();
            let (lo, hi) = (pf.min(ps), pf.max(ps));
            let seg = &current[lo..=hi];
            let mut up = vec![false; seg.len()];
            up[0] = true;
            for m in 1..seg.len() {
                up[m] = (0..m).any(|x| up[x] && dep(seg[x], seg[m]));
            }
            let mut target: Vec<usize> = (1..seg.len() - 1).filter(|&m| !up[m]).map(|m| seg[m]).collect();
            target.push(first);
            target.push(second);
            target.extend((1..seg.len() - 1).filter(|&m| up[m]).map(|m| seg[m]));
            let rank: HashMap<usize, usize> = target.iter().enumerate().map(|(r, &x)| (x, r)).collect();
            let mut seg: Vec<usize> = seg.to_vec();
            for pass in 0..seg.len() {
                for m in 0..seg.len() - 1 - pass {
                    if rank[&seg[m]] > rank[&seg[m + 1]] {
                        steps.push(FraStep::Swap { first: seg[m], second: seg[m + 1] });
                        seg.swap(m, m + 1);
                    }
                }
            }
            current.splice(lo..=hi, seg);
            steps.push(FraStep::Cancel { first, second, witness });
            apply_step(&mut current, steps.last().unwrap());
        }
        debug_assert!(current.is_empty());
        Certificate { test, reduction: FraCertificate { steps } }
    }
}

/// Decides BCSREACH by searching for a test together with a free automata reduction.
pub fn solve_np(a: &ValenceSystem, q_init: StateId, q_fin: StateId, k: u32) -> Result<NpOutcome, BcsError> {
    solve_np_with(a, q_init, q_fin, k, &NpOptions::default())
}

pub fn solve_np_with(
    a: &ValenceSystem,
    q_init: StateId,
    q_fin: StateId,
    k: u32,
    opts: &NpOptions,
) -> Result<NpOutcome, BcsError> {
    for q in [q_init, q_fin] {
        if q >= a.num_states() {
            return Err(SystemError::UnknownState(format!("#{q}")).into());
        }
    }
    let mut solver = Solver::new(a, k, q_fin);
    let mut stats = NpStats::default();
    let found = solver.run(q_init, opts, &mut stats);
    stats.descriptors = solver.descs.len();
    match found {
        Ok(Some(leaf)) => {
            let cert = solver.certificate(q_init, leaf);
            Ok(NpOutcome { answer: Answer::Yes, certificate: Some(cert), stats })
        }
        Ok(None) => Ok(NpOutcome { answer: Answer::No, certificate: None, stats }),
        Err(BcsError::Budget(_)) => Ok(NpOutcome { answer: Answer::Inconclusive, certificate: None, stats }),
        Err(e) => Err(e),
    }
}

impl Certificate {
    /// Text block listing the test and the reduction steps.
    pub fn to_text(&self, a: &ValenceSystem) -> String {
        let g = &a.graph;
        let t = &self.test;
        let mut s = String::from("certificate {\n");
        let _ = writeln!(s, "  kappa: {}", t.kappa);
        let names: Vec<&str> = t.boundaries.iter().map(|&q| a.state_name(q)).collect();
        let _ = writeln!(s, "  boundaries: {}", names.join(" "));
        for c in &t.contexts {
            let _ = writeln!(s, "  context: {}", g.fmt_opset(*c));
        }
        for b in &t.blocks {
            let _ = writeln!(s, "  block: {}", g.fmt_opset(*b));
        }
        for step in &self.reduction.steps {
            let _ = match step {
                FraStep::Cancel { first, second, witness } => {
                    writeln!(s, "  cancel: {first} {second} : {}", g.fmt_word(witness))
                }
                FraStep::Swap { first, second } => writeln!(s, "  swap: {first} {second}"),
                FraStep::Drop { slot } => writeln!(s, "  drop: {slot}"),
            };
        }
        s.push_str("}\n");
        s
    }

    pub fn parse(text: &str, a: &ValenceSystem) -> Result<Certificate, BcsError> {
        let g = &a.graph;
        let bad = |m: String| BcsError::Parse(m);
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        if lines.next() != Some("certificate {") {
            return Err(bad("expected `certificate {`".into()));
        }
        let mut kappa = None;
        let mut boundaries = Vec::new();
        let (mut contexts, mut blocks, mut steps) = (Vec::new(), Vec::new(), Vec::new());
        let num = |x: &str| x.parse::<usize>().map_err(|_| bad(format!("bad number `{x}`")));
        let set = |x: &str| g.parse_word(x).map(OpSet::from_ops).map_err(|e| bad(e.to_string()));
        let mut closed = false;
        for line in lines.by_ref() {
            if line == "}" {
                closed = true;
                break;
            }
            let (key, val) = line.split_once(':').ok_or_else(|| bad(format!("expected `key: value`, got `{line}`")))?;
            let val = val.trim();
            match key.trim() {
                "kappa" => kappa = Some(num(val)?),
                "boundaries" => {
                    for name in val.split_whitespace() {
                        boundaries.push(a.state(name).ok_or_else(|| bad(format!("unknown state `{name}`")))?);
                    }
                }
                "context" => contexts.push(set(val)?),
                "block" => blocks.push(set(val)?),
                "cancel" => {
                    let (idx, w) = val.split_once(':').ok_or_else(|| bad("cancel needs a witness".into()))?;
                    let idx: Vec<&str> = idx.split_whitespace().collect();
                    if idx.len() != 2 {
                        return Err(bad("cancel needs two slots".into()));
                    }
                    let witness = g.parse_word(w).map_err(|e| bad(e.to_string()))?;
                    steps.push(FraStep::Cancel { first: num(idx[0])?, second: num(idx[1])?, witness });
                }
                "swap" => {
                    let idx: Vec<&str> = val.split_whitespace().collect();
                    if idx.len() != 2 {
                        return Err(bad("swap needs two slots".into()));
                    }
                    steps.push(FraStep::Swap { first: num(idx[0])?, second: num(idx[1])? });
                }
                "drop" => steps.push(FraStep::Drop { slot: num(val)? }),
                other => return Err(bad(format!("unknown key `{other}`"))),
            }
        }
        if !closed || lines.next().is_some() {
            return Err(bad("expected a single closing `}`".into()));
        }
        let kappa = kappa.ok_or_else(|| bad("missing kappa".into()))?;
        Ok(Certificate { test: Test { kappa, boundaries, contexts, blocks }, reduction: FraCertificate { steps } })
    }
}
