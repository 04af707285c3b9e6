//! Finite automata over operations: tests' building blocks and syntactic inverses.

use std::collections::hash_map::Entry;
use std::collections::{HashMap, VecDeque};

use thiserror::Error;

use crate::monoid::{Op, OpSet, StorageGraph, Word};
use crate::saturation::{saturate, SaturatedSystem, SaturationError};
use crate::system::{restrict, Label, StateId, Transition, ValenceSystem};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NfaError {
    #[error("unknown state #{0}")]
    UnknownState(StateId),
    #[error("context alphabet is not dependent")]
    NotDependent,
    #[error("block alphabet is not contained in the context alphabet")]
    NotSubset,
}

impl From<SaturationError> for NfaError {
    fn from(_: SaturationError) -> Self {
        NfaError::NotDependent
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Nfa {
    pub num_states: usize,
    pub init: StateId,
    pub fin: StateId,
    transitions: Vec<Transition>,
    alphabet: OpSet,
}

impl Nfa {
    pub fn new(num_states: usize, init: StateId, fin: StateId, transitions: Vec<Transition>) -> Self {
        let alphabet = OpSet::from_ops(transitions.iter().filter_map(|t| t.label));
        Nfa { num_states, init, fin, transitions, alphabet }
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    /// Non-ε labels that occur on some transition.
    pub fn alphabet(&self) -> OpSet {
        self.alphabet
    }

    fn adjacency(&self) -> Vec<Vec<Transition>> {
        let mut adj = vec![Vec::new(); self.num_states];
        for t in &self.transitions {
            adj[t.from].push(*t);
        }
        adj
    }

    /// Keeps only transitions lying on some path from `init` to `fin`.
    pub fn trim(&self) -> Nfa {
        let fwd = reach(self.num_states, &self.transitions, self.init, false);
        let bwd = reach(self.num_states, &self.transitions, self.fin, true);
        let kept = self.transitions.iter().filter(|t| fwd[t.from] && bwd[t.to]).copied().collect();
        Nfa::new(self.num_states, self.init, self.fin, kept)
    }

    pub fn is_empty(&self) -> bool {
        !reach(self.num_states, &self.transitions, self.init, false)[self.fin]
    }

    pub fn accepts(&self, w: &[Op]) -> bool {
        self.path_for_word(w).is_some()
    }

    /// An accepting path labelled `w` (ε-transitions interleaved), if any.
    pub fn path_for_word(&self, w: &[Op]) -> Option<Vec<Transition>> {
        let adj = self.adjacency();
        let n = self.num_states;
        let idx = |pos: usize, q: StateId| pos * n + q;
        let mut pred: Vec<Option<Option<Transition>>> = vec![None; (w.len() + 1) * n];
        pred[idx(0, self.init)] = Some(None);
        let mut queue = VecDeque::from([(0usize, self.init)]);
        while let Some((pos, q)) = queue.pop_front() {
            if pos == w.len() && q == self.fin {
                let mut path = Vec::new();
                let (mut p, mut s) = (pos, q);
                while let Some(Some(t)) = pred[idx(p, s)] {
                    path.push(t);
                    if t.label.is_some() {
                        p -= 1;
                    }
                    s = t.from;
                }
                path.reverse();
                return Some(path);
            }
            for t in &adj[q] {
                let next = match t.label {
                    None => pos,
                    Some(op) if pos < w.len() && w[pos] == op => pos + 1,
                    _ => continue,
                };
                if pred[idx(next, t.to)].is_none() {
                    pred[idx(next, t.to)] = Some(Some(*t));
                    queue.push_back((next, t.to));
                }
            }
        }
        None
    }
}

pub(crate) fn reach(n: usize, ts: &[Transition], src: StateId, backwards: bool) -> Vec<bool> {
    let mut adj = vec![Vec::new(); n];
    for t in ts {
        if backwards {
            adj[t.to].push(t.from);
        } else {
            adj[t.from].push(t.to);
        }
    }
    let mut seen = vec![false; n];
    seen[src] = true;
    let mut stack = vec![src];
    while let Some(p) = stack.pop() {
        for &q in &adj[p] {
            if !seen[q] {
                seen[q] = true;
                stack.push(q);
            }
        }
    }
    seen
}

/// Reads a system as an automaton from `q_init` to `q_fin`.
pub fn to_nfa(s: &ValenceSystem, q_init: StateId, q_fin: StateId) -> Result<Nfa, NfaError> {
    for q in [q_init, q_fin] {
        if q >= s.num_states() {
            return Err(NfaError::UnknownState(q));
        }
    }
    Ok(Nfa::new(s.num_states(), q_init, q_fin, s.transitions().to_vec()))
}

/// `2nfa(q_i, q_f)(sat(A[ops_con])[ops_bl])`, trimmed.
pub fn build_test_automaton(
    a: &ValenceSystem,
    q_i: StateId,
    q_f: StateId,
    ops_con: OpSet,
    ops_bl: OpSet,
) -> Result<Nfa, NfaError> {
    if !a.graph.mask_dependent(ops_con.syms()) {
        return Err(NfaError::NotDependent);
    }
    if !ops_bl.is_subset(ops_con) {
        return Err(NfaError::NotSubset);
    }
    let sat = saturate(&restrict(a, ops_con))?;
    block_automaton(&sat, q_i, q_f, ops_bl)
}

/// Block automaton over an already saturated context system.
pub fn block_automaton(sat: &SaturatedSystem, q_i: StateId, q_f: StateId, ops_bl: OpSet) -> Result<Nfa, NfaError> {
    let s = restrict(&sat.system(), ops_bl);
    Ok(to_nfa(&s, q_i, q_f)?.trim())
}

/// Reverse, drop `o−` on non-looped `o`, flip the remaining polarities.
pub fn syninv_nfa(g: &StorageGraph, n: &Nfa) -> Nfa {
    let ts = n
        .transitions
        .iter()
        .filter_map(|t| {
            let label: Label = match t.label {
                None => None,
                Some(op) if !op.is_pos() && !g.is_looped(op.sym) => return None,
                Some(op) => Some(op.flip()),
            };
            Some(Transition::new(t.to, label, t.from))
        })
        .collect();
    Nfa::new(n.num_states, n.fin, n.init, ts)
}

/// Canonical form of the minimal DFA of `n`: equal exactly when the languages are.
///
/// Returns `None` when determinization exceeds `cap` subsets.
pub fn language_signature(n: &Nfa, cap: usize) -> Option<Vec<u32>> {
    let ops: Vec<Op> = n.alphabet.iter().collect();
    let adj = n.adjacency();
    let close = |set: &mut Vec<StateId>| {
        let mut seen = vec![false; n.num_states];
        for &q in set.iter() {
            seen[q] = true;
        }
        let mut i = 0;
        while i < set.len() {
            for t in adj[set[i]].iter().filter(|t| t.label.is_none()) {
                if !seen[t.to] {
                    seen[t.to] = true;
                    set.push(t.to);
                }
            }
            i += 1;
        }
        set.sort_unstable();
    };
    let mut start = vec![n.init];
    close(&mut start);
    let mut index: HashMap<Vec<StateId>, usize> = HashMap::from([(start.clone(), 0)]);
    let mut sets = vec![start];
    let mut delta: Vec<Vec<Option<usize>>> = Vec::new();
    let mut i = 0;
    while i < sets.len() {
        let mut row = Vec::with_capacity(ops.len());
        for &op in &ops {
            let mut next: Vec<StateId> =
                sets[i].iter().flat_map(|&q| adj[q].iter().filter(|t| t.label == Some(op)).map(|t| t.to)).collect();
            if next.is_empty() {
                row.push(None);
                continue;
            }
            next.sort_unstable();
            next.dedup();
            close(&mut next);
            let id = match index.get(&next) {
                Some(&id) => id,
                None => {
                    if sets.len() >= cap {
                        return None;
                    }
                    index.insert(next.clone(), sets.len());
                    sets.push(next);
                    sets.len() - 1
                }
            };
            row.push(Some(id));
        }
        delta.push(row);
        i += 1;
    }
    // Moore refinement; `None` successors act as one shared rejecting sink.
    let accepting: Vec<bool> = sets.iter().map(|s| s.binary_search(&n.fin).is_ok()).collect();
    let mut class: Vec<usize> = accepting.iter().map(|&a| usize::from(a)).collect();
    let mut count = 0;
    loop {
        let mut ids: HashMap<(usize, Vec<Option<usize>>), usize> = HashMap::new();
        let next: Vec<usize> = (0..sets.len())
            .map(|d| {
                let sig = (class[d], delta[d].iter().map(|t| t.map(|x| class[x])).collect());
                let k = ids.len();
                *ids.entry(sig).or_insert(k)
            })
            .collect();
        let c = ids.len();
        class = next;
        if c == count {
            break;
        }
        count = c;
    }
    // Renumber classes in breadth-first order from the start.
    let mut order: Vec<Option<u32>> = vec![None; count];
    let mut rep = vec![0usize; count];
    for d in 0..sets.len() {
        rep[class[d]] = d;
    }
    order[class[0]] = Some(0);
    let mut queue = VecDeque::from([class[0]]);
    let mut out: Vec<u32> = ops.iter().map(|op| op.index() as u32).collect();
    out.push(u32::MAX);
    let mut next_id = 1;
    while let Some(c) = queue.pop_front() {
        let d = rep[c];
        out.push(u32::from(accepting[d]));
        for t in &delta[d] {
            match t {
                None => out.push(u32::MAX),
                Some(x) => {
                    let cx = class[*x];
                    if order[cx].is_none() {
                        order[cx] = Some(next_id);
                        next_id += 1;
                        queue.push_back(cx);
                    }
                    out.push(order[cx].unwrap());
                }
            }
        }
    }
    Some(out)
}

pub fn accepts_epsilon(n: &Nfa) -> bool {
    let eps: Vec<Transition> = n.transitions.iter().filter(|t| t.label.is_none()).copied().collect();
    reach(n.num_states, &eps, n.init, false)[n.fin]
}

/// A word accepted by both automata, shortest in the number of product moves.
pub fn product_witness(n1: &Nfa, n2: &Nfa) -> Option<Word> {
    let (a1, a2) = (n1.adjacency(), n2.adjacency());
    let start = (n1.init, n2.init);
    let mut pred: HashMap<(StateId, StateId), Option<((StateId, StateId), Label)>> = HashMap::new();
    pred.insert(start, None);
    let mut queue = VecDeque::from([start]);
    while let Some((p, q)) = queue.pop_front() {
        if p == n1.fin && q == n2.fin {
            let mut w = Vec::new();
            let mut cur = (p, q);
            while let Some(&Some((prev, label))) = pred.get(&cur) {
                if let Some(op) = label {
                    w.push(op);
                }
                cur = prev;
            }
            w.reverse();
            return Some(w);
        }
        let mut next = Vec::new();
        for t in a1[p].iter().filter(|t| t.label.is_none()) {
            next.push(((t.to, q), None));
        }
        for t in a2[q].iter().filter(|t| t.label.is_none()) {
            next.push(((p, t.to), None));
        }
        for t1 in a1[p].iter().filter(|t| t.label.is_some()) {
            for t2 in a2[q].iter().filter(|t| t.label == t1.label) {
                next.push(((t1.to, t2.to), t1.label));
            }
        }
        for (pair, label) in next {
            if let Entry::Vacant(e) = pred.entry(pair) {
                e.insert(Some(((p, q), label)));
                queue.push_back(pair);
            }
        }
    }
    None
}

pub fn product_nonempty(n1: &Nfa, n2: &Nfa) -> bool {
    product_witness(n1, n2).is_some()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn chain(g: &StorageGraph, w: &str) -> Nfa {
        let w = g.parse_word(w).unwrap();
        let ts = w.iter().enumerate().map(|(i, &op)| Transition::new(i, Some(op), i + 1)).collect();
        Nfa::new(w.len() + 1, 0, w.len(), ts)
    }

    #[test]
    fn to_nfa_examples() {
        let g = Arc::new(StorageGraph::new(["a"]).unwrap());
        let mut s = ValenceSystem::with_states(g.clone(), 2);
        s.add(Transition::new(0, Some(Op::pos(0)), 1)).unwrap();
        assert!(to_nfa(&s, 0, 1).unwrap().accepts(&[Op::pos(0)]));
        assert!(accepts_epsilon(&to_nfa(&s, 1, 1).unwrap()));
        assert!(!accepts_epsilon(&to_nfa(&s, 0, 1).unwrap()));
        assert_eq!(to_nfa(&s, 0, 7), Err(NfaError::UnknownState(7)));
    }

    #[test]
    fn test_automaton_examples() {
        let g = Arc::new(StorageGraph::new(["a"]).unwrap());
        let mut a = ValenceSystem::with_states(g.clone(), 3);
        a.add(Transition::new(0, Some(Op::pos(0)), 1)).unwrap();
        a.add(Transition::new(1, Some(Op::neg(0)), 2)).unwrap();
        let all = OpSet::from_ops([Op::pos(0), Op::neg(0)]);
        let n = build_test_automaton(&a, 0, 2, all, OpSet::EMPTY).unwrap();
        assert!(accepts_epsilon(&n));
        assert!(n.alphabet().is_empty());
        let plus = OpSet::single(Op::pos(0));
        let n = build_test_automaton(&a, 0, 1, plus, plus).unwrap();
        assert!(n.accepts(&[Op::pos(0)]) && !accepts_epsilon(&n));
        assert_eq!(build_test_automaton(&a, 0, 1, plus, all), Err(NfaError::NotSubset));
    }

    #[test]
    fn syninv_examples() {
        let mut g = StorageGraph::new(["a", "c", "d"]).unwrap();
        g.add_loop(1);
        g.add_loop(2);
        g.add_edge(1, 2);
        let inv = syninv_nfa(&g, &chain(&g, "+a"));
        assert!(inv.accepts(&g.parse_word("-a").unwrap()));
        assert!(!inv.accepts(&g.parse_word("+a").unwrap()));
        assert!(syninv_nfa(&g, &chain(&g, "+a -a")).is_empty());
        let inv = syninv_nfa(&g, &chain(&g, "-c +d"));
        assert!(inv.accepts(&g.parse_word("-d +c").unwrap()));
    }

    #[test]
    fn signature_examples() {
        let g = StorageGraph::new(["a"]).unwrap();
        let sig = |n: &Nfa| language_signature(n, 1000).unwrap();
        let two = Nfa::new(
            4,
            0,
            3,
            vec![
                Transition::new(0, Some(Op::pos(0)), 1),
                Transition::new(0, Some(Op::pos(0)), 2),
                Transition::new(1, None, 3),
                Transition::new(2, None, 3),
            ],
        );
        assert_eq!(sig(&two), sig(&chain(&g, "+a")));
        assert_ne!(sig(&chain(&g, "+a +a")), sig(&chain(&g, "+a")));
        assert_ne!(sig(&chain(&g, "-a")), sig(&chain(&g, "+a")));
    }

    #[test]
    fn product_examples() {
        let g = StorageGraph::new(["a"]).unwrap();
        let (p, m) = (chain(&g, "+a"), chain(&g, "-a"));
        assert!(product_nonempty(&p, &p));
        assert!(!product_nonempty(&p, &m));
        assert_eq!(product_witness(&m, &syninv_nfa(&g, &p)), Some(vec![Op::neg(0)]));
    }
}
