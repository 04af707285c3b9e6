//! Saturation of dependent valence systems.

use std::collections::{HashMap, VecDeque};

use thiserror::Error;

use crate::monoid::Op;
use crate::system::{StateId, Transition, ValenceSystem};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SaturationError {
    #[error("system is not dependent: {0}")]
    NotDependent(String),
}

/// How an added ε-edge was derived: `open`, then ε-edges, then `close`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Shortcut {
    pub edge: Transition,
    pub open: Transition,
    pub eps_path: Vec<Transition>,
    pub close: Transition,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SaturatedSystem {
    pub base: ValenceSystem,
    pub added: Vec<Shortcut>,
}

impl SaturatedSystem {
    /// `sat(B)` as a plain system: base transitions followed by the added ε-edges.
    pub fn system(&self) -> ValenceSystem {
        let mut s = self.base.clone();
        for sc in &self.added {
            s.add(sc.edge).expect("states of base");
        }
        s
    }

    pub fn added_edges(&self) -> impl Iterator<Item = Transition> + '_ {
        self.added.iter().map(|s| s.edge)
    }

    /// Rewrites a path of `sat(B)` into a path of `B` with the same endpoints.
    pub fn expand(&self, path: &[Transition]) -> Vec<Transition> {
        let index: HashMap<Transition, usize> = self.added.iter().enumerate().map(|(i, s)| (s.edge, i)).collect();
        let mut out = Vec::new();
        for t in path {
            self.expand_into(*t, &index, &mut out);
        }
        out
    }

    fn expand_into(&self, t: Transition, index: &HashMap<Transition, usize>, out: &mut Vec<Transition>) {
        if self.base.contains(&t) {
            out.push(t);
            return;
        }
        let sc = &self.added[index[&t]];
        out.push(sc.open);
        for e in &sc.eps_path {
            self.expand_into(*e, index, out);
        }
        out.push(sc.close);
    }
}

/// ε-reachability from `src`, with a predecessor edge per reached state.
fn eps_bfs(n: usize, eps: &[Vec<Transition>], src: StateId) -> Vec<Option<Option<Transition>>> {
    let mut pred: Vec<Option<Option<Transition>>> = vec![None; n];
    pred[src] = Some(None);
    let mut queue = VecDeque::from([src]);
    while let Some(p) = queue.pop_front() {
        for t in &eps[p] {
            if pred[t.to].is_none() {
                pred[t.to] = Some(Some(*t));
                queue.push_back(t.to);
            }
        }
    }
    pred
}

fn path_to(pred: &[Option<Option<Transition>>], mut q: StateId) -> Vec<Transition> {
    let mut path = Vec::new();
    while let Some(Some(t)) = pred[q] {
        path.push(t);
        q = t.from;
    }
    path.reverse();
    path
}

/// Adds ε-shortcuts for `+o ε* −o`, and for `−o ε* +o` when `o I o`, until nothing changes.
pub fn saturate(b: &ValenceSystem) -> Result<SaturatedSystem, SaturationError> {
    if !b.is_dependent() {
        return Err(SaturationError::NotDependent(b.graph.fmt_opset(b.ops())));
    }
    let g = b.graph.clone();
    let n = b.num_states();
    let mut eps: Vec<Vec<Transition>> = vec![Vec::new(); n];
    let mut has_eps = vec![vec![false; n]; n];
    for t in b.transitions().iter().filter(|t| t.label.is_none()) {
        eps[t.from].push(*t);
        has_eps[t.from][t.to] = true;
    }
    // Closing transitions indexed by (source, op).
    let mut closers: HashMap<(StateId, Op), Vec<Transition>> = HashMap::new();
    for t in b.transitions() {
        if let Some(op) = t.label {
            closers.entry((t.from, op)).or_default().push(*t);
        }
    }
    let openers: Vec<Transition> = b
        .transitions()
        .iter()
        .filter(|t| t.label.is_some_and(|op| op.is_pos() || g.is_looped(op.sym)))
        .copied()
        .collect();

    let mut added = Vec::new();
    loop {
        let mut changed = false;
        let mut reach_cache: HashMap<StateId, Vec<Option<Option<Transition>>>> = HashMap::new();
        for open in &openers {
            let want = open.label.unwrap().flip();
            let pred = reach_cache.entry(open.to).or_insert_with(|| eps_bfs(n, &eps, open.to)).clone();
            for (p2, pr) in pred.iter().enumerate() {
                if pr.is_none() {
                    continue;
                }
                let Some(cl) = closers.get(&(p2, want)) else { continue };
                for close in cl {
                    let (p1, q) = (open.from, close.to);
                    if p1 == q || has_eps[p1][q] {
                        continue;
                    }
                    let edge = Transition::new(p1, None, q);
                    has_eps[p1][q] = true;
                    eps[p1].push(edge);
                    added.push(Shortcut { edge, open: *open, eps_path: path_to(&pred, p2), close: *close });
                    changed = true;
                }
            }
            if changed {
                // Cached reachability is stale once an edge is added.
                reach_cache.clear();
            }
        }
        if !changed {
            break;
        }
    }
    Ok(SaturatedSystem { base: b.clone(), added })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monoid::StorageGraph;
    use std::sync::Arc;

    fn sys(g: StorageGraph, n: usize, ts: &[(usize, &str, usize)]) -> ValenceSystem {
        let g = Arc::new(g);
        let mut a = ValenceSystem::with_states(g.clone(), n);
        for &(p, l, q) in ts {
            let label = if l == "eps" { None } else { Some(g.parse_op(l).unwrap()) };
            a.add(Transition::new(p, label, q)).unwrap();
        }
        a
    }

    #[test]
    fn rule_one() {
        let b = sys(StorageGraph::new(["a"]).unwrap(), 4, &[(0, "+a", 1), (1, "eps", 2), (2, "-a", 3)]);
        let s = saturate(&b).unwrap();
        assert_eq!(s.added_edges().collect::<Vec<_>>(), vec![Transition::new(0, None, 3)]);
        let path = s.expand(&[Transition::new(0, None, 3)]);
        assert_eq!(path, b.transitions().to_vec());
    }

    #[test]
    fn rule_two_needs_loop() {
        let mut g = StorageGraph::new(["c"]).unwrap();
        let plain = sys(g.clone(), 3, &[(0, "-c", 1), (1, "+c", 2)]);
        assert!(saturate(&plain).unwrap().added.is_empty());
        g.add_loop(0);
        let b = sys(g, 3, &[(0, "-c", 1), (1, "+c", 2)]);
        let s = saturate(&b).unwrap();
        assert_eq!(s.added_edges().collect::<Vec<_>>(), vec![Transition::new(0, None, 2)]);
    }

    #[test]
    fn nested_and_idempotent() {
        let b = sys(
            StorageGraph::new(["a", "b"]).unwrap(),
            6,
            &[(0, "+a", 1), (1, "+b", 2), (2, "-b", 3), (3, "-a", 4), (4, "+a", 5)],
        );
        let s = saturate(&b).unwrap();
        let edges: Vec<_> = s.added_edges().collect();
        assert!(edges.contains(&Transition::new(1, None, 3)));
        assert!(edges.contains(&Transition::new(0, None, 4)));
        let again = saturate(&s.system()).unwrap();
        assert!(again.added.is_empty());
        let full = s.expand(&[Transition::new(0, None, 4)]);
        assert_eq!(full, b.transitions()[..4].to_vec());
    }

    #[test]
    fn rejects_independent_ops() {
        let mut g = StorageGraph::new(["a", "b"]).unwrap();
        g.add_edge(0, 1);
        let b = sys(g, 2, &[(0, "+a", 1), (1, "+b", 0)]);
        assert!(matches!(saturate(&b), Err(SaturationError::NotDependent(_))));
    }
}
