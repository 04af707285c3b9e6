//! Polynomial-time BCSREACH for graphs whose loop-free part is a transitive forest.
//!
//! The instance is first made k-bounded ([`to_promise`]); identity reachability on the
//! bounded system is then decided along the decomposition tree of the graph: disjoint
//! unions by ε-saturation, universal vertices by a bounded counter in the control state.

use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::Arc;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::monoid::{Op, StorageGraph, Sym};
use crate::system::{StateId, Transition, ValenceSystem};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolyError {
    #[error("unsupported graph: {0}")]
    UnsupportedGraph(String),
    #[error("vertex `{0}` is not universal")]
    NotUniversal(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
}

/// Decomposition of a loop-free graph into disjoint unions and universal vertices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TfTree {
    /// The graph without vertices.
    Leaf,
    /// Connected components, each a tree of its own.
    Union(Vec<TfTree>),
    /// A vertex adjacent to all others, over the rest of the graph.
    Vertex(Sym, Box<TfTree>),
}

impl TfTree {
    /// Symbols covered by the tree.
    pub fn mask(&self) -> u32 {
        match self {
            TfTree::Leaf => 0,
            TfTree::Union(cs) => cs.iter().fold(0, |m, c| m | c.mask()),
            TfTree::Vertex(v, c) => (1 << v) | c.mask(),
        }
    }
}

fn components(g: &StorageGraph, mask: u32) -> Vec<u32> {
    let mut left = mask;
    let mut out = Vec::new();
    while left != 0 {
        let mut comp = 1u32 << left.trailing_zeros();
        loop {
            let mut grown = comp;
            let mut m = comp;
            while m != 0 {
                let s = m.trailing_zeros() as Sym;
                grown |= g.neighbours(s) & mask;
                m &= m - 1;
            }
            if grown == comp {
                break;
            }
            comp = grown;
        }
        out.push(comp);
        left &= !comp;
    }
    out
}

fn decompose(g: &StorageGraph, mask: u32) -> Option<TfTree> {
    if mask == 0 {
        return Some(TfTree::Leaf);
    }
    let comps = components(g, mask);
    if comps.len() > 1 {
        return comps.into_iter().map(|c| decompose(g, c)).collect::<Option<Vec<_>>>().map(TfTree::Union);
    }
    let mut m = mask;
    while m != 0 {
        let v = m.trailing_zeros() as Sym;
        let rest = mask & !(1 << v);
        if g.neighbours(v) & rest == rest {
            return decompose(g, rest).map(|c| TfTree::Vertex(v, Box::new(c)));
        }
        m &= m - 1;
    }
    None
}

/// Decomposition tree of `G⁻`, or `None` if it is not a transitive forest.
pub fn transitive_forest_tree(g: &StorageGraph) -> Option<TfTree> {
    let all = if g.len() == 32 { u32::MAX } else { (1u32 << g.len()) - 1 };
    decompose(g, all)
}

pub fn is_transitive_forest(g: &StorageGraph) -> bool {
    transitive_forest_tree(g).is_some()
}

/// Whether `G⁻` has an induced P4 or C4.
pub fn has_induced_p4_or_c4(g: &StorageGraph) -> bool {
    let n = g.len() as Sym;
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                for d in c + 1..n {
                    let vs = [a, b, c, d];
                    let mut deg = [0; 4];
                    let mut edges = 0;
                    for i in 0..4 {
                        for j in i + 1..4 {
                            if g.neighbours(vs[i]) & (1 << vs[j]) != 0 {
                                deg[i] += 1;
                                deg[j] += 1;
                                edges += 1;
                            }
                        }
                    }
                    deg.sort_unstable();
                    // Three edges with degrees 1,1,2,2 is a path; four with all degrees 2 a cycle.
                    if (edges == 3 && deg == [1, 1, 2, 2]) || (edges == 4 && deg == [2, 2, 2, 2]) {
                        return true;
                    }
                }
            }
        }
    }
    false
}

/// A system promised to switch context at most `k` times along every path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundedSystem {
    pub system: ValenceSystem,
    pub k: u32,
}

const MAX_PROMISE_OPS: usize = 16;

/// Tracks the current context's operations and the switch count in the state.
///
/// State `(q, U, ℓ)` has id `(q·2^|Op| + U)·(k+1) + ℓ`; the extra final state comes last.
pub fn to_promise(
    a: &ValenceSystem,
    q_init: StateId,
    q_fin: StateId,
    k: u32,
) -> Result<(BoundedSystem, StateId, StateId), PolyError> {
    let ops: Vec<Op> = a.ops().iter().collect();
    if ops.len() > MAX_PROMISE_OPS {
        return Err(PolyError::Budget(format!("{} operations in the promise construction", ops.len())));
    }
    let g = &a.graph;
    let bit = |op: Op| 1usize << ops.iter().position(|&o| o == op).expect("op of A");
    let nu = 1usize << ops.len();
    let kk = k as usize + 1;
    let syms: Vec<u32> =
        (0..nu).map(|u| ops.iter().enumerate().filter(|(i, _)| u & (1 << i) != 0).fold(0, |m, (_, o)| m | 1 << o.sym)).collect();
    let id = |q: StateId, u: usize, l: usize| (q * nu + u) * kk + l;
    let star = a.num_states() * nu * kk;
    let mut names = Vec::with_capacity(star + 1);
    for q in 0..a.num_states() {
        for u in 0..nu {
            for l in 0..kk {
                names.push(format!("{}.{u}.{l}", a.state_name(q)));
            }
        }
    }
    names.push("*".to_string());
    let mut ts = Vec::new();
    for t in a.transitions() {
        for u in 0..nu {
            for l in 0..kk {
                let from = id(t.from, u, l);
                match t.label {
                    None => ts.push(Transition::new(from, None, id(t.to, u, l))),
                    Some(x) if g.neighbours(x.sym) & syms[u] == 0 => {
                        ts.push(Transition::new(from, Some(x), id(t.to, u | bit(x), l)))
                    }
                    Some(x) if l + 1 < kk => ts.push(Transition::new(from, Some(x), id(t.to, bit(x), l + 1))),
                    Some(_) => {}
                }
            }
        }
    }
    for u in 0..nu {
        for l in 0..kk {
            ts.push(Transition::new(id(q_fin, u, l), None, star));
        }
    }
    // Distinct source transitions give distinct copies, except ε-edges into the final state.
    let mut seen = HashSet::new();
    ts.retain(|t| seen.insert(*t));
    let system = ValenceSystem::from_parts(a.graph.clone(), names, ts);
    Ok((BoundedSystem { system, k }, id(q_init, 0, 0), star))
}

/// Counter-value bound `(mn+1)² + mn + 1` for inputs of length `m` and `n` control states.
pub fn counter_bound(m: usize, n: usize) -> usize {
    let mn = m * n;
    (mn + 1) * (mn + 1) + mn + 1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PolyConfig {
    /// Overrides the counter bound when set.
    pub bound: Option<usize>,
    /// Multiplies the counter bound.
    pub bound_scale: usize,
    /// Largest product system built while eliminating a vertex.
    pub max_states: usize,
}

impl Default for PolyConfig {
    fn default() -> Self {
        PolyConfig { bound: None, bound_scale: 1, max_states: 4_000_000 }
    }
}

impl PolyConfig {
    /// Counter bound for an input system with `n` states and switch bound `k`.
    pub fn bound_for(&self, n: usize, k: u32) -> usize {
        self.bound.unwrap_or_else(|| counter_bound(k as usize + 1, n)) * self.bound_scale
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolyStats {
    pub promise_states: usize,
    pub counter_bound: usize,
    pub largest_product: usize,
    pub saturation_edges: usize,
}

/// Bare transition graph used during the recursion.
#[derive(Clone, Debug)]
struct Net {
    n: usize,
    ts: Vec<Transition>,
}

impl Net {
    fn restrict(&self, mask: u32) -> Net {
        let ts = self.ts.iter().filter(|t| t.label.is_none_or(|op| mask & (1 << op.sym) != 0)).copied().collect();
        Net { n: self.n, ts }
    }

    fn adjacency(&self) -> Vec<Vec<Transition>> {
        let mut adj = vec![Vec::new(); self.n];
        for t in &self.ts {
            adj[t.from].push(*t);
        }
        adj
    }

    /// States reachable from `srcs` (forwards) or reaching them (backwards), any label.
    fn closure(&self, srcs: &[StateId], backwards: bool, eps_only: bool) -> FixedBitSet {
        let mut adj = vec![Vec::new(); self.n];
        for t in self.ts.iter().filter(|t| !eps_only || t.label.is_none()) {
            if backwards {
                adj[t.to].push(t.from);
            } else {
                adj[t.from].push(t.to);
            }
        }
        let mut seen = FixedBitSet::with_capacity(self.n);
        let mut stack = Vec::new();
        for &s in srcs {
            if !seen.put(s) {
                stack.push(s);
            }
        }
        while let Some(p) = stack.pop() {
            for &q in &adj[p] {
                if !seen.put(q) {
                    stack.push(q);
                }
            }
        }
        seen
    }
}

/// Product with a counter for `v`; states are `(q, c)` reachable from `(s, 0)`.
struct CounterProduct {
    net: Net,
    index: HashMap<(StateId, i64), StateId>,
}

fn counter_product(
    net: &Net,
    g: &StorageGraph,
    v: Sym,
    bound: usize,
    sources: &[StateId],
    max_states: usize,
) -> Result<CounterProduct, PolyError> {
    let lo = if g.is_looped(v) { -(bound as i64) } else { 0 };
    let hi = bound as i64;
    let adj = net.adjacency();
    let mut index: HashMap<(StateId, i64), StateId> = HashMap::new();
    let mut states: Vec<(StateId, i64)> = Vec::new();
    let mut queue = VecDeque::new();
    for &s in sources {
        if let std::collections::hash_map::Entry::Vacant(e) = index.entry((s, 0)) {
            e.insert(states.len());
            states.push((s, 0));
            queue.push_back(states.len() - 1);
        }
    }
    let mut ts = Vec::new();
    while let Some(i) = queue.pop_front() {
        let (q, c) = states[i];
        for t in &adj[q] {
            let (label, c2) = match t.label {
                Some(op) if op.sym == v => (None, if op.is_pos() { c + 1 } else { c - 1 }),
                l => (l, c),
            };
            if c2 < lo || c2 > hi {
                continue;
            }
            let j = match index.get(&(t.to, c2)) {
                Some(&j) => j,
                None => {
                    if states.len() >= max_states {
                        return Err(PolyError::Budget(format!("counter product over {max_states} states")));
                    }
                    index.insert((t.to, c2), states.len());
                    states.push((t.to, c2));
                    queue.push_back(states.len() - 1);
                    states.len() - 1
                }
            };
            ts.push(Transition::new(i, label, j));
        }
    }
    // Keep states from which some zero-counter state is reachable.
    let full = Net { n: states.len(), ts };
    let zeros: Vec<StateId> = (0..states.len()).filter(|&i| states[i].1 == 0).collect();
    let live = full.closure(&zeros, true, false);
    let mut remap = vec![usize::MAX; states.len()];
    let mut kept = 0;
    for i in live.ones() {
        remap[i] = kept;
        kept += 1;
    }
    let ts = full
        .ts
        .iter()
        .filter(|t| live[t.from] && live[t.to])
        .map(|t| Transition::new(remap[t.from], t.label, remap[t.to]))
        .collect();
    let index = index.into_iter().filter(|(_, i)| live[*i]).map(|(k, i)| (k, remap[i])).collect();
    Ok(CounterProduct { net: Net { n: kept, ts }, index })
}

struct PolySolver<'a> {
    g: &'a StorageGraph,
    bound: usize,
    cfg: PolyConfig,
    stats: PolyStats,
}

impl PolySolver<'_> {
    /// For each source, the targets reachable by a run whose word is the identity.
    fn identity_reach(
        &mut self,
        net: &Net,
        node: &TfTree,
        sources: &[StateId],
        targets: &[StateId],
    ) -> Result<Vec<FixedBitSet>, PolyError> {
        let net = net.restrict(node.mask());
        match node {
            TfTree::Leaf => Ok(eps_rows(&net, sources, targets)),
            TfTree::Union(children) => self.union(net, children, sources, targets),
            TfTree::Vertex(v, child) => {
                let prod = counter_product(&net, self.g, *v, self.bound, sources, self.cfg.max_states)?;
                self.stats.largest_product = self.stats.largest_product.max(prod.net.n);
                let psrc: Vec<StateId> = sources.iter().map(|&s| prod.index[&(s, 0)]).collect();
                let (ptgt, tpos): (Vec<StateId>, Vec<usize>) =
                    targets.iter().enumerate().filter_map(|(i, &t)| prod.index.get(&(t, 0)).map(|&p| (p, i))).unzip();
                let rows = self.identity_reach(&prod.net, child, &psrc, &ptgt)?;
                Ok(rows
                    .into_iter()
                    .map(|r| {
                        let mut out = FixedBitSet::with_capacity(targets.len());
                        for j in r.ones() {
                            out.insert(tpos[j]);
                        }
                        out
                    })
                    .collect())
            }
        }
    }

    fn union(
        &mut self,
        mut net: Net,
        children: &[TfTree],
        sources: &[StateId],
        targets: &[StateId],
    ) -> Result<Vec<FixedBitSet>, PolyError> {
        let fwd = net.closure(sources, false, false);
        let bwd = net.closure(targets, true, false);
        let relevant: Vec<StateId> = fwd.intersection(&bwd).collect();
        let mut eps: HashSet<(StateId, StateId)> =
            net.ts.iter().filter(|t| t.label.is_none()).map(|t| (t.from, t.to)).collect();
        // Child answers only change once an edge is added; skip children that are up to date.
        let mut fresh = vec![false; children.len()];
        loop {
            let mut changed = false;
            for (i, child) in children.iter().enumerate() {
                if fresh[i] {
                    continue;
                }
                fresh[i] = true;
                let sub = net.restrict(child.mask());
                let rows = self.identity_reach(&sub, child, &relevant, &relevant)?;
                for (si, row) in rows.iter().enumerate() {
                    let p = relevant[si];
                    for ti in row.ones() {
                        let q = relevant[ti];
                        if p != q && eps.insert((p, q)) {
                            net.ts.push(Transition::new(p, None, q));
                            self.stats.saturation_edges += 1;
                            changed = true;
                        }
                    }
                }
                if changed {
                    fresh.iter_mut().enumerate().for_each(|(j, f)| *f = j == i);
                }
            }
            if !changed {
                break;
            }
        }
        Ok(eps_rows(&net, sources, targets))
    }
}

fn eps_rows(net: &Net, sources: &[StateId], targets: &[StateId]) -> Vec<FixedBitSet> {
    let mut memo: HashMap<StateId, FixedBitSet> = HashMap::new();
    sources
        .iter()
        .map(|&s| {
            let r = memo.entry(s).or_insert_with(|| net.closure(&[s], false, true));
            let mut row = FixedBitSet::with_capacity(targets.len());
            for (i, &t) in targets.iter().enumerate() {
                row.set(i, r[t]);
            }
            row
        })
        .collect()
}

fn net_of(s: &ValenceSystem) -> Net {
    Net { n: s.num_states(), ts: s.transitions().to_vec() }
}

#[derive(Clone, Debug)]
pub struct PolyOutcome {
    pub reachable: bool,
    pub stats: PolyStats,
}

/// Decides BCSREACH when `G⁻` is a transitive forest.
pub fn solve_poly(a: &ValenceSystem, q_init: StateId, q_fin: StateId, k: u32) -> Result<bool, PolyError> {
    solve_poly_with(a, q_init, q_fin, k, &PolyConfig::default()).map(|o| o.reachable)
}

pub fn solve_poly_with(
    a: &ValenceSystem,
    q_init: StateId,
    q_fin: StateId,
    k: u32,
    cfg: &PolyConfig,
) -> Result<PolyOutcome, PolyError> {
    let tree = transitive_forest_tree(&a.graph).ok_or_else(|| {
        PolyError::UnsupportedGraph("the loop-free graph contains an induced P4 or C4".to_string())
    })?;
    let (bs, pi, pf) = to_promise(a, q_init, q_fin, k)?;
    let bound = cfg.bound_for(a.num_states(), k);
    let mut solver = PolySolver { g: &a.graph, bound, cfg: *cfg, stats: PolyStats::default() };
    solver.stats.promise_states = bs.system.num_states();
    solver.stats.counter_bound = bound;
    let rows = solver.identity_reach(&net_of(&bs.system), &tree, &[pi], &[pf])?;
    Ok(PolyOutcome { reachable: rows[0][0], stats: solver.stats })
}

/// The storage graph without `v`, with symbols renumbered in order.
pub fn remove_vertex(g: &StorageGraph, v: Sym) -> (StorageGraph, Vec<Option<Sym>>) {
    let mut map = vec![None; g.len()];
    let mut names = Vec::new();
    for s in 0..g.len() as Sym {
        if s != v {
            map[s as usize] = Some(names.len() as Sym);
            names.push(g.name(s).to_string());
        }
    }
    let mut h = StorageGraph::new(names).expect("names of g are distinct");
    for (a, b) in g.edges() {
        if let (Some(x), Some(y)) = (map[a as usize], map[b as usize]) {
            h.add_edge(x, y);
        }
    }
    for s in g.loops() {
        if let Some(x) = map[s as usize] {
            h.add_loop(x);
        }
    }
    (h, map)
}

/// An instance over `G \ v` with the same answer, for a universal vertex `v`.
///
/// The input is made k-bounded first; `v` is then replaced by a counter capped at `bound`
/// in the control state. The result is k-bounded as well, so `k` carries over.
pub fn eliminate_universal_vertex(
    a: &ValenceSystem,
    q_init: StateId,
    q_fin: StateId,
    k: u32,
    v: Sym,
    bound: usize,
) -> Result<(ValenceSystem, StateId, StateId), PolyError> {
    let g = &a.graph;
    let others = ((1u64 << g.len()) - 1) as u32 & !(1 << v);
    if g.neighbours(v) & others != others {
        return Err(PolyError::NotUniversal(g.name(v).to_string()));
    }
    let (bs, pi, pf) = to_promise(a, q_init, q_fin, k)?;
    let prod = counter_product(&net_of(&bs.system), g, v, bound, &[pi], PolyConfig::default().max_states)?;
    let (h, map) = remove_vertex(g, v);
    let mut names = vec![String::new(); prod.net.n];
    for (&(q, c), &i) in &prod.index {
        names[i] = format!("{}#{c}", bs.system.state_name(q));
    }
    let ts = prod
        .net
        .ts
        .iter()
        .map(|t| {
            let label = t.label.map(|op| Op { sym: map[op.sym as usize].expect("v-ops became ε"), pol: op.pol });
            Transition::new(t.from, label, t.to)
        })
        .collect::<HashSet<_>>()
        .into_iter()
        .collect::<Vec<_>>();
    let mut ts = ts;
    ts.sort_by_key(|t| (t.from, t.to, t.label));
    let init = prod.index[&(pi, 0)];
    // The final state may be pruned when it is unreachable; keep a fresh isolated one then.
    let fin = match prod.index.get(&(pf, 0)) {
        Some(&f) => f,
        None => {
            names.push(format!("{}#0", bs.system.state_name(pf)));
            names.len() - 1
        }
    };
    Ok((ValenceSystem::from_parts(Arc::new(h), names, ts), init, fin))
}
