//! Words over a graph monoid: independence, rewriting to irreducible form,
//! the word problem, right-invertibility, syntactic inverses and contexts.
//!
//! Monoid elements are never materialised. Everything works on literal
//! operation sequences plus decision procedures on them.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a vertex in its [`StorageGraph`].
pub type Sym = u16;

/// Graphs are stored as per-vertex bitmasks, which caps the vertex count.
pub const MAX_VERTICES: usize = 32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MonoidError {
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("duplicate vertex `{0}`")]
    DuplicateVertex(String),
    #[error("graph has more than {MAX_VERTICES} vertices")]
    TooManyVertices,
    #[error("malformed operation token `{0}`")]
    BadToken(String),
    #[error("context decomposition of the empty word")]
    EmptyWord,
    #[error("syntactic inverse undefined: negative operation on non-looped `{0}`")]
    UndefinedInverse(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarity {
    Pos,
    Neg,
}

/// A signed operation `o+` or `o-`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Op {
    pub sym: Sym,
    pub pol: Polarity,
}

impl Op {
    pub const fn pos(sym: Sym) -> Op {
        Op { sym, pol: Polarity::Pos }
    }

    pub const fn neg(sym: Sym) -> Op {
        Op { sym, pol: Polarity::Neg }
    }

    pub fn is_pos(self) -> bool {
        self.pol == Polarity::Pos
    }

    pub fn flip(self) -> Op {
        match self.pol {
            Polarity::Pos => Op::neg(self.sym),
            Polarity::Neg => Op::pos(self.sym),
        }
    }

    /// Dense index `2*sym + (negative as usize)`, used by [`OpSet`].
    pub fn index(self) -> usize {
        2 * self.sym as usize + usize::from(self.pol == Polarity::Neg)
    }

    pub fn from_index(i: usize) -> Op {
        let sym = (i / 2) as Sym;
        if i.is_multiple_of(2) {
            Op::pos(sym)
        } else {
            Op::neg(sym)
        }
    }
}

/// Finite operation sequence. `vec![]` is the empty word.
pub type Word = Vec<Op>;

/// Bitset of operations, indexed by [`Op::index`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OpSet(pub u64);

impl OpSet {
    pub const EMPTY: OpSet = OpSet(0);

    pub fn single(op: Op) -> OpSet {
        OpSet(1 << op.index())
    }

    pub fn from_ops<I: IntoIterator<Item = Op>>(ops: I) -> OpSet {
        let mut s = OpSet::EMPTY;
        for op in ops {
            s.insert(op);
        }
        s
    }

    pub fn insert(&mut self, op: Op) {
        self.0 |= 1 << op.index();
    }

    pub fn contains(self, op: Op) -> bool {
        self.0 & (1 << op.index()) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn union(self, o: OpSet) -> OpSet {
        OpSet(self.0 | o.0)
    }

    pub fn intersect(self, o: OpSet) -> OpSet {
        OpSet(self.0 & o.0)
    }

    pub fn is_subset(self, o: OpSet) -> bool {
        self.0 & !o.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Op> {
        let bits = self.0;
        (0..64).filter(move |i| bits & (1 << i) != 0).map(Op::from_index)
    }

    /// Symbols touched by the set, as a vertex bitmask.
    pub fn syms(self) -> u32 {
        let mut m = 0u32;
        for op in self.iter() {
            m |= 1 << op.sym;
        }
        m
    }

    /// All subsets, in increasing numeric order of their bit patterns.
    pub fn subsets(self) -> Vec<OpSet> {
        let mut out = Vec::with_capacity(1 << self.len());
        let mut sub = 0u64;
        loop {
            out.push(OpSet(sub));
            if sub == self.0 {
                break;
            }
            sub = (sub.wrapping_sub(self.0)) & self.0;
        }
        out
    }
}

/// Undirected graph `G = (V, I)`; self-loops allowed.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StorageGraph {
    names: Vec<String>,
    adj: Vec<u32>,
}

impl StorageGraph {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self, MonoidError> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.len() > MAX_VERTICES {
            return Err(MonoidError::TooManyVertices);
        }
        let mut seen = HashSet::new();
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(MonoidError::DuplicateVertex(n.clone()));
            }
        }
        let adj = vec![0; names.len()];
        Ok(StorageGraph { names, adj })
    }

    /// Graph with vertices `v0, v1, ...`.
    pub fn anonymous(n: usize) -> Self {
        Self::new((0..n).map(|i| format!("v{i}"))).expect("valid size")
    }

    pub fn add_edge(&mut self, a: Sym, b: Sym) {
        self.adj[a as usize] |= 1 << b;
        self.adj[b as usize] |= 1 << a;
    }

    pub fn add_loop(&mut self, a: Sym) {
        self.add_edge(a, a);
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, s: Sym) -> &str {
        &self.names[s as usize]
    }

    pub fn sym(&self, name: &str) -> Option<Sym> {
        self.names.iter().position(|n| n == name).map(|i| i as Sym)
    }

    pub fn all_syms(&self) -> u32 {
        if self.len() == 32 {
            u32::MAX
        } else {
            (1u32 << self.len()) - 1
        }
    }

    /// `(a, b) ∈ I`.
    #[inline]
    pub fn indep(&self, a: Sym, b: Sym) -> bool {
        self.adj[a as usize] & (1 << b) != 0
    }

    #[inline]
    pub fn is_looped(&self, a: Sym) -> bool {
        self.indep(a, a)
    }

    /// Neighbours of `a` other than `a` itself.
    #[inline]
    pub fn neighbours(&self, a: Sym) -> u32 {
        self.adj[a as usize] & !(1 << a)
    }

    /// Edges between distinct vertices, each once with `a < b`.
    pub fn edges(&self) -> Vec<(Sym, Sym)> {
        let mut out = Vec::new();
        for a in 0..self.len() as Sym {
            for b in a + 1..self.len() as Sym {
                if self.indep(a, b) {
                    out.push((a, b));
                }
            }
        }
        out
    }

    pub fn loops(&self) -> Vec<Sym> {
        (0..self.len() as Sym).filter(|&a| self.is_looped(a)).collect()
    }

    /// Every operation over the graph.
    pub fn all_ops(&self) -> OpSet {
        let mut s = OpSet::EMPTY;
        for a in 0..self.len() as Sym {
            s.insert(Op::pos(a));
            s.insert(Op::neg(a));
        }
        s
    }

    /// Operations independent of every operation in `set` (polarity ignored).
    pub fn indep_ops(&self, set: OpSet) -> OpSet {
        let mut syms = self.all_syms();
        let mut m = set.syms();
        while m != 0 {
            let s = m.trailing_zeros();
            syms &= self.adj[s as usize];
            m &= m - 1;
        }
        let mut out = OpSet::EMPTY;
        for a in 0..self.len() as Sym {
            if syms & (1 << a) != 0 {
                out.insert(Op::pos(a));
                out.insert(Op::neg(a));
            }
        }
        out
    }

    /// `Op(X) I Op(Y)`: every pair across the two sets is independent.
    pub fn sets_independent(&self, x: OpSet, y: OpSet) -> bool {
        y.is_subset(self.indep_ops(x))
    }

    /// True iff no two distinct symbols of the mask are independent.
    pub fn mask_dependent(&self, mask: u32) -> bool {
        let mut m = mask;
        while m != 0 {
            let s = m.trailing_zeros() as Sym;
            if self.neighbours(s) & mask != 0 {
                return false;
            }
            m &= m - 1;
        }
        true
    }

    /// Maximal dependent subsets of the symbol mask, sorted.
    pub fn maximal_dependent_subsets(&self, mask: u32) -> Vec<u32> {
        let syms: Vec<Sym> = (0..self.len() as Sym).filter(|s| mask & (1 << s) != 0).collect();
        let mut out = Vec::new();
        for sub in 0u64..(1u64 << syms.len()) {
            let m: u32 = syms
                .iter()
                .enumerate()
                .filter(|(i, _)| sub & (1 << i) != 0)
                .fold(0, |acc, (_, &s)| acc | (1 << s));
            if !self.mask_dependent(m) {
                continue;
            }
            let maximal = syms
                .iter()
                .all(|&s| m & (1 << s) != 0 || !self.mask_dependent(m | (1 << s)));
            if maximal {
                out.push(m);
            }
        }
        out.sort_unstable();
        out
    }

    pub fn check_sym(&self, s: Sym) -> Result<(), MonoidError> {
        if (s as usize) < self.len() {
            Ok(())
        } else {
            Err(MonoidError::UnknownSymbol(format!("#{s}")))
        }
    }

    pub fn parse_op(&self, tok: &str) -> Result<Op, MonoidError> {
        let (pol, rest) = if let Some(r) = tok.strip_prefix('+') {
            (Polarity::Pos, r)
        } else if let Some(r) = tok.strip_prefix('-') {
            (Polarity::Neg, r)
        } else {
            return Err(MonoidError::BadToken(tok.to_string()));
        };
        let sym = self.sym(rest).ok_or_else(|| MonoidError::UnknownSymbol(rest.to_string()))?;
        Ok(Op { sym, pol })
    }

    /// Parses `+a -b ...`; `eps` (or blank) is the empty word.
    pub fn parse_word(&self, text: &str) -> Result<Word, MonoidError> {
        let mut w = Vec::new();
        for tok in text.split(|c: char| c.is_whitespace() || c == ',') {
            if tok.is_empty() || tok == "eps" {
                continue;
            }
            w.push(self.parse_op(tok)?);
        }
        Ok(w)
    }

    pub fn fmt_op(&self, op: Op) -> String {
        let sign = if op.is_pos() { '+' } else { '-' };
        format!("{sign}{}", self.name(op.sym))
    }

    pub fn fmt_word(&self, w: &[Op]) -> String {
        if w.is_empty() {
            return "eps".to_string();
        }
        w.iter().map(|&o| self.fmt_op(o)).collect::<Vec<_>>().join(" ")
    }

    pub fn fmt_opset(&self, s: OpSet) -> String {
        if s.is_empty() {
            return "eps".to_string();
        }
        s.iter().map(|o| self.fmt_op(o)).collect::<Vec<_>>().join(" ")
    }
}

impl fmt::Display for StorageGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "G({} vertices, {} edges, {} loops)", self.len(), self.edges().len(), self.loops().len())
    }
}

/// `o1± I o2±` iff `o1 I o2`; polarity is ignored.
pub fn independent(g: &StorageGraph, a: Op, b: Op) -> Result<bool, MonoidError> {
    g.check_sym(a.sym)?;
    g.check_sym(b.sym)?;
    Ok(g.indep(a.sym, b.sym))
}

pub fn is_dependent_set(g: &StorageGraph, syms: &[Sym]) -> Result<bool, MonoidError> {
    let mut mask = 0u32;
    for &s in syms {
        g.check_sym(s)?;
        mask |= 1 << s;
    }
    Ok(g.mask_dependent(mask))
}

fn cancels(g: &StorageGraph, a: Op, b: Op) -> bool {
    a.sym == b.sym && a.pol != b.pol && (a.is_pos() || g.is_looped(a.sym))
}

/// Leftmost cancelable pair `(x, y)`: `w[x]`, `w[y]` cancel and everything
/// strictly between commutes with their symbol.
pub fn find_cancel_pair(g: &StorageGraph, w: &[Op]) -> Option<(usize, usize)> {
    for x in 0..w.len() {
        let o = w[x].sym;
        for y in x + 1..w.len() {
            if cancels(g, w[x], w[y]) {
                return Some((x, y));
            }
            if !g.indep(w[y].sym, o) {
                break;
            }
        }
    }
    None
}

pub fn is_irreducible(g: &StorageGraph, w: &[Op]) -> bool {
    find_cancel_pair(g, w).is_none()
}

pub fn reduce_to_irreducible(g: &StorageGraph, w: &[Op]) -> Word {
    let mut v = w.to_vec();
    while let Some((x, y)) = find_cancel_pair(g, &v) {
        v.remove(y);
        v.remove(x);
    }
    v
}

/// `⟦w⟧ = 1`.
pub fn is_identity(g: &StorageGraph, w: &[Op]) -> bool {
    reduce_to_irreducible(g, w).is_empty()
}

/// Right-invertible iff the irreducible form has negatives only on looped symbols.
pub fn is_right_invertible(g: &StorageGraph, w: &[Op]) -> bool {
    nf_right_invertible(g, &reduce_to_irreducible(g, w))
}

/// Same test on a word already known to be irreducible.
pub fn nf_right_invertible(g: &StorageGraph, nf: &[Op]) -> bool {
    nf.iter().all(|o| o.is_pos() || g.is_looped(o.sym))
}

/// Reversal with every polarity flipped, without the side condition.
pub fn reverse_flip(w: &[Op]) -> Word {
    w.iter().rev().map(|o| o.flip()).collect()
}

pub fn syntactic_inverse_word(g: &StorageGraph, w: &[Op]) -> Result<Word, MonoidError> {
    if let Some(o) = w.iter().find(|o| !o.is_pos() && !g.is_looped(o.sym)) {
        return Err(MonoidError::UndefinedInverse(g.name(o.sym).to_string()));
    }
    Ok(reverse_flip(w))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContextDecomposition {
    pub contexts: Vec<Word>,
}

/// Incremental greedy context splitter.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct ContextTracker {
    /// Symbols in the current (last) context.
    pub syms: u32,
    /// Contexts seen so far minus one; `-1` before the first operation.
    pub cs: i32,
}

impl ContextTracker {
    pub fn new() -> Self {
        ContextTracker { syms: 0, cs: -1 }
    }

    /// Returns true if `sym` opened a new context.
    pub fn push(&mut self, g: &StorageGraph, sym: Sym) -> bool {
        if self.cs >= 0 && g.neighbours(sym) & self.syms == 0 {
            self.syms |= 1 << sym;
            false
        } else {
            self.syms = 1 << sym;
            self.cs += 1;
            true
        }
    }
}

pub fn context_decomposition(g: &StorageGraph, w: &[Op]) -> Result<ContextDecomposition, MonoidError> {
    if w.is_empty() {
        return Err(MonoidError::EmptyWord);
    }
    let mut tr = ContextTracker::new();
    let mut contexts: Vec<Word> = Vec::new();
    for &op in w {
        if tr.push(g, op.sym) {
            contexts.push(Vec::new());
        }
        contexts.last_mut().expect("opened").push(op);
    }
    Ok(ContextDecomposition { contexts })
}

/// Number of contexts minus one; `cs(ε) = -1`.
pub fn context_switches(g: &StorageGraph, w: &[Op]) -> i64 {
    let mut tr = ContextTracker::new();
    for &op in w {
        tr.push(g, op.sym);
    }
    tr.cs as i64
}

/// Breadth-first search over R1–R3; the ground truth for the word problem.
///
/// Words equal up to R3 swaps are explored as one class; deletions lead to
/// strictly shorter words whose results are memoised across calls.
pub struct RewriteOracle<'g> {
    g: &'g StorageGraph,
    max_len: usize,
    max_states: usize,
    memo: HashMap<Word, bool>,
}

pub const ORACLE_MAX_LEN: usize = 12;
pub const ORACLE_MAX_STATES: usize = 1_000_000;

impl<'g> RewriteOracle<'g> {
    pub fn new(g: &'g StorageGraph) -> Self {
        Self::with_limits(g, ORACLE_MAX_LEN, ORACLE_MAX_STATES)
    }

    pub fn with_limits(g: &'g StorageGraph, max_len: usize, max_states: usize) -> Self {
        RewriteOracle { g, max_len, max_states, memo: HashMap::new() }
    }

    pub fn reduces_to_empty(&mut self, w: &[Op]) -> Result<bool, MonoidError> {
        if w.len() > self.max_len {
            return Err(MonoidError::Budget(format!("word length {} over {}", w.len(), self.max_len)));
        }
        self.solve(w)
    }

    fn solve(&mut self, w: &[Op]) -> Result<bool, MonoidError> {
        if w.is_empty() {
            return Ok(true);
        }
        if let Some(&r) = self.memo.get(w) {
            return Ok(r);
        }
        let g = self.g;
        let mut class: Vec<Word> = vec![w.to_vec()];
        let mut seen: HashSet<Word> = class.iter().cloned().collect();
        let mut queue: VecDeque<usize> = VecDeque::from([0]);
        while let Some(i) = queue.pop_front() {
            let u = class[i].clone();
            for j in 0..u.len() - 1 {
                if u[j].sym != u[j + 1].sym && g.indep(u[j].sym, u[j + 1].sym) {
                    let mut v = u.clone();
                    v.swap(j, j + 1);
                    if seen.insert(v.clone()) {
                        if self.memo.len() + seen.len() > self.max_states {
                            return Err(MonoidError::Budget("rewrite oracle state cap".into()));
                        }
                        class.push(v);
                        queue.push_back(class.len() - 1);
                    }
                }
            }
        }
        let mut result = false;
        'outer: for u in &class {
            for j in 0..u.len() - 1 {
                let (a, b) = (u[j], u[j + 1]);
                let r1 = a.sym == b.sym && a.is_pos() && !b.is_pos();
                let r2 = a.sym == b.sym && !a.is_pos() && b.is_pos() && g.is_looped(a.sym);
                if r1 || r2 {
                    let mut v = u.clone();
                    v.drain(j..j + 2);
                    if self.solve(&v)? {
                        result = true;
                        break 'outer;
                    }
                }
            }
        }
        for u in class {
            self.memo.insert(u, result);
        }
        Ok(result)
    }
}

/// True iff ε is reachable from `w` under R1–R3.
pub fn rewrite_oracle(g: &StorageGraph, w: &[Op]) -> Result<bool, MonoidError> {
    RewriteOracle::new(g).reduces_to_empty(w)
}

pub const FREE_REDUCTION_MAX_STATES: usize = 1_000_000;

/// FR1/FR2 search over sequences of words.
pub fn is_freely_reducible(g: &StorageGraph, seq: &[Word]) -> Result<bool, MonoidError> {
    let alph: Vec<OpSet> = seq.iter().map(|w| OpSet::from_ops(w.iter().copied())).collect();
    let mut cancel: HashMap<(usize, usize), bool> = HashMap::new();
    let start: Vec<usize> = (0..seq.len()).collect();
    let mut seen: HashSet<Vec<usize>> = HashSet::from([start.clone()]);
    let mut stack = vec![start];
    while let Some(cur) = stack.pop() {
        if cur.is_empty() {
            return Ok(true);
        }
        let mut next = Vec::new();
        for p in 0..cur.len() - 1 {
            let (i, j) = (cur[p], cur[p + 1]);
            if g.sets_independent(alph[i], alph[j]) {
                let mut v = cur.clone();
                v.swap(p, p + 1);
                next.push(v);
            }
        }
        // Cancellations go on top of the stack and are tried first.
        for p in 0..cur.len() - 1 {
            let (i, j) = (cur[p], cur[p + 1]);
            let ok = *cancel.entry((i, j)).or_insert_with(|| {
                let mut w = seq[i].clone();
                w.extend_from_slice(&seq[j]);
                is_identity(g, &w)
            });
            if ok {
                let mut v = cur.clone();
                v.drain(p..p + 2);
                next.push(v);
            }
        }
        for v in next {
            if seen.insert(v.clone()) {
                if seen.len() > FREE_REDUCTION_MAX_STATES {
                    return Err(MonoidError::Budget("free reduction memo cap".into()));
                }
                stack.push(v);
            }
        }
    }
    Ok(false)
}
