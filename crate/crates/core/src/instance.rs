//! Text format for BCSREACH instances.
//!
//! ```text
//! graph {
//!   vertices: a b c
//!   edges: a-b b-c
//!   loops: a
//! }
//! system {
//!   states: q0 q1
//!   initial: q0
//!   final: q1
//!   trans: q0 +a q1
//!   trans: q1 eps q0
//! }
//! k: 2
//! ```
//!
//! `#` starts a comment. `edges`, `loops` and `trans` may repeat.

use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use crate::monoid::StorageGraph;
use crate::system::{StateId, Transition, ValenceSystem};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}, column {col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub system: ValenceSystem,
    pub q_init: StateId,
    pub q_fin: StateId,
    pub k: Option<u32>,
}

impl Instance {
    pub fn graph(&self) -> &Arc<StorageGraph> {
        &self.system.graph
    }
}

struct Line<'a> {
    no: usize,
    indent: usize,
    text: &'a str,
}

impl Line<'_> {
    fn err(&self, col: usize, msg: impl Into<String>) -> ParseError {
        ParseError { line: self.no, col: self.indent + col + 1, msg: msg.into() }
    }

    /// Splits `key: value`, returning the value and its column offset.
    fn key_value(&self) -> Result<(&str, &str, usize), ParseError> {
        let (k, v) = self.text.split_once(':').ok_or_else(|| self.err(0, "expected `key: value`"))?;
        let off = k.len() + 1 + (v.len() - v.trim_start().len());
        Ok((k.trim(), v.trim(), off))
    }

    /// Whitespace-separated tokens of the value with their columns.
    fn tokens<'b>(&self, v: &'b str, off: usize) -> Vec<(usize, &'b str)> {
        let mut out = Vec::new();
        let mut rest = v;
        let mut pos = off;
        while let Some(start) = rest.find(|c: char| !c.is_whitespace()) {
            let tail = &rest[start..];
            let len = tail.find(char::is_whitespace).unwrap_or(tail.len());
            out.push((pos + start, &tail[..len]));
            pos += start + len;
            rest = &tail[len..];
        }
        out
    }
}

fn lines(text: &str) -> Vec<Line<'_>> {
    text.lines()
        .enumerate()
        .filter_map(|(i, raw)| {
            let body = raw.split('#').next().unwrap();
            let trimmed = body.trim();
            (!trimmed.is_empty()).then(|| Line { no: i + 1, indent: body.len() - body.trim_start().len(), text: trimmed })
        })
        .collect()
}

pub fn parse_instance(text: &str) -> Result<Instance, ParseError> {
    let ls = lines(text);
    let mut i = 0;
    let eof = |msg: &str| ParseError { line: text.lines().count() + 1, col: 1, msg: msg.to_string() };

    let mut k: Option<u32> = None;
    let parse_k = |l: &Line, k: &mut Option<u32>| -> Result<(), ParseError> {
        let (_, v, off) = l.key_value()?;
        if k.is_some() {
            return Err(l.err(0, "duplicate `k`"));
        }
        *k = Some(v.parse().map_err(|_| l.err(off, format!("bad bound `{v}`")))?);
        Ok(())
    };
    while i < ls.len() && ls[i].text.starts_with("k:") {
        parse_k(&ls[i], &mut k)?;
        i += 1;
    }

    // graph block
    let open = ls.get(i).ok_or_else(|| eof("expected `graph {`"))?;
    if open.text.split_whitespace().collect::<Vec<_>>() != ["graph", "{"] {
        return Err(open.err(0, "expected `graph {`"));
    }
    i += 1;
    let mut graph: Option<StorageGraph> = None;
    let mut edges: Vec<(usize, usize, String, String)> = Vec::new();
    let mut loops: Vec<(usize, usize, String)> = Vec::new();
    loop {
        let l = ls.get(i).ok_or_else(|| eof("unterminated graph block"))?;
        i += 1;
        if l.text == "}" {
            break;
        }
        let (key, v, off) = l.key_value()?;
        match key {
            "vertices" => {
                if graph.is_some() {
                    return Err(l.err(0, "duplicate `vertices`"));
                }
                let names: Vec<&str> = v.split_whitespace().collect();
                graph = Some(StorageGraph::new(names.iter().copied()).map_err(|e| l.err(off, e.to_string()))?);
            }
            "edges" => {
                for (col, tok) in l.tokens(v, off) {
                    let (a, b) = tok.split_once('-').ok_or_else(|| l.err(col, format!("bad edge `{tok}`")))?;
                    edges.push((l.no, l.indent + col + 1, a.to_string(), b.to_string()));
                }
            }
            "loops" => {
                for (col, tok) in l.tokens(v, off) {
                    loops.push((l.no, l.indent + col + 1, tok.to_string()));
                }
            }
            other => return Err(l.err(0, format!("unknown key `{other}` in graph block"))),
        }
    }
    let mut g = graph.ok_or_else(|| ParseError { line: open.no, col: 1, msg: "missing `vertices`".into() })?;
    let at = |line: usize, col: usize, msg: String| ParseError { line, col, msg };
    let mut seen_edges = Vec::new();
    for (line, col, a, b) in edges {
        let sa = g.sym(&a).ok_or_else(|| at(line, col, format!("undeclared vertex `{a}`")))?;
        let sb = g.sym(&b).ok_or_else(|| at(line, col, format!("undeclared vertex `{b}`")))?;
        if sa == sb {
            return Err(at(line, col, format!("`{a}-{b}` is a loop; list it under `loops`")));
        }
        if seen_edges.contains(&(sa, sb)) {
            return Err(at(line, col, format!("duplicate edge `{a}-{b}`")));
        }
        seen_edges.push((sa, sb));
        g.add_edge(sa, sb);
    }
    let mut seen_loops = Vec::new();
    for (line, col, a) in loops {
        let s = g.sym(&a).ok_or_else(|| at(line, col, format!("undeclared vertex `{a}`")))?;
        if seen_loops.contains(&s) {
            return Err(at(line, col, format!("duplicate loop `{a}`")));
        }
        seen_loops.push(s);
        g.add_loop(s);
    }
    let g = Arc::new(g);

    while i < ls.len() && ls[i].text.starts_with("k:") {
        parse_k(&ls[i], &mut k)?;
        i += 1;
    }

    // system block
    let open = ls.get(i).ok_or_else(|| eof("expected `system {`"))?;
    if open.text.split_whitespace().collect::<Vec<_>>() != ["system", "{"] {
        return Err(open.err(0, "expected `system {`"));
    }
    i += 1;
    let mut sys: Option<ValenceSystem> = None;
    let mut init: Option<(usize, usize, String)> = None;
    let mut fin: Option<(usize, usize, String)> = None;
    let mut trans: Vec<(usize, Vec<(usize, String)>)> = Vec::new();
    loop {
        let l = ls.get(i).ok_or_else(|| eof("unterminated system block"))?;
        i += 1;
        if l.text == "}" {
            break;
        }
        let (key, v, off) = l.key_value()?;
        match key {
            "states" => {
                if sys.is_some() {
                    return Err(l.err(0, "duplicate `states`"));
                }
                let names: Vec<&str> = v.split_whitespace().collect();
                sys = Some(ValenceSystem::new(g.clone(), names).map_err(|e| l.err(off, e.to_string()))?);
            }
            "initial" | "final" => {
                let slot = if key == "initial" { &mut init } else { &mut fin };
                if slot.is_some() {
                    return Err(l.err(0, format!("duplicate `{key}`")));
                }
                *slot = Some((l.no, l.indent + off + 1, v.to_string()));
            }
            "trans" => {
                let toks = l.tokens(v, off);
                if toks.len() != 3 {
                    return Err(l.err(off, "expected `trans: SRC LABEL DST`"));
                }
                trans.push((l.no, toks.into_iter().map(|(c, t)| (l.indent + c + 1, t.to_string())).collect()));
            }
            other => return Err(l.err(0, format!("unknown key `{other}` in system block"))),
        }
    }
    let mut sys = sys.ok_or_else(|| ParseError { line: open.no, col: 1, msg: "missing `states`".into() })?;
    let state = |sys: &ValenceSystem, line: usize, col: usize, name: &str| {
        sys.state(name).ok_or_else(|| at(line, col, format!("undeclared state `{name}`")))
    };
    let (q_init, q_fin) = match (init, fin) {
        (Some((l1, c1, a)), Some((l2, c2, b))) => (state(&sys, l1, c1, &a)?, state(&sys, l2, c2, &b)?),
        _ => return Err(ParseError { line: open.no, col: 1, msg: "missing `initial` or `final`".into() }),
    };
    for (line, toks) in trans {
        let from = state(&sys, line, toks[0].0, &toks[0].1)?;
        let to = state(&sys, line, toks[2].0, &toks[2].1)?;
        let label = if toks[1].1 == "eps" {
            None
        } else {
            Some(g.parse_op(&toks[1].1).map_err(|e| at(line, toks[1].0, e.to_string()))?)
        };
        if !sys.add(Transition::new(from, label, to)).map_err(|e| at(line, toks[0].0, e.to_string()))? {
            return Err(at(line, toks[0].0, "duplicate transition".into()));
        }
    }

    while i < ls.len() && ls[i].text.starts_with("k:") {
        parse_k(&ls[i], &mut k)?;
        i += 1;
    }
    if let Some(l) = ls.get(i) {
        return Err(l.err(0, format!("unexpected `{}`", l.text)));
    }
    Ok(Instance { system: sys, q_init, q_fin, k })
}

/// Canonical text; `parse_instance` of the result gives back an equal instance.
pub fn serialize_instance(inst: &Instance) -> String {
    let g = inst.graph();
    let a = &inst.system;
    let mut s = String::new();
    s.push_str("graph {\n");
    let _ = writeln!(s, "  vertices: {}", g.names().join(" "));
    let edges = g.edges();
    if !edges.is_empty() {
        let list: Vec<String> = edges.iter().map(|&(x, y)| format!("{}-{}", g.name(x), g.name(y))).collect();
        let _ = writeln!(s, "  edges: {}", list.join(" "));
    }
    let loops = g.loops();
    if !loops.is_empty() {
        let list: Vec<&str> = loops.iter().map(|&x| g.name(x)).collect();
        let _ = writeln!(s, "  loops: {}", list.join(" "));
    }
    s.push_str("}\nsystem {\n");
    let _ = writeln!(s, "  states: {}", a.state_names().join(" "));
    let _ = writeln!(s, "  initial: {}", a.state_name(inst.q_init));
    let _ = writeln!(s, "  final: {}", a.state_name(inst.q_fin));
    for t in a.transitions() {
        let _ = writeln!(s, "  trans: {}", a.fmt_transition(t));
    }
    s.push_str("}\n");
    if let Some(k) = inst.k {
        let _ = writeln!(s, "k: {k}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "# single stack\ngraph {\n  vertices: a b c\n}\nsystem {\n  states: q0 q1 q2\n  initial: q0\n  final: q2\n  trans: q0 +a q1\n  trans: q1 -a q2 # pop\n}\nk: 0\n";

    #[test]
    fn sample_parses() {
        let inst = parse_instance(SAMPLE).unwrap();
        assert_eq!(inst.graph().len(), 3);
        assert!(inst.graph().edges().is_empty());
        assert_eq!(inst.system.size(), 2);
        assert_eq!((inst.q_init, inst.q_fin, inst.k), (0, 2, Some(0)));
        let text = serialize_instance(&inst);
        assert!(!text.contains('#'));
        assert_eq!(parse_instance(&text).unwrap(), inst);
        assert_eq!(serialize_instance(&parse_instance(&text).unwrap()), text);
    }

    #[test]
    fn errors_carry_locations() {
        let bad = SAMPLE.replace("q1 -a q2", "q1 -z q2");
        let e = parse_instance(&bad).unwrap_err();
        assert_eq!((e.line, e.col), (10, 13));
        assert!(e.msg.contains('z'));
        let e = parse_instance(&SAMPLE.replace("  vertices: a b c\n", "  vertices: a b c\n  edges: a-d\n")).unwrap_err();
        assert_eq!(e.line, 4);
        let e = parse_instance(&SAMPLE.replace("initial: q0", "initial: q9")).unwrap_err();
        assert!(e.msg.contains("q9"));
        assert!(parse_instance(&SAMPLE.replace("k: 0", "k: 0\nk: 1")).is_err());
        assert!(parse_instance(&SAMPLE.replace("final:", "finale:")).is_err());
    }

    #[test]
    fn edges_are_symmetrized() {
        let text = SAMPLE.replace("  vertices: a b c\n", "  vertices: a b c\n  edges: b-a\n  edges: a-b c-b\n");
        let inst = parse_instance(&text).unwrap();
        assert!(inst.graph().indep(0, 1) && inst.graph().indep(1, 2));
        assert!(parse_instance(&text.replace("c-b", "a-b")).is_err());
    }
}
