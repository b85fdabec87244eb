//! Sequential failure trees: exhaustive enumeration of failure orderings.
//!
//! A node is a vector `K` over the tree's events. `K[i] = 0` means event `i`
//! has not failed, otherwise `K[i]` is the step at which it failed; equal
//! steps are simultaneous failures. The parent of a node removes the events
//! of its last step.
//!
//! Two evaluators decide which nodes are failure nodes. [`failure_set_direct`]
//! replays the realized ordering step by step; [`failure_set_combined`]
//! combines node sets bottom-up (complement, intersection, union, and the
//! PAND/SAND constructions). Both must agree on every expression.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::expr::{EventId, TemporalExpr};

pub const DEFAULT_MAX_WITH_SAND: usize = 6;
pub const DEFAULT_MAX_WITHOUT_SAND: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("{n} events exceed the oracle limit of {cap}")]
    TooManyEvents { n: usize, cap: usize },
    #[error("event `{0}` is not part of the tree")]
    UnknownEvent(String),
    #[error("a tree needs at least one event")]
    Empty,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeqNode {
    pub k: Vec<u8>,
    pub parent: Option<usize>,
    /// Number of occurrence steps (the node's level).
    pub steps: u8,
    pub has_sand: bool,
}

#[derive(Clone, Debug)]
pub struct SeqTree {
    pub events: Vec<EventId>,
    pub with_sand: bool,
    pub nodes: Vec<SeqNode>,
    index: HashMap<Vec<u8>, usize>,
}

/// Builds the tree over `events` (sorted and deduplicated) with the default size caps.
pub fn build_tree(events: &[EventId], with_sand: bool) -> Result<SeqTree, OracleError> {
    let cap = if with_sand { DEFAULT_MAX_WITH_SAND } else { DEFAULT_MAX_WITHOUT_SAND };
    SeqTree::build_capped(events, with_sand, cap)
}

impl SeqTree {
    pub fn build_capped(events: &[EventId], with_sand: bool, cap: usize) -> Result<SeqTree, OracleError> {
        let events: Vec<EventId> = events.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
        let n = events.len();
        if n == 0 {
            return Err(OracleError::Empty);
        }
        if n > cap {
            return Err(OracleError::TooManyEvents { n, cap });
        }
        let mut nodes = vec![SeqNode { k: vec![0; n], parent: None, steps: 0, has_sand: false }];
        let mut head = 0;
        while head < nodes.len() {
            let cur = nodes[head].clone();
            let free: Vec<usize> = (0..n).filter(|&i| cur.k[i] == 0).collect();
            let limit = 1u32 << free.len();
            let mut subsets: Vec<u32> = (1..limit).filter(|s| with_sand || s.count_ones() == 1).collect();
            subsets.sort_by_key(|s| (s.count_ones(), s.reverse_bits()));
            for s in subsets {
                let mut k = cur.k.clone();
                for (j, &i) in free.iter().enumerate() {
                    if s >> j & 1 == 1 {
                        k[i] = cur.steps + 1;
                    }
                }
                nodes.push(SeqNode {
                    k,
                    parent: Some(head),
                    steps: cur.steps + 1,
                    has_sand: cur.has_sand || s.count_ones() > 1,
                });
            }
            head += 1;
        }
        let index = nodes.iter().enumerate().map(|(i, nd)| (nd.k.clone(), i)).collect();
        Ok(SeqTree { events, with_sand, nodes, index })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_index(&self, k: &[u8]) -> Option<usize> {
        self.index.get(k).copied()
    }

    /// Number of nodes per level (number of occurrence steps).
    pub fn level_counts(&self) -> Vec<usize> {
        let mut out = vec![0; self.events.len() + 1];
        for nd in &self.nodes {
            out[nd.steps as usize] += 1;
        }
        while out.last() == Some(&0) {
            out.pop();
        }
        out
    }

    /// The node as a minterm: negated unfailed events AND the realized chain.
    pub fn node_expr(&self, i: usize) -> TemporalExpr {
        let nd = &self.nodes[i];
        let mut parts = Vec::new();
        for (j, e) in self.events.iter().enumerate() {
            if nd.k[j] == 0 {
                parts.push(TemporalExpr::not(TemporalExpr::atom(e.clone())));
            }
        }
        let groups: Vec<TemporalExpr> = (1..=nd.steps)
            .map(|s| {
                let g = (0..self.events.len()).filter(|&j| nd.k[j] == s).map(|j| TemporalExpr::atom(self.events[j].clone()));
                TemporalExpr::sand(g.collect())
            })
            .collect();
        if !groups.is_empty() {
            parts.push(TemporalExpr::pand_chain(groups));
        }
        TemporalExpr::and(parts).canonicalize()
    }

    pub fn node_label(&self, i: usize) -> String {
        self.node_expr(i).to_string()
    }

    fn check_events(&self, e: &TemporalExpr) -> Result<(), OracleError> {
        for x in e.events_of() {
            if self.events.binary_search(&x).is_err() {
                return Err(OracleError::UnknownEvent(x));
            }
        }
        Ok(())
    }
}

/// Expression with atoms resolved to event indices.
#[derive(Clone, Debug)]
pub(crate) enum Compiled {
    True,
    False,
    Atom(usize),
    Not(Box<Compiled>),
    And(Vec<Compiled>, bool),
    Or(Vec<Compiled>),
    Pand(Box<Compiled>, Box<Compiled>),
    Sand(Vec<Compiled>),
}

impl Compiled {
    pub(crate) fn new(e: &TemporalExpr, events: &[EventId]) -> Result<Compiled, OracleError> {
        use TemporalExpr as T;
        let list = |xs: &[TemporalExpr]| xs.iter().map(|x| Compiled::new(x, events)).collect::<Result<Vec<_>, _>>();
        Ok(match e {
            T::True => Compiled::True,
            T::False => Compiled::False,
            T::Atom(x) => Compiled::Atom(events.iter().position(|y| y == x).ok_or_else(|| OracleError::UnknownEvent(x.clone()))?),
            T::Not(x) => Compiled::Not(Box::new(Compiled::new(x, events)?)),
            T::And(xs) => Compiled::And(list(xs)?, xs.iter().any(|x| !matches!(x, T::Not(_)))),
            T::Or(xs) => Compiled::Or(list(xs)?),
            T::Pand(a, b) => Compiled::Pand(Box::new(Compiled::new(a, events)?), Box::new(Compiled::new(b, events)?)),
            T::Sand(xs) => Compiled::Sand(list(xs)?),
        })
    }

    /// Bit `s` of the result is set iff the expression holds after step `s`
    /// (`s = 0..=m`). `occ[i]` is the failure step of event `i`, 0 if none.
    pub(crate) fn holds(&self, occ: &[u8], m: u8) -> u64 {
        let full = if m >= 63 { u64::MAX } else { (1u64 << (m + 1)) - 1 };
        let from = |s: u32| if s > m as u32 { 0 } else { full & !((1u64 << s) - 1) };
        let first = |x: u64| if x == 0 { None } else { Some(x.trailing_zeros()) };
        match self {
            Compiled::True => full,
            Compiled::False => 0,
            Compiled::Atom(i) => match occ[*i] {
                0 => 0,
                s => from(s as u32),
            },
            Compiled::Not(x) => full & !x.holds(occ, m),
            Compiled::Or(xs) => xs.iter().fold(0, |acc, x| acc | x.holds(occ, m)),
            Compiled::And(xs, latched) => {
                let v = xs.iter().fold(full, |acc, x| acc & x.holds(occ, m));
                match (latched, first(v)) {
                    (true, Some(s)) => from(s),
                    (true, None) => 0,
                    (false, _) => v,
                }
            }
            Compiled::Pand(a, b) => match (first(a.holds(occ, m)), first(b.holds(occ, m))) {
                (Some(x), Some(y)) if x < y => from(y),
                _ => 0,
            },
            Compiled::Sand(xs) => {
                let mut at = None;
                for x in xs {
                    match (first(x.holds(occ, m)), at) {
                        (None, _) => return 0,
                        (Some(s), None) => at = Some(s),
                        (Some(s), Some(t)) if s != t => return 0,
                        _ => {}
                    }
                }
                at.map_or(0, from)
            }
        }
    }
}

/// Failure nodes by replaying each node's ordering (first evaluator).
pub fn failure_set_direct(e: &TemporalExpr, t: &SeqTree) -> Result<Vec<bool>, OracleError> {
    t.check_events(e)?;
    let c = Compiled::new(e, &t.events)?;
    Ok(t.nodes.iter().map(|nd| c.holds(&nd.k, nd.steps) >> nd.steps & 1 == 1).collect())
}

/// Failure nodes by combining node sets (second evaluator).
pub fn failure_set_combined(e: &TemporalExpr, t: &SeqTree) -> Result<Vec<bool>, OracleError> {
    t.check_events(e)?;
    Ok(set_eval(e, t))
}

fn closure(t: &SeqTree, mut s: Vec<bool>) -> Vec<bool> {
    // parents precede children in node order
    for i in 0..s.len() {
        if let Some(p) = t.nodes[i].parent {
            s[i] |= s[p];
        }
    }
    s
}

/// Nodes of `s` with no strict ancestor in `s`.
fn first_nodes(t: &SeqTree, s: &[bool]) -> Vec<bool> {
    let mut seen = vec![false; s.len()];
    let mut out = vec![false; s.len()];
    for i in 0..s.len() {
        let above = t.nodes[i].parent.is_some_and(|p| seen[p]);
        out[i] = s[i] && !above;
        seen[i] = s[i] || above;
    }
    out
}

fn set_eval(e: &TemporalExpr, t: &SeqTree) -> Vec<bool> {
    use TemporalExpr as T;
    let n = t.len();
    match e {
        T::True => vec![true; n],
        T::False => vec![false; n],
        T::Atom(x) => {
            let j = t.events.binary_search(x).expect("checked");
            t.nodes.iter().map(|nd| nd.k[j] != 0).collect()
        }
        T::Not(x) => set_eval(x, t).into_iter().map(|b| !b).collect(),
        T::Or(xs) => xs.iter().map(|x| set_eval(x, t)).fold(vec![false; n], |a, b| zip(a, b, |p, q| p || q)),
        T::And(xs) => {
            let s = xs.iter().map(|x| set_eval(x, t)).fold(vec![true; n], |a, b| zip(a, b, |p, q| p && q));
            if xs.iter().any(|x| !matches!(x, T::Not(_))) {
                closure(t, s)
            } else {
                s
            }
        }
        T::Pand(a, b) => {
            let once_a = closure(t, set_eval(a, t));
            let first_b = first_nodes(t, &set_eval(b, t));
            let s = (0..n).map(|i| first_b[i] && t.nodes[i].parent.is_some_and(|p| once_a[p])).collect();
            closure(t, s)
        }
        T::Sand(xs) => {
            let s = xs.iter().map(|x| first_nodes(t, &set_eval(x, t))).fold(vec![true; n], |a, b| zip(a, b, |p, q| p && q));
            closure(t, s)
        }
    }
}

fn zip(a: Vec<bool>, b: Vec<bool>, f: impl Fn(bool, bool) -> bool) -> Vec<bool> {
    a.into_iter().zip(b).map(|(p, q)| f(p, q)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeClass {
    NonFailure,
    MinimalFailure,
    NonMinimalFailure,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Classification {
    pub classes: Vec<NodeClass>,
}

impl Classification {
    pub fn from_failure_set(t: &SeqTree, fail: &[bool]) -> Classification {
        let classes = t
            .nodes
            .iter()
            .enumerate()
            .map(|(i, nd)| match (fail[i], nd.parent.is_some_and(|p| fail[p])) {
                (false, _) => NodeClass::NonFailure,
                (true, false) => NodeClass::MinimalFailure,
                (true, true) => NodeClass::NonMinimalFailure,
            })
            .collect();
        Classification { classes }
    }

    pub fn failure_set(&self) -> Vec<bool> {
        self.classes.iter().map(|c| *c != NodeClass::NonFailure).collect()
    }

    pub fn minimal_nodes(&self) -> Vec<usize> {
        (0..self.classes.len()).filter(|&i| self.classes[i] == NodeClass::MinimalFailure).collect()
    }

    pub fn failure_nodes(&self) -> Vec<usize> {
        (0..self.classes.len()).filter(|&i| self.classes[i] != NodeClass::NonFailure).collect()
    }
}

pub fn classify(e: &TemporalExpr, t: &SeqTree) -> Result<Classification, OracleError> {
    Ok(Classification::from_failure_set(t, &failure_set_direct(e, t)?))
}

/// Failure nodes that have a non-failure child (empty for monotone expressions).
pub fn monotony_violations(t: &SeqTree, c: &Classification) -> Vec<usize> {
    let fail = c.failure_set();
    (0..t.len()).filter(|&i| !fail[i] && t.nodes[i].parent.is_some_and(|p| fail[p])).collect()
}

fn joint_tree(e1: &TemporalExpr, e2: &TemporalExpr) -> Result<SeqTree, OracleError> {
    let mut ev: Vec<EventId> = e1.events_of().union(&e2.events_of()).cloned().collect();
    if ev.is_empty() {
        ev.push("_".into());
    }
    build_tree(&ev, true)
}

/// Identical failure-node sets on the SAND tree over the joint events.
pub fn equivalent(e1: &TemporalExpr, e2: &TemporalExpr) -> Result<bool, OracleError> {
    let t = joint_tree(e1, e2)?;
    Ok(failure_set_direct(e1, &t)? == failure_set_direct(e2, &t)?)
}

/// No failure node in common.
pub fn oracle_disjoint(e1: &TemporalExpr, e2: &TemporalExpr) -> Result<bool, OracleError> {
    let t = joint_tree(e1, e2)?;
    let (a, b) = (failure_set_direct(e1, &t)?, failure_set_direct(e2, &t)?);
    Ok(!a.iter().zip(&b).any(|(p, q)| *p && *q))
}

/// DOT export: minimal failure nodes filled, non-minimal hatched, SAND nodes boxed.
pub fn to_dot(t: &SeqTree, c: &Classification) -> String {
    let mut s = String::from("digraph seqtree {\n  node [label=\"\", width=0.25, height=0.25];\n");
    for (i, nd) in t.nodes.iter().enumerate() {
        let shape = if nd.has_sand { "box" } else { "circle" };
        let style = match c.classes[i] {
            NodeClass::NonFailure => "style=solid",
            NodeClass::MinimalFailure => "style=filled, fillcolor=black",
            NodeClass::NonMinimalFailure => "style=filled, fillcolor=gray, peripheries=2",
        };
        let _ = writeln!(s, "  n{i} [shape={shape}, {style}, tooltip=\"{}\"];", t.node_label(i));
    }
    for (i, nd) in t.nodes.iter().enumerate() {
        if let Some(p) = nd.parent {
            let fired: Vec<&str> =
                (0..t.events.len()).filter(|&j| nd.k[j] == nd.steps).map(|j| t.events[j].as_str()).collect();
            let _ = writeln!(s, "  n{p} -> n{i} [label=\"{}\"];", fired.join(""));
        }
    }
    s.push_str("}\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_expr;

    fn ev(xs: &[&str]) -> Vec<EventId> {
        xs.iter().map(|x| x.to_string()).collect()
    }

    fn p(s: &str) -> TemporalExpr {
        parse_expr(s).unwrap()
    }

    #[test]
    fn node_counts() {
        assert_eq!(build_tree(&ev(&["A", "B", "C"]), false).unwrap().len(), 16);
        assert_eq!(build_tree(&ev(&["A", "B", "C"]), true).unwrap().len(), 26);
        assert_eq!(build_tree(&ev(&["A"]), true).unwrap().len(), 2);
        assert_eq!(build_tree(&ev(&["A", "B", "C"]), false).unwrap().level_counts(), vec![1, 3, 6, 6]);
        for n in 1..=5 {
            let names: Vec<EventId> = (0..n).map(|i| format!("E{i}")).collect();
            let t = build_tree(&names, false).unwrap();
            let lv = t.level_counts();
            for (i, c) in lv.iter().enumerate() {
                let falling: usize = (0..i).map(|j| n - j).product();
                assert_eq!(*c, falling);
            }
        }
        assert!(matches!(build_tree(&ev(&["A", "B", "C", "D", "E", "F", "G"]), true), Err(OracleError::TooManyEvents { .. })));
    }

    #[test]
    fn chain_minimal_node() {
        let t = build_tree(&ev(&["A", "B", "C"]), false).unwrap();
        let c = classify(&p("A < B < C"), &t).unwrap();
        let mins = c.minimal_nodes();
        assert_eq!(mins, vec![t.node_index(&[1, 2, 3]).unwrap()]);
        assert!(c.failure_nodes().len() == 1);
    }

    #[test]
    fn four_minimal_nodes() {
        let t = build_tree(&ev(&["A", "B", "C"]), false).unwrap();
        let c = classify(&p("(C < B < A) | (B < C)"), &t).unwrap();
        let mut labels: Vec<String> = c.minimal_nodes().into_iter().map(|i| t.node_label(i)).collect();
        labels.sort();
        assert_eq!(labels, vec!["!A & B < C", "A < B < C", "B < A < C", "C < B < A"]);
        let bca = t.node_index(&[3, 1, 2]).unwrap();
        assert_eq!(c.classes[bca], NodeClass::NonMinimalFailure);
    }

    #[test]
    fn negated_root() {
        let t = build_tree(&ev(&["A"]), true).unwrap();
        let c = classify(&p("!A"), &t).unwrap();
        assert_eq!(c.classes, vec![NodeClass::MinimalFailure, NodeClass::NonFailure]);
    }

    #[test]
    fn equivalence_and_disjointness() {
        assert!(equivalent(&p("A < (B < C)"), &p("(A & B) < C")).unwrap());
        assert!(!equivalent(&p("A < (B | C)"), &p("(A < B) | (A < C)")).unwrap());
        assert!(equivalent(&p("A"), &p("A")).unwrap());
        assert!(oracle_disjoint(&p("A < B"), &p("B < A")).unwrap());
        assert!(!oracle_disjoint(&p("A < C"), &p("B < C")).unwrap());
        assert!(oracle_disjoint(&p("A"), &TemporalExpr::False).unwrap());
    }

    #[test]
    fn mixed_negation_rules() {
        assert!(equivalent(&p("(!A & B) < A"), &p("B < A")).unwrap());
        assert!(equivalent(&p("C < (!A & B)"), &p("!A & (C < B)")).unwrap());
        assert!(equivalent(&p("(!A & B) = C"), &p("!A & (B = C)")).unwrap());
        assert!(equivalent(&p("!A & (B < A < C)"), &TemporalExpr::False).unwrap());
    }

    #[test]
    fn completion_at_oracle_level() {
        let t = build_tree(&ev(&["A", "B"]), true).unwrap();
        let f = |s: &str| failure_set_direct(&p(s), &t).unwrap();
        let (ab, s, ba, and) = (f("A < B"), f("A = B"), f("B < A"), f("A & B"));
        for i in 0..t.len() {
            assert_eq!(and[i], ab[i] || s[i] || ba[i]);
            assert!([ab[i], s[i], ba[i]].iter().filter(|b| **b).count() <= 1);
        }
    }

    #[test]
    fn evaluators_agree_on_samples() {
        let t = build_tree(&ev(&["A", "B", "C"]), true).unwrap();
        for s in [
            "A < (B | C)",
            "!C & (A < B)",
            "(!A & B) < A",
            "A = (B < C)",
            "(A | B) < C",
            "!(A < B) & C",
            "!(A = B) & C",
            "true < A",
            "A < true",
            "true = true",
            "!A | B",
            "(A & B) = C",
        ] {
            let e = p(s);
            assert_eq!(failure_set_direct(&e, &t).unwrap(), failure_set_combined(&e, &t).unwrap(), "{s}");
        }
    }

    #[test]
    fn dot_export() {
        let t = build_tree(&ev(&["A", "B"]), true).unwrap();
        let c = classify(&p("A < B"), &t).unwrap();
        let d = to_dot(&t, &c);
        assert!(d.starts_with("digraph"));
        assert_eq!(d.matches("fillcolor=black").count(), 1);
        assert_eq!(d.matches("shape=box").count(), 1);
    }
}
