//! Temporal expressions, fault trees and structural queries.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

/// Symbolic name of a basic event.
pub type EventId = String;

/// A temporal expression over basic events.
///
/// The derived ordering is the canonical one: constants sort first, then
/// atoms by id, then composite nodes by operator tag and children.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TemporalExpr {
    True,
    False,
    Atom(EventId),
    Not(Box<TemporalExpr>),
    And(Vec<TemporalExpr>),
    Or(Vec<TemporalExpr>),
    /// `left < right`: both occurred and `left` strictly first.
    Pand(Box<TemporalExpr>, Box<TemporalExpr>),
    /// All operands became true at the same instant.
    Sand(Vec<TemporalExpr>),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExprError {
    #[error("`{0}` is not a single conjunction chain")]
    NotAChain(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("cycle through gate `{0}`")]
    Cycle(String),
    #[error("gate `{gate}` references unknown `{child}`")]
    Dangling { gate: String, child: String },
    #[error("unknown top `{0}`")]
    UnknownTop(String),
    #[error("gate `{0}` has no inputs")]
    EmptyGate(String),
    #[error("NOT gate `{0}` must have exactly one input")]
    NotArity(String),
}

impl TemporalExpr {
    pub fn atom(id: impl Into<EventId>) -> Self {
        TemporalExpr::Atom(id.into())
    }

    pub fn not(e: TemporalExpr) -> Self {
        TemporalExpr::Not(Box::new(e))
    }

    /// Conjunction; a single operand is returned unchanged, none gives `True`.
    pub fn and(mut xs: Vec<TemporalExpr>) -> Self {
        match xs.len() {
            0 => TemporalExpr::True,
            1 => xs.pop().unwrap(),
            _ => TemporalExpr::And(xs),
        }
    }

    pub fn or(mut xs: Vec<TemporalExpr>) -> Self {
        match xs.len() {
            0 => TemporalExpr::False,
            1 => xs.pop().unwrap(),
            _ => TemporalExpr::Or(xs),
        }
    }

    pub fn sand(mut xs: Vec<TemporalExpr>) -> Self {
        match xs.len() {
            0 => TemporalExpr::True,
            1 => xs.pop().unwrap(),
            _ => TemporalExpr::Sand(xs),
        }
    }

    pub fn pand(a: TemporalExpr, b: TemporalExpr) -> Self {
        TemporalExpr::Pand(Box::new(a), Box::new(b))
    }

    /// Left-associated PAND chain `x0 < x1 < ...`.
    pub fn pand_chain(xs: Vec<TemporalExpr>) -> Self {
        let mut it = xs.into_iter();
        let Some(first) = it.next() else {
            return TemporalExpr::True;
        };
        it.fold(first, TemporalExpr::pand)
    }

    pub fn is_const(&self) -> bool {
        matches!(self, TemporalExpr::True | TemporalExpr::False)
    }

    /// All events occurring in the expression, negated or not.
    pub fn events_of(&self) -> BTreeSet<EventId> {
        let mut out = BTreeSet::new();
        self.collect_events(&mut out);
        out
    }

    fn collect_events(&self, out: &mut BTreeSet<EventId>) {
        use TemporalExpr::*;
        match self {
            True | False => {}
            Atom(x) => {
                out.insert(x.clone());
            }
            Not(e) => e.collect_events(out),
            And(xs) | Or(xs) | Sand(xs) => xs.iter().for_each(|x| x.collect_events(out)),
            Pand(a, b) => {
                a.collect_events(out);
                b.collect_events(out);
            }
        }
    }

    /// Structural normalisation: nested OR/SAND flattened, nested AND
    /// flattened unless the inner AND scopes a negation, double negation
    /// removed, commutative children sorted.
    pub fn canonicalize(&self) -> TemporalExpr {
        use TemporalExpr::*;
        match self {
            True | False | Atom(_) => self.clone(),
            Not(e) => match e.canonicalize() {
                Not(inner) => *inner,
                c => Not(Box::new(c)),
            },
            And(xs) => {
                let mut out = Vec::new();
                for x in xs {
                    match x.canonicalize() {
                        And(inner) if !inner.iter().any(|c| matches!(c, Not(_))) => out.extend(inner),
                        c => out.push(c),
                    }
                }
                out.sort();
                TemporalExpr::and(out)
            }
            Or(xs) => {
                let mut out = Vec::new();
                for x in xs {
                    match x.canonicalize() {
                        Or(inner) => out.extend(inner),
                        c => out.push(c),
                    }
                }
                out.sort();
                TemporalExpr::or(out)
            }
            Sand(xs) => {
                let mut out = Vec::new();
                for x in xs {
                    match x.canonicalize() {
                        Sand(inner) => out.extend(inner),
                        c => out.push(c),
                    }
                }
                out.sort();
                TemporalExpr::sand(out)
            }
            Pand(a, b) => TemporalExpr::pand(a.canonicalize(), b.canonicalize()),
        }
    }

    /// Items of a left-associated PAND chain; a non-PAND is a one-item chain.
    pub fn pand_items(&self) -> Vec<&TemporalExpr> {
        match self {
            TemporalExpr::Pand(a, b) => {
                let mut v = a.pand_items();
                v.push(b);
                v
            }
            other => vec![other],
        }
    }

    fn precedence(&self) -> u8 {
        use TemporalExpr::*;
        match self {
            Or(_) => 1,
            And(_) => 2,
            Pand(..) => 3,
            Sand(_) => 4,
            Not(_) => 5,
            True | False | Atom(_) => 6,
        }
    }
}

fn is_atom_set(xs: &[TemporalExpr]) -> bool {
    xs.iter().all(|x| matches!(x, TemporalExpr::Atom(_)))
}

fn is_core_item(e: &TemporalExpr) -> bool {
    match e {
        TemporalExpr::Atom(_) => true,
        TemporalExpr::And(xs) | TemporalExpr::Sand(xs) => is_atom_set(xs),
        _ => false,
    }
}

/// Whether `x` is part of the conjunction chain `e` (the "includes" relation).
///
/// `e` must be a single core item, or an all-PAND chain of core items.
pub fn is_part_of(x: &str, e: &TemporalExpr) -> Result<bool, ExprError> {
    let items = e.pand_items();
    if !items.iter().all(|i| is_core_item(i)) {
        return Err(ExprError::NotAChain(e.to_string()));
    }
    Ok(e.events_of().contains(x))
}

impl fmt::Display for TemporalExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use TemporalExpr::*;
        fn child(f: &mut fmt::Formatter<'_>, c: &TemporalExpr, min: u8) -> fmt::Result {
            if c.precedence() < min {
                write!(f, "({c})")
            } else {
                write!(f, "{c}")
            }
        }
        fn list(f: &mut fmt::Formatter<'_>, xs: &[TemporalExpr], op: &str, min: u8) -> fmt::Result {
            for (i, x) in xs.iter().enumerate() {
                if i > 0 {
                    write!(f, " {op} ")?;
                }
                child(f, x, min)?;
            }
            Ok(())
        }
        match self {
            True => write!(f, "true"),
            False => write!(f, "false"),
            Atom(x) => write!(f, "{x}"),
            Not(e) => {
                write!(f, "!")?;
                child(f, e, 5)
            }
            And(xs) => list(f, xs, "&", 3),
            Or(xs) => list(f, xs, "|", 2),
            Sand(xs) => list(f, xs, "=", 5),
            Pand(a, b) => {
                child(f, a, 3)?;
                write!(f, " < ")?;
                child(f, b, 4)
            }
        }
    }
}

/// Gate operators of a temporal fault tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GateKind {
    And,
    Or,
    Not,
    Pand,
    Sand,
}

impl GateKind {
    pub fn keyword(self) -> &'static str {
        match self {
            GateKind::And => "AND",
            GateKind::Or => "OR",
            GateKind::Not => "NOT",
            GateKind::Pand => "PAND",
            GateKind::Sand => "SAND",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    pub kind: GateKind,
    pub inputs: Vec<String>,
}

/// A non-repairable basic event with a constant failure rate (1/h).
#[derive(Clone, Debug, PartialEq)]
pub struct BasicEventData {
    pub id: EventId,
    pub lambda: f64,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct FaultTree {
    pub top: String,
    pub gates: BTreeMap<String, Gate>,
    pub basic_events: BTreeMap<EventId, BasicEventData>,
}

impl FaultTree {
    pub fn rate(&self, id: &str) -> Option<f64> {
        self.basic_events.get(id).map(|b| b.lambda)
    }

    /// Checks references and acyclicity without building the expression.
    pub fn validate(&self) -> Result<(), ModelError> {
        expr_from_tree(self).map(|_| ())
    }
}

/// Reads the TOP failure function off a fault tree.
///
/// Shared subtrees are copied at every reference. PAND gates with more
/// than two inputs become left-associated chains.
pub fn expr_from_tree(t: &FaultTree) -> Result<TemporalExpr, ModelError> {
    if !t.gates.contains_key(&t.top) && !t.basic_events.contains_key(&t.top) {
        return Err(ModelError::UnknownTop(t.top.clone()));
    }
    let mut memo = BTreeMap::new();
    let mut stack = Vec::new();
    build(t, &t.top, &mut memo, &mut stack).map(|e| e.canonicalize())
}

fn build(
    t: &FaultTree,
    name: &str,
    memo: &mut BTreeMap<String, TemporalExpr>,
    stack: &mut Vec<String>,
) -> Result<TemporalExpr, ModelError> {
    if let Some(e) = memo.get(name) {
        return Ok(e.clone());
    }
    let Some(gate) = t.gates.get(name) else {
        return Ok(TemporalExpr::atom(name));
    };
    if stack.iter().any(|s| s == name) {
        return Err(ModelError::Cycle(name.to_string()));
    }
    if gate.inputs.is_empty() {
        return Err(ModelError::EmptyGate(name.to_string()));
    }
    stack.push(name.to_string());
    let mut kids = Vec::with_capacity(gate.inputs.len());
    for c in &gate.inputs {
        if !t.gates.contains_key(c) && !t.basic_events.contains_key(c) {
            return Err(ModelError::Dangling { gate: name.to_string(), child: c.clone() });
        }
        kids.push(build(t, c, memo, stack)?);
    }
    stack.pop();
    let e = match gate.kind {
        GateKind::And => TemporalExpr::and(kids),
        GateKind::Or => TemporalExpr::or(kids),
        GateKind::Sand => TemporalExpr::sand(kids),
        GateKind::Pand => TemporalExpr::pand_chain(kids),
        GateKind::Not => {
            if kids.len() != 1 {
                return Err(ModelError::NotArity(name.to_string()));
            }
            TemporalExpr::not(kids.pop().unwrap())
        }
    };
    memo.insert(name.to_string(), e.clone());
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(x: &str) -> TemporalExpr {
        TemporalExpr::atom(x)
    }

    #[test]
    fn events_of_examples() {
        let e = TemporalExpr::pand(a("A"), a("B"));
        assert_eq!(e.events_of(), ["A", "B"].map(String::from).into());
        assert!(TemporalExpr::True.events_of().is_empty());
        let e = TemporalExpr::and(vec![TemporalExpr::not(a("C")), TemporalExpr::pand(a("A"), a("B"))]);
        assert_eq!(e.events_of().len(), 3);
    }

    #[test]
    fn part_of() {
        let ab = TemporalExpr::pand(a("A"), a("B"));
        assert!(is_part_of("B", &ab).unwrap());
        assert!(!is_part_of("C", &ab).unwrap());
        assert!(is_part_of("A", &TemporalExpr::and(vec![a("A"), a("B")])).unwrap());
        let bad = TemporalExpr::or(vec![a("A"), a("B")]);
        assert!(is_part_of("A", &bad).is_err());
    }

    #[test]
    fn canonical_order_and_flattening() {
        let e = TemporalExpr::or(vec![a("B"), TemporalExpr::or(vec![a("C"), a("A")])]);
        assert_eq!(e.canonicalize().to_string(), "A | B | C");
        // an AND that scopes a negation keeps its brackets
        let scoped = TemporalExpr::and(vec![a("C"), TemporalExpr::and(vec![TemporalExpr::not(a("A")), a("B")])]);
        assert_eq!(scoped.canonicalize().to_string(), "C & (B & !A)");
        assert!(TemporalExpr::True < a("A"));
        assert!(a("Z") < TemporalExpr::not(a("A")));
    }

    #[test]
    fn display_brackets() {
        let e = TemporalExpr::pand(a("A"), TemporalExpr::pand(a("B"), a("C")));
        assert_eq!(e.to_string(), "A < (B < C)");
        let e = TemporalExpr::pand_chain(vec![a("A"), a("B"), a("C")]);
        assert_eq!(e.to_string(), "A < B < C");
        let e = TemporalExpr::pand(TemporalExpr::sand(vec![a("A"), a("B")]), TemporalExpr::and(vec![a("C"), a("D")]));
        assert_eq!(e.to_string(), "A = B < (C & D)");
    }

    #[test]
    fn tree_cycle_and_dangling() {
        let mut t = FaultTree { top: "G".into(), ..Default::default() };
        t.gates.insert("G".into(), Gate { kind: GateKind::And, inputs: vec!["G".into()] });
        assert_eq!(expr_from_tree(&t), Err(ModelError::Cycle("G".into())));
        t.gates.insert("G".into(), Gate { kind: GateKind::And, inputs: vec!["X".into()] });
        assert!(matches!(expr_from_tree(&t), Err(ModelError::Dangling { .. })));
    }

    #[test]
    fn single_event_top() {
        let mut t = FaultTree { top: "A".into(), ..Default::default() };
        t.basic_events.insert("A".into(), BasicEventData { id: "A".into(), lambda: 1e-6 });
        assert_eq!(expr_from_tree(&t).unwrap(), a("A"));
    }

    #[test]
    fn not_gate_over_pand_kept() {
        let mut t = FaultTree { top: "N".into(), ..Default::default() };
        for x in ["A", "B"] {
            t.basic_events.insert(x.into(), BasicEventData { id: x.into(), lambda: 1e-6 });
        }
        t.gates.insert("P".into(), Gate { kind: GateKind::Pand, inputs: vec!["A".into(), "B".into()] });
        t.gates.insert("N".into(), Gate { kind: GateKind::Not, inputs: vec!["P".into()] });
        assert_eq!(expr_from_tree(&t).unwrap(), TemporalExpr::not(TemporalExpr::pand(a("A"), a("B"))));
    }
}
