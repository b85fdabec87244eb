//! Event sequences and temporal disjunctive normal forms.
//!
//! Events are interned in a [`Vocab`] (sorted names) and addressed as bits of
//! an [`EventSet`]. A sequence is a PAND chain of items guarded by a set of
//! negated events: `!N & (I1 < I2 < ... < Ik)`. The guard refers to the
//! instant the chain completes.

use std::cmp::Reverse;
use std::collections::BTreeSet;
use std::fmt;
use std::sync::{Arc, OnceLock};

use thiserror::Error;

use crate::expr::{EventId, TemporalExpr};

pub const MAX_EVENTS: usize = 128;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SeqError {
    #[error("{0} distinct events exceed the supported maximum of 128")]
    TooManyEvents(usize),
    #[error("`{0}` is not a sequence expression")]
    NotASequence(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventSet(pub u128);

impl EventSet {
    pub const EMPTY: EventSet = EventSet(0);

    pub fn single(i: usize) -> EventSet {
        EventSet(1u128 << i)
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    pub fn union(self, o: EventSet) -> EventSet {
        EventSet(self.0 | o.0)
    }

    pub fn inter(self, o: EventSet) -> EventSet {
        EventSet(self.0 & o.0)
    }

    pub fn minus(self, o: EventSet) -> EventSet {
        EventSet(self.0 & !o.0)
    }

    pub fn is_subset(self, o: EventSet) -> bool {
        self.0 & !o.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let i = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(i)
        })
    }

    pub fn lowest(self) -> Option<usize> {
        (self.0 != 0).then(|| self.0.trailing_zeros() as usize)
    }

    /// All subsets, including the empty set and `self`.
    pub fn subsets(self) -> impl Iterator<Item = EventSet> {
        let members: Vec<usize> = self.iter().collect();
        (0u64..1 << members.len()).map(move |mask| {
            EventSet(members.iter().enumerate().filter(|(j, _)| mask >> j & 1 == 1).fold(0, |a, (_, &i)| a | 1u128 << i))
        })
    }
}

impl FromIterator<usize> for EventSet {
    fn from_iter<T: IntoIterator<Item = usize>>(it: T) -> Self {
        EventSet(it.into_iter().fold(0, |a, i| a | 1u128 << i))
    }
}

/// Sorted event names; index order is the canonical event order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    names: Vec<EventId>,
}

impl Vocab {
    pub fn new<I: IntoIterator<Item = EventId>>(names: I) -> Result<Vocab, SeqError> {
        let names: Vec<EventId> = names.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        if names.len() > MAX_EVENTS {
            return Err(SeqError::TooManyEvents(names.len()));
        }
        Ok(Vocab { names })
    }

    pub fn of_expr(e: &TemporalExpr) -> Result<Vocab, SeqError> {
        Vocab::new(e.events_of())
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[EventId] {
        &self.names
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.binary_search_by(|n| n.as_str().cmp(name)).ok()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn set_of<'a, I: IntoIterator<Item = &'a str>>(&self, names: I) -> Option<EventSet> {
        names.into_iter().map(|n| self.index(n)).collect::<Option<Vec<_>>>().map(|v| v.into_iter().collect())
    }

    pub fn all(&self) -> EventSet {
        (0..self.len()).collect()
    }
}

/// One position of a chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Item {
    /// Events failing at the same instant (SAND group if more than one).
    Core(EventSet),
    /// At least two events without mutual order; the item occurs when the last one fails.
    Ext(EventSet),
}

impl Item {
    pub fn events(self) -> EventSet {
        match self {
            Item::Core(s) | Item::Ext(s) => s,
        }
    }

    pub fn is_sand(self) -> bool {
        matches!(self, Item::Core(s) if s.len() > 1)
    }

    /// An AND group, collapsed to a core event when it holds one event.
    pub fn and_of(s: EventSet) -> Item {
        if s.len() == 1 {
            Item::Core(s)
        } else {
            Item::Ext(s)
        }
    }

    fn to_expr(self, v: &Vocab) -> TemporalExpr {
        let atoms = |s: EventSet| s.iter().map(|i| TemporalExpr::atom(v.name(i))).collect::<Vec<_>>();
        match self {
            Item::Core(s) => TemporalExpr::sand(atoms(s)),
            Item::Ext(s) => TemporalExpr::and(atoms(s)),
        }
    }
}

/// `!negated & (chain[0] < chain[1] < ...)`; an empty chain is `True`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventSequence {
    pub negated: EventSet,
    pub chain: Vec<Item>,
}

impl EventSequence {
    pub fn truth() -> EventSequence {
        EventSequence { negated: EventSet::EMPTY, chain: Vec::new() }
    }

    pub fn atom(i: usize) -> EventSequence {
        EventSequence::of_chain(vec![Item::Core(EventSet::single(i))])
    }

    pub fn of_chain(chain: Vec<Item>) -> EventSequence {
        EventSequence { negated: EventSet::EMPTY, chain }
    }

    pub fn is_true(&self) -> bool {
        self.chain.is_empty()
    }

    /// Events of the chain.
    pub fn pos(&self) -> EventSet {
        self.chain.iter().fold(EventSet::EMPTY, |a, it| a.union(it.events()))
    }

    /// Number of events in the chain.
    pub fn rank(&self) -> usize {
        self.pos().len()
    }

    pub fn has_sand(&self) -> bool {
        self.chain.iter().any(|i| i.is_sand())
    }

    pub fn has_ext(&self) -> bool {
        self.chain.iter().any(|i| matches!(i, Item::Ext(_)))
    }

    /// Adds negated events; `None` when one of them is part of the chain.
    pub fn guarded(mut self, n: EventSet) -> Option<EventSequence> {
        if self.chain.is_empty() {
            return Some(self);
        }
        if !n.inter(self.pos()).is_empty() {
            return None;
        }
        self.negated = self.negated.union(n);
        Some(self)
    }

    /// Deterministic order: rank, then chain, then guards.
    pub fn sort_key(&self) -> (usize, &[Item], EventSet) {
        (self.rank(), &self.chain, self.negated)
    }

    /// Report order: rank, then longer chains first.
    pub fn report_key(&self) -> (usize, Reverse<usize>, &[Item], EventSet) {
        (self.rank(), Reverse(self.chain.len()), &self.chain, self.negated)
    }

    pub fn to_expr(&self, v: &Vocab) -> TemporalExpr {
        if self.chain.is_empty() {
            return TemporalExpr::True;
        }
        let chain = TemporalExpr::pand_chain(self.chain.iter().map(|i| i.to_expr(v)).collect());
        let mut parts: Vec<TemporalExpr> = self.negated.iter().map(|i| TemporalExpr::not(TemporalExpr::atom(v.name(i)))).collect();
        parts.push(chain);
        TemporalExpr::and(parts).canonicalize()
    }

    pub fn display<'a>(&'a self, v: &'a Vocab) -> impl fmt::Display + 'a {
        SeqDisplay(self, v)
    }

    /// Completion step of the chain on a realization, checking the guards.
    /// `occ(i)` is the failure step of event `i`, 0 if it never fails.
    pub fn completes(&self, occ: impl Fn(usize) -> u8) -> Option<u8> {
        let mut last = 0u8;
        for (k, it) in self.chain.iter().enumerate() {
            let at = match *it {
                Item::Core(s) => {
                    let mut at = None;
                    for i in s.iter() {
                        let o = occ(i);
                        if o == 0 || at.is_some_and(|a| a != o) {
                            return None;
                        }
                        at = Some(o);
                    }
                    at?
                }
                Item::Ext(s) => {
                    let mut m = 0;
                    for i in s.iter() {
                        let o = occ(i);
                        if o == 0 {
                            return None;
                        }
                        m = m.max(o);
                    }
                    m
                }
            };
            if k > 0 && at <= last {
                return None;
            }
            last = at;
        }
        for x in self.negated.iter() {
            let o = occ(x);
            if o != 0 && o <= last {
                return None;
            }
        }
        Some(last)
    }

    /// Parses `!N & chain` shaped expressions back into a sequence.
    pub fn from_expr(e: &TemporalExpr, v: &Vocab) -> Result<EventSequence, SeqError> {
        let bad = || SeqError::NotASequence(e.to_string());
        let idx = |x: &TemporalExpr| match x {
            TemporalExpr::Atom(a) => v.index(a).ok_or_else(bad),
            _ => Err(bad()),
        };
        let (negs, chain): (Vec<&TemporalExpr>, Vec<&TemporalExpr>) = match e {
            TemporalExpr::True => return Ok(EventSequence::truth()),
            TemporalExpr::And(xs) if xs.iter().any(|x| matches!(x, TemporalExpr::Not(_))) => {
                xs.iter().partition(|x| matches!(x, TemporalExpr::Not(_)))
            }
            other => (Vec::new(), vec![other]),
        };
        let mut negated = EventSet::EMPTY;
        for n in negs {
            let TemporalExpr::Not(x) = n else { unreachable!() };
            negated = negated.union(EventSet::single(idx(x)?));
        }
        let body = match chain.as_slice() {
            [one] => (*one).clone(),
            many => TemporalExpr::And(many.iter().map(|x| (*x).clone()).collect()),
        };
        let mut items = Vec::new();
        for it in body.pand_items() {
            items.push(match it {
                TemporalExpr::Atom(_) => Item::Core(EventSet::single(idx(it)?)),
                TemporalExpr::Sand(xs) => Item::Core(xs.iter().map(idx).collect::<Result<_, _>>()?),
                TemporalExpr::And(xs) => Item::and_of(xs.iter().map(idx).collect::<Result<_, _>>()?),
                _ => return Err(bad()),
            });
        }
        EventSequence::of_chain(items).guarded(negated).ok_or_else(bad)
    }
}

struct SeqDisplay<'a>(&'a EventSequence, &'a Vocab);

impl fmt::Display for SeqDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.to_expr(self.1))
    }
}

/// A disjunction of event sequences.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tdnf {
    pub vocab: Arc<Vocab>,
    pub sequences: Vec<EventSequence>,
    /// No sequence is covered by another one.
    pub minimal: bool,
    /// Sequences are pairwise exclusive.
    pub disjoint: bool,
    /// How the negated events of each sequence are read.
    pub guards: GuardReading,
}

/// Reading of `!X & s`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GuardReading {
    /// X has not failed when `s` completes.
    #[default]
    Latched,
    /// X has not failed at the time of evaluation.
    State,
}

impl Tdnf {
    pub fn new(vocab: Arc<Vocab>, sequences: Vec<EventSequence>) -> Tdnf {
        Tdnf { vocab, sequences, minimal: false, disjoint: false, guards: GuardReading::Latched }
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn to_expr(&self) -> TemporalExpr {
        TemporalExpr::or(self.sequences.iter().map(|s| s.to_expr(&self.vocab)).collect())
    }

    /// Sequence texts in the stored order.
    pub fn lines(&self) -> Vec<String> {
        self.sequences.iter().map(|s| s.to_expr(&self.vocab).to_string()).collect()
    }
}

impl fmt::Display for Tdnf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.sequences.is_empty() {
            return write!(f, "false");
        }
        for (i, s) in self.sequences.iter().enumerate() {
            if i > 0 {
                write!(f, " | ")?;
            }
            write!(f, "[{}]", s.display(&self.vocab))?;
        }
        Ok(())
    }
}

/// Largest set size for which realizations are enumerated.
pub const MAX_REALIZATION_EVENTS: usize = 8;

/// All weak orders of `k` labelled elements as step vectors (values `1..=m`,
/// every step used). With `strict`, only total orders.
pub fn weak_orders(k: usize, strict: bool) -> Arc<Vec<Vec<u8>>> {
    static CACHE: [[OnceLock<Arc<Vec<Vec<u8>>>>; MAX_REALIZATION_EVENTS + 1]; 2] = [const { [const { OnceLock::new() }; MAX_REALIZATION_EVENTS + 1] }; 2];
    assert!(k <= MAX_REALIZATION_EVENTS, "weak orders limited to {MAX_REALIZATION_EVENTS} elements");
    CACHE[strict as usize][k]
        .get_or_init(|| {
            let mut out = Vec::new();
            let mut cur = vec![0u8; k];
            gen_orders(&mut cur, 0, 0, strict, &mut out);
            out.sort();
            Arc::new(out)
        })
        .clone()
}

fn gen_orders(cur: &mut Vec<u8>, i: usize, used: u8, strict: bool, out: &mut Vec<Vec<u8>>) {
    let k = cur.len();
    if i == k {
        // steps 1..=used must all occur
        let mut seen = 0u32;
        for &s in cur.iter() {
            seen |= 1 << s;
        }
        if seen == ((1u32 << (used + 1)) - 2) {
            out.push(cur.clone());
        }
        return;
    }
    for s in 1..=k as u8 {
        if strict && cur[..i].contains(&s) {
            continue;
        }
        cur[i] = s;
        gen_orders(cur, i + 1, used.max(s), strict, out);
    }
    cur[i] = 0;
}

/// Realizations of a sequence: the orderings of its chain events that satisfy it,
/// all other events never failing. `None` when the chain is too large to enumerate.
#[derive(Clone, Debug)]
pub struct Realizations {
    pub events: Vec<usize>,
    pub steps: Vec<Vec<u8>>,
}

impl Realizations {
    pub fn of(s: &EventSequence, strict: bool) -> Option<Realizations> {
        let events: Vec<usize> = s.pos().iter().collect();
        if events.len() > MAX_REALIZATION_EVENTS {
            return None;
        }
        let orders = weak_orders(events.len(), strict);
        let steps = orders
            .iter()
            .filter(|w| s.completes(|i| lookup(&events, w, i)).is_some())
            .cloned()
            .collect();
        Some(Realizations { events, steps })
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Whether `a` holds at the end of realization `r`.
    pub fn satisfies(&self, r: usize, a: &EventSequence) -> bool {
        a.completes(|i| lookup(&self.events, &self.steps[r], i)).is_some()
    }
}

fn lookup(events: &[usize], w: &[u8], i: usize) -> u8 {
    match events.binary_search(&i) {
        Ok(j) => w[j],
        Err(_) => 0,
    }
}

/// `a` covers `b`: wherever `b` holds, `a` already holds.
///
/// With `strict`, simultaneous failures are ignored.
pub fn covers(a: &EventSequence, b: &EventSequence, strict: bool) -> bool {
    covers_with(a, b, None, strict)
}

pub(crate) fn covers_with(a: &EventSequence, b: &EventSequence, rb: Option<&Realizations>, strict: bool) -> bool {
    if a.is_true() {
        return true;
    }
    let pb = b.pos();
    if !a.pos().is_subset(pb) || !a.negated.is_subset(pb.union(b.negated)) {
        return false;
    }
    if a == b {
        return true;
    }
    let owned;
    let r = match rb {
        Some(r) => r,
        None => match Realizations::of(b, strict) {
            Some(r) => {
                owned = r;
                &owned
            }
            None => return false,
        },
    };
    (0..r.len()).all(|k| r.satisfies(k, a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_expr;

    fn vocab(xs: &[&str]) -> Vocab {
        Vocab::new(xs.iter().map(|x| x.to_string())).unwrap()
    }

    fn seq(s: &str, v: &Vocab) -> EventSequence {
        EventSequence::from_expr(&parse_expr(s).unwrap(), v).unwrap()
    }

    #[test]
    fn weak_order_counts() {
        let fubini = [1, 1, 3, 13, 75, 541, 4683];
        for (k, want) in fubini.iter().enumerate() {
            assert_eq!(weak_orders(k, false).len(), *want);
        }
        assert_eq!(weak_orders(4, true).len(), 24);
    }

    #[test]
    fn sequence_round_trip() {
        let v = vocab(&["A", "B", "C", "E", "U"]);
        for s in ["!B & !E & U < A", "A & B", "A < (B & C)", "A = B < C", "E", "(A & B) < (C & E)", "A & B & !E"] {
            let q = seq(s, &v);
            assert_eq!(q.to_expr(&v), parse_expr(s).unwrap(), "{s}");
        }
        let q = seq("A < (B & C)", &v);
        assert_eq!(q.chain.len(), 2);
        assert_eq!(q.rank(), 3);
    }

    #[test]
    fn guard_contradiction() {
        let v = vocab(&["A", "B"]);
        assert!(seq("A < B", &v).guarded(v.set_of(["A"]).unwrap()).is_none());
        assert!(EventSequence::truth().guarded(v.set_of(["A"]).unwrap()).unwrap().is_true());
    }

    #[test]
    fn subsumption_examples() {
        let v = vocab(&["A", "B", "C"]);
        assert!(covers(&seq("A < B", &v), &seq("A < B < C", &v), false));
        assert!(covers(&seq("!B & A", &v), &seq("A < B", &v), false));
        assert!(!covers(&seq("!B & A", &v), &seq("C < A", &v), false));
        assert!(covers(&seq("A & B", &v), &seq("A = B", &v), false));
        assert!(!covers(&seq("A < B", &v), &seq("A & B", &v), false));
        assert!(covers(&seq("!A & !C & B", &v), &seq("B < A = C", &v), false));
    }
}
