//! Transformation laws and the TDNF rewrite engine.
//!
//! [`to_tdnf`] works bottom-up over the expression tree. Every subexpression
//! is turned into a disjunction of [`EventSequence`]s and the operators are
//! applied as algebra on those sets:
//!
//! * AND of two chains merges them on their last items (left first, tie,
//!   right first), which is the law of completion applied recursively;
//! * PAND of two chains is `(c1 & P2) < L2`, OR on the left distributes
//!   (type II), OR on the right uses the type I law;
//! * negated subterms are expanded with the temporal laws of negation;
//! * chains are built with the laws of contradiction, and each intermediate
//!   result is reduced with the laws of absorption and intersection.
//!
//! The free functions (`complete_and`, `pand_assoc`, ...) expose single laws
//! on expressions.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use crate::expr::{EventId, TemporalExpr};
use crate::seq::{covers, covers_with, weak_orders, EventSequence, EventSet, Item, Realizations, SeqError, Tdnf, Vocab, MAX_REALIZATION_EVENTS};

pub const DEFAULT_BUDGET: usize = 1_000_000;

/// Largest event set for which a negated disjunction is expanded in one pass.
const COMBINED_NEGATION_EVENTS: usize = 5;

/// Largest disjunction expanded over all subsets of its terms.
const MAX_OR_GROUP: usize = 6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RewriteMode {
    /// AND groups are expanded into all orderings.
    Full,
    /// AND groups of distinct events stay together as extended core events.
    #[default]
    Extended,
}

/// How the negated terms introduced by the OR distributive laws are treated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum NegationPolicy {
    #[default]
    Exact,
    /// `s < (t1 | t2)` becomes `(s < t1) | (s < t2)`, and likewise for SAND.
    /// This over-approximates the failure function. Explicit negations in
    /// the input are still expanded exactly.
    Conservative,
}

#[derive(Clone, Debug)]
pub struct RewriteOptions {
    pub mode: RewriteMode,
    pub negation: NegationPolicy,
    /// Drop sequences with more events (positive context only).
    pub rank_cutoff: Option<usize>,
    /// Drop sequences with simultaneous failures (positive context only).
    pub drop_sand: bool,
    pub budget: usize,
    pub record_trace: bool,
}

impl Default for RewriteOptions {
    fn default() -> Self {
        RewriteOptions {
            mode: RewriteMode::Extended,
            negation: NegationPolicy::Exact,
            rank_cutoff: None,
            drop_sand: false,
            budget: DEFAULT_BUDGET,
            record_trace: true,
        }
    }
}

impl RewriteOptions {
    pub fn with_mode(mode: RewriteMode) -> Self {
        RewriteOptions { mode, ..Default::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceStep {
    pub law: &'static str,
    pub before: String,
    pub after: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RewriteTrace {
    pub steps: Vec<TraceStep>,
    pub budget: usize,
    /// Elementary operations spent.
    pub used: usize,
}

impl RewriteTrace {
    /// One `step <n>: <law> : <before> => <after>` line per step.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (i, st) in self.steps.iter().enumerate() {
            let _ = writeln!(s, "step {}: {} : {} => {}", i + 1, st.law, st.before, st.after);
        }
        s
    }

    /// Law names with their counts, in first-use order.
    pub fn summary(&self) -> Vec<(&'static str, usize)> {
        let mut out: Vec<(&'static str, usize)> = Vec::new();
        for st in &self.steps {
            match out.iter_mut().find(|(l, _)| *l == st.law) {
                Some((_, n)) => *n += 1,
                None => out.push((st.law, 1)),
            }
        }
        out
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RewriteError {
    #[error("rewrite budget of {} operations exceeded", .trace.budget)]
    Budget { trace: RewriteTrace },
    #[error("negation in `{0}` is not AND-combined with a non-negated term")]
    PureNegation(String),
    #[error(transparent)]
    Seq(#[from] SeqError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LawError {
    #[error("the law does not apply to negated operands")]
    NegatedOperand,
    #[error("`{0}` is not a chain of core events")]
    NotAChain(String),
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
}

pub(crate) type Dnf = Vec<EventSequence>;
type Chains = Vec<Vec<Item>>;

#[derive(Debug)]
pub(crate) enum Stop {
    Budget,
    PureNegation(String),
}

pub(crate) type R<T> = Result<T, Stop>;

pub(crate) struct Engine<'v> {
    pub(crate) v: &'v Vocab,
    pub(crate) mode: RewriteMode,
    negation: NegationPolicy,
    /// Ignore simultaneous failures when deciding coverage.
    pub(crate) strict: bool,
    cutoff: Option<usize>,
    budget: usize,
    pub(crate) used: usize,
    record: bool,
    trace: Vec<TraceStep>,
    conj_memo: HashMap<(Vec<Item>, Vec<Item>), Chains>,
    /// Results feed a positive context: pieces over the cutoff or with SAND can go.
    pos_ctx: bool,
}

fn events_of(chain: &[Item]) -> EventSet {
    chain.iter().fold(EventSet::EMPTY, |a, i| a.union(i.events()))
}

/// Appends an item, applying the laws of contradiction.
fn append(chain: &[Item], it: Item) -> Option<Vec<Item>> {
    let earlier = events_of(chain);
    let it = match it {
        Item::Core(s) if !s.inter(earlier).is_empty() => return None,
        Item::Core(_) => it,
        Item::Ext(s) => {
            let rest = s.minus(earlier);
            if rest.is_empty() {
                return None;
            }
            Item::and_of(rest)
        }
    };
    let mut c = chain.to_vec();
    c.push(it);
    Some(c)
}

fn dedup<T: Ord>(mut v: Vec<T>) -> Vec<T> {
    v.sort();
    v.dedup();
    v
}

impl<'v> Engine<'v> {
    pub(crate) fn new(v: &'v Vocab, opt: &RewriteOptions) -> Engine<'v> {
        Engine {
            v,
            mode: opt.mode,
            negation: opt.negation,
            strict: opt.drop_sand,
            cutoff: opt.rank_cutoff,
            budget: opt.budget,
            used: 0,
            record: opt.record_trace,
            trace: Vec::new(),
            conj_memo: HashMap::new(),
            pos_ctx: false,
        }
    }

    pub(crate) fn tick(&mut self) -> R<()> {
        self.used += 1;
        if self.used > self.budget {
            Err(Stop::Budget)
        } else {
            Ok(())
        }
    }

    fn take_trace(&mut self) -> RewriteTrace {
        RewriteTrace { steps: std::mem::take(&mut self.trace), budget: self.budget, used: self.used }
    }

    // ---- chains without guards -------------------------------------------

    /// AND of all atoms in `s`.
    pub(crate) fn and_atoms(&mut self, s: EventSet) -> R<Chains> {
        if s.is_empty() {
            return Ok(vec![vec![]]);
        }
        match self.mode {
            RewriteMode::Extended => Ok(vec![vec![Item::and_of(s)]]),
            RewriteMode::Full => {
                let mut acc: Chains = vec![vec![]];
                for i in s.iter() {
                    let one = vec![Item::Core(EventSet::single(i))];
                    let mut next = Vec::new();
                    for c in &acc {
                        next.extend(self.conj_chain(c, &one)?);
                    }
                    acc = dedup(next);
                }
                Ok(acc)
            }
        }
    }

    /// The chains an extended core event stands for, each ending in the
    /// events that fail last.
    pub(crate) fn complete_ext(&mut self, s: EventSet) -> R<Chains> {
        let mut out = Vec::new();
        for l in s.subsets().filter(|l| !l.is_empty()) {
            for p in self.and_atoms(s.minus(l))? {
                out.extend(append(&p, Item::Core(l)));
            }
        }
        Ok(out)
    }

    pub(crate) fn conj_chain(&mut self, c1: &[Item], c2: &[Item]) -> R<Chains> {
        self.tick()?;
        if c1.is_empty() {
            return Ok(vec![c2.to_vec()]);
        }
        if c2.is_empty() || c1 == c2 {
            return Ok(vec![c1.to_vec()]);
        }
        let andable = |i: &Item| matches!(i, Item::Ext(_)) || i.events().len() == 1;
        if self.mode == RewriteMode::Extended && c1.len() == 1 && c2.len() == 1 && andable(&c1[0]) && andable(&c2[0]) {
            return Ok(vec![vec![Item::and_of(c1[0].events().union(c2[0].events()))]]);
        }
        let key = (c1.to_vec(), c2.to_vec());
        if let Some(hit) = self.conj_memo.get(&key) {
            return Ok(hit.clone());
        }
        let (l1, p1) = c1.split_last().unwrap();
        let (l2, p2) = c2.split_last().unwrap();
        let mut out = Vec::new();
        for s in self.conj_chain(c1, p2)? {
            out.extend(append(&s, *l2));
        }
        let pre = self.conj_chain(p1, p2)?;
        let tie = self.sand_items(*l1, *l2)?;
        for s in &pre {
            for t in &tie {
                out.extend(self.pand_chain(s, t)?);
            }
        }
        for s in self.conj_chain(p1, c2)? {
            out.extend(append(&s, *l1));
        }
        let out = dedup(out);
        self.conj_memo.insert(key, out.clone());
        Ok(out)
    }

    pub(crate) fn pand_chain(&mut self, c1: &[Item], c2: &[Item]) -> R<Chains> {
        self.tick()?;
        let Some((l2, p2)) = c2.split_last() else {
            return Ok(vec![]);
        };
        if c1.is_empty() {
            return Ok(vec![c2.to_vec()]);
        }
        let mut out = Vec::new();
        for s in self.conj_chain(c1, p2)? {
            out.extend(append(&s, *l2));
        }
        Ok(dedup(out))
    }

    pub(crate) fn sand_chain(&mut self, c1: &[Item], c2: &[Item]) -> R<Chains> {
        self.tick()?;
        match (c1.split_last(), c2.split_last()) {
            (None, None) => Ok(vec![vec![]]),
            (None, _) | (_, None) => Ok(vec![]),
            (Some((l1, p1)), Some((l2, p2))) => {
                let pre = self.conj_chain(p1, p2)?;
                let tie = self.sand_items(*l1, *l2)?;
                let mut out = Vec::new();
                for s in &pre {
                    for t in &tie {
                        out.extend(self.pand_chain(s, t)?);
                    }
                }
                Ok(dedup(out))
            }
        }
    }

    fn sand_items(&mut self, a: Item, b: Item) -> R<Chains> {
        match (a, b) {
            (Item::Core(x), Item::Core(y)) => Ok(vec![vec![Item::Core(x.union(y))]]),
            (Item::Ext(s), other) | (other, Item::Ext(s)) => {
                let mut out = Vec::new();
                for c in self.complete_ext(s)? {
                    out.extend(self.sand_chain(&c, &[other])?);
                }
                Ok(out)
            }
        }
    }

    // ---- guarded sequences -------------------------------------------------

    fn seqs(chains: Chains, guards: EventSet) -> Dnf {
        chains.into_iter().filter_map(|c| EventSequence::of_chain(c).guarded(guards)).collect()
    }

    /// Every piece built from `a` and `b` would be pruned.
    fn doomed(&self, a: &EventSequence, b: &EventSequence) -> bool {
        self.pos_ctx
            && (self.cutoff.is_some_and(|c| a.pos().union(b.pos()).len() > c) || (self.strict && (a.has_sand() || b.has_sand())))
    }

    fn covers(&self, a: &EventSequence, b: &EventSequence) -> bool {
        covers(a, b, self.strict)
    }

    pub(crate) fn conj_seq(&mut self, a: &EventSequence, b: &EventSequence) -> R<Dnf> {
        self.tick()?;
        if self.doomed(a, b) {
            return Ok(vec![]);
        }
        if a.is_true() {
            return Ok(vec![b.clone()]);
        }
        if b.is_true() {
            return Ok(vec![a.clone()]);
        }
        if self.covers(a, b) {
            return Ok(vec![b.clone()]);
        }
        if self.covers(b, a) {
            return Ok(vec![a.clone()]);
        }
        if let Some(x) = a.negated.lowest() {
            // ¬X∧s' ∧ t = [¬X∧(s'∧t)] ∨ [(s'≺X)∧t]
            let xs = EventSet::single(x);
            let a1 = EventSequence { negated: a.negated.minus(xs), chain: a.chain.clone() };
            let mut out: Dnf = self.conj_seq(&a1, b)?.into_iter().filter_map(|s| s.guarded(xs)).collect();
            for p in self.pand_seq(&a1, &EventSequence::atom(x))? {
                out.extend(self.conj_seq(&p, b)?);
            }
            return Ok(self.absorb(out));
        }
        if !b.negated.is_empty() {
            return self.conj_seq(b, a);
        }
        let chains = self.conj_chain(&a.chain, &b.chain)?;
        Ok(Self::seqs(chains, EventSet::EMPTY))
    }

    pub(crate) fn pand_seq(&mut self, a: &EventSequence, b: &EventSequence) -> R<Dnf> {
        self.tick()?;
        if self.doomed(a, b) {
            return Ok(vec![]);
        }
        if b.is_true() {
            return Ok(vec![]);
        }
        if a.is_true() {
            return Ok(vec![b.clone()]);
        }
        if let Some(x) = a.negated.lowest() {
            // (¬X∧s')≺t = [¬X∧(s'≺t)] ∨ [(s'≺X)≺t] ∨ [s'≺(X≈t)]
            let xs = EventSet::single(x);
            let xa = EventSequence::atom(x);
            let a1 = EventSequence { negated: a.negated.minus(xs), chain: a.chain.clone() };
            let mut out: Dnf = self.pand_seq(&a1, b)?.into_iter().filter_map(|s| s.guarded(xs)).collect();
            for p in self.pand_seq(&a1, &xa)? {
                out.extend(self.pand_seq(&p, b)?);
            }
            for q in self.sand_seq(&xa, b)? {
                out.extend(self.pand_seq(&a1, &q)?);
            }
            return Ok(self.absorb(out));
        }
        let chains = self.pand_chain(&a.chain, &b.chain)?;
        Ok(Self::seqs(chains, b.negated))
    }

    pub(crate) fn sand_seq(&mut self, a: &EventSequence, b: &EventSequence) -> R<Dnf> {
        self.tick()?;
        if self.doomed(a, b) {
            return Ok(vec![]);
        }
        let chains = self.sand_chain(&a.chain, &b.chain)?;
        Ok(Self::seqs(chains, a.negated.union(b.negated)))
    }

    // ---- disjunctions ------------------------------------------------------

    pub(crate) fn conj_dnf(&mut self, a: &[EventSequence], b: &[EventSequence]) -> R<Dnf> {
        let mut out = Vec::new();
        for x in a {
            for y in b {
                out.extend(self.conj_seq(x, y)?);
            }
        }
        Ok(self.absorb(out))
    }

    fn pairwise_disjoint(&mut self, xs: &[EventSequence]) -> R<bool> {
        if xs.len() > 24 {
            return Ok(false);
        }
        for i in 0..xs.len() {
            for j in i + 1..xs.len() {
                if !self.conj_seq(&xs[i], &xs[j])?.is_empty() {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Index groups for the OR laws: singletons when the operands cannot hold
    /// together (or under the conservative policy), otherwise every nonempty
    /// subset, with the complement to be negated.
    fn or_groups(&mut self, xs: &[EventSequence]) -> R<Vec<(Vec<usize>, Vec<usize>)>> {
        let n = xs.len();
        if n == 1 || self.negation == NegationPolicy::Conservative || self.pairwise_disjoint(xs)? {
            return Ok((0..n).map(|i| (vec![i], vec![])).collect());
        }
        if n > MAX_OR_GROUP {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        for mask in 1u32..(1 << n) {
            self.tick()?;
            let (inn, outside): (Vec<usize>, Vec<usize>) = (0..n).partition(|i| mask >> i & 1 == 1);
            out.push((inn, outside));
        }
        Ok(out)
    }

    fn sand_fold(&mut self, xs: &[&EventSequence]) -> R<Dnf> {
        let mut acc = vec![xs[0].clone()];
        for x in &xs[1..] {
            let mut next = Vec::new();
            for a in &acc {
                next.extend(self.sand_seq(a, x)?);
            }
            acc = self.absorb(next);
        }
        Ok(acc)
    }

    fn pand_right(&mut self, a: &EventSequence, b: &[EventSequence]) -> R<Dnf> {
        if b.len() == 1 {
            return self.pand_seq(a, &b[0]);
        }
        if self.negation == NegationPolicy::Conservative || self.pairwise_disjoint(b)? {
            let mut out = Vec::new();
            for t in b {
                out.extend(self.pand_seq(a, t)?);
            }
            return Ok(out);
        }
        // s < (t1 | t2 | ...): no t_i holds yet when s completes, one holds later
        let before = self.neg_dnf(b, vec![a.clone()])?;
        self.conj_dnf(&before, b)
    }

    pub(crate) fn pand_dnf(&mut self, a: &[EventSequence], b: &[EventSequence]) -> R<Dnf> {
        let mut out = Vec::new();
        if !b.is_empty() {
            for x in a {
                out.extend(self.pand_right(x, b)?);
            }
        }
        Ok(self.absorb(out))
    }

    pub(crate) fn sand_dnf(&mut self, a: &[EventSequence], b: &[EventSequence]) -> R<Dnf> {
        if a.is_empty() || b.is_empty() {
            return Ok(vec![]);
        }
        let ga = self.or_groups(a)?;
        let gb = self.or_groups(b)?;
        if ga.is_empty() || gb.is_empty() {
            // A≈B = (A∧B) ∧ ¬(A≺B) ∧ ¬(B≺A)
            let both = self.conj_dnf(a, b)?;
            let ab = self.pand_dnf(a, b)?;
            let ba = self.pand_dnf(b, a)?;
            let r = self.neg_dnf(&ab, both)?;
            return self.neg_dnf(&ba, r);
        }
        let mut out = Vec::new();
        for (ia, oa) in &ga {
            for (ib, ob) in &gb {
                let group: Vec<&EventSequence> = ia.iter().map(|&i| &a[i]).chain(ib.iter().map(|&i| &b[i])).collect();
                let mut terms = self.sand_fold(&group)?;
                for &k in oa {
                    terms = self.neg_ctx(&a[k], terms)?;
                }
                for &k in ob {
                    terms = self.neg_ctx(&b[k], terms)?;
                }
                out.extend(terms);
            }
        }
        Ok(self.absorb(out))
    }

    /// `¬t ∧ r` for a single sequence `t`.
    pub(crate) fn neg_ctx(&mut self, t: &EventSequence, r: Dnf) -> R<Dnf> {
        self.tick()?;
        if r.is_empty() || t.is_true() {
            return Ok(vec![]);
        }
        let e = t.pos();
        let mut out = Vec::new();
        // chain not complete: the events F of the chain have failed, the rest not
        for f in e.subsets().filter(|f| *f != e) {
            let af = Self::seqs(self.and_atoms(f)?, EventSet::EMPTY);
            for s in self.conj_dnf(&af, &r)? {
                out.extend(s.guarded(e.minus(f)));
            }
        }
        // all chain events failed, in an order the chain does not accept
        let ev: Vec<usize> = e.iter().collect();
        if ev.len() > MAX_REALIZATION_EVENTS {
            return Err(Stop::Budget);
        }
        for w in weak_orders(ev.len(), false).iter() {
            let occ = |i: usize| ev.binary_search(&i).map_or(0, |j| w[j]);
            if EventSequence::of_chain(t.chain.clone()).completes(occ).is_some() {
                continue;
            }
            let m = *w.iter().max().unwrap_or(&0);
            let chain: Vec<Item> = (1..=m)
                .map(|s| Item::Core((0..ev.len()).filter(|&j| w[j] == s).map(|j| ev[j]).collect()))
                .collect();
            out.extend(self.conj_dnf(&[EventSequence::of_chain(chain)], &r)?);
        }
        // chain complete, but a guard event failed no later than its last item
        if !t.negated.is_empty() {
            let (l, p) = t.chain.split_last().unwrap();
            let pseq = EventSequence::of_chain(p.to_vec());
            let lseq = EventSequence::of_chain(vec![*l]);
            for x in t.negated.iter() {
                let xa = EventSequence::atom(x);
                let mut cases = Vec::new();
                for a in self.conj_seq(&pseq, &xa)? {
                    cases.extend(self.pand_seq(&a, &lseq)?);
                }
                for q in self.sand_seq(&lseq, &xa)? {
                    cases.extend(self.pand_seq(&pseq, &q)?);
                }
                out.extend(self.conj_dnf(&cases, &r)?);
            }
        }
        Ok(self.absorb(out))
    }

    fn neg_dnf(&mut self, t: &[EventSequence], mut r: Dnf) -> R<Dnf> {
        let e = t.iter().fold(EventSet::EMPTY, |a, x| a.union(x.pos()).union(x.negated));
        if t.len() > 1 && e.len() <= COMBINED_NEGATION_EVENTS {
            return self.neg_combined(t, e, r);
        }
        for x in t {
            r = self.neg_ctx(x, r)?;
        }
        Ok(r)
    }

    /// `¬T ∧ r` from the states of the events `e` of `T`: which of them have
    /// failed, and in which order, when `r` completes.
    fn neg_combined(&mut self, t: &[EventSequence], e: EventSet, r: Dnf) -> R<Dnf> {
        let mut out = Vec::new();
        for f in e.subsets() {
            self.tick()?;
            let guard = e.minus(f);
            let states: Chains = if t.iter().all(|x| x.is_true() || !x.pos().is_subset(f)) {
                self.and_atoms(f)?
            } else {
                let ev: Vec<usize> = f.iter().collect();
                let mut cs = Vec::new();
                for w in weak_orders(ev.len(), false).iter() {
                    let occ = |i: usize| ev.binary_search(&i).map_or(0, |j| w[j]);
                    if t.iter().any(|x| x.completes(occ).is_some()) {
                        continue;
                    }
                    let m = *w.iter().max().unwrap_or(&0);
                    cs.push((1..=m).map(|s| Item::Core((0..ev.len()).filter(|&j| w[j] == s).map(|j| ev[j]).collect())).collect());
                }
                cs
            };
            for c in states {
                let a = EventSequence::of_chain(c);
                for s in &r {
                    if !guard.inter(s.pos()).is_empty() {
                        continue;
                    }
                    out.extend(self.conj_seq(&a, s)?.into_iter().filter_map(|x| x.guarded(guard)));
                }
            }
        }
        Ok(self.absorb(out))
    }

    /// Removes duplicates and sequences covered by another one.
    pub(crate) fn absorb(&self, v: Dnf) -> Dnf {
        absorb_seqs(v, self.strict)
    }

    fn prune(&self, v: Dnf) -> Dnf {
        v.into_iter()
            .filter(|s| self.cutoff.is_none_or(|c| s.rank() <= c) && !(self.strict && s.has_sand()))
            .collect()
    }

    // ---- expressions -------------------------------------------------------

    fn idx(&self, x: &str) -> usize {
        self.v.index(x).expect("vocabulary built from the expression")
    }

    pub(crate) fn translate(&mut self, e: &TemporalExpr, positive: bool) -> R<Dnf> {
        let outer = std::mem::replace(&mut self.pos_ctx, positive);
        let out = self.translate_node(e, positive);
        self.pos_ctx = outer;
        out
    }

    fn translate_node(&mut self, e: &TemporalExpr, positive: bool) -> R<Dnf> {
        use TemporalExpr as T;
        self.tick()?;
        let (law, out): (&'static str, Dnf) = match e {
            T::True => return Ok(vec![EventSequence::truth()]),
            T::False => return Ok(vec![]),
            T::Atom(x) => return Ok(vec![EventSequence::atom(self.idx(x))]),
            T::Not(_) => return Err(Stop::PureNegation(e.to_string())),
            T::Or(xs) => {
                let mut all = Vec::new();
                for x in xs {
                    all.extend(self.translate(x, positive)?);
                }
                let n = all.len();
                let out = self.absorb(all);
                (if out.len() < n { "absorption" } else { "disjunction" }, out)
            }
            T::And(xs) => {
                let (negs, pos): (Vec<&TemporalExpr>, Vec<&TemporalExpr>) = xs.iter().partition(|x| matches!(x, T::Not(_)));
                if pos.is_empty() {
                    return Err(Stop::PureNegation(e.to_string()));
                }
                let mut r = vec![EventSequence::truth()];
                for p in pos {
                    let tp = self.translate(p, positive)?;
                    r = self.conj_dnf(&r, &tp)?;
                    if positive {
                        r = self.prune(r);
                    }
                }
                for n in &negs {
                    let T::Not(inner) = n else { unreachable!() };
                    let ti = self.translate(inner, false)?;
                    r = self.neg_dnf(&ti, r)?;
                }
                (if negs.is_empty() { "completion" } else { "negation" }, r)
            }
            T::Pand(a, b) => {
                let ta = self.translate(a, positive)?;
                let tb = self.translate(b, positive)?;
                let law = match (ta.len() > 1, tb.len() > 1) {
                    (true, true) => "distributive-I+II",
                    (false, true) => "distributive-I",
                    (true, false) => "distributive-II",
                    _ => "pand",
                };
                (law, self.pand_dnf(&ta, &tb)?)
            }
            T::Sand(xs) => {
                let mut acc = self.translate(&xs[0], positive)?;
                let mut or = acc.len() > 1;
                for x in &xs[1..] {
                    let tx = self.translate(x, positive)?;
                    or |= tx.len() > 1;
                    acc = self.sand_dnf(&acc, &tx)?;
                }
                (if or { "distributive-sand-or" } else { "sand" }, acc)
            }
        };
        let out = if positive { self.prune(out) } else { out };
        if self.record {
            let after = if out.is_empty() {
                "false".to_string()
            } else {
                out.iter().map(|s| format!("[{}]", s.display(self.v))).collect::<Vec<_>>().join(" | ")
            };
            self.trace.push(TraceStep { law, before: e.to_string(), after });
        }
        Ok(out)
    }
}

pub(crate) fn sorted(mut v: Dnf) -> Dnf {
    v.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    v
}

/// Duplicate removal and single-sequence absorption.
pub(crate) fn absorb_seqs(v: Dnf, strict: bool) -> Dnf {
    let v = sorted(dedup(v));
    let n = v.len();
    let mut keep = vec![true; n];
    for i in 0..n {
        let pi = v[i].pos();
        let cands: Vec<usize> =
            (0..n).filter(|&j| j != i && keep[j] && v[j].pos().is_subset(pi) && v[j].negated.is_subset(pi.union(v[i].negated))).collect();
        if cands.is_empty() {
            continue;
        }
        let ri = Realizations::of(&v[i], strict);
        let Some(ri) = ri.as_ref() else { continue };
        for j in cands {
            if covers_with(&v[j], &v[i], Some(ri), strict) {
                // mutual coverage: keep the earlier one
                if j > i && covers(&v[i], &v[j], strict) {
                    continue;
                }
                keep[i] = false;
                break;
            }
        }
    }
    v.into_iter().zip(keep).filter_map(|(s, k)| k.then_some(s)).collect()
}

fn stop_to_error(s: Stop, eng: &mut Engine) -> RewriteError {
    match s {
        Stop::Budget => RewriteError::Budget { trace: eng.take_trace() },
        Stop::PureNegation(e) => RewriteError::PureNegation(e),
    }
}

/// Rewrites `e` into TDNF.
pub fn to_tdnf(e: &TemporalExpr, mode: RewriteMode, budget: usize) -> Result<(Tdnf, RewriteTrace), RewriteError> {
    to_tdnf_with(e, &RewriteOptions { mode, budget, ..Default::default() })
}

pub fn to_tdnf_with(e: &TemporalExpr, opt: &RewriteOptions) -> Result<(Tdnf, RewriteTrace), RewriteError> {
    let v = Arc::new(Vocab::of_expr(e)?);
    to_tdnf_in(e, v, opt)
}

/// As [`to_tdnf_with`], over a given vocabulary (which must contain every event of `e`).
pub fn to_tdnf_in(e: &TemporalExpr, v: Arc<Vocab>, opt: &RewriteOptions) -> Result<(Tdnf, RewriteTrace), RewriteError> {
    let mut eng = Engine::new(&v, opt);
    let c = e.canonicalize();
    let out = match eng.translate(&c, true) {
        Ok(d) => d,
        Err(s) => return Err(stop_to_error(s, &mut eng)),
    };
    let out = sorted(eng.absorb(out));
    let trace = eng.take_trace();
    let mut t = Tdnf::new(v.clone(), out);
    t.minimal = true;
    Ok((t, trace))
}

fn normal_expr(e: &TemporalExpr, opt: &RewriteOptions) -> Result<TemporalExpr, RewriteError> {
    Ok(to_tdnf_with(e, opt)?.0.to_expr().canonicalize())
}

fn full_exact() -> RewriteOptions {
    RewriteOptions { mode: RewriteMode::Full, record_trace: false, ..Default::default() }
}

fn extended_exact() -> RewriteOptions {
    RewriteOptions { record_trace: false, ..Default::default() }
}

/// `a ∧ b = (a≺b) ∨ (a≈b) ∨ (b≺a)`, expanded to TDNF.
pub fn complete_and(a: &TemporalExpr, b: &TemporalExpr) -> Result<TemporalExpr, LawError> {
    if matches!(a, TemporalExpr::Not(_)) || matches!(b, TemporalExpr::Not(_)) {
        return Err(LawError::NegatedOperand);
    }
    Ok(normal_expr(&TemporalExpr::and(vec![a.clone(), b.clone()]), &full_exact())?)
}

fn chain_items(e: &TemporalExpr, v: &Vocab) -> Option<Vec<Item>> {
    let atom = |x: &TemporalExpr| match x {
        TemporalExpr::Atom(a) => v.index(a),
        _ => None,
    };
    e.pand_items()
        .into_iter()
        .map(|it| match it {
            TemporalExpr::Atom(_) => atom(it).map(|i| Item::Core(EventSet::single(i))),
            TemporalExpr::Sand(xs) => xs.iter().map(atom).collect::<Option<EventSet>>().map(Item::Core),
            TemporalExpr::And(xs) => xs.iter().map(atom).collect::<Option<EventSet>>().map(Item::and_of),
            _ => None,
        })
        .collect()
}

/// Laws of contradiction on a PAND chain of core items.
pub fn contradiction(e: &TemporalExpr) -> Result<TemporalExpr, LawError> {
    let v = Vocab::of_expr(e).map_err(RewriteError::from)?;
    let items = chain_items(e, &v).ok_or_else(|| LawError::NotAChain(e.to_string()))?;
    let mut chain = Vec::new();
    for it in items {
        match append(&chain, it) {
            Some(c) => chain = c,
            None => return Ok(TemporalExpr::False),
        }
    }
    Ok(EventSequence::of_chain(chain).to_expr(&v))
}

/// `A≺(B≺C) = (A∧B)≺C`.
pub fn pand_assoc(e: &TemporalExpr) -> TemporalExpr {
    if let TemporalExpr::Pand(a, b) = e {
        if let TemporalExpr::Pand(b1, c) = b.as_ref() {
            if contradiction(b) == Ok(TemporalExpr::False) {
                return TemporalExpr::False;
            }
            return TemporalExpr::pand(TemporalExpr::and(vec![(**a).clone(), (**b1).clone()]), (**c).clone()).canonicalize();
        }
    }
    e.clone()
}

/// `A≈(B≺C) = B≺(A≈C)`, followed by constant folding and SAND idempotency.
pub fn sand_over_pand(e: &TemporalExpr) -> TemporalExpr {
    if let TemporalExpr::Sand(xs) = e {
        if let Some(k) = xs.iter().position(|x| matches!(x, TemporalExpr::Pand(..))) {
            let TemporalExpr::Pand(b, c) = &xs[k] else { unreachable!() };
            let mut rest: Vec<TemporalExpr> = xs.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, x)| x.clone()).collect();
            rest.push((**c).clone());
            let rest = dedup(rest);
            return const_fold(&TemporalExpr::pand((**b).clone(), TemporalExpr::sand(rest))).canonicalize();
        }
    }
    e.clone()
}

/// Type I: `a≺(b∨c∨…)`.
pub fn distribute_pand_right(a: &TemporalExpr, bs: &[TemporalExpr]) -> Result<TemporalExpr, LawError> {
    let e = TemporalExpr::pand(a.clone(), TemporalExpr::or(bs.to_vec()));
    Ok(normal_expr(&e, &full_exact())?)
}

/// Type II: `(a∨b∨…)≺c = (a≺c)∨(b≺c)∨…`.
pub fn distribute_pand_left(as_: &[TemporalExpr], c: &TemporalExpr) -> Result<TemporalExpr, LawError> {
    let e = TemporalExpr::pand(TemporalExpr::or(as_.to_vec()), c.clone());
    Ok(normal_expr(&e, &full_exact())?)
}

/// `a≈(b∨c∨…)`.
pub fn distribute_sand_or(a: &TemporalExpr, bs: &[TemporalExpr]) -> Result<TemporalExpr, LawError> {
    let e = TemporalExpr::sand(vec![a.clone(), TemporalExpr::or(bs.to_vec())]);
    Ok(normal_expr(&e, &full_exact())?)
}

/// Expands `¬inner ∧ c`.
pub fn negate_in_context(inner: &TemporalExpr, c: &TemporalExpr) -> Result<TemporalExpr, LawError> {
    use TemporalExpr as T;
    let and = |xs: Vec<T>| T::and(xs);
    let out = match inner {
        T::True => T::False,
        T::False => c.clone(),
        T::Atom(_) => and(vec![T::not(inner.clone()), c.clone()]),
        T::Not(x) => and(vec![(**x).clone(), c.clone()]),
        T::Or(xs) => and(xs.iter().map(|x| T::not(x.clone())).chain([c.clone()]).collect()),
        T::And(xs) => T::or(xs.iter().map(|x| and(vec![T::not(x.clone()), c.clone()])).collect()),
        T::Pand(..) | T::Sand(_) => {
            let (t, _) = to_tdnf_with(inner, &full_exact())?;
            match t.sequences.as_slice() {
                [] => c.clone(),
                [s] => negated_sequence_terms(s, &t.vocab, c),
                _ => normal_expr(&and(vec![T::not(inner.clone()), c.clone()]), &extended_exact())?,
            }
        }
    };
    Ok(out.canonicalize())
}

fn negated_sequence_terms(t: &EventSequence, v: &Vocab, c: &TemporalExpr) -> TemporalExpr {
    use TemporalExpr as T;
    let atom = |i: usize| T::atom(v.name(i));
    let item = |it: &Item| EventSequence::of_chain(vec![*it]).to_expr(v);
    let mut terms = Vec::new();
    let e = t.pos();
    for f in e.subsets().filter(|f| *f != e) {
        let mut parts: Vec<T> = e.minus(f).iter().map(|i| T::not(atom(i))).collect();
        parts.extend(f.iter().map(atom));
        parts.push(c.clone());
        terms.push(T::and(parts));
    }
    let ev: Vec<usize> = e.iter().collect();
    for w in weak_orders(ev.len(), false).iter() {
        let occ = |i: usize| ev.binary_search(&i).map_or(0, |j| w[j]);
        if EventSequence::of_chain(t.chain.clone()).completes(occ).is_some() {
            continue;
        }
        let m = *w.iter().max().unwrap_or(&0);
        let groups = (1..=m).map(|s| T::sand((0..ev.len()).filter(|&j| w[j] == s).map(|j| atom(ev[j])).collect())).collect();
        terms.push(T::and(vec![T::pand_chain(groups), c.clone()]));
    }
    if let Some((l, p)) = t.chain.split_last() {
        let pexpr = EventSequence::of_chain(p.to_vec()).to_expr(v);
        for x in t.negated.iter() {
            let before = if p.is_empty() { atom(x) } else { T::and(vec![pexpr.clone(), atom(x)]) };
            terms.push(T::and(vec![T::pand(before, item(l)), c.clone()]));
            let tie = T::sand(vec![item(l), atom(x)]);
            let tie = if p.is_empty() { tie } else { T::pand(pexpr.clone(), tie) };
            terms.push(T::and(vec![tie, c.clone()]));
        }
    }
    T::or(terms)
}

/// `¬N ∧ e` with the negated events moved to the sequences of `e`.
pub fn push_negated(neg: &BTreeSet<EventId>, e: &TemporalExpr) -> Result<TemporalExpr, LawError> {
    let mut parts: Vec<TemporalExpr> = neg.iter().map(|x| TemporalExpr::not(TemporalExpr::atom(x.clone()))).collect();
    parts.push(e.clone());
    Ok(normal_expr(&TemporalExpr::and(parts), &extended_exact())?)
}

/// Rules for `True` and `False`, bottom-up.
pub fn const_fold(e: &TemporalExpr) -> TemporalExpr {
    use TemporalExpr as T;
    match e {
        T::True | T::False | T::Atom(_) => e.clone(),
        T::Not(x) => match const_fold(x) {
            T::True => T::False,
            T::False => T::True,
            y => T::not(y),
        },
        T::And(xs) => {
            let ys: Vec<T> = xs.iter().map(const_fold).filter(|y| *y != T::True).collect();
            if ys.contains(&T::False) {
                T::False
            } else {
                T::and(ys)
            }
        }
        T::Or(xs) => {
            let ys: Vec<T> = xs.iter().map(const_fold).filter(|y| *y != T::False).collect();
            if ys.contains(&T::True) {
                T::True
            } else {
                T::or(ys)
            }
        }
        T::Pand(a, b) => match (const_fold(a), const_fold(b)) {
            (_, T::True) | (_, T::False) | (T::False, _) => T::False,
            (T::True, y) => y,
            (x, y) => T::pand(x, y),
        },
        T::Sand(xs) => {
            let ys: Vec<T> = xs.iter().map(const_fold).collect();
            if ys.contains(&T::False) {
                T::False
            } else if ys.iter().all(|y| *y == T::True) {
                T::True
            } else if ys.contains(&T::True) {
                T::False
            } else {
                T::sand(ys)
            }
        }
    }
}

/// Laws of absorption on a TDNF.
pub fn absorb(t: &Tdnf) -> Tdnf {
    let mut out = Tdnf::new(t.vocab.clone(), absorb_seqs(t.sequences.clone(), false));
    out.minimal = true;
    out.disjoint = t.disjoint;
    out
}

/// Completes a trailing extended core event: `s ≺ (B∧C)` becomes
/// `[(s∧B)≺C] ∨ [(s∧C)≺B] ∨ [s≺(B≈C)]`.
pub fn split_trailing_ext(s: &EventSequence, v: &Vocab) -> Vec<EventSequence> {
    match s.chain.last() {
        Some(Item::Ext(_)) => split_ext_at(s, s.chain.len() - 1, v),
        _ => vec![s.clone()],
    }
}

/// Completes the extended core event at position `k` (Extended mode).
pub(crate) fn split_ext_at(s: &EventSequence, k: usize, v: &Vocab) -> Vec<EventSequence> {
    let Item::Ext(set) = s.chain[k] else {
        return vec![s.clone()];
    };
    let opt = RewriteOptions { budget: usize::MAX, record_trace: false, ..Default::default() };
    let mut eng = Engine::new(v, &opt);
    let (prefix, suffix) = (&s.chain[..k], &s.chain[k + 1..]);
    let mut out = Vec::new();
    for l in set.subsets().filter(|l| !l.is_empty()) {
        let rest = set.minus(l);
        let pres = if rest.is_empty() {
            vec![prefix.to_vec()]
        } else {
            eng.conj_chain(prefix, &[Item::and_of(rest)]).unwrap_or_default()
        };
        'p: for p in pres {
            let Some(mut c) = append(&p, Item::Core(l)) else { continue };
            for it in suffix {
                match append(&c, *it) {
                    Some(n) => c = n,
                    None => continue 'p,
                }
            }
            out.extend(EventSequence::of_chain(c).guarded(s.negated));
        }
    }
    out
}
