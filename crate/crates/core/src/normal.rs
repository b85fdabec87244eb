//! Minimal cut sequence sets, disjoint forms and order counting.

use std::sync::Arc;

use thiserror::Error;

use crate::laws::{absorb_seqs, split_ext_at, sorted, Dnf, Engine, RewriteMode, RewriteOptions, Stop, DEFAULT_BUDGET};
use crate::seq::{covers, weak_orders, EventSequence, EventSet, GuardReading, Item, Realizations, Tdnf, MAX_REALIZATION_EVENTS};
use crate::seqtree::SeqTree;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NormalError {
    #[error("operation budget of {0} exceeded")]
    Budget(usize),
    #[error("`{0}` contains simultaneous failures")]
    Sand(String),
    #[error("`{0}` has too many events to enumerate")]
    TooLarge(String),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MinimizeOptions {
    /// Ignore sequences with simultaneous failures.
    pub drop_sand: bool,
    /// Keep sequences with at most this many events.
    pub rank_cutoff: Option<usize>,
    /// Read each sequence with every event outside it intact, which satisfies
    /// all guards. Only meaningful for negation-free models.
    pub drop_guards: bool,
}

/// `b` is redundant next to `a`.
pub fn is_subsumed(a: &EventSequence, b: &EventSequence) -> bool {
    covers(a, b, false)
}

/// Reduces a TDNF to its minimal cut sequence set.
///
/// Besides single-sequence absorption, an extended sequence is dropped when
/// the sequences kept so far jointly cover all its orderings, and completed
/// (split on its last extended core event) when they cover only some.
pub fn minimize(t: &Tdnf, opt: &MinimizeOptions) -> Tdnf {
    let strict = opt.drop_sand;
    let keep = |s: &EventSequence| opt.rank_cutoff.is_none_or(|c| s.rank() <= c) && !(strict && s.has_sand());
    let input = t.sequences.iter().filter(|s| keep(s)).cloned().map(|mut s| {
        if opt.drop_guards {
            s.negated = EventSet::EMPTY;
        }
        s
    });
    let input = sorted(absorb_seqs(input.collect(), strict));
    let mut kept: Vec<EventSequence> = Vec::new();
    for b in input {
        push_minimal(&mut kept, b, &t.vocab, strict, &keep);
    }
    // sequences added later may jointly cover an earlier extended one
    let mut i = 0;
    while i < kept.len() {
        if kept[i].has_ext() {
            let others: Vec<EventSequence> = kept.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, s)| s.clone()).collect();
            if union_coverage(&others, &kept[i], strict) == Some(Coverage::All) {
                kept.remove(i);
                continue;
            }
        }
        i += 1;
    }
    kept.sort_by(|a, b| a.report_key().cmp(&b.report_key()));
    Tdnf { vocab: t.vocab.clone(), sequences: kept, minimal: true, disjoint: false, guards: t.guards }
}

/// Minimal cut sequences of `exact`, written in the shapes of `wide`.
///
/// `wide` must hold wherever `exact` holds; the union form of the OR laws
/// gives such a TDNF with fewer, longer extended sequences. Each minimal
/// sequence of `wide` is kept where all its orderings are cut sequences of
/// `exact`, split where only some are, and dropped otherwise. Whatever
/// `exact` still needs is added back before a last minimization.
pub fn minimize_shaped(exact: &Tdnf, wide: &Tdnf, opt: &MinimizeOptions) -> Tdnf {
    let base = minimize(exact, opt);
    let strict = opt.drop_sand;
    let mut out = Vec::new();
    for s in minimize(wide, opt).sequences {
        keep_valid(&base.sequences, s, &mut out, &exact.vocab, strict);
    }
    for m in &base.sequences {
        if union_coverage(&out, m, strict) != Some(Coverage::All) {
            out.push(m.clone());
        }
    }
    minimize(&Tdnf::new(exact.vocab.clone(), out), opt)
}

fn keep_valid(base: &[EventSequence], s: EventSequence, out: &mut Vec<EventSequence>, v: &crate::seq::Vocab, strict: bool) {
    let Some(r) = Realizations::of(&s, strict) else { return };
    let ok = (0..r.len()).filter(|&i| base.iter().any(|m| r.satisfies(i, m))).count();
    if ok == r.len() {
        out.push(s);
    } else if ok > 0 {
        if let Some(k) = s.chain.iter().rposition(|i| matches!(i, Item::Ext(_))) {
            for piece in split_ext_at(&s, k, v) {
                if !(strict && piece.has_sand()) {
                    keep_valid(base, piece, out, v, strict);
                }
            }
        }
    }
}

#[derive(Debug, PartialEq, Eq)]
enum Coverage {
    None,
    Some,
    All,
}

fn union_coverage(kept: &[EventSequence], b: &EventSequence, strict: bool) -> Option<Coverage> {
    let pb = b.pos();
    let cands: Vec<&EventSequence> =
        kept.iter().filter(|k| k.pos().is_subset(pb) && k.negated.is_subset(pb.union(b.negated))).collect();
    if cands.is_empty() {
        return Some(Coverage::None);
    }
    let r = Realizations::of(b, strict)?;
    let n = (0..r.len()).filter(|&i| cands.iter().any(|k| r.satisfies(i, k))).count();
    Some(match n {
        0 => Coverage::None,
        n if n == r.len() => Coverage::All,
        _ => Coverage::Some,
    })
}

fn push_minimal(
    kept: &mut Vec<EventSequence>,
    b: EventSequence,
    v: &crate::seq::Vocab,
    strict: bool,
    keep: &dyn Fn(&EventSequence) -> bool,
) {
    if kept.iter().any(|k| covers(k, &b, strict)) {
        return;
    }
    if b.has_ext() {
        match union_coverage(kept, &b, strict) {
            Some(Coverage::All) => return,
            Some(Coverage::Some) => {
                let k = b.chain.iter().rposition(|i| matches!(i, Item::Ext(_))).unwrap();
                for piece in sorted(split_ext_at(&b, k, v)) {
                    if keep(&piece) {
                        push_minimal(kept, piece, v, strict, keep);
                    }
                }
                return;
            }
            _ => {}
        }
    }
    kept.retain(|k| !covers(&b, k, strict));
    kept.push(b);
}

/// `rank=<n> sand=<0|1> <sequence>` per sequence.
pub fn mcss_lines(t: &Tdnf) -> Vec<String> {
    t.sequences
        .iter()
        .map(|s| format!("rank={} sand={} {}", s.rank(), s.has_sand() as u8, s.display(&t.vocab)))
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DisjointMethod {
    /// `E_j ∧ ¬E_1 ∧ … ∧ ¬E_{j-1}`, compact, with guards read as "not failed yet".
    #[default]
    Sequential,
    /// Every sequence completed over the universe; exact under both guard readings.
    Minterm,
}

/// Rewrites a cut sequence set into pairwise exclusive sequences.
pub fn disjointify(m: &Tdnf, universe: EventSet, method: DisjointMethod) -> Result<Tdnf, NormalError> {
    disjointify_with_budget(m, universe, method, DEFAULT_BUDGET)
}

pub fn disjointify_with_budget(m: &Tdnf, universe: EventSet, method: DisjointMethod, budget: usize) -> Result<Tdnf, NormalError> {
    let out = match method {
        DisjointMethod::Sequential => sequential(m, budget),
        DisjointMethod::Minterm => minterm(m, universe, budget),
    }
    .map_err(|_| NormalError::Budget(budget))?;
    let guards = match method {
        DisjointMethod::Sequential => GuardReading::State,
        DisjointMethod::Minterm => GuardReading::Latched,
    };
    Ok(Tdnf { vocab: m.vocab.clone(), sequences: out, minimal: false, disjoint: true, guards })
}

fn engine_opts(mode: RewriteMode, budget: usize) -> RewriteOptions {
    RewriteOptions { mode, budget, record_trace: false, ..Default::default() }
}

fn sequential(m: &Tdnf, budget: usize) -> Result<Dnf, Stop> {
    let opt = engine_opts(RewriteMode::Extended, budget);
    let mut eng = Engine::new(&m.vocab, &opt);
    let mut state = Vec::new();
    for s in &m.sequences {
        state.extend(latched_to_state(&mut eng, s)?);
    }
    state.sort_by(|a, b| (a.rank(), a.chain.len(), a.sort_key()).cmp(&(b.rank(), b.chain.len(), b.sort_key())));
    let mut out = Vec::new();
    for j in 0..state.len() {
        let mut r = vec![state[j].clone()];
        for i in 0..j {
            r = st_neg(&mut eng, &state[i], r)?;
            if r.is_empty() {
                break;
            }
        }
        out.extend(r);
    }
    Ok(out)
}

/// A latched guard `¬X ∧ c` holds when `X` is still intact, or failed after `c` completed.
fn latched_to_state(eng: &mut Engine, s: &EventSequence) -> Result<Dnf, Stop> {
    let n = s.negated;
    if n.is_empty() {
        return Ok(vec![s.clone()]);
    }
    let mut out = Vec::new();
    for g in n.subsets() {
        let ev: Vec<usize> = g.iter().collect();
        for w in weak_orders(ev.len(), false).iter() {
            eng.tick()?;
            let m = *w.iter().max().unwrap_or(&0);
            let mut chain = s.chain.clone();
            chain.extend((1..=m).map(|k| Item::Core((0..ev.len()).filter(|&j| w[j] == k).map(|j| ev[j]).collect())));
            out.extend(EventSequence::of_chain(chain).guarded(n.minus(g)));
        }
    }
    Ok(out)
}

/// AND under state guards: chains merged, guards united.
fn st_conj(eng: &mut Engine, a: &EventSequence, b: &EventSequence) -> Result<Dnf, Stop> {
    let g = a.negated.union(b.negated);
    if !g.inter(a.pos().union(b.pos())).is_empty() {
        return Ok(vec![]);
    }
    Ok(eng.conj_chain(&a.chain, &b.chain)?.into_iter().filter_map(|c| EventSequence::of_chain(c).guarded(g)).collect())
}

/// `¬t ∧ r` under state guards, as exclusive pieces.
fn st_neg(eng: &mut Engine, t: &EventSequence, r: Dnf) -> Result<Dnf, Stop> {
    let e = t.pos();
    let mut out = Vec::new();
    for f in e.subsets().filter(|f| *f != e) {
        for c in eng.and_atoms(f)? {
            let a = EventSequence::of_chain(c);
            for s in &r {
                out.extend(st_conj(eng, &a, s)?.into_iter().filter_map(|x| x.guarded(e.minus(f))));
            }
        }
    }
    let ev: Vec<usize> = e.iter().collect();
    if ev.len() > MAX_REALIZATION_EVENTS {
        return Err(Stop::Budget);
    }
    let chain_only = EventSequence::of_chain(t.chain.clone());
    for w in weak_orders(ev.len(), false).iter() {
        let occ = |i: usize| ev.binary_search(&i).map_or(0, |j| w[j]);
        if chain_only.completes(occ).is_some() {
            continue;
        }
        let m = *w.iter().max().unwrap_or(&0);
        let a = EventSequence::of_chain(
            (1..=m).map(|s| Item::Core((0..ev.len()).filter(|&j| w[j] == s).map(|j| ev[j]).collect())).collect(),
        );
        for s in &r {
            out.extend(st_conj(eng, &a, s)?);
        }
    }
    let mut earlier = EventSet::EMPTY;
    for x in t.negated.iter() {
        for a in st_conj(eng, &chain_only, &EventSequence::atom(x))? {
            let Some(a) = a.guarded(earlier) else { continue };
            for s in &r {
                out.extend(st_conj(eng, &a, s)?);
            }
        }
        earlier = earlier.union(EventSet::single(x));
    }
    Ok(out)
}

fn minterm(m: &Tdnf, universe: EventSet, budget: usize) -> Result<Dnf, Stop> {
    let opt = engine_opts(RewriteMode::Full, budget);
    let mut eng = Engine::new(&m.vocab, &opt);
    let mut out = Vec::new();
    for s in &m.sequences {
        let mut cur = eng.translate(&s.to_expr(&m.vocab), true)?;
        for x in universe.iter() {
            let mut next = Vec::new();
            for s in cur {
                if s.pos().contains(x) || s.negated.contains(x) {
                    next.push(s);
                    continue;
                }
                next.extend(s.clone().guarded(EventSet::single(x)));
                next.extend(eng.conj_seq(&s, &EventSequence::atom(x))?);
            }
            cur = next;
        }
        out.extend(cur);
    }
    Ok(absorb_seqs(out, false))
}

/// Number of total orders of the sequence's events that realize it.
pub fn coverage(s: &EventSequence) -> Result<u64, NormalError> {
    let mut before = 0u64;
    let mut total = 1u64;
    for it in &s.chain {
        match *it {
            Item::Core(c) if c.len() > 1 => return Err(NormalError::Sand(format!("{:?}", s.chain))),
            Item::Core(_) => before += 1,
            Item::Ext(c) => {
                let r = c.len() as u64;
                // the last of the r events comes after the previous items
                total *= binomial(before + r - 1, r - 1) * factorial(r);
                before += r;
            }
        }
    }
    Ok(total)
}

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

fn factorial(n: u64) -> u64 {
    (1..=n).product()
}

/// The strict orderings of an extended sequence as plain chains.
pub fn expand_extended(s: &EventSequence) -> Result<Vec<EventSequence>, NormalError> {
    let ev: Vec<usize> = s.pos().iter().collect();
    if ev.len() > MAX_REALIZATION_EVENTS {
        return Err(NormalError::TooLarge(format!("{:?}", s.chain)));
    }
    let mut out = Vec::new();
    for w in weak_orders(ev.len(), true).iter() {
        if s.completes(|i| ev.binary_search(&i).map_or(0, |j| w[j])).is_none() {
            continue;
        }
        let mut chain: Vec<(u8, usize)> = ev.iter().enumerate().map(|(j, &i)| (w[j], i)).collect();
        chain.sort();
        let chain = chain.into_iter().map(|(_, i)| Item::Core(EventSet::single(i))).collect();
        out.extend(EventSequence::of_chain(chain).guarded(s.negated));
    }
    Ok(out)
}

/// Failure nodes of a TDNF when guards mean "not failed at the node".
pub fn state_failure_set(t: &Tdnf, tree: &SeqTree) -> Vec<bool> {
    let map: Vec<Option<usize>> =
        (0..t.vocab.len()).map(|i| tree.events.binary_search(&t.vocab.name(i).to_string()).ok()).collect();
    tree.nodes
        .iter()
        .map(|nd| {
            let occ = |i: usize| map[i].map_or(0, |j| nd.k[j]);
            t.sequences.iter().any(|s| {
                EventSequence::of_chain(s.chain.clone()).completes(occ).is_some() && s.negated.iter().all(|x| occ(x) == 0)
            })
        })
        .collect()
}

/// Pieces of a TDNF, each as its own single-sequence TDNF.
pub fn pieces(t: &Tdnf) -> Vec<Tdnf> {
    t.sequences.iter().map(|s| Tdnf::new(Arc::clone(&t.vocab), vec![s.clone()])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laws::{to_tdnf_with, NegationPolicy};
    use crate::parser::parse_expr;
    use crate::seqtree::{build_tree, classify, equivalent, failure_set_direct};
    use proptest::prelude::*;

    fn tdnf(s: &str, opt: &RewriteOptions) -> Tdnf {
        to_tdnf_with(&parse_expr(s).unwrap(), opt).unwrap().0
    }

    fn ext() -> RewriteOptions {
        RewriteOptions { record_trace: false, ..Default::default() }
    }

    #[test]
    fn redundant_mcss_and_disjoint() {
        let t = tdnf("(A | E) & (B | E | U < A)", &ext());
        let m = minimize(&t, &MinimizeOptions::default());
        assert_eq!(mcss_lines(&m), ["rank=1 sand=0 E", "rank=2 sand=0 U < A", "rank=2 sand=0 A & B"]);
        let d = disjointify(&m, m.vocab.all(), DisjointMethod::Sequential).unwrap();
        let got: Vec<String> = d.lines();
        assert_eq!(got, ["E", "A & B & !E", "!B & !E & U < A"]);
    }

    #[test]
    fn union_cover_drops_extended() {
        let v = Arc::new(crate::seq::Vocab::new(["A", "B", "C", "X"].map(String::from)).unwrap());
        let mk = |xs: &[&str]| {
            let seqs = xs.iter().map(|e| EventSequence::from_expr(&parse_expr(e).unwrap(), &v).unwrap()).collect();
            Tdnf::new(v.clone(), seqs)
        };
        let strict = MinimizeOptions { drop_sand: true, ..Default::default() };
        // the two orders jointly cover every strict ordering of C < (A & B)
        let m = minimize(&mk(&["A < B", "B < A", "C < (A & B)"]), &strict);
        assert_eq!(mcss_lines(&m), ["rank=2 sand=0 A < B", "rank=2 sand=0 B < A"]);
        let m = minimize(&mk(&["A < B", "B < A", "C < (A & B)"]), &MinimizeOptions::default());
        assert_eq!(m.len(), 3);
        // a partial cover completes the extended event
        let m = minimize(&mk(&["B < C", "X < (B & C)"]), &strict);
        assert_eq!(mcss_lines(&m), ["rank=2 sand=0 B < C", "rank=3 sand=0 (C & X) < B"]);
    }

    #[test]
    fn minterm_matches_oracle_nodes() {
        for (e, n) in [("B", 11), ("(A | B) < C", 7)] {
            let ex = parse_expr(e).unwrap();
            let names = ["A", "B", "C"].map(String::from);
            let v = Arc::new(crate::seq::Vocab::new(names.clone()).unwrap());
            let (t, _) = crate::laws::to_tdnf_in(&ex, v.clone(), &ext()).unwrap();
            let d = disjointify(&t, v.all(), DisjointMethod::Minterm).unwrap();
            assert_eq!(d.len(), n, "{e}: {d}");
            let tree = build_tree(&names, true).unwrap();
            let c = classify(&ex, &tree).unwrap();
            let mut want: Vec<String> = c.minimal_nodes().iter().map(|&i| tree.node_label(i)).collect();
            let mut got = d.lines();
            want.sort();
            got.sort();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn coverage_counts() {
        let v = crate::seq::Vocab::new(["A", "B", "C", "D"].map(String::from)).unwrap();
        let s = |e: &str| EventSequence::from_expr(&parse_expr(e).unwrap(), &v).unwrap();
        for (e, n) in [("A < B", 1), ("A < (B & C)", 4), ("A & B & C", 6), ("(A & B) < C", 2), ("A < (B & C) < D", 4), ("D < (A & B & C)", 18)] {
            assert_eq!(coverage(&s(e)).unwrap(), n, "{e}");
            assert_eq!(expand_extended(&s(e)).unwrap().len() as u64, n, "{e}");
        }
        assert!(coverage(&s("A = B")).is_err());
    }

    fn monotone_expr() -> impl Strategy<Value = crate::expr::TemporalExpr> {
        use crate::expr::TemporalExpr as T;
        let leaf = prop_oneof![Just(T::atom("A")), Just(T::atom("B")), Just(T::atom("C")), Just(T::atom("D"))];
        leaf.prop_recursive(3, 10, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| T::and(vec![a, b])),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| T::or(vec![a, b])),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| T::pand(a, b)),
                (inner.clone(), inner).prop_map(|(a, b)| T::sand(vec![a, b])),
            ]
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn minimize_keeps_semantics(e in monotone_expr(), full in any::<bool>()) {
            let mode = if full { RewriteMode::Full } else { RewriteMode::Extended };
            let opt = RewriteOptions { mode, record_trace: false, ..Default::default() };
            let t = tdnf(&e.to_string(), &opt);
            let m = minimize(&t, &MinimizeOptions::default());
            prop_assert!(equivalent(&m.to_expr(), &e).unwrap());
            for (i, a) in m.sequences.iter().enumerate() {
                for (j, b) in m.sequences.iter().enumerate() {
                    prop_assert!(i == j || !is_subsumed(a, b));
                }
            }
        }

        #[test]
        fn disjoint_forms(e in monotone_expr(), cons in any::<bool>()) {
            let negation = if cons { NegationPolicy::Conservative } else { NegationPolicy::Exact };
            let opt = RewriteOptions { negation, record_trace: false, ..Default::default() };
            let names: Vec<String> = ["A", "B", "C", "D"].map(String::from).to_vec();
            let v = Arc::new(crate::seq::Vocab::new(names.clone()).unwrap());
            let (t, _) = crate::laws::to_tdnf_in(&e, v.clone(), &opt).unwrap();
            let m = minimize(&t, &MinimizeOptions::default());
            let tree = build_tree(&names, true).unwrap();
            let want = failure_set_direct(&m.to_expr(), &tree).unwrap();

            let d = disjointify(&m, v.all(), DisjointMethod::Minterm).unwrap();
            prop_assert_eq!(&failure_set_direct(&d.to_expr(), &tree).unwrap(), &want);
            for (i, a) in pieces(&d).iter().enumerate() {
                for b in pieces(&d).iter().skip(i + 1) {
                    prop_assert!(crate::seqtree::oracle_disjoint(&a.to_expr(), &b.to_expr()).unwrap());
                }
            }

            let s = disjointify(&m, v.all(), DisjointMethod::Sequential).unwrap();
            prop_assert_eq!(&state_failure_set(&s, &tree), &want);
            let ps = pieces(&s);
            for (i, a) in ps.iter().enumerate() {
                let fa = state_failure_set(a, &tree);
                for b in ps.iter().skip(i + 1) {
                    let fb = state_failure_set(b, &tree);
                    prop_assert!(!fa.iter().zip(&fb).any(|(x, y)| *x && *y), "{} / {}", a, b);
                }
            }
        }
    }
}
