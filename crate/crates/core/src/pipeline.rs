//! The analysis steps on a parsed model, as used by the command line.

use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use crate::expr::{FaultTree, TemporalExpr};
use crate::laws::{to_tdnf_in, NegationPolicy, RewriteError, RewriteMode, RewriteOptions, RewriteTrace, DEFAULT_BUDGET};
use crate::normal::{
    disjointify_with_budget, minimize, minimize_shaped, state_failure_set, DisjointMethod, MinimizeOptions, NormalError,
};
use crate::oracles::{markov_series, monte_carlo, McConfig, McEstimate, RefError};
use crate::parser::{parse_model, AnalysisConfig, ParseError};
use crate::quantify::{lambda_of, rates_of, top_series, Method, QuantError, QuantSeries, TimeGrid, TopResult};
use crate::seq::{Realizations, SeqError, Tdnf, Vocab};
use crate::seqtree::{build_tree, failure_set_direct, Classification, OracleError};

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
    #[error(transparent)]
    Normal(#[from] NormalError),
    #[error(transparent)]
    Quant(#[from] QuantError),
    #[error(transparent)]
    Reference(#[from] RefError),
    #[error(transparent)]
    Tree(#[from] OracleError),
    #[error(transparent)]
    Seq(#[from] SeqError),
}

impl Error {
    /// 2 unreadable or malformed input, 3 invalid model, 4 budget or size cap.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            Error::Parse(e) => e.exit_code(),
            Error::Rewrite(RewriteError::Budget { .. }) | Error::Normal(_) | Error::Seq(SeqError::TooManyEvents(_)) => 4,
            Error::Reference(RefError::Tree(OracleError::TooManyEvents { .. }) | RefError::Unstable(_)) => 4,
            Error::Tree(OracleError::TooManyEvents { .. }) => 4,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// A parsed model with its TOP failure function.
#[derive(Clone, Debug)]
pub struct Model {
    pub tree: FaultTree,
    pub config: AnalysisConfig,
    pub expr: TemporalExpr,
    pub vocab: Arc<Vocab>,
}

impl Model {
    pub fn parse(text: &str) -> Result<Model> {
        let (tree, config) = parse_model(text)?;
        let expr = crate::expr::expr_from_tree(&tree).map_err(ParseError::from)?;
        let vocab = Arc::new(Vocab::of_expr(&expr)?);
        Ok(Model { tree, config, expr, vocab })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Model> {
        let p = path.as_ref();
        let text = std::fs::read_to_string(p).map_err(|source| Error::Io { path: p.display().to_string(), source })?;
        Model::parse(&text)
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        Ok(TimeGrid::new(self.config.mission_time, self.config.grid_points)?)
    }

    pub fn rates(&self) -> Result<Vec<f64>> {
        Ok(rates_of(&self.tree, &self.vocab)?)
    }

    /// No NOT gate anywhere: every event can be read as intact unless listed.
    pub fn negation_free(&self) -> bool {
        fn free(e: &TemporalExpr) -> bool {
            match e {
                TemporalExpr::Not(_) => false,
                TemporalExpr::And(xs) | TemporalExpr::Or(xs) | TemporalExpr::Sand(xs) => xs.iter().all(free),
                TemporalExpr::Pand(a, b) => free(a) && free(b),
                _ => true,
            }
        }
        free(&self.expr)
    }
}

/// Settings shared by the qualitative steps.
#[derive(Clone, Debug)]
pub struct Settings {
    pub rank_cutoff: Option<usize>,
    pub drop_sand: bool,
    pub budget: usize,
}

impl Settings {
    pub fn of(m: &Model) -> Settings {
        Settings { rank_cutoff: m.config.rank_cutoff, drop_sand: m.config.drop_sand, budget: DEFAULT_BUDGET }
    }

    fn rewrite(&self, mode: RewriteMode, negation: NegationPolicy) -> RewriteOptions {
        RewriteOptions {
            mode,
            negation,
            rank_cutoff: self.rank_cutoff,
            drop_sand: self.drop_sand,
            budget: self.budget,
            record_trace: false,
        }
    }
}

/// Normal form of the TOP function with its rewrite trace.
pub fn tdnf(m: &Model, mode: RewriteMode, budget: usize) -> Result<(Tdnf, RewriteTrace)> {
    let opt = RewriteOptions { mode, budget, ..Default::default() };
    Ok(to_tdnf_in(&m.expr, m.vocab.clone(), &opt)?)
}

/// Minimal cut sequence sets as reported: each sequence read with all other
/// events intact. Models with NOT gates keep their negated events.
pub fn mcss(m: &Model, s: &Settings) -> Result<Tdnf> {
    let (exact, _) = to_tdnf_in(&m.expr, m.vocab.clone(), &s.rewrite(RewriteMode::Extended, NegationPolicy::Exact))?;
    let intact = m.negation_free();
    let opt = MinimizeOptions { drop_sand: s.drop_sand, rank_cutoff: s.rank_cutoff, drop_guards: intact };
    if !intact {
        return Ok(minimize(&exact, &opt));
    }
    let (wide, _) = to_tdnf_in(&m.expr, m.vocab.clone(), &s.rewrite(RewriteMode::Extended, NegationPolicy::Conservative))?;
    Ok(minimize_shaped(&exact, &wide, &opt))
}

/// Minimal form that still equals the TOP function, negated events included.
pub fn minimal_form(m: &Model, s: &Settings) -> Result<Tdnf> {
    let (exact, _) = to_tdnf_in(&m.expr, m.vocab.clone(), &s.rewrite(RewriteMode::Extended, NegationPolicy::Exact))?;
    Ok(minimize(&exact, &MinimizeOptions { drop_sand: s.drop_sand, rank_cutoff: s.rank_cutoff, drop_guards: false }))
}

/// Mutually exclusive form of [`minimal_form`].
pub fn disjoint(m: &Model, s: &Settings, method: DisjointMethod) -> Result<Tdnf> {
    let mf = minimal_form(m, s)?;
    Ok(disjointify_with_budget(&mf, m.vocab.all(), method, s.budget)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuantMethod {
    /// Nested convolutions over the disjoint form.
    Exact,
    /// Closed form over the disjoint form.
    Approx1,
    /// Closed form over the reported MCSS; conservative.
    Approx2,
}

#[derive(Clone, Debug)]
pub struct Quantified {
    pub top: TopResult,
    pub lambda: Vec<f64>,
    pub freq_is_rate: bool,
    pub sequences: Tdnf,
    pub grid: TimeGrid,
}

impl Quantified {
    /// `(F, f, λ)` at mission time.
    pub fn at_end(&self) -> (f64, f64, f64) {
        let (f, d) = self.top.series.last();
        (f, d, *self.lambda.last().unwrap())
    }
}

pub fn quantify(m: &Model, s: &Settings, method: QuantMethod, grid: &TimeGrid) -> Result<Quantified> {
    let rates = m.rates()?;
    let (t, how) = match method {
        QuantMethod::Exact => (disjoint(m, s, DisjointMethod::Sequential)?, Method::Exact),
        QuantMethod::Approx1 => (disjoint(m, s, DisjointMethod::Sequential)?, Method::Approx),
        QuantMethod::Approx2 => (mcss(m, s)?, Method::Approx),
    };
    let top = top_series(&t, &rates, grid, how)?;
    let l = lambda_of(&top.series, grid)?;
    Ok(Quantified { top, lambda: l.lambda, freq_is_rate: l.freq_is_rate, sequences: t, grid: *grid })
}

/// Logical cross-check of the qualitative results on the sequential failure
/// tree of the model (with simultaneous failures unless they are dropped).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeCheck {
    pub nodes: usize,
    /// The disjoint form fails exactly on the failure nodes of the TOP function.
    pub disjoint_equal: bool,
    /// No node is covered by two terms of the disjoint form.
    pub disjoint_exclusive: bool,
    /// Every ordering of every MCSS, other events intact, is a failure node.
    pub mcss_sound: bool,
    /// Every minimal failure node within the rank cutoff satisfies some MCSS.
    pub mcss_complete: bool,
}

impl TreeCheck {
    pub fn ok(&self) -> bool {
        self.disjoint_equal && self.disjoint_exclusive && self.mcss_sound && self.mcss_complete
    }
}

pub fn tree_check(m: &Model, s: &Settings) -> Result<TreeCheck> {
    let tree = build_tree(m.vocab.names(), !s.drop_sand)?;
    let fail = failure_set_direct(&m.expr, &tree)?;
    let d = disjoint(m, s, DisjointMethod::Sequential)?;
    let cover: Vec<Vec<bool>> = crate::normal::pieces(&d).iter().map(|p| state_failure_set(p, &tree)).collect();
    let within = |i: usize| s.rank_cutoff.is_none_or(|c| tree.nodes[i].k.iter().filter(|&&x| x > 0).count() <= c);
    let disjoint_equal = (0..tree.len()).all(|i| !within(i) || cover.iter().any(|c| c[i]) == fail[i]);
    let disjoint_exclusive = (0..tree.len()).all(|i| cover.iter().filter(|c| c[i]).count() <= 1);

    let ms = mcss(m, s)?;
    let idx: Vec<usize> = (0..m.vocab.len()).map(|i| tree.events.binary_search(&m.vocab.name(i).to_string()).unwrap()).collect();
    let mut mcss_sound = true;
    for q in &ms.sequences {
        let Some(r) = Realizations::of(q, s.drop_sand) else { continue };
        for w in &r.steps {
            let mut k = vec![0u8; tree.events.len()];
            for (j, &e) in r.events.iter().enumerate() {
                k[idx[e]] = w[j];
            }
            mcss_sound &= tree.node_index(&k).is_some_and(|n| fail[n]);
        }
    }
    let cls = Classification::from_failure_set(&tree, &fail);
    let mcss_complete = cls.minimal_nodes().into_iter().filter(|&n| within(n)).all(|n| {
        let k = &tree.nodes[n].k;
        ms.sequences.iter().any(|q| q.completes(|i| k[idx[i]]).is_some())
    });
    Ok(TreeCheck { nodes: tree.len(), disjoint_equal, disjoint_exclusive, mcss_sound, mcss_complete })
}

pub fn markov(m: &Model, grid: &TimeGrid) -> Result<QuantSeries> {
    Ok(markov_series(&m.tree, &m.expr, grid)?)
}

pub fn simulate(m: &Model, samples: u64, seed: u64) -> Result<McEstimate> {
    Ok(monte_carlo(&m.tree, &m.expr, &McConfig { samples, seed, t_end: m.config.mission_time })?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn redundant() -> Model {
        Model::parse(include_str!("../fixtures/redundant.ft")).unwrap()
    }

    #[test]
    fn redundant_steps() {
        let m = redundant();
        let s = Settings::of(&m);
        assert_eq!(crate::normal::mcss_lines(&mcss(&m, &s).unwrap()), ["rank=1 sand=0 E", "rank=2 sand=0 U < A", "rank=2 sand=0 A & B"]);
        assert_eq!(disjoint(&m, &s, DisjointMethod::Sequential).unwrap().lines(), ["E", "A & B & !E", "!B & !E & U < A"]);
        let c = tree_check(&m, &s).unwrap();
        assert!(c.ok(), "{c:?}");
    }

    #[test]
    fn exit_codes() {
        let bad = Model::parse("event A lambda=1\ngate G1 OR A G2\ngate G2 OR G1 A\ntop G1").unwrap_err();
        assert_eq!(bad.exit_code(), 3);
        assert_eq!(Model::parse("event A lambda=").unwrap_err().exit_code(), 2);
        assert_eq!(Model::load("/nonexistent.ft").unwrap_err().exit_code(), 2);
    }

    #[test]
    fn negated_model_keeps_guards() {
        let m = Model::parse("event A lambda=1e-6\nevent B lambda=1e-6\ngate N NOT B\ngate T AND A N\ntop T").unwrap();
        assert!(!m.negation_free());
        let s = Settings::of(&m);
        assert_eq!(mcss(&m, &s).unwrap().lines(), ["A & !B"]);
    }
}
