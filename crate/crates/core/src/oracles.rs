//! Probabilistic references: a Markov chain over the sequential failure
//! tree, solved with classical Runge-Kutta, and a Monte Carlo sampler of
//! failure orderings.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::expr::{FaultTree, TemporalExpr};
use crate::quantify::{QuantSeries, TimeGrid};
use crate::seqtree::{failure_set_direct, Compiled, OracleError, SeqTree};

/// Largest number of events solved as a Markov chain (13 700 states).
pub const MARKOV_MAX_EVENTS: usize = 7;
/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 0x5eed_7f7a;
const MAX_SUBSTEPS: usize = 64;
const MC_CHUNK: u64 = 1 << 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RefError {
    #[error(transparent)]
    Tree(#[from] OracleError),
    #[error("no failure rate for event `{0}`")]
    MissingRate(String),
    #[error("integration did not settle with {0} substeps per grid step")]
    Unstable(usize),
    #[error("at least one sample is needed")]
    NoSamples,
}

fn rates(ft: &FaultTree, events: &[String]) -> Result<Vec<f64>, RefError> {
    events.iter().map(|x| ft.rate(x).ok_or_else(|| RefError::MissingRate(x.clone()))).collect()
}

/// States are the nodes of the SAND-free sequential failure tree; a state
/// moves to a child when one more event fails.
#[derive(Clone, Debug)]
pub struct MarkovModel {
    pub tree: SeqTree,
    pub failed: Vec<bool>,
    /// Rate into each state from its parent.
    pub in_rate: Vec<f64>,
    /// Total rate out of each state.
    pub out_rate: Vec<f64>,
}

impl MarkovModel {
    pub fn new(ft: &FaultTree, e: &TemporalExpr) -> Result<MarkovModel, RefError> {
        let events: Vec<String> = e.events_of().into_iter().collect();
        let tree = SeqTree::build_capped(&events, false, MARKOV_MAX_EVENTS)?;
        let lam = rates(ft, &tree.events)?;
        let failed = failure_set_direct(e, &tree)?;
        let mut in_rate = vec![0.0; tree.len()];
        let mut out_rate = vec![0.0; tree.len()];
        for (i, nd) in tree.nodes.iter().enumerate() {
            out_rate[i] = (0..lam.len()).filter(|&j| nd.k[j] == 0).map(|j| lam[j]).sum();
            if nd.parent.is_some() {
                let j = nd.k.iter().position(|&s| s == nd.steps).unwrap();
                in_rate[i] = lam[j];
            }
        }
        Ok(MarkovModel { tree, failed, in_rate, out_rate })
    }

    pub fn states(&self) -> usize {
        self.tree.len()
    }

    fn deriv(&self, p: &[f64], dp: &mut [f64]) {
        for (i, nd) in self.tree.nodes.iter().enumerate() {
            let inflow = nd.parent.map_or(0.0, |q| self.in_rate[i] * p[q]);
            dp[i] = inflow - self.out_rate[i] * p[i];
        }
    }

    fn rk4(&self, p: &mut [f64], h: f64, buf: &mut [Vec<f64>; 5]) {
        let [k1, k2, k3, k4, tmp] = buf;
        self.deriv(p, k1);
        tmp.iter_mut().zip(p.iter()).zip(k1.iter()).for_each(|((t, x), k)| *t = x + 0.5 * h * k);
        self.deriv(tmp, k2);
        tmp.iter_mut().zip(p.iter()).zip(k2.iter()).for_each(|((t, x), k)| *t = x + 0.5 * h * k);
        self.deriv(tmp, k3);
        tmp.iter_mut().zip(p.iter()).zip(k3.iter()).for_each(|((t, x), k)| *t = x + h * k);
        self.deriv(tmp, k4);
        for i in 0..p.len() {
            p[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }

    fn solve_with(&self, g: &TimeGrid, sub: usize) -> QuantSeries {
        let n = self.states();
        let mut p = vec![0.0; n];
        p[0] = 1.0;
        let mut buf: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; n]);
        let mut dp = vec![0.0; n];
        let h = g.step() / sub as f64;
        let mut out = QuantSeries::zero(g);
        for k in 0..g.points {
            if k > 0 {
                for _ in 0..sub {
                    self.rk4(&mut p, h, &mut buf);
                }
            }
            self.deriv(&p, &mut dp);
            out.prob[k] = (0..n).filter(|&i| self.failed[i]).map(|i| p[i]).sum();
            out.freq[k] = (0..n).filter(|&i| self.failed[i]).map(|i| dp[i]).sum();
        }
        out
    }

    /// `dP/dt = Q·P` from the all-operational state; substeps per grid step
    /// double until two successive solutions agree.
    pub fn solve(&self, g: &TimeGrid) -> Result<QuantSeries, RefError> {
        let mut sub = 1;
        let mut prev = self.solve_with(g, sub);
        while sub < MAX_SUBSTEPS {
            sub *= 2;
            let next = self.solve_with(g, sub);
            let (a, b) = (prev.last().0, next.last().0);
            if (a - b).abs() <= 1e-9 * b.abs() + 1e-300 {
                return Ok(next);
            }
            prev = next;
        }
        Err(RefError::Unstable(sub))
    }
}

/// TOP probability from the Markov reference.
pub fn markov_series(ft: &FaultTree, e: &TemporalExpr, g: &TimeGrid) -> Result<QuantSeries, RefError> {
    MarkovModel::new(ft, e)?.solve(g)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McConfig {
    pub samples: u64,
    pub seed: u64,
    pub t_end: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub hits: u64,
    pub samples: u64,
}

/// Samples exponential failure times, keeps the failures up to `t_end` in
/// their realized order and evaluates `e` after the last one. Chunk `c`
/// draws from stream `c` of the seeded generator, so the result does not
/// depend on the number of threads.
pub fn monte_carlo(ft: &FaultTree, e: &TemporalExpr, cfg: &McConfig) -> Result<McEstimate, RefError> {
    if cfg.samples == 0 {
        return Err(RefError::NoSamples);
    }
    let events: Vec<String> = e.events_of().into_iter().collect();
    let lam = rates(ft, &events)?;
    let c = Compiled::new(e, &events)?;
    let chunks = cfg.samples.div_ceil(MC_CHUNK);
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(ci);
            let n = MC_CHUNK.min(cfg.samples - ci * MC_CHUNK);
            let mut times: Vec<(f64, usize)> = Vec::with_capacity(lam.len());
            let mut occ = vec![0u8; lam.len()];
            let mut hits = 0u64;
            for _ in 0..n {
                times.clear();
                for (i, &l) in lam.iter().enumerate() {
                    // inverse transform; 1 - u lies in (0, 1]
                    let u: f64 = rng.random();
                    let t = -(1.0 - u).ln() / l;
                    if t <= cfg.t_end {
                        times.push((t, i));
                    }
                }
                times.sort_by(|a, b| a.0.total_cmp(&b.0));
                occ.iter_mut().for_each(|x| *x = 0);
                for (s, &(_, i)) in times.iter().enumerate() {
                    occ[i] = s as u8 + 1;
                }
                let m = times.len() as u8;
                hits += c.holds(&occ, m) >> m & 1;
            }
            hits
        })
        .sum();
    let p = hits as f64 / cfg.samples as f64;
    Ok(McEstimate {
        estimate: p,
        std_error: (p * (1.0 - p) / cfg.samples as f64).sqrt(),
        hits,
        samples: cfg.samples,
    })
}
