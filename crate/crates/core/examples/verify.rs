//! Cross-checks the exact result against a Markov chain and a Monte Carlo
//! simulation, and the qualitative results against the sequential failure tree.

use tfta::oracles::DEFAULT_SEED;
use tfta::pipeline::{self, Model, QuantMethod, Settings};

fn main() {
    let m = Model::parse(include_str!("../fixtures/redundant.ft")).unwrap();
    let s = Settings::of(&m);
    let g = m.grid().unwrap();
    let (f, d, _) = pipeline::quantify(&m, &s, QuantMethod::Exact, &g).unwrap().at_end();
    let (mf, md) = pipeline::markov(&m, &g).unwrap().last();
    println!("exact:  F={f:.6e} f={d:.6e}");
    println!("markov: F={mf:.6e} f={md:.6e}");

    let mc = pipeline::simulate(&m, 2_000_000, DEFAULT_SEED).unwrap();
    println!("monte carlo: F={:.3e} +- {:.1e} ({} hits)", mc.estimate, mc.std_error, mc.hits);

    let c = pipeline::tree_check(&m, &s).unwrap();
    println!("tree check over {} nodes: {c:?}", c.nodes);
}
