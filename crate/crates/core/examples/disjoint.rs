//! Both disjoint forms: the compact sequential form of a model and the
//! temporal minterms of a small expression.

use std::sync::Arc;

use tfta::laws::{to_tdnf_in, RewriteOptions};
use tfta::normal::{disjointify, DisjointMethod};
use tfta::parser::parse_expr;
use tfta::pipeline::{self, Model, Settings};
use tfta::seq::Vocab;

fn main() {
    let m = Model::parse(include_str!("../fixtures/redundant.ft")).unwrap();
    let s = Settings::of(&m);
    println!("mcss:     {}", pipeline::mcss(&m, &s).unwrap());
    println!("disjoint: {}", pipeline::disjoint(&m, &s, DisjointMethod::Sequential).unwrap());

    let v = Arc::new(Vocab::new(["A", "B", "C"].map(String::from)).unwrap());
    let (t, _) = to_tdnf_in(&parse_expr("(A | B) < C").unwrap(), v.clone(), &RewriteOptions::default()).unwrap();
    let d = disjointify(&t, v.all(), DisjointMethod::Minterm).unwrap();
    println!("minterms of (A | B) < C over A, B, C:");
    for line in d.lines() {
        println!("  {line}");
    }
}
