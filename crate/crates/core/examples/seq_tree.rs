//! Builds the sequential failure tree over three events, classifies the
//! nodes for an expression and compares two expressions on it.

use tfta::parser::parse_expr;
use tfta::seqtree::{build_tree, classify, equivalent, to_dot};

fn main() {
    let names = ["A", "B", "C"].map(String::from);
    let tree = build_tree(&names, true).unwrap();
    println!("{} nodes, per level {:?}", tree.len(), tree.level_counts());

    let e = parse_expr("(A | B) < C").unwrap();
    let c = classify(&e, &tree).unwrap();
    println!("minimal failure nodes of {e}:");
    for i in c.minimal_nodes() {
        println!("  {}", tree.node_label(i));
    }

    let type_one = equivalent(&parse_expr("A < (B | C)").unwrap(), &parse_expr("(A < B) | (A < C)").unwrap()).unwrap();
    println!("A < (B | C) == (A < B) | (A < C): {type_one}");

    if std::env::args().any(|a| a == "--dot") {
        print!("{}", to_dot(&tree, &c));
    }
}
