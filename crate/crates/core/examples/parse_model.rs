//! Parse a fault tree model, print the TOP expression and run the
//! monotonicity check.

use tfta::parser::{check_monotone, parse_expr, print_model};
use tfta::pipeline::Model;

fn main() {
    let m = Model::parse(include_str!("../fixtures/redundant.ft")).expect("fixture parses");
    println!("TOP = {}", m.expr);
    println!("events: {}", m.vocab.names().join(", "));
    let rep = check_monotone(&m.expr, true).expect("monotone");
    println!("warnings: {}", rep.warnings.len());

    // the printed model parses back to the same tree
    let text = print_model(&m.tree, &m.config);
    print!("{text}");
    assert_eq!(Model::parse(&text).unwrap().expr, m.expr);

    // a negation that stands on its own is rejected
    let bad = parse_expr("!B | C").unwrap();
    match check_monotone(&bad, true) {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => unreachable!(),
    }
}
