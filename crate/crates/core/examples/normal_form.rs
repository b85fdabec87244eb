//! Rewrite an expression into its temporal normal form, in both modes, and
//! show the laws that were applied.

use tfta::laws::{to_tdnf_with, RewriteMode, RewriteOptions};
use tfta::parser::parse_expr;
use tfta::seqtree::equivalent;

fn main() {
    let e = parse_expr("(A | B) < (C & D)").unwrap();
    for mode in [RewriteMode::Extended, RewriteMode::Full] {
        let (t, trace) = to_tdnf_with(&e, &RewriteOptions::with_mode(mode)).unwrap();
        println!("{mode:?}: {} sequences, {} operations", t.len(), trace.used);
        for line in t.lines() {
            println!("  {line}");
        }
        for (law, n) in trace.summary() {
            println!("  {law} x{n}");
        }
        assert!(equivalent(&e, &t.to_expr()).unwrap());
    }
}
