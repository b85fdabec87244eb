//! Minimal cut sequence sets of the ECU architecture model (16 events),
//! grouped by rank.

use std::time::Instant;

use tfta::normal::mcss_lines;
use tfta::pipeline::{self, Model, Settings};

fn main() {
    let m = Model::parse(include_str!("../fixtures/ecu.ft")).unwrap();
    let start = Instant::now();
    let mcss = pipeline::mcss(&m, &Settings::of(&m)).unwrap();
    println!("{} MCSS in {:.2?}", mcss.len(), start.elapsed());
    for r in 2..=4 {
        let n = mcss.sequences.iter().filter(|s| s.rank() == r).count();
        println!("rank {r}: {n}");
    }
    for line in mcss_lines(&mcss).iter().filter(|l| !l.starts_with("rank=4")) {
        println!("{line}");
    }
}
