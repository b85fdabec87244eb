//! Failure probability, density and rate of the TOP event with the exact
//! method and the two closed-form approximations.

use tfta::pipeline::{self, Model, QuantMethod, Settings};

fn main() {
    let m = Model::parse(include_str!("../fixtures/redundant.ft")).unwrap();
    let s = Settings::of(&m);
    let g = m.grid().unwrap();
    for method in [QuantMethod::Exact, QuantMethod::Approx1, QuantMethod::Approx2] {
        let q = pipeline::quantify(&m, &s, method, &g).unwrap();
        let (f, d, l) = q.at_end();
        println!("{method:?}: F={f:.4e} f={d:.4e} lambda={l:.4e}");
        for (seq, (pf, pd)) in q.sequences.lines().iter().zip(&q.top.contributions) {
            println!("  {seq:<20} F={pf:.4e} f={pd:.4e}");
        }
    }

    // a few points of the exact curve
    let q = pipeline::quantify(&m, &s, QuantMethod::Exact, &g).unwrap();
    for k in (0..g.points).step_by(g.points / 4) {
        println!("t={:>5} F={:.4e}", g.t(k), q.top.series.prob[k]);
    }
}
