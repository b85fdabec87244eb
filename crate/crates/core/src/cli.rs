//! The `tfta` command line.
//!
//! Exit codes: 0 success, 2 unreadable input or syntax error, 3 invalid
//! model, 4 budget or size cap exceeded, 5 reference methods disagree
//! (`verify` only).

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::laws::{RewriteMode, DEFAULT_BUDGET};
use crate::normal::{mcss_lines, DisjointMethod};
use crate::oracles::DEFAULT_SEED;
use crate::parser::{check_monotone, parse_expr};
use crate::pipeline::{self, Error, Model, QuantMethod, Settings};
use crate::quantify::{Method, TimeGrid};
use crate::seqtree::{build_tree, classify, to_dot, NodeClass};

#[derive(Parser, Debug)]
#[command(name = "tfta", version, about = "Temporal fault tree analysis with PAND and SAND gates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(clap::Args, Debug, Clone)]
pub struct Qualitative {
    /// Keep sequences with at most this many events (overrides the model).
    #[arg(long)]
    pub rank_cutoff: Option<usize>,
    /// Leave out sequences with simultaneous failures.
    #[arg(long)]
    pub drop_sand: bool,
    /// Operation budget of the rewrite engine.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: usize,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse and validate a model, report monotonicity.
    Check {
        input: PathBuf,
        /// Fail on negations that are not AND-combined with a positive term.
        #[arg(long)]
        strict: bool,
    },
    /// Temporal disjunctive normal form of the TOP event.
    Tdnf {
        input: PathBuf,
        /// Keep AND groups as extended core events instead of expanding them.
        #[arg(long)]
        extended: bool,
        /// Print every rewrite step.
        #[arg(long)]
        trace: bool,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
    },
    /// Minimal cutset sequences.
    Mcss {
        input: PathBuf,
        #[command(flatten)]
        q: Qualitative,
    },
    /// Mutually exclusive form of the TOP event.
    Disjoint {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = DisjointArg::Sequential)]
        method: DisjointArg,
        #[command(flatten)]
        q: Qualitative,
    },
    /// Failure probability, density and rate of the TOP event.
    Quantify {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = QuantArg::Exact)]
        method: QuantArg,
        /// Grid points (overrides the model).
        #[arg(long)]
        grid: Option<usize>,
        /// Mission time in hours (overrides the model).
        #[arg(long)]
        mission_time: Option<f64>,
        /// Also print a table of t, F, f, lambda with this many rows.
        #[arg(long)]
        table: Option<usize>,
        #[command(flatten)]
        q: Qualitative,
    },
    /// Compare the exact result with reference methods.
    Verify {
        input: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "markov,mc,seqtree")]
        oracles: Vec<OracleArg>,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Largest relative difference to the Markov result.
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        /// Largest distance to the Monte Carlo estimate, in standard errors.
        #[arg(long, default_value_t = 3.0)]
        sigmas: f64,
        #[arg(long)]
        grid: Option<usize>,
        #[command(flatten)]
        q: Qualitative,
    },
    /// Sequential failure tree of an expression with classified nodes.
    Tree {
        #[arg(long)]
        expr: String,
        /// Graphviz output.
        #[arg(long)]
        dot: bool,
        /// Include simultaneous failures.
        #[arg(long)]
        sand: bool,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum DisjointArg {
    Sequential,
    Minterm,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuantArg {
    Exact,
    Approx1,
    Approx2,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleArg {
    Markov,
    Mc,
    Seqtree,
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    match execute(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn settings(m: &Model, q: &Qualitative) -> Settings {
    let mut s = Settings::of(m);
    if q.rank_cutoff.is_some() {
        s.rank_cutoff = q.rank_cutoff;
    }
    s.drop_sand |= q.drop_sand;
    s.budget = q.budget;
    s
}

fn grid(m: &Model, points: Option<usize>, t_end: Option<f64>) -> Result<TimeGrid, Error> {
    Ok(TimeGrid::new(t_end.unwrap_or(m.config.mission_time), points.unwrap_or(m.config.grid_points))?)
}

fn execute(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Error> {
    match cmd {
        Command::Check { input, strict } => {
            let m = Model::load(&input)?;
            let _ = writeln!(
                out,
                "ok events={} gates={} top={} expr={}",
                m.tree.basic_events.len(),
                m.tree.gates.len(),
                m.tree.top,
                m.expr
            );
            match check_monotone(&m.expr, strict) {
                Ok(rep) => {
                    for w in &rep.warnings {
                        let _ = writeln!(out, "warning: {w}");
                    }
                    for v in &rep.violations {
                        let _ = writeln!(out, "warning: {v}");
                    }
                    let _ = writeln!(out, "monotone={}", rep.violations.is_empty());
                    Ok(0)
                }
                Err(v) => {
                    let _ = writeln!(err, "error: {v}");
                    Ok(3)
                }
            }
        }
        Command::Tdnf { input, extended, trace, budget } => {
            let m = Model::load(&input)?;
            let mode = if extended { RewriteMode::Extended } else { RewriteMode::Full };
            let (t, tr) = pipeline::tdnf(&m, mode, budget)?;
            for l in t.lines() {
                let _ = writeln!(out, "{l}");
            }
            if trace {
                let _ = write!(out, "{}", tr.to_text());
            }
            let laws: Vec<String> = tr.summary().iter().map(|(l, n)| format!("{l}:{n}")).collect();
            let _ = writeln!(out, "sequences={} operations={} laws={}", t.len(), tr.used, laws.join(","));
            Ok(0)
        }
        Command::Mcss { input, q } => {
            let m = Model::load(&input)?;
            let t = pipeline::mcss(&m, &settings(&m, &q))?;
            for l in mcss_lines(&t) {
                let _ = writeln!(out, "{l}");
            }
            Ok(0)
        }
        Command::Disjoint { input, method, q } => {
            let m = Model::load(&input)?;
            let method = match method {
                DisjointArg::Sequential => DisjointMethod::Sequential,
                DisjointArg::Minterm => DisjointMethod::Minterm,
            };
            for l in pipeline::disjoint(&m, &settings(&m, &q), method)?.lines() {
                let _ = writeln!(out, "{l}");
            }
            Ok(0)
        }
        Command::Quantify { input, method, grid: points, mission_time, table, q } => {
            let m = Model::load(&input)?;
            let g = grid(&m, points, mission_time)?;
            let qm = match method {
                QuantArg::Exact => QuantMethod::Exact,
                QuantArg::Approx1 => QuantMethod::Approx1,
                QuantArg::Approx2 => QuantMethod::Approx2,
            };
            let r = pipeline::quantify(&m, &settings(&m, &q), qm, &g)?;
            for w in &r.top.warnings {
                let _ = writeln!(err, "warning: {w}");
            }
            if let Some(rows) = table {
                let _ = writeln!(out, "{:>12} {:>12} {:>12} {:>12}", "t", "F", "f", "lambda");
                let rows = rows.clamp(1, g.points - 1);
                for j in 0..=rows {
                    let k = j * (g.points - 1) / rows;
                    let s = &r.top.series;
                    let _ = writeln!(out, "{:>12.4} {:>12.4e} {:>12.4e} {:>12.4e}", g.t(k), s.prob[k], s.freq[k], r.lambda[k]);
                }
            }
            let (f, d, l) = r.at_end();
            let _ = writeln!(
                out,
                "method={} t={} grid={} sequences={} conservative={} f_is_lambda={}",
                method.to_possible_value().unwrap().get_name(),
                g.t_end,
                g.points,
                r.sequences.len(),
                r.top.conservative,
                r.freq_is_rate
            );
            let _ = writeln!(out, "F={f:.4e} f={d:.4e} lambda={l:.4e}");
            Ok(0)
        }
        Command::Verify { input, oracles, samples, seed, tol, sigmas, grid: points, q } => {
            let m = Model::load(&input)?;
            let s = settings(&m, &q);
            let g = grid(&m, points, None)?;
            let d = pipeline::disjoint(&m, &s, DisjointMethod::Sequential)?;
            let exact = crate::quantify::top_series(&d, &m.rates()?, &g, Method::Exact)?;
            let (fe, de) = exact.series.last();
            let _ = writeln!(out, "method=exact F={fe:.6e} f={de:.6e}");
            let mut ok = true;
            for o in oracles {
                match o {
                    OracleArg::Markov => {
                        let (fm, dm) = pipeline::markov(&m, &g)?.last();
                        let (rf, rd) = (rel(fe, fm), rel(de, dm));
                        let pass = rf <= tol && rd <= tol;
                        ok &= pass;
                        let _ = writeln!(
                            out,
                            "method=markov F={fm:.6e} f={dm:.6e} delta_F={rf:.2e} delta_f={rd:.2e} pass={pass}"
                        );
                    }
                    OracleArg::Mc => {
                        let r = pipeline::simulate(&m, samples, seed)?;
                        let z = if r.std_error > 0.0 { (r.estimate - fe).abs() / r.std_error } else if r.estimate == fe { 0.0 } else { f64::INFINITY };
                        let pass = z <= sigmas;
                        ok &= pass;
                        let _ = writeln!(
                            out,
                            "method=mc F={:.6e} se={:.2e} samples={} seed={} z={z:.2} pass={pass}",
                            r.estimate, r.std_error, r.samples, seed
                        );
                    }
                    OracleArg::Seqtree => {
                        let c = pipeline::tree_check(&m, &s)?;
                        ok &= c.ok();
                        let _ = writeln!(
                            out,
                            "method=seqtree nodes={} disjoint_equal={} disjoint_exclusive={} mcss_sound={} mcss_complete={} pass={}",
                            c.nodes,
                            c.disjoint_equal,
                            c.disjoint_exclusive,
                            c.mcss_sound,
                            c.mcss_complete,
                            c.ok()
                        );
                    }
                }
            }
            Ok(if ok { 0 } else { 5 })
        }
        Command::Tree { expr, dot, sand } => {
            let e = parse_expr(&expr).map_err(Error::Parse)?;
            let events: Vec<String> = e.events_of().into_iter().collect();
            let t = build_tree(&events, sand)?;
            let c = classify(&e, &t)?;
            if dot {
                let _ = write!(out, "{}", to_dot(&t, &c));
                return Ok(0);
            }
            for (i, nd) in t.nodes.iter().enumerate() {
                let class = match c.classes[i] {
                    NodeClass::NonFailure => "ok",
                    NodeClass::MinimalFailure => "minimal",
                    NodeClass::NonMinimalFailure => "failed",
                };
                let k: Vec<String> = nd.k.iter().map(u8::to_string).collect();
                let _ = writeln!(out, "K=({}) {class} {}", k.join(","), t.node_label(i));
            }
            let _ = writeln!(out, "nodes={} minimal={} failed={}", t.len(), c.minimal_nodes().len(), c.failure_nodes().len());
            Ok(0)
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        ((a - b) / b).abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let code = run(std::iter::once("tfta").chain(args.iter().copied()), &mut o, &mut e);
        (code, String::from_utf8(o).unwrap(), String::from_utf8(e).unwrap())
    }

    const REDUNDANT: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/redundant.ft");
    const BROKEN: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/broken.ft");

    #[test]
    fn redundant_commands() {
        let (c, o, _) = call(&["mcss", REDUNDANT]);
        assert_eq!(c, 0);
        assert_eq!(o.lines().collect::<Vec<_>>(), ["rank=1 sand=0 E", "rank=2 sand=0 U < A", "rank=2 sand=0 A & B"]);
        let (c, o, _) = call(&["quantify", "--method", "exact", REDUNDANT]);
        assert_eq!(c, 0);
        assert_eq!(o.lines().last().unwrap(), "F=9.5940e-7 f=3.7955e-9 lambda=3.7955e-9");
        let (c, o, _) = call(&["check", REDUNDANT]);
        assert_eq!(c, 0);
        assert!(o.contains("monotone=true"));
        let (c, o, _) = call(&["verify", "--oracles", "markov,seqtree", REDUNDANT]);
        assert_eq!(c, 0, "{o}");
    }

    #[test]
    fn exit_codes() {
        assert_eq!(call(&["check", BROKEN]).0, 3);
        assert_eq!(call(&["check", "/does/not/exist.ft"]).0, 2);
        assert_eq!(call(&["bogus"]).0, 2);
        assert_eq!(call(&["tdnf", "--budget", "3", REDUNDANT]).0, 4);
        assert_eq!(call(&["tree", "--expr", "A & ("]).0, 2);
        assert_eq!(call(&["--help"]).0, 0);
    }

    #[test]
    fn tree_output() {
        let (c, o, _) = call(&["tree", "--expr", "A < B"]);
        assert_eq!(c, 0);
        assert!(o.ends_with("nodes=5 minimal=1 failed=1\n"), "{o}");
        let (_, o, _) = call(&["tree", "--expr", "A < B", "--dot"]);
        assert!(o.starts_with("digraph"));
    }
}
