//! Expression syntax, the line-oriented model format and the monotonicity check.
//!
//! Expression grammar, loosest binding first:
//!
//! ```text
//! or   := and ('|' and)*
//! and  := pand ('&' pand)*
//! pand := sand ('<' sand)*        left-associative
//! sand := unary ('=' unary)*
//! unary:= '!' unary | ident | 'true' | 'false' | '(' or ')'
//! ```
//!
//! Model files hold one declaration per line, `#` starts a comment:
//!
//! ```text
//! version 1
//! event <id> lambda=<float>
//! gate <id> <AND|OR|NOT|PAND|SAND> <input>...
//! top <id>
//! config mission_time=<float> grid_points=<int> [rank_cutoff=<int>] [drop_sand=<bool>]
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::expr::{expr_from_tree, BasicEventData, FaultTree, Gate, GateKind, ModelError, TemporalExpr};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("line {line}: {msg}")]
    Validation { line: usize, msg: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl ParseError {
    /// Process exit code: 2 for syntax errors, 3 for validation errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            ParseError::Syntax { .. } => 2,
            _ => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisConfig {
    /// Mission time in hours.
    pub mission_time: f64,
    pub grid_points: usize,
    pub rank_cutoff: Option<usize>,
    /// Leave sequences with simultaneous failures out of the MCSS.
    pub drop_sand: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig { mission_time: 1000.0, grid_points: 4001, rank_cutoff: None, drop_sand: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Tok {
    Ident(usize, usize),
    And,
    Or,
    Not,
    Pand,
    Sand,
    LParen,
    RParen,
}

struct Lexer<'a> {
    src: &'a str,
    toks: Vec<(Tok, usize)>,
}

fn lex(src: &str, line: usize, col0: usize) -> Result<Lexer<'_>, ParseError> {
    let mut toks = Vec::new();
    let bytes = src.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let t = match c {
            ' ' | '\t' | '\r' | '\n' => {
                i += 1;
                continue;
            }
            '&' => Tok::And,
            '|' => Tok::Or,
            '!' => Tok::Not,
            '<' => Tok::Pand,
            '=' => Tok::Sand,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            c if is_ident_char(c) => {
                let start = i;
                while i < bytes.len() && is_ident_char(bytes[i] as char) {
                    i += 1;
                }
                toks.push((Tok::Ident(start, i), start));
                continue;
            }
            other => {
                return Err(ParseError::Syntax { line, col: col0 + i + 1, msg: format!("unexpected character `{other}`") });
            }
        };
        toks.push((t, i));
        i += 1;
    }
    Ok(Lexer { src, toks })
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '-'
}

struct ExprParser<'a> {
    lx: Lexer<'a>,
    pos: usize,
    line: usize,
    col0: usize,
}

impl ExprParser<'_> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        let off = self.lx.toks.get(self.pos).map_or(self.lx.src.len(), |t| t.1);
        Err(ParseError::Syntax { line: self.line, col: self.col0 + off + 1, msg: msg.into() })
    }

    fn peek(&self) -> Option<Tok> {
        self.lx.toks.get(self.pos).map(|t| t.0)
    }

    fn eat(&mut self, t: Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn or(&mut self) -> Result<TemporalExpr, ParseError> {
        let mut xs = vec![self.and()?];
        while self.eat(Tok::Or) {
            xs.push(self.and()?);
        }
        Ok(TemporalExpr::or(xs))
    }

    fn and(&mut self) -> Result<TemporalExpr, ParseError> {
        let mut xs = vec![self.pand()?];
        while self.eat(Tok::And) {
            xs.push(self.pand()?);
        }
        Ok(TemporalExpr::and(xs))
    }

    fn pand(&mut self) -> Result<TemporalExpr, ParseError> {
        let mut xs = vec![self.sand()?];
        while self.eat(Tok::Pand) {
            xs.push(self.sand()?);
        }
        Ok(TemporalExpr::pand_chain(xs))
    }

    fn sand(&mut self) -> Result<TemporalExpr, ParseError> {
        let mut xs = vec![self.unary()?];
        while self.eat(Tok::Sand) {
            xs.push(self.unary()?);
        }
        Ok(TemporalExpr::sand(xs))
    }

    fn unary(&mut self) -> Result<TemporalExpr, ParseError> {
        match self.peek() {
            Some(Tok::Not) => {
                self.pos += 1;
                Ok(TemporalExpr::not(self.unary()?))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.or()?;
                if !self.eat(Tok::RParen) {
                    return self.err("expected `)`");
                }
                Ok(e)
            }
            Some(Tok::Ident(s, e)) => {
                self.pos += 1;
                let name = &self.lx.src[s..e];
                Ok(match name {
                    "true" | "True" => TemporalExpr::True,
                    "false" | "False" => TemporalExpr::False,
                    _ => TemporalExpr::atom(name),
                })
            }
            Some(_) => self.err("expected an event, constant, `!` or `(`"),
            None => self.err("unexpected end of expression"),
        }
    }
}

/// Parses an expression and returns its canonical form.
pub fn parse_expr(text: &str) -> Result<TemporalExpr, ParseError> {
    parse_expr_at(text, 1, 0)
}

fn parse_expr_at(text: &str, line: usize, col0: usize) -> Result<TemporalExpr, ParseError> {
    let lx = lex(text, line, col0)?;
    let mut p = ExprParser { lx, pos: 0, line, col0 };
    let e = p.or()?;
    if p.pos != p.lx.toks.len() {
        return p.err("trailing input");
    }
    Ok(e.canonicalize())
}

fn parse_float(v: &str, line: usize, col: usize, key: &str) -> Result<f64, ParseError> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| ParseError::Syntax { line, col, msg: format!("`{key}` expects a number, got `{v}`") })
}

fn parse_uint(v: &str, line: usize, col: usize, key: &str) -> Result<usize, ParseError> {
    v.parse::<usize>()
        .map_err(|_| ParseError::Syntax { line, col, msg: format!("`{key}` expects an integer, got `{v}`") })
}

fn valid_id(s: &str) -> bool {
    !s.is_empty() && s.chars().all(is_ident_char) && s != "true" && s != "false"
}

/// Parses and validates a model file.
pub fn parse_model(text: &str) -> Result<(FaultTree, AnalysisConfig), ParseError> {
    let mut ft = FaultTree::default();
    let mut cfg = AnalysisConfig::default();
    let mut top: Option<(String, usize)> = None;
    let mut decl_line: BTreeMap<String, usize> = BTreeMap::new();
    let mut seen_config = false;

    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let content = raw.split('#').next().unwrap_or("");
        // column of each whitespace-separated word
        let mut words: Vec<(usize, &str)> = Vec::new();
        let mut start = None;
        for (i, c) in content.char_indices() {
            match (c.is_whitespace(), start) {
                (false, None) => start = Some(i),
                (true, Some(s)) => {
                    words.push((s + 1, &content[s..i]));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            words.push((s + 1, &content[s..]));
        }
        let Some(&(kcol, kw)) = words.first() else { continue };
        let syntax = |col: usize, msg: String| ParseError::Syntax { line, col, msg };
        let declare = |id: &str, col: usize, decl: &mut BTreeMap<String, usize>| -> Result<(), ParseError> {
            if !valid_id(id) {
                return Err(syntax(col, format!("invalid identifier `{id}`")));
            }
            if let Some(prev) = decl.insert(id.to_string(), line) {
                return Err(ParseError::Validation { line, msg: format!("duplicate id `{id}` (first declared on line {prev})") });
            }
            Ok(())
        };
        match kw {
            "version" => {
                let (c, v) = words.get(1).copied().ok_or_else(|| syntax(kcol, "missing version number".into()))?;
                let v = parse_uint(v, line, c, "version")?;
                if v as u32 != FORMAT_VERSION {
                    return Err(ParseError::Validation { line, msg: format!("unsupported format version {v}") });
                }
            }
            "event" => {
                if words.len() != 3 {
                    return Err(syntax(kcol, "expected `event <id> lambda=<float>`".into()));
                }
                let (icol, id) = words[1];
                declare(id, icol, &mut decl_line)?;
                let (lcol, kv) = words[2];
                let v = kv.strip_prefix("lambda=").ok_or_else(|| syntax(lcol, format!("expected `lambda=`, got `{kv}`")))?;
                let lambda = parse_float(v, line, lcol, "lambda")?;
                if lambda < 0.0 {
                    return Err(ParseError::Validation { line, msg: format!("negative failure rate for `{id}`") });
                }
                ft.basic_events.insert(id.to_string(), BasicEventData { id: id.to_string(), lambda });
            }
            "gate" => {
                if words.len() < 4 {
                    return Err(syntax(kcol, "expected `gate <id> <KIND> <input>...`".into()));
                }
                let (icol, id) = words[1];
                declare(id, icol, &mut decl_line)?;
                let (gcol, k) = words[2];
                let kind = match k {
                    "AND" => GateKind::And,
                    "OR" => GateKind::Or,
                    "NOT" => GateKind::Not,
                    "PAND" => GateKind::Pand,
                    "SAND" => GateKind::Sand,
                    _ => return Err(syntax(gcol, format!("unknown gate kind `{k}`"))),
                };
                let mut inputs = Vec::new();
                for &(c, w) in &words[3..] {
                    if !valid_id(w) {
                        return Err(syntax(c, format!("invalid identifier `{w}`")));
                    }
                    inputs.push(w.to_string());
                }
                if kind == GateKind::Not && inputs.len() != 1 {
                    return Err(ParseError::Validation { line, msg: format!("NOT gate `{id}` needs exactly one input") });
                }
                ft.gates.insert(id.to_string(), Gate { kind, inputs });
            }
            "top" => {
                if words.len() != 2 {
                    return Err(syntax(kcol, "expected `top <id>`".into()));
                }
                if let Some((_, prev)) = &top {
                    return Err(ParseError::Validation { line, msg: format!("second `top` (first on line {prev})") });
                }
                top = Some((words[1].1.to_string(), line));
            }
            "config" => {
                if seen_config {
                    return Err(ParseError::Validation { line, msg: "duplicate `config` line".into() });
                }
                seen_config = true;
                for &(c, kv) in &words[1..] {
                    let (k, v) = kv.split_once('=').ok_or_else(|| syntax(c, format!("expected key=value, got `{kv}`")))?;
                    match k {
                        "mission_time" => cfg.mission_time = parse_float(v, line, c, k)?,
                        "grid_points" => cfg.grid_points = parse_uint(v, line, c, k)?,
                        "rank_cutoff" => cfg.rank_cutoff = Some(parse_uint(v, line, c, k)?),
                        "drop_sand" => {
                            cfg.drop_sand = v
                                .parse()
                                .map_err(|_| syntax(c, format!("`{k}` expects true or false, got `{v}`")))?
                        }
                        _ => return Err(syntax(c, format!("unknown config key `{k}`"))),
                    }
                }
                if cfg.mission_time <= 0.0 {
                    return Err(ParseError::Validation { line, msg: "mission_time must be > 0".into() });
                }
                if cfg.grid_points < 2 {
                    return Err(ParseError::Validation { line, msg: "grid_points must be >= 2".into() });
                }
            }
            other => return Err(syntax(kcol, format!("unknown declaration `{other}`"))),
        }
    }
    let Some((top, top_line)) = top else {
        return Err(ParseError::Validation { line: text.lines().count().max(1), msg: "missing `top`".into() });
    };
    if !decl_line.contains_key(&top) {
        return Err(ParseError::Validation { line: top_line, msg: format!("top `{top}` is not declared") });
    }
    ft.top = top;
    for (g, gate) in &ft.gates {
        for c in &gate.inputs {
            if !decl_line.contains_key(c) {
                return Err(ParseError::Validation {
                    line: decl_line[g],
                    msg: format!("gate `{g}` references undeclared `{c}`"),
                });
            }
        }
    }
    expr_from_tree(&ft)?;
    Ok((ft, cfg))
}

/// Serialises a model in the file format; `parse_model` reads it back unchanged.
pub fn print_model(ft: &FaultTree, cfg: &AnalysisConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "version {FORMAT_VERSION}");
    for b in ft.basic_events.values() {
        let _ = writeln!(s, "event {} lambda={:e}", b.id, b.lambda);
    }
    for (id, g) in &ft.gates {
        let _ = writeln!(s, "gate {} {} {}", id, g.kind.keyword(), g.inputs.join(" "));
    }
    let _ = writeln!(s, "top {}", ft.top);
    let _ = write!(s, "config mission_time={} grid_points={}", cfg.mission_time, cfg.grid_points);
    if let Some(r) = cfg.rank_cutoff {
        let _ = write!(s, " rank_cutoff={r}");
    }
    if cfg.drop_sand {
        s.push_str(" drop_sand=true");
    }
    s.push('\n');
    s
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("monotonicity violation: {reason} in `{expr}`")]
pub struct MonotoneError {
    pub expr: String,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MonotoneReport {
    pub warnings: Vec<String>,
    /// Violations that were downgraded to warnings (non-strict mode).
    pub violations: Vec<MonotoneError>,
}

/// Checks that every negation is AND-combined with at least one
/// non-negated term. In strict mode the first violation is an error.
pub fn check_monotone(e: &TemporalExpr, strict: bool) -> Result<MonotoneReport, MonotoneError> {
    let mut rep = MonotoneReport::default();
    walk(e, Ctx::Top, &mut rep);
    let mut pos = BTreeSet::new();
    let mut neg = BTreeSet::new();
    polarity(e, false, &mut pos, &mut neg);
    for x in neg.intersection(&pos) {
        rep.warnings.push(format!("event `{x}` occurs both negated and non-negated"));
    }
    if strict {
        if let Some(v) = rep.violations.first() {
            return Err(v.clone());
        }
    }
    Ok(rep)
}

#[derive(Clone, Copy, PartialEq)]
enum Ctx {
    Top,
    AndWithPositive,
    Other,
}

fn walk(e: &TemporalExpr, ctx: Ctx, rep: &mut MonotoneReport) {
    use TemporalExpr::*;
    match e {
        Not(inner) => {
            if ctx != Ctx::AndWithPositive {
                let reason = match ctx {
                    Ctx::Top => "negation not combined with a non-negated term",
                    _ => "negation outside a conjunction",
                };
                rep.violations.push(MonotoneError { expr: e.to_string(), reason: reason.into() });
            }
            if !matches!(**inner, Atom(_)) {
                rep.warnings.push(format!("`{e}` is expanded by the negation laws"));
            }
            walk(inner, Ctx::Other, rep);
        }
        And(xs) => {
            let has_pos = xs.iter().any(|x| !matches!(x, Not(_)));
            if !has_pos {
                rep.violations.push(MonotoneError {
                    expr: e.to_string(),
                    reason: "conjunction of negations only".into(),
                });
            }
            let c = if has_pos { Ctx::AndWithPositive } else { Ctx::Other };
            xs.iter().for_each(|x| walk(x, c, rep));
        }
        Or(xs) | Sand(xs) => xs.iter().for_each(|x| walk(x, Ctx::Other, rep)),
        Pand(a, b) => {
            walk(a, Ctx::Other, rep);
            walk(b, Ctx::Other, rep);
        }
        True | False | Atom(_) => {}
    }
}

fn polarity(e: &TemporalExpr, negated: bool, pos: &mut BTreeSet<String>, neg: &mut BTreeSet<String>) {
    use TemporalExpr::*;
    match e {
        Atom(x) => {
            if negated {
                neg.insert(x.clone());
            } else {
                pos.insert(x.clone());
            }
        }
        Not(i) => polarity(i, !negated, pos, neg),
        And(xs) | Or(xs) | Sand(xs) => xs.iter().for_each(|x| polarity(x, negated, pos, neg)),
        Pand(a, b) => {
            polarity(a, negated, pos, neg);
            polarity(b, negated, pos, neg);
        }
        True | False => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(x: &str) -> TemporalExpr {
        TemporalExpr::atom(x)
    }

    #[test]
    fn parse_examples() {
        assert_eq!(parse_expr("A < (B | C)").unwrap(), TemporalExpr::pand(a("A"), TemporalExpr::or(vec![a("B"), a("C")])));
        assert_eq!(parse_expr("A = B = C").unwrap(), TemporalExpr::sand(vec![a("A"), a("B"), a("C")]));
        assert_eq!(
            parse_expr("!(A < B) & C").unwrap(),
            TemporalExpr::and(vec![a("C"), TemporalExpr::not(TemporalExpr::pand(a("A"), a("B")))])
        );
    }

    #[test]
    fn precedence() {
        // NOT > SAND > PAND > AND > OR
        let e = parse_expr("A | B & C < D = E").unwrap();
        let want = TemporalExpr::or(vec![
            a("A"),
            TemporalExpr::and(vec![a("B"), TemporalExpr::pand(a("C"), TemporalExpr::sand(vec![a("D"), a("E")]))]),
        ]);
        assert_eq!(e, want.canonicalize());
        assert_eq!(parse_expr("A < B < C").unwrap(), TemporalExpr::pand_chain(vec![a("A"), a("B"), a("C")]));
    }

    #[test]
    fn error_positions() {
        match parse_expr("A & (B | ") {
            Err(ParseError::Syntax { line: 1, col, .. }) => assert_eq!(col, 10),
            other => panic!("{other:?}"),
        }
        match parse_expr("A $ B") {
            Err(ParseError::Syntax { col: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn model_self_cycle() {
        let src = "event A lambda=1e-6\ngate G AND A G\ntop G\n";
        let err = parse_model(src).unwrap_err();
        assert_eq!(err, ParseError::Model(ModelError::Cycle("G".into())));
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn model_single_atom() {
        let (ft, cfg) = parse_model("event A lambda=2e-6\ntop A\nconfig mission_time=10 grid_points=3").unwrap();
        assert_eq!(expr_from_tree(&ft).unwrap(), a("A"));
        assert_eq!(cfg.grid_points, 3);
        assert!(ft.gates.is_empty());
    }

    #[test]
    fn model_validation_errors() {
        let dup = "event A lambda=1\nevent A lambda=2\ntop A";
        assert!(matches!(parse_model(dup), Err(ParseError::Validation { line: 2, .. })));
        let undeclared = "gate G OR A B\nevent A lambda=1\ntop G";
        assert!(matches!(parse_model(undeclared), Err(ParseError::Validation { line: 1, .. })));
        let bad_grid = "event A lambda=1\ntop A\nconfig mission_time=1 grid_points=1";
        assert!(matches!(parse_model(bad_grid), Err(ParseError::Validation { .. })));
        let syntax = "event A lambda=x\ntop A";
        assert_eq!(parse_model(syntax).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn monotone_examples() {
        assert!(check_monotone(&parse_expr("!A & B").unwrap(), true).is_ok());
        assert!(check_monotone(&parse_expr("!A | B").unwrap(), true).is_err());
        assert!(check_monotone(&parse_expr("!A < !B").unwrap(), true).is_err());
        assert!(check_monotone(&parse_expr("!A & !B").unwrap(), true).is_err());
        let rep = check_monotone(&parse_expr("!A | B").unwrap(), false).unwrap();
        assert_eq!(rep.violations.len(), 1);
        let rep = check_monotone(&parse_expr("!(A < B) & C").unwrap(), true).unwrap();
        assert_eq!(rep.warnings.len(), 1);
    }

    use proptest::prelude::*;

    fn any_expr() -> impl Strategy<Value = TemporalExpr> {
        let leaf = prop_oneof![Just(a("A")), Just(a("B")), Just(a("x_1")), Just(TemporalExpr::True), Just(TemporalExpr::False)];
        leaf.prop_recursive(4, 16, 3, |inner| {
            prop_oneof![
                proptest::collection::vec(inner.clone(), 2..4).prop_map(TemporalExpr::and),
                proptest::collection::vec(inner.clone(), 2..4).prop_map(TemporalExpr::or),
                proptest::collection::vec(inner.clone(), 2..4).prop_map(TemporalExpr::sand),
                (inner.clone(), inner.clone()).prop_map(|(x, y)| TemporalExpr::pand(x, y)),
                inner.prop_map(TemporalExpr::not),
            ]
        })
    }

    fn any_model() -> impl Strategy<Value = (FaultTree, AnalysisConfig)> {
        let kinds = prop_oneof![Just(GateKind::And), Just(GateKind::Or), Just(GateKind::Pand), Just(GateKind::Sand)];
        let gate = (kinds, proptest::collection::vec(0usize..8, 1..4));
        (
            proptest::collection::vec(1e-9f64..1e-3, 3),
            proptest::collection::vec(gate, 1..5),
            (1.0f64..5000.0, 2usize..10_000, proptest::option::of(1usize..6), any::<bool>()),
        )
            .prop_map(|(rates, gates, (mission_time, grid_points, rank_cutoff, drop_sand))| {
                let mut ft = FaultTree::default();
                for (i, l) in rates.iter().enumerate() {
                    let id = format!("E{i}");
                    ft.basic_events.insert(id.clone(), BasicEventData { id, lambda: *l });
                }
                // gate i only references events and earlier gates, so the tree is acyclic
                for (i, (kind, ins)) in gates.iter().enumerate() {
                    let inputs = ins
                        .iter()
                        .map(|&j| if j < 3 || i == 0 { format!("E{}", j % 3) } else { format!("G{}", j % i) })
                        .collect();
                    ft.gates.insert(format!("G{i}"), Gate { kind: *kind, inputs });
                }
                ft.top = format!("G{}", gates.len() - 1);
                (ft, AnalysisConfig { mission_time, grid_points, rank_cutoff, drop_sand })
            })
    }

    proptest! {
        #[test]
        fn expr_round_trip(e in any_expr()) {
            let c = e.canonicalize();
            prop_assert_eq!(parse_expr(&c.to_string()).unwrap(), c);
        }

        #[test]
        fn model_round_trip((ft, cfg) in any_model()) {
            let text = print_model(&ft, &cfg);
            let (ft2, cfg2) = parse_model(&text).unwrap();
            prop_assert_eq!(ft2, ft);
            prop_assert_eq!(cfg2, cfg);
        }
    }
}
