//! Discrete-time temporal-logic robustness monitoring.
//!
//! The monitor is the independent yardstick for every planner result: it
//! never touches the tape or the automaton machinery and computes the
//! standard quantitative semantics by direct recursion. A non-negative
//! robustness certifies satisfaction (away from atom boundaries).
//!
//! Formula text extends the guard grammar with temporal operators and
//! implication:
//!
//! ```text
//! formula := imp
//! imp     := or ('->' or)*            (right-associative)
//! or      := and ('|' and)*
//! and     := unary ('&' unary)*
//! unary   := '!' unary | 'G' [win] unary | 'F' [win] unary | primary
//! win     := '[' INT ',' (INT | 'inf') ']'
//! primary := 'true' | 'false' | atom | '(' formula ')'
//! ```
//!
//! `G`/`F` without a window mean `[0, inf]`. Window bounds are discrete
//! step offsets, inclusive on both ends. Unbounded or overlong windows
//! truncate at the trace end (finite-trace semantics); `WindowMode::Strict`
//! instead rejects windows that do not fit.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use crate::dynamics::Trace;
use crate::predicate::{Atom, RegionTable};
use crate::text::{ParseError, Tok, Tokens};

/// Step-indexed interval `[lo, hi]`; `hi = None` means unbounded.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Interval {
    pub lo: usize,
    pub hi: Option<usize>,
}

impl Interval {
    pub const UNBOUNDED: Interval = Interval { lo: 0, hi: None };
}

/// Discrete-time STL formula.
#[derive(Clone, Debug, PartialEq)]
pub enum StlFormula {
    Pred(Atom),
    Not(Box<StlFormula>),
    And(Box<StlFormula>, Box<StlFormula>),
    Or(Box<StlFormula>, Box<StlFormula>),
    Implies(Box<StlFormula>, Box<StlFormula>),
    Alw(Interval, Box<StlFormula>),
    Ev(Interval, Box<StlFormula>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WindowMode {
    /// Clip windows to the trace end; an empty clipped window is vacuous
    /// (`+∞` for Alw, `−∞` for Ev).
    Truncate,
    /// Error when a window does not fit inside the trace.
    Strict,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StlError {
    /// Evaluation time index at or past the trace end.
    OutOfRange { t: usize, len: usize },
    /// Strict mode: a temporal window has no sample inside the trace.
    EmptyWindow { t: usize, lo: usize },
}

impl core::fmt::Display for StlError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            StlError::OutOfRange { t, len } => {
                write!(f, "time index {t} out of range for a {len}-state trace")
            }
            StlError::EmptyWindow { t, lo } => {
                write!(f, "window starting at offset {lo} from step {t} is empty")
            }
        }
    }
}

impl core::error::Error for StlError {}

impl StlFormula {
    pub fn not(inner: StlFormula) -> StlFormula {
        StlFormula::Not(Box::new(inner))
    }

    pub fn and(l: StlFormula, r: StlFormula) -> StlFormula {
        StlFormula::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: StlFormula, r: StlFormula) -> StlFormula {
        StlFormula::Or(Box::new(l), Box::new(r))
    }

    pub fn implies(l: StlFormula, r: StlFormula) -> StlFormula {
        StlFormula::Implies(Box::new(l), Box::new(r))
    }

    pub fn alw(interval: Interval, inner: StlFormula) -> StlFormula {
        StlFormula::Alw(interval, Box::new(inner))
    }

    pub fn ev(interval: Interval, inner: StlFormula) -> StlFormula {
        StlFormula::Ev(interval, Box::new(inner))
    }

    pub fn min_state_dim(&self) -> usize {
        match self {
            StlFormula::Pred(a) => a.mu().min_state_dim(),
            StlFormula::Not(x) => x.min_state_dim(),
            StlFormula::And(l, r) | StlFormula::Or(l, r) | StlFormula::Implies(l, r) => {
                l.min_state_dim().max(r.min_state_dim())
            }
            StlFormula::Alw(_, x) | StlFormula::Ev(_, x) => x.min_state_dim(),
        }
    }

    /// Robustness ρ(φ, ξ, t): signed satisfaction margin at step `t`.
    pub fn robustness(&self, trace: &Trace, t: usize, mode: WindowMode) -> Result<f64, StlError> {
        if t >= trace.len() {
            return Err(StlError::OutOfRange { t, len: trace.len() });
        }
        Ok(match self {
            StlFormula::Pred(a) => a.mu().eval(trace.state(t)),
            StlFormula::Not(x) => -x.robustness(trace, t, mode)?,
            StlFormula::And(l, r) => {
                l.robustness(trace, t, mode)?.min(r.robustness(trace, t, mode)?)
            }
            StlFormula::Or(l, r) => {
                l.robustness(trace, t, mode)?.max(r.robustness(trace, t, mode)?)
            }
            StlFormula::Implies(l, r) => {
                (-l.robustness(trace, t, mode)?).max(r.robustness(trace, t, mode)?)
            }
            StlFormula::Alw(iv, x) => {
                let mut rho = f64::INFINITY;
                for t2 in self.window(iv, trace, t, mode)? {
                    rho = rho.min(x.robustness(trace, t2, mode)?);
                }
                rho
            }
            StlFormula::Ev(iv, x) => {
                let mut rho = f64::NEG_INFINITY;
                for t2 in self.window(iv, trace, t, mode)? {
                    rho = rho.max(x.robustness(trace, t2, mode)?);
                }
                rho
            }
        })
    }

    fn window(
        &self,
        iv: &Interval,
        trace: &Trace,
        t: usize,
        mode: WindowMode,
    ) -> Result<core::ops::RangeInclusive<usize>, StlError> {
        let last = trace.len() - 1;
        let start = t + iv.lo;
        let end_req = iv.hi.map(|h| t + h);
        let end = end_req.map_or(last, |e| e.min(last));
        if start > last || (mode == WindowMode::Strict && end_req.map_or(false, |e| e > last)) {
            if mode == WindowMode::Strict {
                return Err(StlError::EmptyWindow { t, lo: iv.lo });
            }
            // empty window: the range below is empty and keeps the identity
            return Ok(1..=0);
        }
        Ok(start..=end)
    }

    /// Sign test: satisfied iff robustness at step 0 is non-negative.
    pub fn accepts(&self, trace: &Trace) -> Result<bool, StlError> {
        Ok(self.robustness(trace, 0, WindowMode::Truncate)? >= 0.0)
    }
}

/// Parses formula text against the region table.
pub fn parse_formula(text: &str, regions: &RegionTable) -> Result<StlFormula, ParseError> {
    let mut toks = Tokens::lex(text)?;
    let f = parse_imp(&mut toks, regions)?;
    toks.expect_end()?;
    Ok(f)
}

fn parse_imp(toks: &mut Tokens, regions: &RegionTable) -> Result<StlFormula, ParseError> {
    let lhs = parse_or(toks, regions)?;
    if toks.eat(&Tok::Arrow) {
        let rhs = parse_imp(toks, regions)?;
        return Ok(StlFormula::implies(lhs, rhs));
    }
    Ok(lhs)
}

fn parse_or(toks: &mut Tokens, regions: &RegionTable) -> Result<StlFormula, ParseError> {
    let mut acc = parse_and(toks, regions)?;
    while toks.eat(&Tok::Pipe) {
        let rhs = parse_and(toks, regions)?;
        acc = StlFormula::or(acc, rhs);
    }
    Ok(acc)
}

fn parse_and(toks: &mut Tokens, regions: &RegionTable) -> Result<StlFormula, ParseError> {
    let mut acc = parse_unary(toks, regions)?;
    while toks.eat(&Tok::Amp) {
        let rhs = parse_unary(toks, regions)?;
        acc = StlFormula::and(acc, rhs);
    }
    Ok(acc)
}

fn parse_interval(toks: &mut Tokens) -> Result<Interval, ParseError> {
    if !toks.eat(&Tok::LBracket) {
        return Ok(Interval::UNBOUNDED);
    }
    let pos = toks.pos();
    let lo = toks.expect_number()?;
    if lo < 0.0 || libm::floor(lo) != lo {
        return Err(ParseError::new(pos, "window bounds are non-negative integers"));
    }
    toks.expect(Tok::Comma)?;
    let pos = toks.pos();
    let hi = match toks.next() {
        Some(Tok::Ident(id)) if id == "inf" => None,
        Some(Tok::Number(v)) if v >= lo && libm::floor(v) == v => Some(v as usize),
        Some(t) => {
            return Err(ParseError::new(pos, format!("expected an integer >= {lo} or `inf`, found {t}")))
        }
        None => return Err(ParseError::new(pos, "expected a window upper bound")),
    };
    toks.expect(Tok::RBracket)?;
    Ok(Interval { lo: lo as usize, hi })
}

fn parse_unary(toks: &mut Tokens, regions: &RegionTable) -> Result<StlFormula, ParseError> {
    let pos = toks.pos();
    if toks.eat(&Tok::Bang) {
        // `!in(region)` is the guard-grammar atom; `!` before anything else
        // is formula negation
        if matches!(toks.peek(), Some(Tok::Ident(id)) if id == "in") {
            let atom = parse_guard_atom(toks, regions, pos, true)?;
            return Ok(atom);
        }
        let inner = parse_unary(toks, regions)?;
        return Ok(StlFormula::not(inner));
    }
    match toks.peek() {
        Some(Tok::Ident(id)) if id == "G" => {
            toks.next();
            let iv = parse_interval(toks)?;
            let inner = parse_unary(toks, regions)?;
            Ok(StlFormula::alw(iv, inner))
        }
        Some(Tok::Ident(id)) if id == "F" => {
            toks.next();
            let iv = parse_interval(toks)?;
            let inner = parse_unary(toks, regions)?;
            Ok(StlFormula::ev(iv, inner))
        }
        _ => parse_primary(toks, regions),
    }
}

fn parse_primary(toks: &mut Tokens, regions: &RegionTable) -> Result<StlFormula, ParseError> {
    let pos = toks.pos();
    if toks.eat(&Tok::LParen) {
        let inner = parse_imp(toks, regions)?;
        toks.expect(Tok::RParen)?;
        return Ok(inner);
    }
    match toks.peek() {
        Some(Tok::Ident(id)) => match id.as_str() {
            // constants as constant-margin atoms
            "true" => {
                toks.next();
                Ok(StlFormula::Pred(Atom::affine(Vec::new(), 1.0)))
            }
            "false" => {
                toks.next();
                Ok(StlFormula::Pred(Atom::affine(Vec::new(), -1.0)))
            }
            "in" | "dist" | "affine" => parse_guard_atom(toks, regions, pos, false),
            other => Err(ParseError::new(pos, format!("unexpected identifier `{other}`"))),
        },
        Some(t) => Err(ParseError::new(pos, format!("unexpected token {t}"))),
        None => Err(ParseError::new(pos, "unexpected end of input")),
    }
}

fn parse_guard_atom(
    toks: &mut Tokens,
    regions: &RegionTable,
    pos: usize,
    negated_in: bool,
) -> Result<StlFormula, ParseError> {
    let kw = match toks.next() {
        Some(Tok::Ident(id)) => id,
        _ => return Err(ParseError::new(pos, "expected an atom")),
    };
    let region_name = |toks: &mut Tokens| -> Result<(usize, alloc::string::String), ParseError> {
        toks.expect(Tok::LParen)?;
        let p = toks.pos();
        match toks.next() {
            Some(Tok::Ident(name)) => {
                toks.expect(Tok::RParen)?;
                Ok((p, name))
            }
            Some(t) => Err(ParseError::new(p, format!("expected a region name, found {t}"))),
            None => Err(ParseError::new(p, "expected a region name")),
        }
    };
    match kw.as_str() {
        "in" => {
            let (p, name) = region_name(toks)?;
            let atom = if negated_in {
                Atom::not_in_region(&name, regions)
            } else {
                Atom::in_region(&name, regions)
            };
            atom.map(StlFormula::Pred).map_err(|e| ParseError::new(p, format!("{e}")))
        }
        "dist" => {
            let (p, name) = region_name(toks)?;
            toks.expect(Tok::Le)?;
            let r = toks.expect_number()?;
            Atom::dist_within(&name, r, regions)
                .map(StlFormula::Pred)
                .map_err(|e| ParseError::new(p, format!("{e}")))
        }
        "affine" => {
            toks.expect(Tok::LParen)?;
            let mut weights = alloc::vec![toks.expect_number()?];
            while toks.eat(&Tok::Comma) {
                weights.push(toks.expect_number()?);
            }
            toks.expect(Tok::Semi)?;
            let offset = toks.expect_number()?;
            toks.expect(Tok::RParen)?;
            toks.expect(Tok::Ge)?;
            let p = toks.pos();
            if toks.expect_number()? != 0.0 {
                return Err(ParseError::new(p, "affine atoms compare against 0"));
            }
            Ok(StlFormula::Pred(Atom::affine(weights, offset)))
        }
        other => Err(ParseError::new(pos, format!("unexpected identifier `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predicate::RegionDef;
    use alloc::vec;

    fn table() -> RegionTable {
        let mut t = RegionTable::new();
        t.insert(
            "red".into(),
            RegionDef::Box { lo: vec![0.5, -1.5], hi: vec![1.5, -0.5], proj: vec![0, 1] },
        );
        t.insert(
            "blue".into(),
            RegionDef::Box { lo: vec![-0.4, -0.4], hi: vec![0.4, 0.4], proj: vec![0, 1] },
        );
        t
    }

    fn scalar_trace(vals: &[f64]) -> Trace {
        Trace::from_states(vals.iter().map(|&v| vec![v])).unwrap()
    }

    fn x_nonneg() -> StlFormula {
        StlFormula::Pred(Atom::affine(vec![1.0], 0.0))
    }

    #[test]
    fn always_on_constant_trace() {
        let f = StlFormula::alw(Interval::UNBOUNDED, x_nonneg());
        let tr = scalar_trace(&[3.0, 3.0, 3.0]);
        assert_eq!(f.robustness(&tr, 0, WindowMode::Truncate).unwrap(), 3.0);
    }

    #[test]
    fn eventually_takes_the_window_max() {
        let f = StlFormula::ev(Interval { lo: 0, hi: Some(2) }, x_nonneg());
        let tr = scalar_trace(&[-1.0, -1.0, 0.5]);
        assert_eq!(f.robustness(&tr, 0, WindowMode::Truncate).unwrap(), 0.5);
    }

    #[test]
    fn implies_lowers_to_not_or() {
        let f = StlFormula::implies(x_nonneg(), StlFormula::Pred(Atom::affine(vec![1.0], -2.0)));
        let tr = scalar_trace(&[1.0]);
        // max(-1, 1 - 2) = -1
        assert_eq!(f.robustness(&tr, 0, WindowMode::Truncate).unwrap(), -1.0);
        let tr = scalar_trace(&[-0.5]);
        assert_eq!(f.robustness(&tr, 0, WindowMode::Truncate).unwrap(), 0.5);
    }

    #[test]
    fn windows_truncate_at_trace_end() {
        let f = StlFormula::alw(Interval { lo: 0, hi: Some(100) }, x_nonneg());
        let tr = scalar_trace(&[1.0, 2.0]);
        assert_eq!(f.robustness(&tr, 0, WindowMode::Truncate).unwrap(), 1.0);
        assert!(matches!(
            f.robustness(&tr, 0, WindowMode::Strict),
            Err(StlError::EmptyWindow { .. })
        ));
        // window entirely past the end is vacuous for Alw
        let g = StlFormula::alw(Interval { lo: 5, hi: Some(6) }, x_nonneg());
        assert_eq!(g.robustness(&tr, 0, WindowMode::Truncate).unwrap(), f64::INFINITY);
    }

    #[test]
    fn boundary_counts_as_satisfied() {
        let f = StlFormula::alw(Interval::UNBOUNDED, x_nonneg());
        let tr = scalar_trace(&[1.0, 0.0, 2.0]);
        assert!(f.accepts(&tr).unwrap());
        let g = StlFormula::Pred(Atom::affine(Vec::new(), 1.0));
        assert!(g.accepts(&scalar_trace(&[-100.0])).unwrap());
    }

    #[test]
    fn nested_sequencing_formula() {
        let t = table();
        // reach red, then leave it, never entering blue
        let f = parse_formula("F (in(red) & F !in(red)) & G !in(blue)", &t).unwrap();
        let good = Trace::from_states([
            vec![-1.0, -1.0],
            vec![1.0, -1.0],
            vec![1.8, -1.0],
        ])
        .unwrap();
        assert!(f.accepts(&good).unwrap());
        let through_blue =
            Trace::from_states([vec![-1.0, -1.0], vec![0.0, 0.0], vec![1.0, -1.0]]).unwrap();
        assert!(!f.accepts(&through_blue).unwrap());
    }

    #[test]
    fn parser_handles_operators_and_windows() {
        let t = table();
        let f = parse_formula("G[0,4] in(red) -> F[1,3] !in(blue)", &t).unwrap();
        match f {
            StlFormula::Implies(l, r) => {
                assert!(matches!(*l, StlFormula::Alw(Interval { lo: 0, hi: Some(4) }, _)));
                assert!(matches!(*r, StlFormula::Ev(Interval { lo: 1, hi: Some(3) }, _)));
            }
            other => panic!("expected implication, got {other:?}"),
        }
        let f = parse_formula("G[0,inf] true", &t).unwrap();
        assert!(matches!(f, StlFormula::Alw(Interval { lo: 0, hi: None }, _)));
        assert!(parse_formula("G[2,1] true", &t).is_err());
        assert!(parse_formula("F[0.5,2] true", &t).is_err());
    }

    #[test]
    fn formula_negation_and_atom_negation() {
        let t = table();
        let a = parse_formula("!in(red)", &t).unwrap();
        assert!(matches!(a, StlFormula::Pred(_)));
        let b = parse_formula("!(in(red) | in(blue))", &t).unwrap();
        assert!(matches!(b, StlFormula::Not(_)));
        let c = parse_formula("! G in(red)", &t).unwrap();
        assert!(matches!(c, StlFormula::Not(_)));
    }

    #[test]
    fn monotone_in_atom_margins() {
        let f = StlFormula::alw(
            Interval::UNBOUNDED,
            StlFormula::ev(Interval { lo: 0, hi: Some(2) }, x_nonneg()),
        );
        let base = scalar_trace(&[-1.0, 0.5, -0.25, 0.75]);
        let bumped = scalar_trace(&[-1.0, 0.6, -0.25, 0.75]);
        let r0 = f.robustness(&base, 0, WindowMode::Truncate).unwrap();
        let r1 = f.robustness(&bumped, 0, WindowMode::Truncate).unwrap();
        assert!(r1 >= r0);
    }
}
