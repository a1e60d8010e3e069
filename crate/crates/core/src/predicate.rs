//! Guard predicates over the system state.
//!
//! Predicates follow the grammar `φ := true | false | μ(x) ≥ 0 | φ ∧ φ |
//! φ ∨ φ`; there is no negation node, negation lives inside the atom
//! function μ. The concrete text grammar is
//!
//! ```text
//! expr   := term ('|' term)*
//! term   := factor ('&' factor)*
//! factor := 'true' | 'false' | atom | '(' expr ')'
//! atom   := ['!'] 'in' '(' IDENT ')'
//!         | 'dist' '(' IDENT ')' '<=' NUMBER
//!         | 'affine' '(' NUMBER (',' NUMBER)* ';' NUMBER ')' '>=' '0'
//! ```
//!
//! where region identifiers resolve against a [`RegionTable`]. `!in(R)`
//! lowers to a negated signed distance, so the complement is closed:
//! boundary points count as outside.
//!
//! Besides the Boolean `models` relation ([`Predicate::eval_bool`]), a
//! predicate evaluates to a semiring weight ([`Predicate::eval_weight`]):
//! `true ↦ 1̃`, `false ↦ 0̃`, `∧ ↦ ⊗`, `∨ ↦ ⊕`, and a satisfied atom maps
//! to 1̃ while a violated one carries its margin μ(x) into the carrier
//! (`μ` for the ≤0 carriers, `−μ` as a cost in minplus, 0̃ in boolean).

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::semiring::{SemiringTag, Weight};
use crate::tape::{NodeId, Tape};
use crate::text::{Tok, Tokens};

pub use crate::text::ParseError;

/// Named workspace region used by `in`/`dist` atoms.
#[derive(Clone, Debug, PartialEq)]
pub enum RegionDef {
    /// Axis-aligned box over the projected state dimensions.
    Box { lo: Vec<f64>, hi: Vec<f64>, proj: Vec<usize> },
    /// Euclidean ball over the projected state dimensions.
    Ball { center: Vec<f64>, radius: f64, proj: Vec<usize> },
}

impl RegionDef {
    pub fn proj(&self) -> &[usize] {
        match self {
            RegionDef::Box { proj, .. } | RegionDef::Ball { proj, .. } => proj,
        }
    }

    /// Center point, used by `dist` atoms.
    pub fn center(&self) -> Vec<f64> {
        match self {
            RegionDef::Box { lo, hi, .. } => {
                lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect()
            }
            RegionDef::Ball { center, .. } => center.clone(),
        }
    }
}

pub type RegionTable = BTreeMap<String, RegionDef>;

/// Scalar, piecewise-differentiable atom function μ: Sⁿ → ℝ.
#[derive(Clone, Debug, PartialEq)]
pub enum MuFunction {
    /// `w · x + b` over the leading `w.len()` state dimensions.
    Affine { weights: Vec<f64>, offset: f64 },
    /// Signed distance to a box: positive inside, zero on the boundary,
    /// negative outside; `min_d min(x_d − lo_d, hi_d − x_d)` over `proj`.
    BoxSignedDist { lo: Vec<f64>, hi: Vec<f64>, proj: Vec<usize> },
    /// `radius − ‖proj(x) − center‖₂`.
    BallDist { center: Vec<f64>, radius: f64, proj: Vec<usize> },
    /// `−inner(x)`, used for avoidance atoms.
    Negated(Box<MuFunction>),
}

impl MuFunction {
    /// Smallest state dimension this function can be evaluated on.
    pub fn min_state_dim(&self) -> usize {
        match self {
            MuFunction::Affine { weights, .. } => weights.len(),
            MuFunction::BoxSignedDist { proj, .. } | MuFunction::BallDist { proj, .. } => {
                proj.iter().map(|d| d + 1).max().unwrap_or(0)
            }
            MuFunction::Negated(inner) => inner.min_state_dim(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            MuFunction::Affine { weights, offset } => {
                let mut acc = *offset;
                for (i, &w) in weights.iter().enumerate() {
                    if w != 0.0 {
                        acc += w * x[i];
                    }
                }
                acc
            }
            MuFunction::BoxSignedDist { lo, hi, proj } => {
                let mut acc = f64::INFINITY;
                for (k, &d) in proj.iter().enumerate() {
                    acc = acc.min((x[d] - lo[k]).min(hi[k] - x[d]));
                }
                acc
            }
            MuFunction::BallDist { center, radius, proj } => {
                let mut sq = 0.0;
                for (k, &d) in proj.iter().enumerate() {
                    let diff = x[d] - center[k];
                    sq += diff * diff;
                }
                radius - libm::sqrt(sq)
            }
            MuFunction::Negated(inner) => -inner.eval(x),
        }
    }

    /// Records μ(x) on the tape; mirrors [`MuFunction::eval`] operation for
    /// operation so the two routes agree bit-exactly.
    pub fn eval_nodes(&self, tape: &mut Tape, x: &[NodeId]) -> NodeId {
        match self {
            MuFunction::Affine { weights, offset } => {
                let mut acc = tape.constant(*offset);
                for (i, &w) in weights.iter().enumerate() {
                    if w != 0.0 {
                        let c = tape.constant(w);
                        let term = tape.mul(c, x[i]);
                        acc = tape.add(acc, term);
                    }
                }
                acc
            }
            MuFunction::BoxSignedDist { lo, hi, proj } => {
                let mut acc = None;
                for (k, &d) in proj.iter().enumerate() {
                    let lo_c = tape.constant(lo[k]);
                    let hi_c = tape.constant(hi[k]);
                    let a = tape.sub(x[d], lo_c);
                    let b = tape.sub(hi_c, x[d]);
                    let m = tape.min(a, b);
                    acc = Some(match acc {
                        None => m,
                        Some(prev) => tape.min(prev, m),
                    });
                }
                acc.expect("box over at least one dimension")
            }
            MuFunction::BallDist { center, radius, proj } => {
                let mut sq = None;
                for (k, &d) in proj.iter().enumerate() {
                    let c = tape.constant(center[k]);
                    let diff = tape.sub(x[d], c);
                    let term = tape.mul(diff, diff);
                    sq = Some(match sq {
                        None => term,
                        Some(prev) => tape.add(prev, term),
                    });
                }
                let sq = sq.expect("ball over at least one dimension");
                let norm = tape.sqrt(sq);
                let r = tape.constant(*radius);
                tape.sub(r, norm)
            }
            MuFunction::Negated(inner) => {
                let v = inner.eval_nodes(tape, x);
                tape.neg(v)
            }
        }
    }
}

/// An atom `μ(x) ≥ 0` carrying its canonical guard-grammar spelling.
#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    mu: MuFunction,
    text: String,
}

/// A region name that does not resolve against the region table.
#[derive(Clone, Debug, PartialEq)]
pub struct UnknownRegion(pub String);

impl fmt::Display for UnknownRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown region `{}`", self.0)
    }
}

impl core::error::Error for UnknownRegion {}

impl Atom {
    pub fn mu(&self) -> &MuFunction {
        &self.mu
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    fn region_mu(name: &str, regions: &RegionTable) -> Result<MuFunction, UnknownRegion> {
        match regions.get(name) {
            Some(RegionDef::Box { lo, hi, proj }) => Ok(MuFunction::BoxSignedDist {
                lo: lo.clone(),
                hi: hi.clone(),
                proj: proj.clone(),
            }),
            Some(RegionDef::Ball { center, radius, proj }) => Ok(MuFunction::BallDist {
                center: center.clone(),
                radius: *radius,
                proj: proj.clone(),
            }),
            None => Err(UnknownRegion(name.into())),
        }
    }

    /// `in(name)`: membership with μ = signed distance into the region.
    pub fn in_region(name: &str, regions: &RegionTable) -> Result<Atom, UnknownRegion> {
        Ok(Atom { mu: Self::region_mu(name, regions)?, text: format!("in({name})") })
    }

    /// `!in(name)`: μ = −signed distance, so the boundary counts as outside.
    pub fn not_in_region(name: &str, regions: &RegionTable) -> Result<Atom, UnknownRegion> {
        Ok(Atom {
            mu: MuFunction::Negated(Box::new(Self::region_mu(name, regions)?)),
            text: format!("!in({name})"),
        })
    }

    /// `dist(name) <= r`: μ = r − distance to the region center.
    pub fn dist_within(name: &str, r: f64, regions: &RegionTable) -> Result<Atom, UnknownRegion> {
        let region = regions.get(name).ok_or_else(|| UnknownRegion(name.into()))?;
        Ok(Atom {
            mu: MuFunction::BallDist {
                center: region.center(),
                radius: r,
                proj: region.proj().to_vec(),
            },
            text: format!("dist({name}) <= {r}"),
        })
    }

    /// `affine(w0, …, wk; b) >= 0`.
    pub fn affine(weights: Vec<f64>, offset: f64) -> Atom {
        let mut text = String::from("affine(");
        for (i, w) in weights.iter().enumerate() {
            if i > 0 {
                text.push_str(", ");
            }
            text.push_str(&format!("{w}"));
        }
        text.push_str(&format!("; {offset}) >= 0"));
        Atom { mu: MuFunction::Affine { weights, offset }, text }
    }
}

/// Predicate AST: `true | false | atom | and | or`.
#[derive(Clone, Debug, PartialEq)]
pub enum Predicate {
    True,
    False,
    Atom(Atom),
    And(Box<Predicate>, Box<Predicate>),
    Or(Box<Predicate>, Box<Predicate>),
}

impl Predicate {
    pub fn and(l: Predicate, r: Predicate) -> Predicate {
        Predicate::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: Predicate, r: Predicate) -> Predicate {
        Predicate::Or(Box::new(l), Box::new(r))
    }

    /// Conjunction of a list, `true` when empty.
    pub fn all(preds: impl IntoIterator<Item = Predicate>) -> Predicate {
        let mut it = preds.into_iter();
        match it.next() {
            None => Predicate::True,
            Some(first) => it.fold(first, Predicate::and),
        }
    }

    /// Disjunction of a list, `false` when empty.
    pub fn any(preds: impl IntoIterator<Item = Predicate>) -> Predicate {
        let mut it = preds.into_iter();
        match it.next() {
            None => Predicate::False,
            Some(first) => it.fold(first, Predicate::or),
        }
    }

    pub fn min_state_dim(&self) -> usize {
        match self {
            Predicate::True | Predicate::False => 0,
            Predicate::Atom(a) => a.mu.min_state_dim(),
            Predicate::And(l, r) | Predicate::Or(l, r) => {
                l.min_state_dim().max(r.min_state_dim())
            }
        }
    }

    /// The models relation `x ⊨ φ`.
    pub fn eval_bool(&self, x: &[f64]) -> bool {
        match self {
            Predicate::True => true,
            Predicate::False => false,
            Predicate::Atom(a) => a.mu.eval(x) >= 0.0,
            Predicate::And(l, r) => l.eval_bool(x) && r.eval_bool(x),
            Predicate::Or(l, r) => l.eval_bool(x) || r.eval_bool(x),
        }
    }

    /// Generalized weight λ(x, φ) in the given semiring.
    pub fn eval_weight(&self, x: &[f64], tag: SemiringTag) -> Weight {
        match self {
            Predicate::True => tag.one(),
            Predicate::False => tag.zero(),
            Predicate::Atom(a) => atom_weight(a.mu.eval(x), tag),
            Predicate::And(l, r) => tag.mul(l.eval_weight(x, tag), r.eval_weight(x, tag)),
            Predicate::Or(l, r) => tag.add(l.eval_weight(x, tag), r.eval_weight(x, tag)),
        }
    }

    /// Records λ(x, φ) on the tape.
    pub fn eval_weight_nodes(&self, tape: &mut Tape, x: &[NodeId]) -> NodeId {
        match self {
            Predicate::True => match tape.tag().one() {
                Weight::Num(v) => tape.constant(v),
                Weight::Bot => unreachable!("1̃ is always finite"),
            },
            Predicate::False => tape.zero_const(),
            Predicate::Atom(a) => {
                let mu = a.mu.eval_nodes(tape, x);
                match tape.tag() {
                    SemiringTag::Boolean => tape.step(mu),
                    SemiringTag::MinMax | SemiringTag::MaxPlus => {
                        let zero = tape.constant(0.0);
                        tape.min(mu, zero)
                    }
                    SemiringTag::MinPlus => {
                        let neg = tape.neg(mu);
                        let zero = tape.constant(0.0);
                        tape.max(neg, zero)
                    }
                }
            }
            Predicate::And(l, r) => {
                let lw = l.eval_weight_nodes(tape, x);
                let rw = r.eval_weight_nodes(tape, x);
                tape.sr_mul(lw, rw)
            }
            Predicate::Or(l, r) => {
                let lw = l.eval_weight_nodes(tape, x);
                let rw = r.eval_weight_nodes(tape, x);
                tape.sr_add(lw, rw)
            }
        }
    }
}

/// λ of a bare atom: 1̃ when satisfied, the margin mapped into the carrier
/// when violated.
fn atom_weight(mu: f64, tag: SemiringTag) -> Weight {
    match tag {
        SemiringTag::Boolean => Weight::Num(if mu >= 0.0 { 1.0 } else { 0.0 }),
        SemiringTag::MinMax | SemiringTag::MaxPlus => {
            Weight::Num(if mu >= 0.0 { 0.0 } else { mu })
        }
        SemiringTag::MinPlus => Weight::Num(if mu >= 0.0 { 0.0 } else { -mu }),
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_prec(self, false, f)
    }
}

fn fmt_prec(p: &Predicate, inside_and: bool, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match p {
        Predicate::True => f.write_str("true"),
        Predicate::False => f.write_str("false"),
        Predicate::Atom(a) => f.write_str(&a.text),
        Predicate::And(l, r) => {
            fmt_prec(l, true, f)?;
            f.write_str(" & ")?;
            fmt_prec(r, true, f)
        }
        Predicate::Or(l, r) => {
            if inside_and {
                f.write_str("(")?;
            }
            fmt_prec(l, false, f)?;
            f.write_str(" | ")?;
            fmt_prec(r, false, f)?;
            if inside_and {
                f.write_str(")")?;
            }
            Ok(())
        }
    }
}

/// Parses guard text against the region table.
///
/// Printing the result and parsing it again is a fixed point.
pub fn parse_predicate(text: &str, regions: &RegionTable) -> Result<Predicate, ParseError> {
    let mut toks = Tokens::lex(text)?;
    let p = parse_expr(&mut toks, regions)?;
    toks.expect_end()?;
    Ok(p)
}

fn parse_expr(toks: &mut Tokens, regions: &RegionTable) -> Result<Predicate, ParseError> {
    let mut acc = parse_term(toks, regions)?;
    while toks.eat(&Tok::Pipe) {
        let rhs = parse_term(toks, regions)?;
        acc = Predicate::or(acc, rhs);
    }
    Ok(acc)
}

fn parse_term(toks: &mut Tokens, regions: &RegionTable) -> Result<Predicate, ParseError> {
    let mut acc = parse_factor(toks, regions)?;
    while toks.eat(&Tok::Amp) {
        let rhs = parse_factor(toks, regions)?;
        acc = Predicate::and(acc, rhs);
    }
    Ok(acc)
}

fn parse_factor(toks: &mut Tokens, regions: &RegionTable) -> Result<Predicate, ParseError> {
    let pos = toks.pos();
    if toks.eat(&Tok::LParen) {
        let inner = parse_expr(toks, regions)?;
        toks.expect(Tok::RParen)?;
        return Ok(inner);
    }
    if toks.eat(&Tok::Bang) {
        return parse_in_atom(toks, regions, true);
    }
    match toks.peek() {
        Some(Tok::Ident(id)) => match id.as_str() {
            "true" => {
                toks.next();
                Ok(Predicate::True)
            }
            "false" => {
                toks.next();
                Ok(Predicate::False)
            }
            "in" => parse_in_atom(toks, regions, false),
            "dist" => parse_dist_atom(toks, regions),
            "affine" => parse_affine_atom(toks),
            other => Err(ParseError::new(pos, format!("unexpected identifier `{other}`"))),
        },
        Some(t) => Err(ParseError::new(pos, format!("unexpected token {t}"))),
        None => Err(ParseError::new(pos, "unexpected end of input")),
    }
}

fn parse_region_name(toks: &mut Tokens) -> Result<(usize, String), ParseError> {
    toks.expect(Tok::LParen)?;
    let pos = toks.pos();
    let name = match toks.next() {
        Some(Tok::Ident(name)) => name,
        Some(t) => return Err(ParseError::new(pos, format!("expected a region name, found {t}"))),
        None => return Err(ParseError::new(pos, "expected a region name")),
    };
    toks.expect(Tok::RParen)?;
    Ok((pos, name))
}

fn parse_in_atom(
    toks: &mut Tokens,
    regions: &RegionTable,
    negated: bool,
) -> Result<Predicate, ParseError> {
    let kw = toks.pos();
    match toks.next() {
        Some(Tok::Ident(id)) if id == "in" => {}
        _ => return Err(ParseError::new(kw, "expected `in` after `!`")),
    }
    let (pos, name) = parse_region_name(toks)?;
    let atom = if negated {
        Atom::not_in_region(&name, regions)
    } else {
        Atom::in_region(&name, regions)
    };
    atom.map(Predicate::Atom).map_err(|e| ParseError::new(pos, format!("{e}")))
}

fn parse_dist_atom(toks: &mut Tokens, regions: &RegionTable) -> Result<Predicate, ParseError> {
    toks.next(); // `dist`
    let (pos, name) = parse_region_name(toks)?;
    toks.expect(Tok::Le)?;
    let r = toks.expect_number()?;
    Atom::dist_within(&name, r, regions)
        .map(Predicate::Atom)
        .map_err(|e| ParseError::new(pos, format!("{e}")))
}

fn parse_affine_atom(toks: &mut Tokens) -> Result<Predicate, ParseError> {
    toks.next(); // `affine`
    toks.expect(Tok::LParen)?;
    let mut weights = alloc::vec![toks.expect_number()?];
    while toks.eat(&Tok::Comma) {
        weights.push(toks.expect_number()?);
    }
    toks.expect(Tok::Semi)?;
    let offset = toks.expect_number()?;
    toks.expect(Tok::RParen)?;
    toks.expect(Tok::Ge)?;
    let pos = toks.pos();
    let rhs = toks.expect_number()?;
    if rhs != 0.0 {
        return Err(ParseError::new(pos, "affine atoms compare against 0"));
    }
    Ok(Predicate::Atom(Atom::affine(weights, offset)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn table() -> RegionTable {
        let mut t = RegionTable::new();
        t.insert(
            "red".into(),
            RegionDef::Box { lo: vec![-1.0, -1.0], hi: vec![1.0, 1.0], proj: vec![0, 1] },
        );
        t.insert(
            "blue".into(),
            RegionDef::Box { lo: vec![2.0, 2.0], hi: vec![3.0, 3.0], proj: vec![0, 1] },
        );
        t.insert(
            "green".into(),
            RegionDef::Ball { center: vec![0.0, 2.0], radius: 0.5, proj: vec![0, 1] },
        );
        t
    }

    #[test]
    fn parses_literals() {
        assert_eq!(parse_predicate("true", &table()).unwrap(), Predicate::True);
        assert_eq!(parse_predicate("false", &table()).unwrap(), Predicate::False);
    }

    #[test]
    fn parses_conjunction_with_negated_membership() {
        let p = parse_predicate("in(red) & !in(blue)", &table()).unwrap();
        match &p {
            Predicate::And(l, r) => {
                assert!(matches!(
                    &**l,
                    Predicate::Atom(a) if matches!(a.mu(), MuFunction::BoxSignedDist { .. })
                ));
                assert!(matches!(
                    &**r,
                    Predicate::Atom(a) if matches!(a.mu(), MuFunction::Negated(_))
                ));
            }
            other => panic!("expected And, got {other:?}"),
        }
    }

    #[test]
    fn parses_disjunction() {
        let p = parse_predicate("in(red) | in(green)", &table()).unwrap();
        assert!(matches!(p, Predicate::Or(_, _)));
    }

    #[test]
    fn unknown_region_is_reported_with_position() {
        let err = parse_predicate("in(orange)", &table()).unwrap_err();
        assert!(err.message.contains("orange"), "{err}");
        assert_eq!(err.pos, 3);
    }

    #[test]
    fn bool_eval_on_box() {
        let p = parse_predicate("in(red)", &table()).unwrap();
        assert!(p.eval_bool(&[0.0, 0.0]));
        assert!(!p.eval_bool(&[2.0, 0.0]));
        assert!(Predicate::True.eval_bool(&[123.0, 0.0]));
    }

    #[test]
    fn violated_atom_carries_its_margin() {
        let t = table();
        let p = parse_predicate("in(red)", &t).unwrap();
        // x = (2, 0): signed distance is -1
        let w = p.eval_weight(&[2.0, 0.0], SemiringTag::MaxPlus);
        assert_eq!(w, Weight::Num(-1.0));
        // satisfied atom is 1̃
        assert_eq!(p.eval_weight(&[0.0, 0.0], SemiringTag::MaxPlus), Weight::Num(0.0));
        // minplus maps the violation to a positive cost
        assert_eq!(p.eval_weight(&[2.0, 0.0], SemiringTag::MinPlus), Weight::Num(1.0));
    }

    #[test]
    fn false_maps_to_semiring_zero() {
        assert_eq!(Predicate::False.eval_weight(&[0.0], SemiringTag::MaxPlus), Weight::Bot);
        assert_eq!(
            Predicate::False.eval_weight(&[0.0], SemiringTag::Boolean),
            Weight::Num(0.0)
        );
    }

    #[test]
    fn and_or_combine_with_the_semiring_ops() {
        let a = Predicate::Atom(Atom::affine(vec![1.0], -0.5)); // mu = x - 0.5
        let b = Predicate::Atom(Atom::affine(vec![1.0], -0.25)); // mu = x - 0.25
        let p = Predicate::and(a.clone(), b.clone());
        let x = [0.0];
        // margins are -0.5 and -0.25
        assert_eq!(p.eval_weight(&x, SemiringTag::MaxPlus), Weight::Num(-0.75));
        assert_eq!(p.eval_weight(&x, SemiringTag::MinMax), Weight::Num(-0.5));
        let q = Predicate::or(a, b);
        assert_eq!(q.eval_weight(&x, SemiringTag::MaxPlus), Weight::Num(-0.25));
    }

    #[test]
    fn box_signed_distance_signs() {
        let t = table();
        let p = parse_predicate("in(red)", &t).unwrap();
        if let Predicate::Atom(a) = &p {
            assert!(a.mu().eval(&[0.3, -0.3]) > 0.0);
            assert!(a.mu().eval(&[1.5, 0.0]) < 0.0);
            assert_eq!(a.mu().eval(&[1.0, 0.0]), 0.0);
        } else {
            panic!("expected atom");
        }
    }

    #[test]
    fn print_parse_is_a_fixed_point() {
        let t = table();
        for src in [
            "true",
            "in(red) & !in(blue)",
            "in(red) | in(green) & !in(blue)",
            "(in(red) | in(green)) & !in(blue)",
            "dist(green) <= 0.25",
            "affine(1, -1.4; -5) >= 0",
            "affine(-0.5, 0, 2; 0.125) >= 0 | false",
        ] {
            let p = parse_predicate(src, &t).unwrap();
            let printed = p.to_string();
            let reparsed = parse_predicate(&printed, &t).unwrap();
            assert_eq!(p, reparsed, "not a fixed point: {src} -> {printed}");
            assert_eq!(printed, reparsed.to_string());
        }
    }

    #[test]
    fn tape_weight_matches_plain_weight() {
        let t = table();
        let p =
            parse_predicate("(in(red) | in(green)) & !in(blue) & dist(green) <= 1.5", &t).unwrap();
        for tag in SemiringTag::ALL {
            for x in [[0.2, -0.4], [2.5, 2.5], [0.0, 1.8], [-3.0, 0.0]] {
                let plain = p.eval_weight(&x, tag);
                let mut tape = Tape::new(tag);
                let xs: Vec<NodeId> = x.iter().map(|&v| tape.input(v)).collect();
                let node = p.eval_weight_nodes(&mut tape, &xs);
                assert_eq!(tape.value(node), plain, "tag {tag} x {x:?}");
            }
        }
    }
}
