//! Deterministic generators and independent oracles for the test suites.
//!
//! Everything here exists to check the library from the outside: the
//! generators build random instances from a seeded stream, and the oracles
//! (Boolean formula recursion, central finite differences) are deliberately
//! written against the definitions rather than the library internals, so
//! agreement is meaningful. Not part of the supported API.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::automaton::SymbolicAutomaton;
use crate::dynamics::Trace;
use crate::predicate::{Atom, MuFunction, Predicate, RegionDef, RegionTable};
use crate::rng::SplitMix64;
use crate::stl::{Interval, StlFormula};

/// A random axis-aligned box inside `[-2, 2]^dim`, with a minimum side.
pub fn random_box(rng: &mut SplitMix64, dim: usize) -> RegionDef {
    let mut lo = Vec::with_capacity(dim);
    let mut hi = Vec::with_capacity(dim);
    for _ in 0..dim {
        let a = rng.uniform(-2.0, 1.4);
        let side = rng.uniform(0.4, 1.6);
        lo.push(a);
        hi.push((a + side).min(2.0));
    }
    RegionDef::Box { lo, hi, proj: (0..dim).collect() }
}

fn fresh_region(rng: &mut SplitMix64, dim: usize, table: &mut RegionTable) -> String {
    let name = format!("r{}", table.len());
    let region = random_box(rng, dim);
    table.insert(name.clone(), region);
    name
}

fn random_atom(rng: &mut SplitMix64, dim: usize, table: &mut RegionTable) -> Predicate {
    let name = fresh_region(rng, dim, table);
    let atom = if rng.next_f64() < 0.5 {
        Atom::in_region(&name, table)
    } else {
        Atom::not_in_region(&name, table)
    };
    Predicate::Atom(atom.expect("region was just inserted"))
}

/// Random guard: an atom, or a conjunction/disjunction of two atoms.
pub fn random_guard(rng: &mut SplitMix64, dim: usize, table: &mut RegionTable) -> Predicate {
    match (rng.next_u64() % 4) as u8 {
        0 => random_atom(rng, dim, table),
        1 => random_atom(rng, dim, table),
        2 => {
            let l = random_atom(rng, dim, table);
            let r = random_atom(rng, dim, table);
            Predicate::and(l, r)
        }
        _ => {
            let l = random_atom(rng, dim, table);
            let r = random_atom(rng, dim, table);
            Predicate::or(l, r)
        }
    }
}

/// Random nondeterministic automaton with 1–3 guarded transitions per
/// location and random nonempty initial/accepting sets.
pub fn random_automaton(
    rng: &mut SplitMix64,
    n_locations: usize,
    dim: usize,
) -> (SymbolicAutomaton, RegionTable) {
    let mut table = RegionTable::new();
    let mut transitions = Vec::new();
    for from in 0..n_locations {
        let fanout = 1 + (rng.next_u64() % 3) as usize;
        let mut targets = vec![];
        for _ in 0..fanout {
            let to = (rng.next_u64() % n_locations as u64) as usize;
            if targets.contains(&to) {
                continue;
            }
            targets.push(to);
            transitions.push((from, to, random_guard(rng, dim, &mut table)));
        }
    }
    let pick_set = |rng: &mut SplitMix64| -> Vec<usize> {
        let mut set: Vec<usize> =
            (0..n_locations).filter(|_| rng.next_f64() < 0.4).collect();
        if set.is_empty() {
            set.push((rng.next_u64() % n_locations as u64) as usize);
        }
        set
    };
    let initial = pick_set(rng);
    let accepting = pick_set(rng);
    let a = SymbolicAutomaton::new(dim, n_locations, &initial, &accepting, transitions)
        .expect("generated automaton is well-formed");
    (a, table)
}

/// Random deterministic and complete automaton: each location branches on
/// membership in one random box (`in` vs `!in` partition the space).
pub fn random_det_complete_automaton(
    rng: &mut SplitMix64,
    n_locations: usize,
    dim: usize,
) -> (SymbolicAutomaton, RegionTable) {
    let mut table = RegionTable::new();
    let mut transitions = Vec::new();
    for from in 0..n_locations {
        let name = fresh_region(rng, dim, &mut table);
        let j_in = (rng.next_u64() % n_locations as u64) as usize;
        let mut j_out = (rng.next_u64() % n_locations as u64) as usize;
        if j_out == j_in {
            j_out = (j_out + 1) % n_locations;
        }
        transitions.push((from, j_in, Predicate::Atom(Atom::in_region(&name, &table).unwrap())));
        transitions
            .push((from, j_out, Predicate::Atom(Atom::not_in_region(&name, &table).unwrap())));
    }
    let initial = [(rng.next_u64() % n_locations as u64) as usize];
    // proper subset so that the complement is nonempty either way
    let accepting: Vec<usize> = {
        let mut set: Vec<usize> =
            (0..n_locations).filter(|_| rng.next_f64() < 0.5).collect();
        if set.is_empty() {
            set.push(0);
        }
        if set.len() == n_locations {
            set.pop();
        }
        set
    };
    let a = SymbolicAutomaton::new(dim, n_locations, &initial, &accepting, transitions)
        .expect("generated automaton is well-formed")
        .with_flags(true, true);
    (a, table)
}

/// Uniform random trace in `[-2, 2]^dim`.
pub fn random_trace(rng: &mut SplitMix64, len: usize, dim: usize) -> Trace {
    let mut t = Trace::empty(dim);
    let mut x = vec![0.0; dim];
    for _ in 0..len {
        for v in x.iter_mut() {
            *v = rng.uniform(-2.0, 2.0);
        }
        t.push(&x);
    }
    t
}

/// Smallest `|μ(x)|` over every atom of the predicate at `x`: the margin
/// that must stay away from 0 for boundary-free comparisons.
pub fn predicate_min_margin(p: &Predicate, x: &[f64]) -> f64 {
    match p {
        Predicate::True | Predicate::False => f64::INFINITY,
        Predicate::Atom(a) => {
            let v = a.mu().eval(x);
            if v < 0.0 {
                -v
            } else {
                v
            }
        }
        Predicate::And(l, r) | Predicate::Or(l, r) => {
            predicate_min_margin(l, x).min(predicate_min_margin(r, x))
        }
    }
}

/// Smallest atom margin over all guards of the automaton at every state of
/// the trace.
pub fn automaton_min_margin(a: &SymbolicAutomaton, trace: &Trace) -> f64 {
    let mut m = f64::INFINITY;
    for x in trace.states() {
        for g in a.guards() {
            m = m.min(predicate_min_margin(g, x));
        }
    }
    m
}

/// Smallest atom margin of a formula over the whole trace.
pub fn formula_min_margin(f: &StlFormula, trace: &Trace) -> f64 {
    fn atom_margins(f: &StlFormula, trace: &Trace, m: &mut f64) {
        match f {
            StlFormula::Pred(a) => {
                for x in trace.states() {
                    let v = a.mu().eval(x);
                    *m = m.min(if v < 0.0 { -v } else { v });
                }
            }
            StlFormula::Not(x) => atom_margins(x, trace, m),
            StlFormula::And(l, r) | StlFormula::Or(l, r) | StlFormula::Implies(l, r) => {
                atom_margins(l, trace, m);
                atom_margins(r, trace, m);
            }
            StlFormula::Alw(_, x) | StlFormula::Ev(_, x) => atom_margins(x, trace, m),
        }
    }
    let mut m = f64::INFINITY;
    atom_margins(f, trace, &mut m);
    m
}

/// Independent Boolean recursion over the formula: the sign oracle the
/// quantitative semantics are checked against. Truncating window handling
/// mirrors the monitor's (empty Alw window is vacuously true).
pub fn stl_bool(f: &StlFormula, trace: &Trace, t: usize) -> bool {
    match f {
        StlFormula::Pred(a) => a.mu().eval(trace.state(t)) >= 0.0,
        StlFormula::Not(x) => !stl_bool(x, trace, t),
        StlFormula::And(l, r) => stl_bool(l, trace, t) && stl_bool(r, trace, t),
        StlFormula::Or(l, r) => stl_bool(l, trace, t) || stl_bool(r, trace, t),
        StlFormula::Implies(l, r) => !stl_bool(l, trace, t) || stl_bool(r, trace, t),
        StlFormula::Alw(iv, x) => window_steps(iv, trace, t).all(|t2| stl_bool(x, trace, t2)),
        StlFormula::Ev(iv, x) => window_steps(iv, trace, t).any(|t2| stl_bool(x, trace, t2)),
    }
}

fn window_steps(
    iv: &Interval,
    trace: &Trace,
    t: usize,
) -> core::ops::RangeInclusive<usize> {
    let last = trace.len() - 1;
    let start = t + iv.lo;
    let end = iv.hi.map_or(last, |h| (t + h).min(last));
    if start > last {
        1..=0
    } else {
        start..=end
    }
}

/// Random formula of bounded depth over affine and box atoms.
pub fn random_formula(
    rng: &mut SplitMix64,
    depth: usize,
    dim: usize,
    table: &mut RegionTable,
) -> StlFormula {
    if depth == 0 {
        return if rng.next_f64() < 0.5 {
            let mut w = vec![0.0; dim];
            for v in w.iter_mut() {
                *v = rng.uniform(-1.0, 1.0);
            }
            StlFormula::Pred(Atom::affine(w, rng.uniform(-1.0, 1.0)))
        } else {
            let name = fresh_region(rng, dim, table);
            StlFormula::Pred(Atom::in_region(&name, table).unwrap())
        };
    }
    let next = depth - 1;
    match rng.next_u64() % 6 {
        0 => StlFormula::not(random_formula(rng, next, dim, table)),
        1 => StlFormula::and(
            random_formula(rng, next, dim, table),
            random_formula(rng, next, dim, table),
        ),
        2 => StlFormula::or(
            random_formula(rng, next, dim, table),
            random_formula(rng, next, dim, table),
        ),
        3 => StlFormula::implies(
            random_formula(rng, next, dim, table),
            random_formula(rng, next, dim, table),
        ),
        4 => StlFormula::alw(random_interval(rng), random_formula(rng, next, dim, table)),
        _ => StlFormula::ev(random_interval(rng), random_formula(rng, next, dim, table)),
    }
}

fn random_interval(rng: &mut SplitMix64) -> Interval {
    let lo = (rng.next_u64() % 3) as usize;
    match rng.next_u64() % 3 {
        0 => Interval { lo, hi: None },
        _ => Interval { lo, hi: Some(lo + (rng.next_u64() % 4) as usize) },
    }
}

/// Central finite differences with probe step `h`.
pub fn central_diff(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut grad = Vec::with_capacity(x.len());
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let hi = f(&probe);
        probe[i] = x[i] - h;
        let lo = f(&probe);
        probe[i] = x[i];
        grad.push((hi - lo) / (2.0 * h));
    }
    grad
}

/// `|a − b| ≤ tol · max(1, |a|, |b|)`.
pub fn close_rel(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Random predicate tree of bounded depth (for the satisfaction/weight
/// coherence property).
pub fn random_predicate(
    rng: &mut SplitMix64,
    depth: usize,
    dim: usize,
    table: &mut RegionTable,
) -> Predicate {
    if depth == 0 {
        return match rng.next_u64() % 8 {
            0 => Predicate::True,
            1 => Predicate::False,
            _ => random_atom(rng, dim, table),
        };
    }
    match rng.next_u64() % 3 {
        0 => random_atom(rng, dim, table),
        1 => Predicate::and(
            random_predicate(rng, depth - 1, dim, table),
            random_predicate(rng, depth - 1, dim, table),
        ),
        _ => Predicate::or(
            random_predicate(rng, depth - 1, dim, table),
            random_predicate(rng, depth - 1, dim, table),
        ),
    }
}

/// Dyadic carrier values (multiples of 1/256 within a small range) keep
/// every maxplus/minplus sum exact, so the algebraic law suites can assert
/// bit equality.
pub fn dyadic_carrier(rng: &mut SplitMix64, tag: crate::semiring::SemiringTag) -> crate::semiring::Weight {
    use crate::semiring::{SemiringTag, Weight};
    match tag {
        SemiringTag::Boolean => Weight::Num((rng.next_u64() % 2) as f64),
        SemiringTag::MinMax | SemiringTag::MaxPlus => {
            if rng.next_f64() < 0.15 {
                Weight::Bot
            } else {
                Weight::Num(-((rng.next_u64() % 1025) as f64) / 256.0)
            }
        }
        SemiringTag::MinPlus => {
            if rng.next_f64() < 0.15 {
                Weight::Bot
            } else {
                Weight::Num(((rng.next_u64() % 1025) as f64) / 256.0)
            }
        }
    }
}

/// A `MuFunction` reading a random ball, for smooth-gradient tapes.
pub fn random_ball_mu(rng: &mut SplitMix64, dim: usize) -> MuFunction {
    let center = (0..dim).map(|_| rng.uniform(-1.5, 1.5)).collect();
    MuFunction::BallDist {
        center,
        radius: rng.uniform(0.3, 1.5),
        proj: (0..dim).collect(),
    }
}
