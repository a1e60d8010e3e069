//! Symbolic automata and their matrix operators.
//!
//! A symbolic automaton has a finite location set `Q`, initial and accepting
//! subsets, and a partial guard map `Δ: Q × Q → Predicate`; absent pairs
//! mean the guard `false` (no transition). Reading a state trace
//! `ξ = (x₀, …, x_l)` induces runs: location sequences `(q₀, …, q_{l+1})`
//! whose every step satisfies its guard. A trace is accepted when some run
//! starting in an initial location ends in an accepting one.
//!
//! For a semiring, the automaton becomes the matrix operator
//! `Ae(x)_ij = λ(x, Δ(q_i, q_j))`, and the trajectory weight is
//!
//! ```text
//! w(ξ) = αᵀ · Ae(x₀) · Ae(x₁) ⋯ Ae(x_l) · β
//! ```
//!
//! with α, β the indicator vectors of the initial and accepting sets. By
//! distributivity this equals the ⊕-sum over all runs of the ⊗-product of
//! step weights, which [`SymbolicAutomaton::enumerate_runs`] checks by brute
//! force on small instances.
//!
//! Guards are interned: distinct transition pairs sharing a guard evaluate
//! it once per state, both in plain evaluation and on the tape.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;

use crate::dynamics::Trace;
use crate::matrix::{vec_mat, ShapeError, WMatrix, WVector};
use crate::predicate::{Atom, Predicate, RegionTable, UnknownRegion};
use crate::rng::SplitMix64;
use crate::semiring::{SemiringTag, Weight};
use crate::tape::{NodeId, Tape};

/// Hard ceiling on constructed location counts.
pub const LOCATION_CAP: usize = 10_000;

/// Default ceiling for run enumeration (`|Q|^(|ξ|+1)` and the actual number
/// of runs must stay below the cap passed to the oracle calls).
pub const DEFAULT_RUN_CAP: u64 = 10_000_000;

#[derive(Clone, Debug, PartialEq)]
pub enum AutomatonError {
    EmptyInitial,
    EmptyAccepting,
    BadLocation { index: usize, n_locations: usize },
    DuplicateTransition { from: usize, to: usize },
    GuardDimension { from: usize, to: usize, needs: usize, state_dim: usize },
    StateDimMismatch { left: usize, right: usize },
    CapExceeded { bound: u64, cap: u64 },
    TooManyLocations { requested: usize },
    NotComplementable(String),
    UnknownRegion(String),
    BadDwell { goal: String },
    Shape(ShapeError),
}

impl fmt::Display for AutomatonError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AutomatonError::EmptyInitial => f.write_str("initial location set is empty"),
            AutomatonError::EmptyAccepting => f.write_str("accepting location set is empty"),
            AutomatonError::BadLocation { index, n_locations } => {
                write!(f, "location {index} out of range (|Q| = {n_locations})")
            }
            AutomatonError::DuplicateTransition { from, to } => {
                write!(f, "duplicate transition ({from}, {to})")
            }
            AutomatonError::GuardDimension { from, to, needs, state_dim } => write!(
                f,
                "guard on ({from}, {to}) reads dimension {needs} but the state has {state_dim}"
            ),
            AutomatonError::StateDimMismatch { left, right } => {
                write!(f, "state dimensions differ: {left} vs {right}")
            }
            AutomatonError::CapExceeded { bound, cap } => {
                write!(f, "run enumeration bound {bound} exceeds cap {cap}")
            }
            AutomatonError::TooManyLocations { requested } => {
                write!(f, "construction needs {requested} locations (cap {LOCATION_CAP})")
            }
            AutomatonError::NotComplementable(why) => {
                write!(f, "cannot complement: {why}")
            }
            AutomatonError::UnknownRegion(name) => write!(f, "unknown region `{name}`"),
            AutomatonError::BadDwell { goal } => {
                write!(f, "goal `{goal}` needs dwell >= 1")
            }
            AutomatonError::Shape(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for AutomatonError {}

impl From<ShapeError> for AutomatonError {
    fn from(e: ShapeError) -> Self {
        AutomatonError::Shape(e)
    }
}

impl From<UnknownRegion> for AutomatonError {
    fn from(e: UnknownRegion) -> Self {
        AutomatonError::UnknownRegion(e.0)
    }
}

/// One run induced by a trace: `|ξ| + 1` locations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Run {
    pub locations: Vec<usize>,
}

impl Run {
    pub fn last(&self) -> usize {
        *self.locations.last().expect("runs are never empty")
    }
}

/// Result of sampling-based determinism/completeness verification.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpotCheck {
    /// Every sampled (location, state) had at most one enabled successor.
    pub deterministic: bool,
    /// Every sampled (location, state) had at least one enabled successor.
    pub complete: bool,
}

#[derive(Clone, Debug)]
struct Transition {
    from: usize,
    to: usize,
    guard: usize,
}

/// A symbolic automaton over state vectors in `ℝ^state_dim`.
#[derive(Clone, Debug)]
pub struct SymbolicAutomaton {
    state_dim: usize,
    n_locations: usize,
    initial: Vec<usize>,
    accepting: Vec<usize>,
    guards: Vec<Predicate>,
    /// sorted by (to, from); `in_ranges[j]` indexes the transitions into `j`
    transitions: Vec<Transition>,
    in_ranges: Vec<Range<usize>>,
    deterministic: bool,
    complete: bool,
}

impl SymbolicAutomaton {
    /// Builds an automaton, interning guards and validating indices. The
    /// determinism/completeness flags start unset; see
    /// [`SymbolicAutomaton::with_flags`] and [`SymbolicAutomaton::spot_check`].
    pub fn new(
        state_dim: usize,
        n_locations: usize,
        initial: &[usize],
        accepting: &[usize],
        transitions: impl IntoIterator<Item = (usize, usize, Predicate)>,
    ) -> Result<Self, AutomatonError> {
        if initial.is_empty() {
            return Err(AutomatonError::EmptyInitial);
        }
        if accepting.is_empty() {
            return Err(AutomatonError::EmptyAccepting);
        }
        Self::new_unchecked_sets(state_dim, n_locations, initial, accepting, transitions)
    }

    /// As `new`, but allows an empty accepting set (produced by
    /// complementation of an automaton accepting everything).
    fn new_unchecked_sets(
        state_dim: usize,
        n_locations: usize,
        initial: &[usize],
        accepting: &[usize],
        transitions: impl IntoIterator<Item = (usize, usize, Predicate)>,
    ) -> Result<Self, AutomatonError> {
        if n_locations > LOCATION_CAP {
            return Err(AutomatonError::TooManyLocations { requested: n_locations });
        }
        let check_loc = |index: usize| {
            if index >= n_locations {
                Err(AutomatonError::BadLocation { index, n_locations })
            } else {
                Ok(())
            }
        };
        let mut initial = initial.to_vec();
        initial.sort_unstable();
        initial.dedup();
        let mut accepting = accepting.to_vec();
        accepting.sort_unstable();
        accepting.dedup();
        for &i in initial.iter().chain(&accepting) {
            check_loc(i)?;
        }

        let mut guards: Vec<Predicate> = Vec::new();
        let mut interned: BTreeMap<String, usize> = BTreeMap::new();
        let mut trs: Vec<Transition> = Vec::new();
        let mut seen: BTreeMap<(usize, usize), ()> = BTreeMap::new();
        for (from, to, guard) in transitions {
            check_loc(from)?;
            check_loc(to)?;
            if seen.insert((from, to), ()).is_some() {
                return Err(AutomatonError::DuplicateTransition { from, to });
            }
            // structurally false guards mean "no transition"
            if guard == Predicate::False {
                continue;
            }
            let needs = guard.min_state_dim();
            if needs > state_dim {
                return Err(AutomatonError::GuardDimension { from, to, needs, state_dim });
            }
            let key = guard.to_string();
            let id = *interned.entry(key).or_insert_with(|| {
                guards.push(guard);
                guards.len() - 1
            });
            trs.push(Transition { from, to, guard: id });
        }
        trs.sort_unstable_by_key(|t| (t.to, t.from));
        let mut in_ranges = vec![0..0; n_locations];
        let mut start = 0;
        for j in 0..n_locations {
            let mut end = start;
            while end < trs.len() && trs[end].to == j {
                end += 1;
            }
            in_ranges[j] = start..end;
            start = end;
        }

        Ok(SymbolicAutomaton {
            state_dim,
            n_locations,
            initial,
            accepting,
            guards,
            transitions: trs,
            in_ranges,
            deterministic: false,
            complete: false,
        })
    }

    /// Claims the determinism/completeness flags. Claims are verifiable by
    /// sampling with [`SymbolicAutomaton::spot_check`].
    pub fn with_flags(mut self, deterministic: bool, complete: bool) -> Self {
        self.deterministic = deterministic;
        self.complete = complete;
        self
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn n_locations(&self) -> usize {
        self.n_locations
    }

    pub fn initial(&self) -> &[usize] {
        &self.initial
    }

    pub fn accepting(&self) -> &[usize] {
        &self.accepting
    }

    pub fn is_accepting(&self, loc: usize) -> bool {
        self.accepting.binary_search(&loc).is_ok()
    }

    pub fn deterministic(&self) -> bool {
        self.deterministic
    }

    pub fn complete(&self) -> bool {
        self.complete
    }

    /// Interned guard list; transition guards index into it.
    pub fn guards(&self) -> &[Predicate] {
        &self.guards
    }

    /// All transitions as `(from, to, guard)`, sorted by `(to, from)`.
    pub fn transitions(&self) -> impl Iterator<Item = (usize, usize, &Predicate)> {
        self.transitions.iter().map(|t| (t.from, t.to, &self.guards[t.guard]))
    }

    /// The guard on `(from, to)`, if present.
    pub fn guard(&self, from: usize, to: usize) -> Option<&Predicate> {
        self.transitions[self.in_ranges[to].clone()]
            .iter()
            .find(|t| t.from == from)
            .map(|t| &self.guards[t.guard])
    }

    fn check_state(&self, x: &[f64]) -> Result<(), AutomatonError> {
        if x.len() != self.state_dim {
            return Err(ShapeError { expected: self.state_dim, got: x.len() }.into());
        }
        Ok(())
    }

    /// Initial and final weight vectors: `α_i = 1̃` iff `i ∈ Q₀`,
    /// `β_i = 1̃` iff `i ∈ Q_F`, `0̃` elsewhere.
    pub fn alpha_beta(&self, tag: SemiringTag) -> (WVector, WVector) {
        let mut alpha = WVector::filled(self.n_locations, tag.zero());
        let mut beta = WVector::filled(self.n_locations, tag.zero());
        for &i in &self.initial {
            alpha.set(i, tag.one());
        }
        for &i in &self.accepting {
            beta.set(i, tag.one());
        }
        (alpha, beta)
    }

    /// Weight of every interned guard at `x`.
    pub fn guard_weights(&self, x: &[f64], tag: SemiringTag) -> Result<Vec<Weight>, AutomatonError> {
        self.check_state(x)?;
        Ok(self.guards.iter().map(|g| g.eval_weight(x, tag)).collect())
    }

    /// The matrix operator `Ae(x)_ij = λ(x, Δ(q_i, q_j))`; absent guards
    /// contribute 0̃.
    pub fn operator_matrix(&self, x: &[f64], tag: SemiringTag) -> Result<WMatrix, AutomatonError> {
        let weights = self.guard_weights(x, tag)?;
        let mut m = WMatrix::zeros(self.n_locations, tag);
        for t in &self.transitions {
            m.set(t.from, t.to, weights[t.guard]);
        }
        Ok(m)
    }

    /// One step of the weighted location vector: `q' = qᵀ Ae(x)`.
    pub fn step_weight_vector(
        &self,
        q: &WVector,
        x: &[f64],
        tag: SemiringTag,
    ) -> Result<WVector, AutomatonError> {
        let m = self.operator_matrix(x, tag)?;
        Ok(vec_mat(q, &m, tag)?)
    }

    /// Trajectory weight `w(ξ) = αᵀ Ae(x₀) ⋯ Ae(x_l) β`, folded
    /// left-to-right from α.
    pub fn trajectory_weight(&self, trace: &Trace, tag: SemiringTag) -> Result<Weight, AutomatonError> {
        let (q, beta) = self.alpha_beta(tag);
        let mut q = q;
        for x in trace.states() {
            q = self.step_weight_vector(&q, x, tag)?;
        }
        Ok(q.dot(&beta, tag)?)
    }

    /// All runs induced by the trace, in lexicographic location order.
    ///
    /// Oracle use only: the depth-first enumeration counts its work (prefix
    /// extensions plus completed runs) and errors once that exceeds `cap`,
    /// so a blown-up instance fails fast instead of hanging.
    pub fn enumerate_runs(&self, trace: &Trace, cap: u64) -> Result<Vec<Run>, AutomatonError> {
        if !trace.is_empty() {
            self.check_state(trace.state(0))?;
        }
        let mut runs = Vec::new();
        let mut prefix = Vec::with_capacity(trace.len() + 1);
        let mut work: u64 = 0;
        for &q0 in &self.initial {
            prefix.push(q0);
            self.extend_runs(trace, 0, &mut prefix, &mut runs, cap, &mut work)?;
            prefix.pop();
        }
        Ok(runs)
    }

    fn extend_runs(
        &self,
        trace: &Trace,
        step: usize,
        prefix: &mut Vec<usize>,
        runs: &mut Vec<Run>,
        cap: u64,
        work: &mut u64,
    ) -> Result<(), AutomatonError> {
        *work += 1;
        if *work > cap {
            return Err(AutomatonError::CapExceeded { bound: *work, cap });
        }
        if step == trace.len() {
            runs.push(Run { locations: prefix.clone() });
            return Ok(());
        }
        let here = *prefix.last().expect("prefix starts non-empty");
        let x = trace.state(step);
        // ascending successor order keeps the enumeration deterministic
        for to in 0..self.n_locations {
            if let Some(g) = self.guard(here, to) {
                if g.eval_bool(x) {
                    prefix.push(to);
                    self.extend_runs(trace, step + 1, prefix, runs, cap, work)?;
                    prefix.pop();
                }
            }
        }
        Ok(())
    }

    /// Acceptance by literal run enumeration (the ground-truth oracle the
    /// weighted semantics are tested against).
    pub fn accepts(&self, trace: &Trace, cap: u64) -> Result<bool, AutomatonError> {
        Ok(self.enumerate_runs(trace, cap)?.iter().any(|r| self.is_accepting(r.last())))
    }

    /// Complement: same locations and guards, accepting set replaced by its
    /// complement. Sound only for deterministic and complete automata, so
    /// both flags must be claimed (verify them with
    /// [`SymbolicAutomaton::spot_check`] first).
    pub fn complement(&self) -> Result<Self, AutomatonError> {
        if !self.deterministic {
            return Err(AutomatonError::NotComplementable(
                "the automaton is not flagged deterministic".into(),
            ));
        }
        if !self.complete {
            return Err(AutomatonError::NotComplementable(
                "the automaton is not flagged complete".into(),
            ));
        }
        let accepting: Vec<usize> =
            (0..self.n_locations).filter(|&i| !self.is_accepting(i)).collect();
        let transitions = self
            .transitions
            .iter()
            .map(|t| (t.from, t.to, self.guards[t.guard].clone()))
            .collect::<Vec<_>>();
        let out = Self::new_unchecked_sets(
            self.state_dim,
            self.n_locations,
            &self.initial,
            &accepting,
            transitions,
        )?;
        Ok(out.with_flags(true, true))
    }

    /// Synchronous product: locations `Q₁ × Q₂` (index `i·|Q₂| + j`),
    /// guards conjoined, initial/accepting sets multiplied.
    pub fn product(a: &Self, b: &Self) -> Result<Self, AutomatonError> {
        if a.state_dim != b.state_dim {
            return Err(AutomatonError::StateDimMismatch {
                left: a.state_dim,
                right: b.state_dim,
            });
        }
        let n = a.n_locations * b.n_locations;
        if n > LOCATION_CAP {
            return Err(AutomatonError::TooManyLocations { requested: n });
        }
        let pair = |i: usize, j: usize| i * b.n_locations + j;
        let cross = |xs: &[usize], ys: &[usize]| -> Vec<usize> {
            let mut out = Vec::with_capacity(xs.len() * ys.len());
            for &i in xs {
                for &j in ys {
                    out.push(pair(i, j));
                }
            }
            out
        };
        let mut transitions = Vec::new();
        for ta in &a.transitions {
            for tb in &b.transitions {
                let guard = Predicate::and(
                    a.guards[ta.guard].clone(),
                    b.guards[tb.guard].clone(),
                );
                transitions.push((pair(ta.from, tb.from), pair(ta.to, tb.to), guard));
            }
        }
        let out = Self::new_unchecked_sets(
            a.state_dim,
            n,
            &cross(&a.initial, &b.initial),
            &cross(&a.accepting, &b.accepting),
            transitions,
        )?;
        Ok(out.with_flags(
            a.deterministic && b.deterministic,
            a.complete && b.complete,
        ))
    }

    /// Samples `samples` states per location uniformly from the box `domain`
    /// and reports whether every sample saw at most one (deterministic) and
    /// at least one (complete) enabled successor.
    pub fn spot_check(
        &self,
        domain: &[(f64, f64)],
        samples: usize,
        seed: u64,
    ) -> Result<SpotCheck, AutomatonError> {
        if domain.len() != self.state_dim {
            return Err(ShapeError { expected: self.state_dim, got: domain.len() }.into());
        }
        let mut rng = SplitMix64::new(seed);
        let mut deterministic = true;
        let mut complete = true;
        let mut x = vec![0.0; self.state_dim];
        for from in 0..self.n_locations {
            for _ in 0..samples {
                for (v, &(lo, hi)) in x.iter_mut().zip(domain) {
                    *v = rng.uniform(lo, hi);
                }
                let mut enabled = 0;
                for to in 0..self.n_locations {
                    if let Some(g) = self.guard(from, to) {
                        if g.eval_bool(&x) {
                            enabled += 1;
                        }
                    }
                }
                deterministic &= enabled <= 1;
                complete &= enabled >= 1;
            }
        }
        Ok(SpotCheck { deterministic, complete })
    }

    // ------------------------------------------------------------------
    // tape-side evaluation
    // ------------------------------------------------------------------

    /// α as tape nodes.
    pub fn alpha_nodes(&self, tape: &mut Tape) -> Vec<NodeId> {
        let one = match tape.tag().one() {
            Weight::Num(v) => v,
            Weight::Bot => unreachable!("1̃ is always finite"),
        };
        (0..self.n_locations)
            .map(|i| {
                if self.initial.binary_search(&i).is_ok() {
                    tape.constant(one)
                } else {
                    tape.zero_const()
                }
            })
            .collect()
    }

    /// Records every interned guard's weight at the state nodes `x`.
    pub fn guard_weight_nodes(&self, tape: &mut Tape, x: &[NodeId]) -> Vec<NodeId> {
        self.guards.iter().map(|g| g.eval_weight_nodes(tape, x)).collect()
    }

    /// `q' = qᵀ Ae(x)` on the tape, with the guard weights already recorded
    /// for this state. Absent entries are skipped: they contribute 0̃
    /// exactly.
    pub fn step_weight_nodes(
        &self,
        tape: &mut Tape,
        q: &[NodeId],
        guard_nodes: &[NodeId],
    ) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.n_locations);
        for j in 0..self.n_locations {
            let mut acc: Option<NodeId> = None;
            for t in &self.transitions[self.in_ranges[j].clone()] {
                let term = tape.sr_mul(q[t.from], guard_nodes[t.guard]);
                acc = Some(match acc {
                    None => term,
                    Some(prev) => tape.sr_add(prev, term),
                });
            }
            out.push(match acc {
                Some(n) => n,
                None => tape.zero_const(),
            });
        }
        out
    }

    /// `⊕_j q_j ⊗ β_j`: contraction with the accepting indicator.
    pub fn accepting_weight_node(&self, tape: &mut Tape, q: &[NodeId]) -> NodeId {
        let mut acc: Option<NodeId> = None;
        for &j in &self.accepting {
            acc = Some(match acc {
                None => q[j],
                Some(prev) => tape.sr_add(prev, q[j]),
            });
        }
        match acc {
            Some(n) => n,
            None => tape.zero_const(),
        }
    }

    /// Best weight over all locations, `⊕_j q_j`, accepting or not.
    pub fn any_weight_node(&self, tape: &mut Tape, q: &[NodeId]) -> NodeId {
        let mut acc = q[0];
        for &n in &q[1..] {
            acc = tape.sr_add(acc, n);
        }
        acc
    }

    /// Full trajectory weight on the tape, starting from the weighted
    /// location vector `q0` (usually [`SymbolicAutomaton::alpha_nodes`]).
    pub fn trajectory_weight_nodes(
        &self,
        tape: &mut Tape,
        q0: &[NodeId],
        states: &[Vec<NodeId>],
    ) -> NodeId {
        let mut q = q0.to_vec();
        for x in states {
            let guard_nodes = self.guard_weight_nodes(tape, x);
            q = self.step_weight_nodes(tape, &q, &guard_nodes);
        }
        self.accepting_weight_node(tape, &q)
    }
}

// ----------------------------------------------------------------------
// builders
// ----------------------------------------------------------------------

/// Single location with a self-loop guard: the automaton of the invariant
/// "guard holds at every step". Complete only for the trivial `true` guard.
pub fn build_invariant(guard: Predicate, state_dim: usize) -> Result<SymbolicAutomaton, AutomatonError> {
    let complete = guard == Predicate::True;
    Ok(SymbolicAutomaton::new(state_dim, 1, &[0], &[0], [(0, 0, guard)])?
        .with_flags(true, complete))
}

fn avoid_guards(
    avoid: &[&str],
    regions: &RegionTable,
) -> Result<(Predicate, Predicate), AutomatonError> {
    let mut ok = Vec::new();
    let mut violated = Vec::new();
    for name in avoid {
        ok.push(Predicate::Atom(Atom::not_in_region(name, regions)?));
        violated.push(Predicate::Atom(Atom::in_region(name, regions)?));
    }
    Ok((Predicate::all(ok), Predicate::any(violated)))
}

/// Chain automaton for "visit the regions in this order, always avoiding":
/// one stage per region plus an accepting `done` location and a rejecting
/// sink entered on avoidance violation. `k + 2` locations for `k` regions.
pub fn build_sequence_visit(
    order: &[&str],
    avoid: &[&str],
    regions: &RegionTable,
    state_dim: usize,
) -> Result<SymbolicAutomaton, AutomatonError> {
    assert!(!order.is_empty(), "at least one region to visit");
    let k = order.len();
    let done = k;
    let sink = k + 1;
    let (ok, violated) = avoid_guards(avoid, regions)?;
    let mut transitions = Vec::new();
    for (stage, name) in order.iter().enumerate() {
        let enter = Predicate::Atom(Atom::in_region(name, regions)?);
        let stay = Predicate::Atom(Atom::not_in_region(name, regions)?);
        transitions.push((stage, stage + 1, Predicate::and(enter, ok.clone())));
        transitions.push((stage, stage, Predicate::and(stay, ok.clone())));
        transitions.push((stage, sink, violated.clone()));
    }
    transitions.push((done, done, ok.clone()));
    transitions.push((done, sink, violated.clone()));
    transitions.push((sink, sink, Predicate::True));
    let a = SymbolicAutomaton::new(state_dim, k + 2, &[0], &[done], transitions)?;
    Ok(a.with_flags(true, true))
}

/// One goal of [`build_any_order_visit`]: a region that must be occupied
/// for `dwell` consecutive steps.
#[derive(Clone, Debug)]
pub struct DwellGoal {
    pub region: String,
    pub dwell: usize,
}

/// Subset-lattice automaton for "visit every goal, in any order, always
/// avoiding". Each goal's dwell requirement expands into a chain of
/// `dwell − 1` counting locations; a run marks the goal visited after
/// `dwell` consecutive in-region states. Accepting location: all goals
/// visited. Nondeterministic by construction.
pub fn build_any_order_visit(
    goals: &[DwellGoal],
    avoid: &[&str],
    regions: &RegionTable,
    state_dim: usize,
) -> Result<SymbolicAutomaton, AutomatonError> {
    assert!(!goals.is_empty(), "at least one goal");
    let g = goals.len();
    assert!(g < 16, "subset construction over up to 15 goals");
    for goal in goals {
        if goal.dwell == 0 {
            return Err(AutomatonError::BadDwell { goal: goal.region.clone() });
        }
    }
    let full: u32 = (1 << g) - 1;

    // location layout: all subset bases, then the dwell chains, then the sink
    let n_bases = 1usize << g;
    let mut chain_index: BTreeMap<(u32, usize, usize), usize> = BTreeMap::new();
    let mut next = n_bases;
    for mask in 0..=full {
        for (gi, goal) in goals.iter().enumerate() {
            if mask & (1 << gi) != 0 {
                continue;
            }
            for c in 1..goal.dwell {
                chain_index.insert((mask, gi, c), next);
                next += 1;
            }
        }
    }
    let sink = next;
    let n = next + 1;
    if n > LOCATION_CAP {
        return Err(AutomatonError::TooManyLocations { requested: n });
    }

    let base = |mask: u32| mask as usize;
    let (ok, violated) = avoid_guards(avoid, regions)?;
    let with_ok = |p: Predicate, ok: &Predicate| {
        if *ok == Predicate::True {
            p
        } else {
            Predicate::and(p, ok.clone())
        }
    };
    let mut transitions = Vec::new();
    let mut in_goal = Vec::with_capacity(g);
    for goal in goals {
        in_goal.push(Predicate::Atom(Atom::in_region(&goal.region, regions)?));
    }
    // a step that begins goal `gi` from lattice state `mask`
    let start_goal = |mask: u32, gi: usize| -> (usize, Predicate) {
        let target = if goals[gi].dwell == 1 {
            base(mask | (1 << gi))
        } else {
            chain_index[&(mask, gi, 1)]
        };
        (target, in_goal[gi].clone())
    };

    for mask in 0..=full {
        let here = base(mask);
        transitions.push((here, here, ok.clone()));
        if !violated.eq(&Predicate::False) {
            transitions.push((here, sink, violated.clone()));
        }
        for gi in 0..g {
            if mask & (1 << gi) != 0 {
                continue;
            }
            let (target, guard) = start_goal(mask, gi);
            transitions.push((here, target, with_ok(guard, &ok)));
        }
    }
    for (&(mask, gi, c), &here) in &chain_index {
        let goal = &goals[gi];
        let next_loc = if c + 1 == goal.dwell {
            base(mask | (1 << gi))
        } else {
            chain_index[&(mask, gi, c + 1)]
        };
        transitions.push((here, next_loc, with_ok(in_goal[gi].clone(), &ok)));
        let broke = Predicate::Atom(Atom::not_in_region(&goal.region, regions)?);
        transitions.push((here, base(mask), with_ok(broke, &ok)));
        if !violated.eq(&Predicate::False) {
            transitions.push((here, sink, violated.clone()));
        }
        for h in 0..g {
            if h == gi || mask & (1 << h) != 0 {
                continue;
            }
            let (target, guard) = start_goal(mask, h);
            if target != base(mask) {
                transitions.push((here, target, with_ok(guard, &ok)));
            } else {
                // dwell-1 goal completing while this chain breaks: fold the
                // two guards into the single (here -> base) pair
                unreachable!("dwell-1 targets differ from the source base");
            }
        }
    }
    transitions.push((sink, sink, Predicate::True));

    let a = SymbolicAutomaton::new(state_dim, n, &[base(0)], &[base(full)], transitions)?;
    Ok(a.with_flags(false, true))
}

/// Counter automaton for the bounded-response requirement "whenever `hold`
/// is true, `release` must become true within `window` steps". Locations
/// count the current consecutive-`hold` streak; exceeding the window traps
/// in a rejecting sink, and only a fully released trace (streak 0 at the
/// end) is accepted. `hold` and `release` must partition the state space.
pub fn build_response_window(
    hold: Predicate,
    release: Predicate,
    window: usize,
    state_dim: usize,
) -> Result<SymbolicAutomaton, AutomatonError> {
    let sink = window + 1;
    let mut transitions = Vec::new();
    for c in 0..=window {
        let next_loc = if c == window { sink } else { c + 1 };
        transitions.push((c, next_loc, hold.clone()));
        transitions.push((c, 0, release.clone()));
    }
    transitions.push((sink, sink, Predicate::True));
    let a = SymbolicAutomaton::new(state_dim, window + 2, &[0], &[0], transitions)?;
    Ok(a.with_flags(true, true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predicate::{parse_predicate, RegionDef};

    fn regions() -> RegionTable {
        let mut t = RegionTable::new();
        let boxed = |lo: [f64; 2], hi: [f64; 2]| RegionDef::Box {
            lo: lo.to_vec(),
            hi: hi.to_vec(),
            proj: vec![0, 1],
        };
        t.insert("red".into(), boxed([0.5, -1.5], [1.5, -0.5]));
        t.insert("green".into(), boxed([0.5, 0.5], [1.5, 1.5]));
        t.insert("orange".into(), boxed([-1.5, 0.5], [-0.5, 1.5]));
        t.insert("blue".into(), boxed([-0.4, -0.4], [0.4, 0.4]));
        t
    }

    fn fig_like_sequence() -> SymbolicAutomaton {
        build_sequence_visit(&["red", "green", "orange"], &["blue"], &regions(), 2).unwrap()
    }

    fn trace(points: &[[f64; 2]]) -> Trace {
        Trace::from_states(points.iter().map(|p| p.to_vec())).unwrap()
    }

    /// A trace that walks red -> green -> orange around the blue box.
    fn accepting_tour() -> Trace {
        trace(&[
            [-1.0, -1.0],
            [0.0, -1.0],
            [1.0, -1.0], // red
            [1.0, 0.0],
            [1.0, 1.0], // green
            [0.0, 1.0],
            [-1.0, 1.0], // orange
        ])
    }

    #[test]
    fn alpha_beta_mark_initial_and_accepting() {
        let a = fig_like_sequence();
        let (alpha, beta) = a.alpha_beta(SemiringTag::MaxPlus);
        assert_eq!(alpha.entries()[0], Weight::Num(0.0));
        assert!(alpha.entries()[1..].iter().all(|w| w.is_bot()));
        assert_eq!(beta.entries()[3], Weight::Num(0.0));
        assert!(beta.entries().iter().enumerate().all(|(i, w)| (i == 3) != w.is_bot()));

        let (ab, bb) = a.alpha_beta(SemiringTag::Boolean);
        assert_eq!(ab.entries()[0], Weight::Num(1.0));
        assert_eq!(bb.entries()[4], Weight::Num(0.0));
    }

    #[test]
    fn operator_matrix_identity_for_true_self_loops() {
        let a = SymbolicAutomaton::new(
            2,
            3,
            &[0],
            &[2],
            (0..3).map(|i| (i, i, Predicate::True)),
        )
        .unwrap();
        for tag in SemiringTag::ALL {
            let m = a.operator_matrix(&[0.3, 0.7], tag).unwrap();
            assert_eq!(m, WMatrix::identity(3, tag));
        }
    }

    #[test]
    fn boolean_operator_matrix_is_the_models_relation() {
        let a = fig_like_sequence();
        let x = [1.0, -1.0]; // inside red
        let m = a.operator_matrix(&x, SemiringTag::Boolean).unwrap();
        for i in 0..a.n_locations() {
            for j in 0..a.n_locations() {
                let expect = a.guard(i, j).map(|g| g.eval_bool(&x)).unwrap_or(false);
                assert_eq!(m.get(i, j) == Weight::Num(1.0), expect, "({i},{j})");
            }
        }
    }

    #[test]
    fn sequence_visit_has_expected_shape_and_accepts_a_tour() {
        let a = fig_like_sequence();
        assert_eq!(a.n_locations(), 5);
        assert!(a.deterministic() && a.complete());
        assert!(a.accepts(&accepting_tour(), DEFAULT_RUN_CAP).unwrap());
        // wrong order: touch green first, then red, never green again
        let wrong = trace(&[[1.0, 1.0], [1.0, -1.0], [1.0, -1.0]]);
        assert!(!a.accepts(&wrong, DEFAULT_RUN_CAP).unwrap());
        // dipping into blue traps the run in the sink
        let through_blue = trace(&[[-1.0, -1.0], [0.0, 0.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]]);
        assert!(!a.accepts(&through_blue, DEFAULT_RUN_CAP).unwrap());
    }

    #[test]
    fn trajectory_weight_is_one_on_an_accepting_tour() {
        let a = fig_like_sequence();
        let tour = accepting_tour();
        assert_eq!(a.trajectory_weight(&tour, SemiringTag::MaxPlus).unwrap(), Weight::Num(0.0));
        assert_eq!(a.trajectory_weight(&tour, SemiringTag::Boolean).unwrap(), Weight::Num(1.0));
        let (_, beta) = a.alpha_beta(SemiringTag::MinMax);
        assert_eq!(beta.dim(), 5);
    }

    #[test]
    fn weight_matches_run_sum_on_small_instances() {
        // nondeterministic 3-location toy with overlapping guards
        let t = regions();
        let g1 = parse_predicate("in(red) | in(green)", &t).unwrap();
        let g2 = parse_predicate("!in(blue)", &t).unwrap();
        let g3 = parse_predicate("true", &t).unwrap();
        let a = SymbolicAutomaton::new(
            2,
            3,
            &[0, 1],
            &[2],
            [
                (0, 1, g1.clone()),
                (0, 2, g2.clone()),
                (1, 1, g3),
                (1, 2, g1),
                (2, 0, g2),
            ],
        )
        .unwrap();
        let tr = trace(&[[1.0, -1.0], [1.0, 1.0], [0.2, 0.1]]);
        for tag in SemiringTag::ALL {
            let via_matrix = a.trajectory_weight(&tr, tag).unwrap();
            // run-sum oracle: ⊕ over runs of ⊗ over step weights
            let runs = a.enumerate_runs_weighted_oracle(&tr, tag);
            assert_eq!(via_matrix, runs, "tag {tag}");
        }
    }

    impl SymbolicAutomaton {
        /// Test-only oracle: the ⊕-over-runs ⊗-over-steps definition, via a
        /// run enumeration that ignores Boolean satisfaction and instead
        /// weights every present transition.
        fn enumerate_runs_weighted_oracle(&self, trace: &Trace, tag: SemiringTag) -> Weight {
            fn rec(
                a: &SymbolicAutomaton,
                trace: &Trace,
                step: usize,
                here: usize,
                acc: Weight,
                tag: SemiringTag,
                total: &mut Weight,
            ) {
                if step == trace.len() {
                    if a.is_accepting(here) {
                        *total = tag.add(*total, acc);
                    }
                    return;
                }
                for to in 0..a.n_locations() {
                    if let Some(g) = a.guard(here, to) {
                        let w = g.eval_weight(trace.state(step), tag);
                        rec(a, trace, step + 1, to, tag.mul(acc, w), tag, total);
                    }
                }
            }
            let mut total = tag.zero();
            for &q0 in &self.initial {
                rec(self, trace, 0, q0, tag.one(), tag, &mut total);
            }
            total
        }
    }

    #[test]
    fn operator_matrix_inside_the_avoided_region() {
        let a = fig_like_sequence();
        // deep inside the avoided box every enabled non-sink guard carries
        // its avoidance penalty; the sink-entry column is satisfied (1̃)
        let x = [0.0, 0.0];
        let m = a.operator_matrix(&x, SemiringTag::MaxPlus).unwrap();
        let sink = 4;
        for i in 0..a.n_locations() {
            for j in 0..a.n_locations() {
                let w = m.get(i, j);
                if j == sink && a.guard(i, j).is_some() {
                    assert_eq!(w, Weight::Num(0.0), "sink entry ({i},{j})");
                } else if a.guard(i, j).is_some() && (i, j) != (sink, sink) {
                    assert!(
                        matches!(w, Weight::Num(v) if v < 0.0),
                        "({i},{j}) should be penalized, got {w:?}"
                    );
                }
            }
        }
        assert_eq!(m.get(sink, sink), Weight::Num(0.0));
    }

    #[test]
    fn minplus_weight_counts_steps_to_the_sink() {
        // unit-cost analog of path-length weighting: the self-loop guard is
        // constantly violated by margin 1 (cost 1 per step in minplus), the
        // sink entry costs 0 exactly when the state is inside `blue`
        let t = regions();
        let self_loop = Predicate::Atom(crate::predicate::Atom::affine(alloc::vec![], -1.0));
        let enter = parse_predicate("in(blue)", &t).unwrap();
        let a = SymbolicAutomaton::new(
            2,
            2,
            &[0],
            &[1],
            [(0, 0, self_loop), (0, 1, enter), (1, 1, Predicate::True)],
        )
        .unwrap();
        // blue is first touched at index 3
        let tr = trace(&[[-1.0, -1.0], [1.0, 1.0], [2.0, 0.0], [0.0, 0.0], [1.0, 1.0]]);
        assert_eq!(
            a.trajectory_weight(&tr, SemiringTag::MinPlus).unwrap(),
            Weight::Num(3.0)
        );
        // never touching blue: the cheapest accepting run pays the best
        // near-miss entry on top of the unit steps
        let never = trace(&[[2.0, 2.0], [2.0, 2.0]]);
        let w = a.trajectory_weight(&never, SemiringTag::MinPlus).unwrap();
        assert!(matches!(w, Weight::Num(v) if v > 1.0));
    }

    #[test]
    fn step_vector_fold_equals_trajectory_weight() {
        let a = fig_like_sequence();
        let tour = accepting_tour();
        for tag in SemiringTag::ALL {
            let (mut q, beta) = a.alpha_beta(tag);
            for x in tour.states() {
                q = a.step_weight_vector(&q, x, tag).unwrap();
            }
            assert_eq!(q.dot(&beta, tag).unwrap(), a.trajectory_weight(&tour, tag).unwrap());
        }
    }

    #[test]
    fn enumerate_runs_counts_and_cap() {
        // two locations, both guards true: 4 runs for a 2-state trace
        let a = SymbolicAutomaton::new(
            1,
            2,
            &[0],
            &[1],
            [
                (0, 0, Predicate::True),
                (0, 1, Predicate::True),
                (1, 0, Predicate::True),
                (1, 1, Predicate::True),
            ],
        )
        .unwrap();
        let tr = Trace::from_states([vec![0.0], vec![0.0]]).unwrap();
        let runs = a.enumerate_runs(&tr, DEFAULT_RUN_CAP).unwrap();
        assert_eq!(runs.len(), 4);
        assert!(matches!(
            a.enumerate_runs(&tr, 3),
            Err(AutomatonError::CapExceeded { .. })
        ));
        // zero-length trace: one run per initial location
        let empty = Trace::empty(1);
        let runs = a.enumerate_runs(&empty, DEFAULT_RUN_CAP).unwrap();
        assert_eq!(runs, vec![Run { locations: vec![0] }]);
    }

    #[test]
    fn deterministic_automaton_has_at_most_one_run() {
        let a = fig_like_sequence();
        let runs = a.enumerate_runs(&accepting_tour(), DEFAULT_RUN_CAP).unwrap();
        assert_eq!(runs.len(), 1);
    }

    #[test]
    fn empty_guard_automaton_rejects() {
        let a = SymbolicAutomaton::new(1, 2, &[0], &[1], [(1, 1, Predicate::True)]).unwrap();
        let tr = Trace::from_states([vec![0.0]]).unwrap();
        assert!(!a.accepts(&tr, DEFAULT_RUN_CAP).unwrap());
    }

    #[test]
    fn complement_flips_acceptance_and_is_involutive() {
        let a = fig_like_sequence();
        let c = a.complement().unwrap();
        let tour = accepting_tour();
        assert!(a.accepts(&tour, DEFAULT_RUN_CAP).unwrap());
        assert!(!c.accepts(&tour, DEFAULT_RUN_CAP).unwrap());
        let through_blue = trace(&[[-1.0, -1.0], [0.0, 0.0], [1.0, -1.0]]);
        assert!(c.accepts(&through_blue, DEFAULT_RUN_CAP).unwrap());
        let cc = c.complement().unwrap();
        assert_eq!(cc.accepting(), a.accepting());
    }

    #[test]
    fn complement_requires_flags() {
        let a = build_any_order_visit(
            &[DwellGoal { region: "red".into(), dwell: 1 }],
            &[],
            &regions(),
            2,
        )
        .unwrap();
        assert!(matches!(a.complement(), Err(AutomatonError::NotComplementable(_))));
    }

    #[test]
    fn product_with_unit_is_isomorphic() {
        let a = fig_like_sequence();
        let unit = build_invariant(Predicate::True, 2).unwrap();
        let p = SymbolicAutomaton::product(&a, &unit).unwrap();
        assert_eq!(p.n_locations(), a.n_locations());
        for tr in [accepting_tour(), trace(&[[0.0, 0.0], [1.0, -1.0]])] {
            assert_eq!(
                p.accepts(&tr, DEFAULT_RUN_CAP).unwrap(),
                a.accepts(&tr, DEFAULT_RUN_CAP).unwrap()
            );
            for tag in SemiringTag::ALL {
                assert_eq!(
                    p.trajectory_weight(&tr, tag).unwrap(),
                    a.trajectory_weight(&tr, tag).unwrap()
                );
            }
        }
    }

    #[test]
    fn product_accepts_conjunction() {
        let t = regions();
        let a = build_sequence_visit(&["red"], &[], &t, 2).unwrap();
        let b = build_invariant(parse_predicate("!in(blue)", &t).unwrap(), 2).unwrap();
        let p = SymbolicAutomaton::product(&a, &b).unwrap();
        assert_eq!(p.n_locations(), a.n_locations() * b.n_locations());
        let good = trace(&[[-1.0, -1.0], [1.0, -1.0]]);
        let bad = trace(&[[0.0, 0.0], [1.0, -1.0]]);
        for tr in [&good, &bad] {
            let both = a.accepts(tr, DEFAULT_RUN_CAP).unwrap()
                && b.accepts(tr, DEFAULT_RUN_CAP).unwrap();
            assert_eq!(p.accepts(tr, DEFAULT_RUN_CAP).unwrap(), both);
        }
    }

    #[test]
    fn any_order_visit_size_and_permutations() {
        let goals = [
            DwellGoal { region: "red".into(), dwell: 5 },
            DwellGoal { region: "green".into(), dwell: 5 },
            DwellGoal { region: "orange".into(), dwell: 1 },
        ];
        let a = build_any_order_visit(&goals, &["blue"], &regions(), 2).unwrap();
        // 8 subset bases + dwell chains of length 4 for red and green over
        // the 4 subsets missing each + the sink
        assert_eq!(a.n_locations(), 8 + 4 * 4 + 4 * 4 + 1);

        let red = [1.0, -1.0];
        let green = [1.0, 1.0];
        let orange = [-1.0, 1.0];
        let free = [-1.0, -1.0];
        let dwell = |p: [f64; 2], n: usize| core::iter::repeat(p).take(n);
        // any completion order is accepted
        for (first, second) in [(red, green), (green, red)] {
            let pts: Vec<[f64; 2]> = dwell(free, 1)
                .chain(dwell(first, 5))
                .chain(dwell(second, 5))
                .chain(dwell(orange, 1))
                .collect();
            assert!(a.accepts(&trace(&pts), DEFAULT_RUN_CAP).unwrap());
        }
        // breaking a dwell run before 5 consecutive steps does not count
        let pts: Vec<[f64; 2]> = dwell(red, 3)
            .chain(dwell(free, 1))
            .chain(dwell(red, 4))
            .chain(dwell(green, 5))
            .chain(dwell(orange, 1))
            .collect();
        assert!(!a.accepts(&trace(&pts), DEFAULT_RUN_CAP).unwrap());
        // completing it does
        let pts: Vec<[f64; 2]> = dwell(red, 5)
            .chain(dwell(green, 5))
            .chain(dwell(orange, 1))
            .collect();
        assert!(a.accepts(&trace(&pts), DEFAULT_RUN_CAP).unwrap());
    }

    #[test]
    fn response_window_counts_consecutive_holds() {
        // hold: x >= 0, release: -x >= 0 (complementary up to the boundary)
        let hold = Predicate::Atom(Atom::affine(vec![1.0], 0.0));
        let release = Predicate::Atom(Atom::affine(vec![-1.0], 0.0));
        let a = build_response_window(hold, release, 2, 1).unwrap();
        assert_eq!(a.n_locations(), 4);
        let mk = |vals: &[f64]| Trace::from_states(vals.iter().map(|&v| vec![v])).unwrap();
        // streak of 2 then released: accepted
        assert!(a.accepts(&mk(&[1.0, 1.0, -1.0]), DEFAULT_RUN_CAP).unwrap());
        // streak of 3 exceeds the window: rejected forever
        assert!(!a.accepts(&mk(&[1.0, 1.0, 1.0, -1.0]), DEFAULT_RUN_CAP).unwrap());
        // trailing unreleased streak: rejected
        assert!(!a.accepts(&mk(&[-1.0, 1.0]), DEFAULT_RUN_CAP).unwrap());
    }

    #[test]
    fn spot_check_validates_builder_claims() {
        let a = fig_like_sequence();
        let check = a.spot_check(&[(-2.0, 2.0), (-2.0, 2.0)], 200, 7).unwrap();
        assert!(check.deterministic && check.complete);

        let goals = [DwellGoal { region: "red".into(), dwell: 2 }];
        let nfa = build_any_order_visit(&goals, &["blue"], &regions(), 2).unwrap();
        let check = nfa.spot_check(&[(-2.0, 2.0), (-2.0, 2.0)], 200, 7).unwrap();
        assert!(!check.deterministic);
        assert!(check.complete);
    }

    #[test]
    fn tape_trajectory_weight_matches_plain() {
        let a = fig_like_sequence();
        let tour = accepting_tour();
        let off_tour = trace(&[[-1.0, -1.0], [0.1, 0.2], [1.9, 1.9]]);
        for tr in [&tour, &off_tour] {
            for tag in SemiringTag::ALL {
                let plain = a.trajectory_weight(tr, tag).unwrap();
                let mut tape = Tape::new(tag);
                let states: Vec<Vec<NodeId>> = tr
                    .states()
                    .map(|x| x.iter().map(|&v| tape.input(v)).collect())
                    .collect();
                let q0 = a.alpha_nodes(&mut tape);
                let w = a.trajectory_weight_nodes(&mut tape, &q0, &states);
                tape.set_output(w);
                assert_eq!(tape.value(w), plain, "tag {tag}");
                assert_eq!(tape.eval().unwrap(), plain);
            }
        }
    }

    #[test]
    fn guard_interning_shares_repeated_guards() {
        let a = fig_like_sequence();
        // 11 transitions but far fewer distinct guards
        assert!(a.guards().len() < a.transitions().count());
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(
            SymbolicAutomaton::new(1, 2, &[], &[1], [(0, 1, Predicate::True)]),
            Err(AutomatonError::EmptyInitial)
        ));
        assert!(matches!(
            SymbolicAutomaton::new(1, 2, &[0], &[5], [(0, 1, Predicate::True)]),
            Err(AutomatonError::BadLocation { .. })
        ));
        assert!(matches!(
            SymbolicAutomaton::new(
                1,
                2,
                &[0],
                &[1],
                [(0, 1, Predicate::True), (0, 1, Predicate::False)]
            ),
            Err(AutomatonError::DuplicateTransition { .. })
        ));
        // guard over dimension 3 on a 2-dimensional automaton
        let t = regions();
        let g = parse_predicate("affine(0, 0, 1; 0) >= 0", &t).unwrap();
        assert!(matches!(
            SymbolicAutomaton::new(2, 1, &[0], &[0], [(0, 0, g)]),
            Err(AutomatonError::GuardDimension { .. })
        ));
    }
}
