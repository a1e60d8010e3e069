//! Reverse-mode autodiff tape.
//!
//! The tape records a scalar computation as a flat list of primitive nodes
//! in topological order: decision-variable inputs, constants, the elementary
//! real operations needed by guard functions and dynamics (`+`, `−`, `×`,
//! negation, `sin`, `cos`, `√`), and the semiring operations, which all
//! lower to `max`, `min` and `+` over the extended carrier. Values are
//! computed eagerly while recording; [`Tape::grad`] then runs one reverse
//! sweep and returns `∂output/∂input` for every registered input.
//!
//! Subgradient conventions at kinks:
//!
//! - `max` routes the full adjoint to the winning operand; on an exact tie
//!   the operand with the lower node id wins. `min` mirrors this.
//! - A `Bot` operand never receives adjoint: it marks a structurally absent
//!   transition, which no decision variable can influence.
//! - `step` (the boolean-semiring atom indicator) has zero derivative.
//!
//! One tape serves one optimization run at a time; concurrent runs use
//! independent tapes.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::semiring::{SemiringTag, Weight};

/// Index of a node on a specific tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId(u32);

impl NodeId {
    fn idx(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug)]
enum Op {
    Input,
    Const,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Neg(NodeId),
    Sin(NodeId),
    Cos(NodeId),
    Sqrt(NodeId),
    Max(NodeId, NodeId),
    Min(NodeId, NodeId),
    Step(NodeId),
}

#[derive(Clone, Copy, Debug)]
struct Node {
    op: Op,
    value: Weight,
}

/// Structural or gradient-precondition failure on a tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TapeError {
    /// No output node was set.
    NoOutput,
    /// An operand id does not precede its consumer (foreign or corrupt id).
    BadOperand { node: u32 },
    /// The output value is `Bot`; there is nothing to differentiate.
    GradientUndefined,
}

impl fmt::Display for TapeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TapeError::NoOutput => f.write_str("tape has no output node"),
            TapeError::BadOperand { node } => {
                write!(f, "node {node} consumes an operand that does not precede it")
            }
            TapeError::GradientUndefined => {
                f.write_str("output weight is bottom; gradient undefined")
            }
        }
    }
}

impl core::error::Error for TapeError {}

/// A recorded scalar computation over one semiring.
pub struct Tape {
    tag: SemiringTag,
    nodes: Vec<Node>,
    inputs: Vec<NodeId>,
    output: Option<NodeId>,
    bot_node: Option<NodeId>,
}

impl Tape {
    pub fn new(tag: SemiringTag) -> Self {
        Tape { tag, nodes: Vec::new(), inputs: Vec::new(), output: None, bot_node: None }
    }

    pub fn tag(&self) -> SemiringTag {
        self.tag
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drops all nodes but keeps allocated capacity for the next recording.
    pub fn clear(&mut self) {
        self.nodes.clear();
        self.inputs.clear();
        self.output = None;
        self.bot_node = None;
    }

    pub fn inputs(&self) -> &[NodeId] {
        &self.inputs
    }

    pub fn output(&self) -> Option<NodeId> {
        self.output
    }

    pub fn set_output(&mut self, id: NodeId) {
        self.output = Some(id);
    }

    /// Cached value of a node.
    pub fn value(&self, id: NodeId) -> Weight {
        self.nodes[id.idx()].value
    }

    fn push(&mut self, op: Op, value: Weight) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(Node { op, value });
        id
    }

    /// Registers a decision variable.
    pub fn input(&mut self, value: f64) -> NodeId {
        let id = self.push(Op::Input, Weight::Num(value));
        self.inputs.push(id);
        id
    }

    pub fn constant(&mut self, value: f64) -> NodeId {
        self.push(Op::Const, Weight::Num(value))
    }

    /// The absorbing 0̃ as a node; one shared constant per recording.
    pub fn bot(&mut self) -> NodeId {
        if let Some(id) = self.bot_node {
            return id;
        }
        let id = self.push(Op::Const, Weight::Bot);
        self.bot_node = Some(id);
        id
    }

    /// 0̃ of the active semiring as a node.
    pub fn zero_const(&mut self) -> NodeId {
        match self.tag.zero() {
            Weight::Bot => self.bot(),
            Weight::Num(v) => self.constant(v),
        }
    }

    /// Numeric reading used to order operands of `max`/`min`; `Bot` reads as
    /// the signed infinity it stands for in the active semiring.
    fn ext(&self, w: Weight) -> f64 {
        self.tag.weight_to_f64(w)
    }

    fn bin_num(&mut self, op: Op, a: NodeId, b: NodeId, f: impl Fn(f64, f64) -> f64) -> NodeId {
        let value = match (self.value(a), self.value(b)) {
            (Weight::Num(x), Weight::Num(y)) => Weight::Num(f(x, y)),
            // structurally absent operands absorb through real arithmetic
            _ => Weight::Bot,
        };
        self.push(op, value)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.bin_num(Op::Add(a, b), a, b, |x, y| x + y)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.bin_num(Op::Sub(a, b), a, b, |x, y| x - y)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.bin_num(Op::Mul(a, b), a, b, |x, y| x * y)
    }

    fn unary_num(&mut self, op: Op, a: NodeId, f: impl Fn(f64) -> f64) -> NodeId {
        let value = match self.value(a) {
            Weight::Num(x) => Weight::Num(f(x)),
            Weight::Bot => Weight::Bot,
        };
        self.push(op, value)
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        self.unary_num(Op::Neg(a), a, |x| -x)
    }

    pub fn sin(&mut self, a: NodeId) -> NodeId {
        self.unary_num(Op::Sin(a), a, libm::sin)
    }

    pub fn cos(&mut self, a: NodeId) -> NodeId {
        self.unary_num(Op::Cos(a), a, libm::cos)
    }

    pub fn sqrt(&mut self, a: NodeId) -> NodeId {
        self.unary_num(Op::Sqrt(a), a, libm::sqrt)
    }

    /// Indicator `x ≥ 0 → 1 else 0`, derivative 0 everywhere.
    pub fn step(&mut self, a: NodeId) -> NodeId {
        let value = match self.value(a) {
            Weight::Num(x) => Weight::Num(if x >= 0.0 { 1.0 } else { 0.0 }),
            Weight::Bot => Weight::Bot,
        };
        self.push(Op::Step(a), value)
    }

    fn pick(&self, a: NodeId, b: NodeId, take_b: bool) -> (NodeId, Weight) {
        let id = if take_b { b } else { a };
        (id, self.value(id))
    }

    pub fn max(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (self.ext(self.value(a)), self.ext(self.value(b)));
        // strict > keeps the lower node id on ties
        let take_b = vb > va || (vb == va && b.idx() < a.idx());
        let (_, value) = self.pick(a, b, take_b);
        self.push(Op::Max(a, b), value)
    }

    pub fn min(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (self.ext(self.value(a)), self.ext(self.value(b)));
        let take_b = vb < va || (vb == va && b.idx() < a.idx());
        let (_, value) = self.pick(a, b, take_b);
        self.push(Op::Min(a, b), value)
    }

    /// Semiring `⊕` of two recorded weights.
    pub fn sr_add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        match self.tag {
            SemiringTag::MinPlus => self.min(a, b),
            _ => self.max(a, b),
        }
    }

    /// Semiring `⊗` of two recorded weights.
    pub fn sr_mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        match self.tag {
            SemiringTag::Boolean | SemiringTag::MinMax => self.min(a, b),
            SemiringTag::MaxPlus | SemiringTag::MinPlus => self.add(a, b),
        }
    }

    fn recompute(&self, id: usize, values: &[Weight]) -> Weight {
        let get = |n: NodeId| values[n.idx()];
        let num = |w: Weight| w.num();
        match self.nodes[id].op {
            Op::Input | Op::Const => self.nodes[id].value,
            Op::Add(a, b) => match (num(get(a)), num(get(b))) {
                (Some(x), Some(y)) => Weight::Num(x + y),
                _ => Weight::Bot,
            },
            Op::Sub(a, b) => match (num(get(a)), num(get(b))) {
                (Some(x), Some(y)) => Weight::Num(x - y),
                _ => Weight::Bot,
            },
            Op::Mul(a, b) => match (num(get(a)), num(get(b))) {
                (Some(x), Some(y)) => Weight::Num(x * y),
                _ => Weight::Bot,
            },
            Op::Neg(a) => match num(get(a)) {
                Some(x) => Weight::Num(-x),
                None => Weight::Bot,
            },
            Op::Sin(a) => match num(get(a)) {
                Some(x) => Weight::Num(libm::sin(x)),
                None => Weight::Bot,
            },
            Op::Cos(a) => match num(get(a)) {
                Some(x) => Weight::Num(libm::cos(x)),
                None => Weight::Bot,
            },
            Op::Sqrt(a) => match num(get(a)) {
                Some(x) => Weight::Num(libm::sqrt(x)),
                None => Weight::Bot,
            },
            Op::Step(a) => match num(get(a)) {
                Some(x) => Weight::Num(if x >= 0.0 { 1.0 } else { 0.0 }),
                None => Weight::Bot,
            },
            Op::Max(a, b) => {
                let (va, vb) = (self.ext(get(a)), self.ext(get(b)));
                let take_b = vb > va || (vb == va && b.idx() < a.idx());
                if take_b {
                    get(b)
                } else {
                    get(a)
                }
            }
            Op::Min(a, b) => {
                let (va, vb) = (self.ext(get(a)), self.ext(get(b)));
                let take_b = vb < va || (vb == va && b.idx() < a.idx());
                if take_b {
                    get(b)
                } else {
                    get(a)
                }
            }
        }
    }

    /// Re-runs the forward pass from scratch and returns the output value.
    ///
    /// Recomputed values must match the cached ones exactly; the structural
    /// checks reject operand ids that do not precede their consumer.
    pub fn eval(&self) -> Result<Weight, TapeError> {
        let out = self.output.ok_or(TapeError::NoOutput)?;
        let mut values = vec![Weight::Bot; self.nodes.len()];
        for id in 0..self.nodes.len() {
            if !operands_precede(self.nodes[id].op, id) {
                return Err(TapeError::BadOperand { node: id as u32 });
            }
            values[id] = self.recompute(id, &values);
        }
        Ok(values[out.idx()])
    }

    /// Reverse pass: `∂output/∂u` for every registered input, in
    /// registration order.
    pub fn grad(&self) -> Result<Vec<f64>, TapeError> {
        let out = self.output.ok_or(TapeError::NoOutput)?;
        if self.value(out).is_bot() {
            return Err(TapeError::GradientUndefined);
        }
        let mut adj = vec![0.0f64; self.nodes.len()];
        adj[out.idx()] = 1.0;
        for id in (0..=out.idx()).rev() {
            let a = adj[id];
            if a == 0.0 {
                continue;
            }
            // a Bot-valued node contributes no sensitivity anywhere
            if self.nodes[id].value.is_bot() {
                continue;
            }
            let finite = |n: NodeId| !self.value(n).is_bot();
            match self.nodes[id].op {
                Op::Input | Op::Const => {}
                Op::Add(x, y) => {
                    if finite(x) {
                        adj[x.idx()] += a;
                    }
                    if finite(y) {
                        adj[y.idx()] += a;
                    }
                }
                Op::Sub(x, y) => {
                    if finite(x) {
                        adj[x.idx()] += a;
                    }
                    if finite(y) {
                        adj[y.idx()] -= a;
                    }
                }
                Op::Mul(x, y) => {
                    if let (Weight::Num(vx), Weight::Num(vy)) = (self.value(x), self.value(y)) {
                        adj[x.idx()] += a * vy;
                        adj[y.idx()] += a * vx;
                    }
                }
                Op::Neg(x) => {
                    if finite(x) {
                        adj[x.idx()] -= a;
                    }
                }
                Op::Sin(x) => {
                    if let Weight::Num(vx) = self.value(x) {
                        adj[x.idx()] += a * libm::cos(vx);
                    }
                }
                Op::Cos(x) => {
                    if let Weight::Num(vx) = self.value(x) {
                        adj[x.idx()] -= a * libm::sin(vx);
                    }
                }
                Op::Sqrt(x) => {
                    if let Weight::Num(v) = self.nodes[id].value {
                        // at the kink √0 the subgradient is taken as 0
                        if v > 0.0 {
                            adj[x.idx()] += a * 0.5 / v;
                        }
                    }
                }
                Op::Step(_) => {}
                Op::Max(x, y) => {
                    let (vx, vy) = (self.ext(self.value(x)), self.ext(self.value(y)));
                    let take_y = vy > vx || (vy == vx && y.idx() < x.idx());
                    let w = if take_y { y } else { x };
                    if finite(w) {
                        adj[w.idx()] += a;
                    }
                }
                Op::Min(x, y) => {
                    let (vx, vy) = (self.ext(self.value(x)), self.ext(self.value(y)));
                    let take_y = vy < vx || (vy == vx && y.idx() < x.idx());
                    let w = if take_y { y } else { x };
                    if finite(w) {
                        adj[w.idx()] += a;
                    }
                }
            }
        }
        Ok(self.inputs.iter().map(|id| adj[id.idx()]).collect())
    }

    /// Smallest winner margin over all `max`/`min` nodes with two finite
    /// operands. Finite-difference checks require this to be comfortably
    /// larger than the probe step so no winner flips under perturbation.
    pub fn min_winner_margin(&self) -> f64 {
        let mut margin = f64::INFINITY;
        for node in &self.nodes {
            if let Op::Max(a, b) | Op::Min(a, b) = node.op {
                if let (Weight::Num(x), Weight::Num(y)) = (self.value(a), self.value(b)) {
                    let gap = (x - y).abs();
                    if gap < margin {
                        margin = gap;
                    }
                }
            }
        }
        margin
    }
}

fn operands_precede(op: Op, id: usize) -> bool {
    let ok = |n: NodeId| n.idx() < id;
    match op {
        Op::Input | Op::Const => true,
        Op::Neg(a) | Op::Sin(a) | Op::Cos(a) | Op::Sqrt(a) | Op::Step(a) => ok(a),
        Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Max(a, b) | Op::Min(a, b) => {
            ok(a) && ok(b)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_one_evaluates_to_zero_in_maxplus() {
        let mut tape = Tape::new(SemiringTag::MaxPlus);
        let one = tape.constant(0.0);
        tape.set_output(one);
        assert_eq!(tape.eval().unwrap(), Weight::Num(0.0));
    }

    #[test]
    fn recorded_mul_matches_sr_mul() {
        let mut tape = Tape::new(SemiringTag::MaxPlus);
        let a = tape.constant(-2.0);
        let b = tape.constant(-3.0);
        let p = tape.sr_mul(a, b);
        tape.set_output(p);
        assert_eq!(tape.eval().unwrap(), Weight::Num(-5.0));
        assert_eq!(
            tape.value(p),
            SemiringTag::MaxPlus.mul(Weight::Num(-2.0), Weight::Num(-3.0))
        );
    }

    #[test]
    fn max_routes_gradient_to_strict_argmax() {
        let mut tape = Tape::new(SemiringTag::MaxPlus);
        let u1 = tape.input(-1.0);
        let u2 = tape.input(-2.0);
        let m = tape.max(u1, u2);
        tape.set_output(m);
        assert_eq!(tape.grad().unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn tie_routes_to_lowest_node_id() {
        let mut tape = Tape::new(SemiringTag::MaxPlus);
        let u1 = tape.input(-1.0);
        let u2 = tape.input(-1.0);
        let m = tape.max(u1, u2);
        tape.set_output(m);
        assert_eq!(tape.grad().unwrap(), vec![1.0, 0.0]);
        let mut tape = Tape::new(SemiringTag::MaxPlus);
        let u1 = tape.input(-1.0);
        let u2 = tape.input(-1.0);
        let m = tape.min(u2, u1); // reversed operand order, same winner rule
        tape.set_output(m);
        assert_eq!(tape.grad().unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn plus_routes_to_both() {
        let mut tape = Tape::new(SemiringTag::MaxPlus);
        let u1 = tape.input(1.5);
        let u2 = tape.input(-0.5);
        let s = tape.add(u1, u2);
        tape.set_output(s);
        assert_eq!(tape.grad().unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn bot_operand_gets_zero_gradient() {
        let mut tape = Tape::new(SemiringTag::MaxPlus);
        let u = tape.input(-1.0);
        let bot = tape.bot();
        let m = tape.sr_add(u, bot);
        tape.set_output(m);
        assert_eq!(tape.value(m), Weight::Num(-1.0));
        assert_eq!(tape.grad().unwrap(), vec![1.0]);
    }

    #[test]
    fn bot_output_is_a_gradient_error() {
        let mut tape = Tape::new(SemiringTag::MaxPlus);
        let u = tape.input(-1.0);
        let bot = tape.bot();
        let m = tape.sr_mul(u, bot);
        tape.set_output(m);
        assert_eq!(tape.grad(), Err(TapeError::GradientUndefined));
    }

    #[test]
    fn minplus_bot_reads_as_plus_infinity() {
        let mut tape = Tape::new(SemiringTag::MinPlus);
        let u = tape.input(2.0);
        let bot = tape.bot();
        let m = tape.sr_add(u, bot); // min(2, +inf) = 2
        let p = tape.sr_mul(m, bot); // 2 + inf = inf
        tape.set_output(p);
        assert!(tape.value(m) == Weight::Num(2.0));
        assert!(tape.value(p).is_bot());
    }

    #[test]
    fn chain_rule_through_dynamics_like_expression() {
        // f(u) = sin(u) * c + u
        let mut tape = Tape::new(SemiringTag::MaxPlus);
        let u = tape.input(0.3);
        let c = tape.constant(2.0);
        let s = tape.sin(u);
        let sc = tape.mul(s, c);
        let f = tape.add(sc, u);
        tape.set_output(f);
        let g = tape.grad().unwrap()[0];
        let expect = libm::cos(0.3) * 2.0 + 1.0;
        assert!((g - expect).abs() < 1e-12);
    }

    #[test]
    fn eval_reproduces_cached_values() {
        let mut tape = Tape::new(SemiringTag::MinMax);
        let u = tape.input(-0.25);
        let c = tape.constant(-0.5);
        let m = tape.sr_mul(u, c);
        let w = tape.sr_add(m, u);
        tape.set_output(w);
        assert_eq!(tape.eval().unwrap(), tape.value(w));
    }

    #[test]
    fn winner_margin_reports_smallest_gap() {
        let mut tape = Tape::new(SemiringTag::MaxPlus);
        let a = tape.constant(-1.0);
        let b = tape.constant(-1.25);
        let c = tape.constant(-3.0);
        let m1 = tape.max(a, b);
        let m2 = tape.max(m1, c);
        tape.set_output(m2);
        assert!((tape.min_winner_margin() - 0.25).abs() < 1e-15);
    }
}
