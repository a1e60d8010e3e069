//! Gradient-based planning over the automaton weight.
//!
//! Open-loop planning repeats, for a fixed number of epochs: roll the model
//! out under the current control plan, record the trajectory weight
//! `w = q_initᵀ Ae(x₀) ⋯ Ae(x_H) β` on the tape, and take one gradient step
//! `u ← u + γ ∇_u w` (toward satisfaction; the minplus cost semiring steps
//! down instead). Controls start at zero, with optional random restarts.
//! Early stopping triggers the first time the weight reaches 1̃, which is
//! exactly "a satisfying trajectory was found"; `t_star` counts evaluation
//! epochs until then.
//!
//! The receding-horizon planner wraps the open-loop call: at every step it
//! plans from the current state and the memoized weight vector
//! `q_{t+1} = q_tᵀ Ae(x_t)`, applies the first control, and observes the
//! next state from the environment (which may deviate from the model). The
//! memoized vector is all the specification history the planner ever needs.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::automaton::{AutomatonError, SymbolicAutomaton};
use crate::dynamics::{ControlSequence, DynamicsError, DynamicsModel, Environment, Trace};
use crate::matrix::WVector;
use crate::rng::SplitMix64;
use crate::semiring::{SemiringTag, Weight};
use crate::stl::{StlFormula, WindowMode};
use crate::tape::{NodeId, Tape, TapeError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundsMode {
    /// Clamp the plan into the control box after every gradient step.
    Project,
    /// Error out as soon as the plan leaves the control box.
    Reject,
    /// Ignore configured bounds.
    None,
}

/// Hyperparameters for [`open_loop`] and [`mpc`].
#[derive(Clone, Debug)]
pub struct PlannerConfig {
    pub horizon: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub semiring: SemiringTag,
    pub seed: u64,
    pub bounds_mode: BoundsMode,
    pub early_stop: bool,
    pub restart_count: usize,
    /// Seed each receding-horizon solve with the previous plan shifted by
    /// one step.
    pub warm_start: bool,
    /// Whether the receding-horizon inner solve includes `Ae(x_t)` for the
    /// current state, which the memo update consumes as well.
    pub mpc_consumes_current_state: bool,
    /// Weight of an optional `−c‖u‖²` term added to the objective.
    pub control_effort_weight: f64,
    /// Halve the step size when the weight regresses, recover slowly.
    pub adaptive_rate: bool,
}

impl PlannerConfig {
    pub fn new(horizon: usize, learning_rate: f64, epochs: usize, semiring: SemiringTag) -> Self {
        PlannerConfig {
            horizon,
            learning_rate,
            epochs,
            semiring,
            seed: 0,
            bounds_mode: BoundsMode::Project,
            early_stop: true,
            restart_count: 0,
            warm_start: true,
            mpc_consumes_current_state: true,
            control_effort_weight: 0.0,
            adaptive_rate: false,
        }
    }

    fn validate(&self) -> Result<(), PlanError> {
        if self.horizon == 0 {
            return Err(PlanError::BadConfig("horizon must be at least 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(PlanError::BadConfig("learning rate must be positive"));
        }
        if self.epochs == 0 {
            return Err(PlanError::BadConfig("epoch count must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PlanError {
    Automaton(AutomatonError),
    Dynamics(DynamicsError),
    Tape(TapeError),
    BadConfig(&'static str),
}

impl fmt::Display for PlanError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanError::Automaton(e) => write!(f, "{e}"),
            PlanError::Dynamics(e) => write!(f, "{e}"),
            PlanError::Tape(e) => write!(f, "{e}"),
            PlanError::BadConfig(msg) => f.write_str(msg),
        }
    }
}

impl core::error::Error for PlanError {}

impl From<AutomatonError> for PlanError {
    fn from(e: AutomatonError) -> Self {
        PlanError::Automaton(e)
    }
}

impl From<DynamicsError> for PlanError {
    fn from(e: DynamicsError) -> Self {
        PlanError::Dynamics(e)
    }
}

impl From<TapeError> for PlanError {
    fn from(e: TapeError) -> Self {
        PlanError::Tape(e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlanOutcome {
    /// The weight reached 1̃; `t_star` records the epoch.
    Satisfied,
    /// The epoch budget ran out before a satisfying trajectory appeared.
    EpochsExhausted,
    /// Even the best reachable prefix weight is 0̃: every run is
    /// structurally dead and no gradient exists. Restarting from a
    /// different initialization (or a longer horizon) is the only recourse.
    DeadTape,
}

/// Result of one open-loop solve.
#[derive(Clone, Debug)]
pub struct PlanResult {
    pub controls: ControlSequence,
    pub trace: Trace,
    pub final_weight: Weight,
    /// Epochs until the first satisfying trajectory, counted across
    /// restarts, 1-based.
    pub t_star: Option<usize>,
    pub weight_history: Vec<Weight>,
    pub outcome: PlanOutcome,
    pub epochs_used: usize,
    /// Robustness of [`PlanResult::trace`] when a formula is attached.
    pub rho: Option<f64>,
}

/// Gradient-based open-loop planning (zero-initialized controls, optional
/// random restarts), from an explicit initial weight configuration `q_init`
/// (α for a fresh plan).
pub fn open_loop(
    model: &DynamicsModel,
    automaton: &SymbolicAutomaton,
    x_init: &[f64],
    q_init: &WVector,
    cfg: &PlannerConfig,
    formula: Option<&StlFormula>,
) -> Result<PlanResult, PlanError> {
    cfg.validate()?;
    check_dims(model, automaton, x_init, q_init)?;
    let mut tape = Tape::new(cfg.semiring);
    let mut result = open_loop_inner(model, automaton, x_init, q_init, cfg, None, false, &mut tape, 0)?;
    attach_rho(&mut result, formula);
    Ok(result)
}

fn check_dims(
    model: &DynamicsModel,
    automaton: &SymbolicAutomaton,
    x_init: &[f64],
    q_init: &WVector,
) -> Result<(), PlanError> {
    if model.state_dim() != automaton.state_dim() {
        return Err(AutomatonError::StateDimMismatch {
            left: model.state_dim(),
            right: automaton.state_dim(),
        }
        .into());
    }
    if x_init.len() != model.state_dim() {
        return Err(PlanError::Dynamics(
            crate::matrix::ShapeError { expected: model.state_dim(), got: x_init.len() }.into(),
        ));
    }
    if q_init.dim() != automaton.n_locations() {
        return Err(PlanError::Automaton(
            crate::matrix::ShapeError {
                expected: automaton.n_locations(),
                got: q_init.dim(),
            }
            .into(),
        ));
    }
    Ok(())
}

fn attach_rho(result: &mut PlanResult, formula: Option<&StlFormula>) {
    if let Some(f) = formula {
        result.rho = f.robustness(&result.trace, 0, WindowMode::Truncate).ok();
    }
}

/// Whether larger weights are better under this semiring (minplus is a cost
/// semiring: 1̃ = 0 is the carrier minimum, so improvement means stepping
/// down the weight).
fn ascending(tag: SemiringTag) -> bool {
    !matches!(tag, SemiringTag::MinPlus)
}

#[allow(clippy::too_many_arguments)]
fn open_loop_inner(
    model: &DynamicsModel,
    automaton: &SymbolicAutomaton,
    x_init: &[f64],
    q_init: &WVector,
    cfg: &PlannerConfig,
    warm: Option<&ControlSequence>,
    skip_first_operator: bool,
    tape: &mut Tape,
    epochs_before: usize,
) -> Result<PlanResult, PlanError> {
    let tag = cfg.semiring;
    let one = tag.one();
    let m = model.control_dim();
    let mut total_epochs = epochs_before;
    let mut weight_history = Vec::new();
    let mut rng = SplitMix64::new(cfg.seed);
    let mut last: Option<(ControlSequence, Trace, Weight)> = None;
    let mut dead_tape = true;

    let restarts = if warm.is_some() { 0 } else { cfg.restart_count };
    for restart in 0..=restarts {
        let mut controls = match (warm, restart) {
            (Some(w), _) => w.clone(),
            (None, 0) => ControlSequence::zeros(m, cfg.horizon),
            (None, _) => random_controls(model, cfg.horizon, &mut rng),
        };
        if cfg.bounds_mode == BoundsMode::Reject {
            model.check_controls(&controls).map_err(PlanError::Dynamics)?;
        }
        let mut rate = cfg.learning_rate;
        let mut prev_weight: Option<Weight> = None;

        for _ in 0..cfg.epochs {
            total_epochs += 1;
            tape.clear();
            let (states, inputs) = model.rollout_nodes(tape, x_init, &controls);
            let q0 = weight_vector_nodes(tape, q_init);
            let consumed = if skip_first_operator { &states[1..] } else { &states[..] };
            let mut q = q0;
            for x in consumed {
                let guard_nodes = automaton.guard_weight_nodes(tape, x);
                q = automaton.step_weight_nodes(tape, &q, &guard_nodes);
            }
            let w_node = automaton.accepting_weight_node(tape, &q);
            let w = tape.value(w_node);
            weight_history.push(w);

            if cfg.early_stop && w == one {
                let trace = states_to_trace(tape, &states, model.state_dim());
                return Ok(PlanResult {
                    controls,
                    trace,
                    final_weight: w,
                    t_star: Some(total_epochs),
                    weight_history,
                    outcome: PlanOutcome::Satisfied,
                    epochs_used: total_epochs - epochs_before,
                    rho: None,
                });
            }

            // when no run reaches acceptance within the horizon, climb the
            // best reachable prefix weight instead
            let objective = if w.is_bot() {
                let fallback = automaton.any_weight_node(tape, &q);
                if tape.value(fallback).is_bot() {
                    let trace = states_to_trace(tape, &states, model.state_dim());
                    last = Some((controls.clone(), trace, w));
                    break; // dead tape: try the next restart
                }
                fallback
            } else {
                w_node
            };
            dead_tape = false;

            let objective = if cfg.control_effort_weight > 0.0 {
                add_effort_penalty(tape, objective, &inputs, cfg.control_effort_weight)
            } else {
                objective
            };
            tape.set_output(objective);
            let grads = tape.grad()?;

            if cfg.adaptive_rate {
                if let (Some(prev), Weight::Num(_)) = (prev_weight, w) {
                    let better = match (prev, w) {
                        (Weight::Bot, _) => true,
                        (Weight::Num(p), Weight::Num(c)) => {
                            if ascending(tag) {
                                c >= p
                            } else {
                                c <= p
                            }
                        }
                        _ => false,
                    };
                    if better {
                        rate = (rate * 1.2).min(cfg.learning_rate);
                    } else {
                        rate *= 0.5;
                    }
                }
                prev_weight = Some(w);
            }

            let trace = states_to_trace(tape, &states, model.state_dim());
            last = Some((controls.clone(), trace, w));
            let sign = if ascending(tag) { 1.0 } else { -1.0 };
            for (u, g) in controls.as_flat_mut().iter_mut().zip(&grads) {
                *u += sign * rate * g;
            }
            match cfg.bounds_mode {
                BoundsMode::Project => model.clamp_controls(&mut controls),
                BoundsMode::Reject => {
                    model.check_controls(&controls).map_err(PlanError::Dynamics)?
                }
                BoundsMode::None => {}
            }
        }
    }

    let (controls, trace, final_weight) = match last {
        Some(snap) => snap,
        None => {
            let controls = ControlSequence::zeros(m, cfg.horizon);
            let trace = model.rollout(x_init, &controls)?;
            let w = prefix_weight(automaton, q_init, &trace, tag, skip_first_operator)?;
            (controls, trace, w)
        }
    };
    Ok(PlanResult {
        controls,
        trace,
        final_weight,
        t_star: None,
        weight_history,
        outcome: if dead_tape { PlanOutcome::DeadTape } else { PlanOutcome::EpochsExhausted },
        epochs_used: total_epochs - epochs_before,
        rho: None,
    })
}

fn weight_vector_nodes(tape: &mut Tape, q: &WVector) -> Vec<NodeId> {
    q.entries()
        .iter()
        .map(|w| match w {
            Weight::Bot => tape.bot(),
            Weight::Num(v) => tape.constant(*v),
        })
        .collect()
}

fn states_to_trace(tape: &Tape, states: &[Vec<NodeId>], dim: usize) -> Trace {
    let mut trace = Trace::empty(dim);
    let mut buf = vec![0.0; dim];
    for nodes in states {
        for (v, &n) in buf.iter_mut().zip(nodes) {
            *v = match tape.value(n) {
                Weight::Num(x) => x,
                Weight::Bot => f64::NAN,
            };
        }
        trace.push(&buf);
    }
    trace
}

fn add_effort_penalty(tape: &mut Tape, objective: NodeId, inputs: &[NodeId], c: f64) -> NodeId {
    let mut sum = None;
    for &u in inputs {
        let sq = tape.mul(u, u);
        sum = Some(match sum {
            None => sq,
            Some(prev) => tape.add(prev, sq),
        });
    }
    match sum {
        None => objective,
        Some(s) => {
            let cw = tape.constant(c);
            let scaled = tape.mul(cw, s);
            tape.sub(objective, scaled)
        }
    }
}

fn random_controls(model: &DynamicsModel, horizon: usize, rng: &mut SplitMix64) -> ControlSequence {
    let m = model.control_dim();
    let mut us = ControlSequence::zeros(m, horizon);
    for (i, v) in us.as_flat_mut().iter_mut().enumerate() {
        let (lo, hi) = model
            .control_bounds
            .as_ref()
            .map(|b| b[i % m])
            .unwrap_or((-1.0, 1.0));
        // restart inside the middle half of the box
        *v = rng.uniform(0.5 * lo, 0.5 * hi);
    }
    us
}

fn prefix_weight(
    automaton: &SymbolicAutomaton,
    q_init: &WVector,
    trace: &Trace,
    tag: SemiringTag,
    skip_first: bool,
) -> Result<Weight, PlanError> {
    let (_, beta) = automaton.alpha_beta(tag);
    let mut q = q_init.clone();
    for (i, x) in trace.states().enumerate() {
        if skip_first && i == 0 {
            continue;
        }
        q = automaton.step_weight_vector(&q, x, tag)?;
    }
    Ok(q.dot(&beta, tag).map_err(AutomatonError::from)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MpcOutcome {
    Completed,
    /// The memoized weight vector reached all-0̃: the specification is
    /// irrecoverably violated and execution stopped early.
    DeadWeightVector { at_step: usize },
}

/// Result of a closed-loop run.
#[derive(Clone, Debug)]
pub struct MpcResult {
    /// Executed states, `total_steps + 1` of them on completion.
    pub executed: Trace,
    /// First controls of each per-step solve, as applied.
    pub applied: ControlSequence,
    /// Per-step open-loop results.
    pub steps: Vec<PlanResult>,
    /// Memoized weight vectors `q_0 = α, …`; entry `t+1` has consumed
    /// states `x_0 … x_t`.
    pub q_history: Vec<WVector>,
    pub outcome: MpcOutcome,
    /// Robustness of the executed trace when a formula is attached.
    pub rho: Option<f64>,
}

/// Receding-horizon control: replan with [`open_loop`] from the memoized
/// weight vector at every step, apply the first control, observe the next
/// state from the environment.
pub fn mpc(
    model: &DynamicsModel,
    env: &mut dyn Environment,
    automaton: &SymbolicAutomaton,
    x_init: &[f64],
    cfg: &PlannerConfig,
    total_steps: usize,
    formula: Option<&StlFormula>,
) -> Result<MpcResult, PlanError> {
    cfg.validate()?;
    let tag = cfg.semiring;
    let (alpha, _) = automaton.alpha_beta(tag);
    check_dims(model, automaton, x_init, &alpha)?;

    let mut tape = Tape::new(tag);
    let mut q = alpha;
    let mut q_history = vec![q.clone()];
    let mut x = x_init.to_vec();
    let mut executed = Trace::empty(model.state_dim());
    executed.push(&x);
    let mut applied = ControlSequence::zeros(model.control_dim(), 0);
    let mut steps = Vec::with_capacity(total_steps);
    let mut warm: Option<ControlSequence> = None;
    let mut outcome = MpcOutcome::Completed;

    for t in 0..total_steps {
        if q.entries().iter().all(|w| w.is_bot()) {
            outcome = MpcOutcome::DeadWeightVector { at_step: t };
            break;
        }
        let skip_first = !cfg.mpc_consumes_current_state;
        let step = open_loop_inner(
            model,
            automaton,
            &x,
            &q,
            cfg,
            warm.as_ref(),
            skip_first,
            &mut tape,
            0,
        )?;
        let u0 = step.controls.control(0).to_vec();
        let x_next = env.next_state(t, &x, &u0);
        q = automaton.step_weight_vector(&q, &x, tag)?;
        q_history.push(q.clone());
        executed.push(&x_next);
        let mut flat = applied.as_flat().to_vec();
        flat.extend_from_slice(&u0);
        applied = ControlSequence::from_flat(model.control_dim(), flat)
            .expect("control dimension is fixed");
        warm = cfg.warm_start.then(|| step.controls.shifted());
        steps.push(step);
        x = x_next;
    }

    let rho = formula.and_then(|f| f.robustness(&executed, 0, WindowMode::Truncate).ok());
    Ok(MpcResult { executed, applied, steps, q_history, outcome, rho })
}
