//! Semiring-weighted symbolic automata as differentiable matrix operators.
//!
//! A task is written as a symbolic automaton whose transitions carry
//! predicates over the system state. For a chosen semiring, the automaton
//! becomes a matrix-valued operator on states: reading a state produces a
//! weighted transition matrix, and the weight of a whole state trajectory is
//! the vector/matrix product of those operators between the initial and
//! accepting indicator vectors. Because every entry is built from max/min/add
//! over reals, the trajectory weight can be recorded on a reverse-mode tape
//! and differentiated end-to-end through the system dynamics, which is what
//! the planners in this crate do: gradient ascent on the trajectory weight,
//! either open loop or receding horizon with a memoized weight vector.
//!
//! The crate is `no_std` (with `alloc`); file formats, scenario handling and
//! the command line front end live in the companion `semiplan-cli` crate.
//!
//! Module map:
//!
//! - [`semiring`]: scalar carriers, ⊕/⊗ and their identities
//! - [`matrix`]: dense semiring matrices and vectors
//! - [`tape`]: reverse-mode autodiff over semiring and elementary real ops
//! - [`predicate`]: guard predicates, their text grammar and weighting
//! - [`automaton`]: symbolic automata, operators, oracles and builders
//! - [`dynamics`]: the discrete-time plant models and rollouts
//! - [`stl`]: discrete-time temporal-logic robustness monitoring
//! - [`planner`]: gradient-based open-loop planning and MPC

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod automaton;
pub mod dynamics;
pub mod matrix;
pub mod planner;
pub mod predicate;
pub mod rng;
pub mod semiring;
pub mod stl;
pub mod tape;

#[doc(hidden)]
pub mod testkit;

mod text;

pub use automaton::SymbolicAutomaton;
pub use dynamics::{ControlSequence, DynamicsModel, Environment, Trace};
pub use matrix::{WMatrix, WVector};
pub use planner::{MpcResult, PlanResult, PlannerConfig};
pub use predicate::{MuFunction, Predicate, RegionDef, RegionTable};
pub use semiring::{SemiringTag, Weight};
pub use stl::StlFormula;
pub use tape::{NodeId, Tape};
