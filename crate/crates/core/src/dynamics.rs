//! Discrete-time plant models `x_{t+1} = f(x_t, u_t)` and rollouts.
//!
//! Three models cover the bundled scenarios:
//!
//! - single integrator, `x' = x + u Δt`, state (x, y), control (vx, vy)
//! - unicycle, state (x, y, θ, v, ω), controlled by the linear and angular
//!   accelerations `(u_a, u_ω)`:
//!   `p' = p + (v cos θ, v sin θ, ω, u_a, u_ω) Δt`
//! - adaptive-cruise predictive model, state
//!   (p_ego, v_ego, d_lead, v_rel) with scalar acceleration input:
//!   the ego integrates exactly, the lead is assumed to hold its velocity
//!   (`d' = d + v_rel Δt − ½u Δt²`, `v_rel' = v_rel − u Δt`)
//!
//! Every step has a twin that records onto a [`Tape`] operation for
//! operation, so plain and recorded rollouts agree bit-exactly. Closed-loop
//! execution draws successor states from an [`Environment`] instead of the
//! model; for ACC the environment replays a piecewise-constant lead-velocity
//! profile, which the predictive model is deliberately ignorant of.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::matrix::ShapeError;
use crate::tape::{NodeId, Tape};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DynamicsError {
    Shape(ShapeError),
    /// Control component outside its configured bound.
    OutOfBounds { index: usize, value: f64, lo: f64, hi: f64 },
}

impl fmt::Display for DynamicsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DynamicsError::Shape(e) => write!(f, "{e}"),
            DynamicsError::OutOfBounds { index, value, lo, hi } => {
                write!(f, "control[{index}] = {value} outside [{lo}, {hi}]")
            }
        }
    }
}

impl core::error::Error for DynamicsError {}

impl From<ShapeError> for DynamicsError {
    fn from(e: ShapeError) -> Self {
        DynamicsError::Shape(e)
    }
}

/// A finite state trajectory: `|ξ|` states of uniform dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    dim: usize,
    data: Vec<f64>,
}

impl Trace {
    pub fn empty(dim: usize) -> Trace {
        Trace { dim, data: Vec::new() }
    }

    pub fn from_states(
        states: impl IntoIterator<Item = Vec<f64>>,
    ) -> Result<Trace, ShapeError> {
        let mut it = states.into_iter();
        let first = match it.next() {
            Some(s) => s,
            None => return Ok(Trace::empty(0)),
        };
        let dim = first.len();
        let mut t = Trace { dim, data: first };
        for s in it {
            if s.len() != dim {
                return Err(ShapeError { expected: dim, got: s.len() });
            }
            t.data.extend_from_slice(&s);
        }
        Ok(t)
    }

    pub fn push(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim);
        self.data.extend_from_slice(x);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of states.
    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn last(&self) -> Option<&[f64]> {
        self.len().checked_sub(1).map(|i| self.state(i))
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1))
    }
}

/// A control plan `(u₀, …, u_{H−1})`, stored flat in time-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlSequence {
    dim: usize,
    data: Vec<f64>,
}

impl ControlSequence {
    pub fn zeros(dim: usize, horizon: usize) -> ControlSequence {
        ControlSequence { dim, data: vec![0.0; dim * horizon] }
    }

    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<ControlSequence, ShapeError> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(ShapeError { expected: dim, got: data.len() });
        }
        Ok(ControlSequence { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Horizon length H.
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn control(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn as_flat_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Receding-horizon warm start: drop the first control, repeat the last.
    pub fn shifted(&self) -> ControlSequence {
        if self.len() <= 1 {
            return self.clone();
        }
        let mut data = self.data[self.dim..].to_vec();
        let last = &self.data[self.data.len() - self.dim..];
        data.extend_from_slice(last);
        ControlSequence { dim: self.dim, data }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    SingleIntegrator,
    Unicycle,
    Acc,
}

impl ModelKind {
    pub fn state_dim(self) -> usize {
        match self {
            ModelKind::SingleIntegrator => 2,
            ModelKind::Unicycle => 5,
            ModelKind::Acc => 4,
        }
    }

    pub fn control_dim(self) -> usize {
        match self {
            ModelKind::SingleIntegrator => 2,
            ModelKind::Unicycle => 2,
            ModelKind::Acc => 1,
        }
    }

    pub fn default_dt(self) -> f64 {
        match self {
            ModelKind::SingleIntegrator | ModelKind::Unicycle => 0.1,
            ModelKind::Acc => 0.01,
        }
    }
}

/// A plant model with sampling time and optional per-dimension control box.
#[derive(Clone, Debug)]
pub struct DynamicsModel {
    pub kind: ModelKind,
    pub dt: f64,
    pub control_bounds: Option<Vec<(f64, f64)>>,
}

impl DynamicsModel {
    pub fn new(kind: ModelKind, dt: f64) -> DynamicsModel {
        DynamicsModel { kind, dt, control_bounds: None }
    }

    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> DynamicsModel {
        debug_assert_eq!(bounds.len(), self.kind.control_dim());
        self.control_bounds = Some(bounds);
        self
    }

    pub fn state_dim(&self) -> usize {
        self.kind.state_dim()
    }

    pub fn control_dim(&self) -> usize {
        self.kind.control_dim()
    }

    fn check_dims(&self, x: &[f64], u: &[f64]) -> Result<(), DynamicsError> {
        if x.len() != self.state_dim() {
            return Err(ShapeError { expected: self.state_dim(), got: x.len() }.into());
        }
        if u.len() != self.control_dim() {
            return Err(ShapeError { expected: self.control_dim(), got: u.len() }.into());
        }
        Ok(())
    }

    /// Clamps every control into the configured box (no-op without bounds).
    pub fn clamp_controls(&self, us: &mut ControlSequence) {
        let Some(bounds) = &self.control_bounds else { return };
        let m = us.dim();
        for (i, v) in us.as_flat_mut().iter_mut().enumerate() {
            let (lo, hi) = bounds[i % m];
            *v = v.clamp(lo, hi);
        }
    }

    /// Errors on the first control outside the configured box.
    pub fn check_controls(&self, us: &ControlSequence) -> Result<(), DynamicsError> {
        let Some(bounds) = &self.control_bounds else { return Ok(()) };
        let m = us.dim();
        for (i, &v) in us.as_flat().iter().enumerate() {
            let (lo, hi) = bounds[i % m];
            if v < lo || v > hi {
                return Err(DynamicsError::OutOfBounds { index: i, value: v, lo, hi });
            }
        }
        Ok(())
    }

    /// One step of `f(x, u)`.
    pub fn step(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>, DynamicsError> {
        self.check_dims(x, u)?;
        let dt = self.dt;
        Ok(match self.kind {
            ModelKind::SingleIntegrator => vec![x[0] + u[0] * dt, x[1] + u[1] * dt],
            ModelKind::Unicycle => {
                let (theta, v, omega) = (x[2], x[3], x[4]);
                vec![
                    x[0] + v * libm::cos(theta) * dt,
                    x[1] + v * libm::sin(theta) * dt,
                    theta + omega * dt,
                    v + u[0] * dt,
                    omega + u[1] * dt,
                ]
            }
            ModelKind::Acc => {
                let (p, v, d, vr) = (x[0], x[1], x[2], x[3]);
                let half = 0.5 * dt * dt;
                vec![
                    p + v * dt + half * u[0],
                    v + u[0] * dt,
                    d + vr * dt - half * u[0],
                    vr - u[0] * dt,
                ]
            }
        })
    }

    /// `step` recorded on the tape, mirroring the plain arithmetic exactly.
    pub fn step_nodes(&self, tape: &mut Tape, x: &[NodeId], u: &[NodeId]) -> Vec<NodeId> {
        debug_assert_eq!(x.len(), self.state_dim());
        debug_assert_eq!(u.len(), self.control_dim());
        let dt = tape.constant(self.dt);
        match self.kind {
            ModelKind::SingleIntegrator => (0..2)
                .map(|i| {
                    let du = tape.mul(u[i], dt);
                    tape.add(x[i], du)
                })
                .collect(),
            ModelKind::Unicycle => {
                let (theta, v, omega) = (x[2], x[3], x[4]);
                let cos_t = tape.cos(theta);
                let sin_t = tape.sin(theta);
                let vx = tape.mul(v, cos_t);
                let vy = tape.mul(v, sin_t);
                let mut out = Vec::with_capacity(5);
                for (base, rate) in [(x[0], vx), (x[1], vy), (theta, omega), (v, u[0]), (omega, u[1])]
                {
                    let d = tape.mul(rate, dt);
                    out.push(tape.add(base, d));
                }
                out
            }
            ModelKind::Acc => {
                let (p, v, d, vr) = (x[0], x[1], x[2], x[3]);
                let half = tape.constant(0.5 * self.dt * self.dt);
                let v_dt = tape.mul(v, dt);
                let p_mid = tape.add(p, v_dt);
                let hu = tape.mul(half, u[0]);
                let p2 = tape.add(p_mid, hu);
                let u_dt = tape.mul(u[0], dt);
                let v2 = tape.add(v, u_dt);
                let vr_dt = tape.mul(vr, dt);
                let d_mid = tape.add(d, vr_dt);
                let d2 = tape.sub(d_mid, hu);
                let vr2 = tape.sub(vr, u_dt);
                vec![p2, v2, d2, vr2]
            }
        }
    }

    /// Open-loop rollout: a trace of `H + 1` states for `H` controls.
    pub fn rollout(&self, x0: &[f64], us: &ControlSequence) -> Result<Trace, DynamicsError> {
        let mut trace = Trace::empty(self.state_dim());
        if x0.len() != self.state_dim() {
            return Err(ShapeError { expected: self.state_dim(), got: x0.len() }.into());
        }
        trace.push(x0);
        let mut x = x0.to_vec();
        for t in 0..us.len() {
            x = self.step(&x, us.control(t))?;
            trace.push(&x);
        }
        Ok(trace)
    }

    /// Recorded rollout: the initial state enters as constants, every
    /// control component as a registered input (time-major), and the
    /// returned states are node vectors reaching all of them.
    pub fn rollout_nodes(
        &self,
        tape: &mut Tape,
        x0: &[f64],
        us: &ControlSequence,
    ) -> (Vec<Vec<NodeId>>, Vec<NodeId>) {
        debug_assert_eq!(x0.len(), self.state_dim());
        debug_assert_eq!(us.dim(), self.control_dim());
        let mut inputs = Vec::with_capacity(us.as_flat().len());
        let mut controls = Vec::with_capacity(us.len());
        for t in 0..us.len() {
            let u: Vec<NodeId> = us.control(t).iter().map(|&v| tape.input(v)).collect();
            inputs.extend_from_slice(&u);
            controls.push(u);
        }
        let mut states = Vec::with_capacity(us.len() + 1);
        let x0_nodes: Vec<NodeId> = x0.iter().map(|&v| tape.constant(v)).collect();
        states.push(x0_nodes);
        for u in &controls {
            let x = states.last().expect("states start with x0");
            let next = self.step_nodes(tape, x, u);
            states.push(next);
        }
        (states, inputs)
    }
}

/// Source of true successor states for closed-loop execution.
pub trait Environment {
    fn next_state(&mut self, t: usize, x: &[f64], u: &[f64]) -> Vec<f64>;
}

/// The plant model itself as the environment (model matches reality).
pub struct ModelEnvironment<'a> {
    pub model: &'a DynamicsModel,
}

impl Environment for ModelEnvironment<'_> {
    fn next_state(&mut self, _t: usize, x: &[f64], u: &[f64]) -> Vec<f64> {
        self.model.step(x, u).expect("environment called with validated dimensions")
    }
}

/// Piecewise-constant lead-car velocity profile.
#[derive(Clone, Debug)]
pub struct LeadProfile {
    /// `(until_s, velocity)`: the velocity applies while `t < until_s`;
    /// `None` means "until the end".
    pub segments: Vec<(Option<f64>, f64)>,
}

impl LeadProfile {
    pub fn velocity_at(&self, t_s: f64) -> f64 {
        for &(until, v) in &self.segments {
            match until {
                Some(end) if t_s < end => return v,
                None => return v,
                _ => {}
            }
        }
        self.segments.last().map(|&(_, v)| v).unwrap_or(0.0)
    }
}

/// True ACC plant: the ego integrates exactly as in the predictive model,
/// but the lead car follows the profile, so the observed `d_lead` and
/// `v_rel` deviate from the model's constant-velocity assumption.
pub struct AccEnvironment {
    pub dt: f64,
    pub profile: LeadProfile,
}

impl Environment for AccEnvironment {
    fn next_state(&mut self, t: usize, x: &[f64], u: &[f64]) -> Vec<f64> {
        let (p, v, d) = (x[0], x[1], x[2]);
        let dt = self.dt;
        let v_lead_now = self.profile.velocity_at(t as f64 * dt);
        let v_lead_next = self.profile.velocity_at((t + 1) as f64 * dt);
        let ego_advance = v * dt + 0.5 * u[0] * dt * dt;
        let v2 = v + u[0] * dt;
        vec![p + ego_advance, v2, d + v_lead_now * dt - ego_advance, v_lead_next - v2]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semiring::SemiringTag;
    use crate::semiring::Weight;

    fn close(a: f64, b: f64) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn integrator_step() {
        let m = DynamicsModel::new(ModelKind::SingleIntegrator, 0.1);
        let x = m.step(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        close(x[0], 0.1);
        close(x[1], 0.1);
    }

    #[test]
    fn unicycle_step_along_heading() {
        let m = DynamicsModel::new(ModelKind::Unicycle, 0.1);
        let x = m.step(&[0.0, 0.0, 0.0, 1.0, 0.0], &[0.0, 0.0]).unwrap();
        close(x[0], 0.1);
        close(x[1], 0.0);
        close(x[2], 0.0);
        close(x[3], 1.0);
        close(x[4], 0.0);
    }

    #[test]
    fn acc_step_with_half_accel_terms() {
        let m = DynamicsModel::new(ModelKind::Acc, 0.01);
        let x = m.step(&[0.0, 10.0, 20.0, 0.0], &[1.0]).unwrap();
        close(x[0], 0.10005);
        close(x[1], 10.01);
        close(x[2], 19.99995);
        close(x[3], -0.01);
    }

    #[test]
    fn acc_deltas_follow_the_displayed_relations() {
        let m = DynamicsModel::new(ModelKind::Acc, 0.01);
        for (x, u) in [
            ([3.0, 12.0, 18.0, -2.0], 2.5),
            ([0.0, 0.0, 5.0, 4.0], -3.0),
            ([100.0, 15.0, 6.5, 0.25], 0.75),
        ] {
            let next = m.step(&x, &[u]).unwrap();
            close(next[2] - x[2], x[3] * m.dt - 0.5 * u * m.dt * m.dt);
            close(next[3] - x[3], -u * m.dt);
        }
    }

    #[test]
    fn rollout_has_horizon_plus_one_states_and_prefix_property() {
        let m = DynamicsModel::new(ModelKind::SingleIntegrator, 0.1);
        let us = ControlSequence::from_flat(2, vec![1.0, 0.0, 0.5, -0.5, 0.0, 1.0]).unwrap();
        let full = m.rollout(&[0.0, 0.0], &us).unwrap();
        assert_eq!(full.len(), 4);
        for t in 0..us.len() {
            let prefix =
                ControlSequence::from_flat(2, us.as_flat()[..t * 2].to_vec().into()).unwrap();
            let part = m.rollout(&[0.0, 0.0], &prefix).unwrap();
            assert_eq!(part.len(), t + 1);
            for i in 0..part.len() {
                assert_eq!(part.state(i), full.state(i), "prefix diverges at {i}");
            }
        }
        // zero controls hold the integrator still
        let zeros = ControlSequence::zeros(2, 5);
        let still = m.rollout(&[1.0, -1.0], &zeros).unwrap();
        assert!(still.states().all(|s| s == [1.0, -1.0]));
        // H = 0
        let tr = m.rollout(&[2.0, 3.0], &ControlSequence::zeros(2, 0)).unwrap();
        assert_eq!(tr.len(), 1);
    }

    #[test]
    fn recorded_rollout_matches_plain_rollout() {
        for (kind, x0) in [
            (ModelKind::SingleIntegrator, vec![0.2, -0.3]),
            (ModelKind::Unicycle, vec![0.0, 0.0, 0.4, 1.0, -0.2]),
            (ModelKind::Acc, vec![0.0, 10.0, 25.0, 1.5]),
        ] {
            let m = DynamicsModel::new(kind, kind.default_dt());
            let h = 6;
            let mut us = ControlSequence::zeros(m.control_dim(), h);
            for (i, v) in us.as_flat_mut().iter_mut().enumerate() {
                *v = 0.3 * (i as f64 % 3.0) - 0.2;
            }
            let plain = m.rollout(&x0, &us).unwrap();
            let mut tape = Tape::new(SemiringTag::MaxPlus);
            let (states, inputs) = m.rollout_nodes(&mut tape, &x0, &us);
            assert_eq!(states.len(), h + 1);
            assert_eq!(inputs.len(), h * m.control_dim());
            for (t, nodes) in states.iter().enumerate() {
                for (i, &n) in nodes.iter().enumerate() {
                    assert_eq!(
                        tape.value(n),
                        Weight::Num(plain.state(t)[i]),
                        "{kind:?} state {t} dim {i}"
                    );
                }
            }
        }
    }

    #[test]
    fn integrator_final_coordinate_gradient_is_dt() {
        let m = DynamicsModel::new(ModelKind::SingleIntegrator, 0.1);
        let us = ControlSequence::zeros(2, 5);
        let mut tape = Tape::new(SemiringTag::MaxPlus);
        let (states, _) = m.rollout_nodes(&mut tape, &[0.0, 0.0], &us);
        tape.set_output(states.last().unwrap()[0]);
        let g = tape.grad().unwrap();
        // d x_H[0] / d u_t[0] = dt for every t; the y-channel is untouched
        for t in 0..5 {
            assert!((g[2 * t] - 0.1).abs() < 1e-15);
            assert_eq!(g[2 * t + 1], 0.0);
        }
    }

    #[test]
    fn control_bounds_clamp_and_check() {
        let m = DynamicsModel::new(ModelKind::Acc, 0.01).with_bounds(vec![(-3.0, 3.0)]);
        let mut us = ControlSequence::from_flat(1, vec![-5.0, 2.0, 4.0]).unwrap();
        assert!(m.check_controls(&us).is_err());
        m.clamp_controls(&mut us);
        assert_eq!(us.as_flat(), &[-3.0, 2.0, 3.0]);
        assert!(m.check_controls(&us).is_ok());
    }

    #[test]
    fn lead_profile_lookup() {
        let p = LeadProfile {
            segments: vec![(Some(10.0), 12.0), (Some(20.0), 6.0), (None, 14.0)],
        };
        assert_eq!(p.velocity_at(0.0), 12.0);
        assert_eq!(p.velocity_at(9.999), 12.0);
        assert_eq!(p.velocity_at(10.0), 6.0);
        assert_eq!(p.velocity_at(25.0), 14.0);
    }

    #[test]
    fn acc_environment_tracks_the_true_lead() {
        let model = DynamicsModel::new(ModelKind::Acc, 0.01);
        let mut env = AccEnvironment {
            dt: 0.01,
            profile: LeadProfile { segments: vec![(None, 12.0)] },
        };
        // ego at 12 m/s, lead at 12 m/s: with zero input the gap holds
        let x = vec![0.0, 12.0, 10.0, 0.0];
        let next = env.next_state(0, &x, &[0.0]);
        close(next[2], 10.0);
        close(next[3], 0.0);
        // model and environment agree when the profile matches v_rel
        let model_next = model.step(&x, &[0.0]).unwrap();
        for i in 0..4 {
            close(next[i], model_next[i]);
        }
    }
}
