//! Scenario files: schema, validation and lowering into core types.
//!
//! A scenario bundles the workspace regions, the task automaton (built,
//! inline, or from a file), the formula used for robustness reporting, the
//! plant configuration, and the planner hyperparameters. Validation
//! aggregates every problem it finds with a JSON-pointer-style path instead
//! of stopping at the first one.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use semiplan::automaton::{
    build_any_order_visit, build_invariant, build_response_window, build_sequence_visit,
    DwellGoal, SymbolicAutomaton,
};
use semiplan::dynamics::{DynamicsModel, LeadProfile, ModelKind};
use semiplan::planner::{BoundsMode, PlannerConfig};
use semiplan::predicate::{parse_predicate, RegionDef, RegionTable};
use semiplan::semiring::SemiringTag;
use semiplan::stl::{parse_formula, StlFormula};

use crate::autjson::AutomatonFile;

/// One validation problem, located by a JSON-pointer-style path.
#[derive(Clone, Debug)]
pub struct Issue {
    pub pointer: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.pointer, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{} validation issue(s):\n{}", .issues.len(),
            .issues.iter().map(|i| format!("  - {i}")).collect::<Vec<_>>().join("\n"))]
    Invalid { issues: Vec<Issue> },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionSpec {
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        proj: Option<Vec<usize>>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        proj: Option<Vec<usize>>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GoalSpec {
    pub region: String,
    pub dwell: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "builder", rename_all = "snake_case", deny_unknown_fields)]
pub enum AutomatonSource {
    /// Visit the regions in order, always avoiding.
    SequenceVisit { regions: Vec<String>, #[serde(default)] avoid: Vec<String> },
    /// Visit every goal (with dwell) in any order, always avoiding.
    AnyOrderVisit { goals: Vec<GoalSpec>, #[serde(default)] avoid: Vec<String> },
    /// Bounded response: whenever `hold` is true it must stop being true
    /// (via `release`) within `window` steps; optionally conjoined with an
    /// invariant `safety` guard.
    ResponseWindow {
        hold: String,
        release: String,
        window: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        safety: Option<String>,
    },
    /// Automaton given inline in the automaton file format.
    Inline { automaton: AutomatonFile },
    /// Automaton loaded from a separate file (relative to the scenario).
    File { path: String },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LeadSegmentSpec {
    /// Applies while `t < until_s` (seconds); `null` means until the end.
    pub until_s: Option<f64>,
    pub velocity: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub x0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control_bounds: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lead_profile: Option<Vec<LeadSegmentSpec>>,
}

fn default_true() -> bool {
    true
}

fn default_bounds_mode() -> String {
    "project".into()
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PlannerSpec {
    pub horizon: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub semiring: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_bounds_mode")]
    pub control_bounds_mode: String,
    #[serde(default = "default_true")]
    pub early_stop: bool,
    #[serde(default)]
    pub restart_count: usize,
    #[serde(default = "default_true")]
    pub warm_start: bool,
    #[serde(default = "default_true")]
    pub mpc_consumes_current_state: bool,
    #[serde(default)]
    pub control_effort_weight: f64,
    #[serde(default)]
    pub adaptive_rate: bool,
}

/// Partial override applied on top of `planner` when running in MPC mode,
/// so one scenario can carry both the open-loop and the closed-loop
/// settings from the experiment tables.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PlannerOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restart_count: Option<usize>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    OpenLoop,
    Mpc,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::OpenLoop => "open_loop",
            Mode::Mpc => "mpc",
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefix: Option<String>,
}

/// The on-disk scenario schema.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub regions: BTreeMap<String, RegionSpec>,
    pub automaton: AutomatonSource,
    pub stl_formula: String,
    pub dynamics: DynamicsSpec,
    pub planner: PlannerSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mpc_planner: Option<PlannerOverride>,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
}

/// A fully resolved scenario.
pub struct Scenario {
    pub file: ScenarioFile,
    pub regions: RegionTable,
    pub automaton: SymbolicAutomaton,
    pub formula: StlFormula,
    pub model: DynamicsModel,
    pub x0: Vec<f64>,
    pub lead_profile: Option<LeadProfile>,
    pub mode: Mode,
    pub total_steps: usize,
    /// Canonical serialization of the validated file, the hashing input.
    pub canonical_json: String,
}

impl Scenario {
    pub fn name(&self) -> &str {
        &self.file.name
    }

    /// Planner configuration for the given mode (MPC overrides applied).
    pub fn planner_config(&self, mode: Mode) -> PlannerConfig {
        let spec = &self.file.planner;
        let mut cfg = PlannerConfig::new(
            spec.horizon,
            spec.learning_rate,
            spec.epochs,
            spec.semiring.parse().expect("validated"),
        );
        cfg.seed = spec.seed;
        cfg.bounds_mode = match spec.control_bounds_mode.as_str() {
            "reject" => BoundsMode::Reject,
            "none" => BoundsMode::None,
            _ => BoundsMode::Project,
        };
        cfg.early_stop = spec.early_stop;
        cfg.restart_count = spec.restart_count;
        cfg.warm_start = spec.warm_start;
        cfg.mpc_consumes_current_state = spec.mpc_consumes_current_state;
        cfg.control_effort_weight = spec.control_effort_weight;
        cfg.adaptive_rate = spec.adaptive_rate;
        if mode == Mode::Mpc {
            if let Some(over) = &self.file.mpc_planner {
                if let Some(h) = over.horizon {
                    cfg.horizon = h;
                }
                if let Some(lr) = over.learning_rate {
                    cfg.learning_rate = lr;
                }
                if let Some(k) = over.epochs {
                    cfg.epochs = k;
                }
                if let Some(r) = over.restart_count {
                    cfg.restart_count = r;
                }
            }
        }
        cfg
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ScenarioError::Io { path: path.to_path_buf(), source })?;
    let file: ScenarioFile = serde_json::from_str(&text)
        .map_err(|source| ScenarioError::Json { path: path.to_path_buf(), source })?;
    resolve_scenario(file, path.parent())
}

/// Validates and lowers a parsed scenario file, aggregating every issue.
pub fn resolve_scenario(
    file: ScenarioFile,
    base_dir: Option<&Path>,
) -> Result<Scenario, ScenarioError> {
    let mut issues: Vec<Issue> = Vec::new();

    // dynamics first: the state dimension anchors everything else
    let kind = match file.dynamics.kind.as_str() {
        "single_integrator" => Some(ModelKind::SingleIntegrator),
        "unicycle" => Some(ModelKind::Unicycle),
        "acc" => Some(ModelKind::Acc),
        other => {
            issues.push(Issue {
                pointer: "/dynamics/kind".into(),
                message: format!(
                    "unknown kind `{other}` (expected single_integrator, unicycle, acc)"
                ),
            });
            None
        }
    };
    let dt = file.dynamics.dt.unwrap_or_else(|| kind.map_or(0.1, ModelKind::default_dt));
    if !(dt > 0.0) {
        issues.push(Issue {
            pointer: "/dynamics/dt".into(),
            message: format!("sampling time must be positive, got {dt}"),
        });
    }
    let state_dim = kind.map(ModelKind::state_dim).unwrap_or(file.dynamics.x0.len());
    if let Some(k) = kind {
        if file.dynamics.x0.len() != k.state_dim() {
            issues.push(Issue {
                pointer: "/dynamics/x0".into(),
                message: format!(
                    "expected {} state components, got {}",
                    k.state_dim(),
                    file.dynamics.x0.len()
                ),
            });
        }
        if let Some(bounds) = &file.dynamics.control_bounds {
            if bounds.len() != k.control_dim() {
                issues.push(Issue {
                    pointer: "/dynamics/control_bounds".into(),
                    message: format!(
                        "expected {} control bounds, got {}",
                        k.control_dim(),
                        bounds.len()
                    ),
                });
            }
            for (i, b) in bounds.iter().enumerate() {
                if !(b[0] < b[1]) {
                    issues.push(Issue {
                        pointer: format!("/dynamics/control_bounds/{i}"),
                        message: format!("empty bound [{}, {}]", b[0], b[1]),
                    });
                }
            }
        }
        if k != ModelKind::Acc && file.dynamics.lead_profile.is_some() {
            issues.push(Issue {
                pointer: "/dynamics/lead_profile".into(),
                message: "lead profiles only apply to the acc model".into(),
            });
        }
    }

    // regions
    let mut regions = RegionTable::new();
    for (name, spec) in &file.regions {
        let pointer = format!("/regions/{name}");
        let (lens_ok, proj) = match spec {
            RegionSpec::Box { lo, hi, proj } => {
                let proj = proj.clone().unwrap_or_else(|| (0..lo.len()).collect());
                let ok = lo.len() == hi.len() && proj.len() == lo.len() && !lo.is_empty();
                if !ok {
                    issues.push(Issue {
                        pointer: pointer.clone(),
                        message: format!(
                            "lo/hi/proj lengths disagree ({}/{}/{})",
                            lo.len(),
                            hi.len(),
                            proj.len()
                        ),
                    });
                }
                if lo.iter().zip(hi).any(|(a, b)| a >= b) {
                    issues.push(Issue {
                        pointer: pointer.clone(),
                        message: "box must satisfy lo < hi componentwise".into(),
                    });
                }
                (ok, proj)
            }
            RegionSpec::Ball { center, radius, proj } => {
                let proj = proj.clone().unwrap_or_else(|| (0..center.len()).collect());
                let ok = proj.len() == center.len() && !center.is_empty();
                if !ok {
                    issues.push(Issue {
                        pointer: pointer.clone(),
                        message: format!(
                            "center/proj lengths disagree ({}/{})",
                            center.len(),
                            proj.len()
                        ),
                    });
                }
                if *radius < 0.0 {
                    issues.push(Issue {
                        pointer: pointer.clone(),
                        message: format!("radius must be non-negative, got {radius}"),
                    });
                }
                (ok, proj)
            }
        };
        if let Some(&d) = proj.iter().max() {
            if d >= state_dim {
                issues.push(Issue {
                    pointer: pointer.clone(),
                    message: format!(
                        "projection reads state dimension {d} but the state has {state_dim}"
                    ),
                });
            }
        }
        if lens_ok {
            let def = match spec {
                RegionSpec::Box { lo, hi, .. } => {
                    RegionDef::Box { lo: lo.clone(), hi: hi.clone(), proj }
                }
                RegionSpec::Ball { center, radius, .. } => {
                    RegionDef::Ball { center: center.clone(), radius: *radius, proj }
                }
            };
            regions.insert(name.clone(), def);
        }
    }

    // automaton
    let automaton = build_automaton(&file.automaton, &regions, state_dim, base_dir, &mut issues);

    // formula
    let formula = match parse_formula(&file.stl_formula, &regions) {
        Ok(f) => {
            if f.min_state_dim() > state_dim {
                issues.push(Issue {
                    pointer: "/stl_formula".into(),
                    message: format!(
                        "formula reads state dimension {} but the state has {state_dim}",
                        f.min_state_dim() - 1
                    ),
                });
            }
            Some(f)
        }
        Err(e) => {
            issues.push(Issue { pointer: "/stl_formula".into(), message: e.to_string() });
            None
        }
    };

    // planner
    if file.planner.semiring.parse::<SemiringTag>().is_err() {
        issues.push(Issue {
            pointer: "/planner/semiring".into(),
            message: format!(
                "unknown semiring `{}` (expected boolean, minmax, maxplus, minplus)",
                file.planner.semiring
            ),
        });
    }
    if !matches!(file.planner.control_bounds_mode.as_str(), "project" | "reject" | "none") {
        issues.push(Issue {
            pointer: "/planner/control_bounds_mode".into(),
            message: format!("unknown mode `{}`", file.planner.control_bounds_mode),
        });
    }
    if file.planner.horizon == 0 {
        issues.push(Issue {
            pointer: "/planner/horizon".into(),
            message: "horizon must be at least 1".into(),
        });
    }
    if !(file.planner.learning_rate > 0.0) {
        issues.push(Issue {
            pointer: "/planner/learning_rate".into(),
            message: "learning rate must be positive".into(),
        });
    }
    if file.planner.epochs == 0 {
        issues.push(Issue {
            pointer: "/planner/epochs".into(),
            message: "epoch count must be at least 1".into(),
        });
    }

    let total_steps = file.total_steps.unwrap_or(0);
    if file.mode == Mode::Mpc && total_steps == 0 {
        issues.push(Issue {
            pointer: "/total_steps".into(),
            message: "mpc mode needs total_steps >= 1".into(),
        });
    }

    if !issues.is_empty() {
        return Err(ScenarioError::Invalid { issues });
    }

    let kind = kind.expect("validated");
    let mut model = DynamicsModel::new(kind, dt);
    if let Some(bounds) = &file.dynamics.control_bounds {
        model = model.with_bounds(bounds.iter().map(|b| (b[0], b[1])).collect());
    }
    let lead_profile = file.dynamics.lead_profile.as_ref().map(|segments| LeadProfile {
        segments: segments.iter().map(|s| (s.until_s, s.velocity)).collect(),
    });
    let canonical_json = serde_json::to_string(&file).expect("scenario serializes");
    Ok(Scenario {
        x0: file.dynamics.x0.clone(),
        mode: file.mode,
        total_steps,
        regions,
        automaton: automaton.expect("no issues means the automaton was built"),
        formula: formula.expect("no issues means the formula parsed"),
        model,
        lead_profile,
        canonical_json,
        file,
    })
}

fn build_automaton(
    source: &AutomatonSource,
    regions: &RegionTable,
    state_dim: usize,
    base_dir: Option<&Path>,
    issues: &mut Vec<Issue>,
) -> Option<SymbolicAutomaton> {
    fn fail(
        issues: &mut Vec<Issue>,
        pointer: &str,
        message: String,
    ) -> Option<SymbolicAutomaton> {
        issues.push(Issue { pointer: pointer.into(), message });
        None
    }
    match source {
        AutomatonSource::SequenceVisit { regions: order, avoid } => {
            if order.is_empty() {
                return fail(issues, "/automaton/regions", "at least one region to visit".into());
            }
            let order_refs: Vec<&str> = order.iter().map(String::as_str).collect();
            let avoid_refs: Vec<&str> = avoid.iter().map(String::as_str).collect();
            match build_sequence_visit(&order_refs, &avoid_refs, regions, state_dim) {
                Ok(a) => Some(a),
                Err(e) => fail(issues, "/automaton", e.to_string()),
            }
        }
        AutomatonSource::AnyOrderVisit { goals, avoid } => {
            if goals.is_empty() {
                return fail(issues, "/automaton/goals", "at least one goal".into());
            }
            for (i, g) in goals.iter().enumerate() {
                if g.dwell == 0 {
                    issues.push(Issue {
                        pointer: format!("/automaton/goals/{i}/dwell"),
                        message: "dwell must be at least 1".into(),
                    });
                    return None;
                }
            }
            let goals: Vec<DwellGoal> = goals
                .iter()
                .map(|g| DwellGoal { region: g.region.clone(), dwell: g.dwell })
                .collect();
            let avoid_refs: Vec<&str> = avoid.iter().map(String::as_str).collect();
            match build_any_order_visit(&goals, &avoid_refs, regions, state_dim) {
                Ok(a) => Some(a),
                Err(e) => fail(issues, "/automaton", e.to_string()),
            }
        }
        AutomatonSource::ResponseWindow { hold, release, window, safety } => {
            let mut parse_guard = |field: &str, text: &str| match parse_predicate(text, regions) {
                Ok(p) => Some(p),
                Err(e) => {
                    issues.push(Issue {
                        pointer: format!("/automaton/{field}"),
                        message: e.to_string(),
                    });
                    None
                }
            };
            let hold_p = parse_guard("hold", hold);
            let release_p = parse_guard("release", release);
            let safety_p = match safety {
                Some(text) => match parse_guard("safety", text) {
                    Some(p) => Some(Some(p)),
                    None => None,
                },
                None => Some(None),
            };
            let (hold_p, release_p, safety_p) = match (hold_p, release_p, safety_p) {
                (Some(h), Some(r), Some(s)) => (h, r, s),
                _ => return None,
            };
            let response = match build_response_window(hold_p, release_p, *window, state_dim) {
                Ok(a) => a,
                Err(e) => return fail(issues, "/automaton", e.to_string()),
            };
            match safety_p {
                None => Some(response),
                Some(guard) => {
                    let invariant = match build_invariant(guard, state_dim) {
                        Ok(a) => a,
                        Err(e) => return fail(issues, "/automaton/safety", e.to_string()),
                    };
                    match SymbolicAutomaton::product(&response, &invariant) {
                        Ok(a) => Some(a),
                        Err(e) => fail(issues, "/automaton", e.to_string()),
                    }
                }
            }
        }
        AutomatonSource::Inline { automaton } => {
            match automaton.to_automaton(regions, state_dim) {
                Ok(a) => Some(a),
                Err(mut errs) => {
                    for i in &mut errs {
                        i.pointer = format!("/automaton/automaton{}", i.pointer);
                    }
                    issues.append(&mut errs);
                    None
                }
            }
        }
        AutomatonSource::File { path } => {
            let full = match base_dir {
                Some(dir) => dir.join(path),
                None => PathBuf::from(path),
            };
            let text = match std::fs::read_to_string(&full) {
                Ok(t) => t,
                Err(e) => return fail(issues, "/automaton/path", format!("cannot read {full:?}: {e}")),
            };
            let parsed: AutomatonFile = match serde_json::from_str(&text) {
                Ok(p) => p,
                Err(e) => return fail(issues, "/automaton/path", format!("{full:?}: {e}")),
            };
            match parsed.to_automaton(regions, state_dim) {
                Ok(a) => Some(a),
                Err(mut errs) => {
                    for i in &mut errs {
                        i.pointer = format!("/automaton/path{}", i.pointer);
                    }
                    issues.append(&mut errs);
                    None
                }
            }
        }
    }
}
