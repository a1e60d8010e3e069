//! Scenario execution, trajectory CSV and stats JSON.
//!
//! Outputs are deterministic functions of (scenario, semiring, mode, seed):
//! floats print with Rust's shortest round-trip formatting, JSON keys keep
//! struct order, and no timestamps or machine identifiers enter the
//! artifact files (wall-clock time is reported in the stats but excluded
//! from the input hash).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use semiplan::dynamics::{AccEnvironment, ControlSequence, ModelEnvironment, Trace};
use semiplan::planner::{mpc, open_loop, MpcOutcome, PlanOutcome, PlannerConfig};
use semiplan::semiring::{SemiringTag, Weight};
use semiplan::stl::WindowMode;

use crate::scenario::{Mode, Scenario};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("planning failed: {0}")]
    Plan(#[from] semiplan::planner::PlanError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Command-line overrides applied on top of the scenario file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub semiring: Option<SemiringTag>,
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub horizon: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub bounds_mode: String,
    pub early_stop: bool,
    pub restart_count: usize,
    pub warm_start: bool,
    pub mpc_consumes_current_state: bool,
    pub control_effort_weight: f64,
    pub adaptive_rate: bool,
}

impl ConfigEcho {
    fn from(cfg: &PlannerConfig) -> ConfigEcho {
        ConfigEcho {
            horizon: cfg.horizon,
            learning_rate: cfg.learning_rate,
            epochs: cfg.epochs,
            seed: cfg.seed,
            bounds_mode: format!("{:?}", cfg.bounds_mode).to_lowercase(),
            early_stop: cfg.early_stop,
            restart_count: cfg.restart_count,
            warm_start: cfg.warm_start,
            mpc_consumes_current_state: cfg.mpc_consumes_current_state,
            control_effort_weight: cfg.control_effort_weight,
            adaptive_rate: cfg.adaptive_rate,
        }
    }
}

/// The stats record written next to the trajectory CSV.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub semiring: String,
    pub mode: String,
    pub satisfied: bool,
    /// Epochs until the first satisfying trajectory (open loop).
    pub t_star: Option<usize>,
    /// Final robustness of the produced/executed trajectory.
    pub rho: Option<f64>,
    pub total_steps: Option<usize>,
    pub epochs_used: usize,
    pub outcome: String,
    pub wall_clock_s: f64,
    pub config: ConfigEcho,
    /// SHA-256 over the canonical scenario JSON and the effective
    /// (semiring, mode, seed) triple.
    pub input_hash: String,
    /// Weight per epoch (open loop) or final weight per step (mpc);
    /// `null` marks the absorbing bottom.
    pub weight_history: Vec<Option<f64>>,
    pub trajectory_csv: String,
}

/// Everything a run produces.
pub struct RunArtifacts {
    pub report: RunReport,
    pub csv_path: PathBuf,
    pub stats_path: PathBuf,
}

fn weight_to_json(tag: SemiringTag, w: Weight) -> Option<f64> {
    match w {
        Weight::Bot => None,
        Weight::Num(v) => {
            let _ = tag;
            Some(v)
        }
    }
}

fn fmt_weight(tag: SemiringTag, w: Weight) -> String {
    match w {
        Weight::Bot => {
            if tag.weight_to_f64(w) > 0.0 {
                "inf".into()
            } else {
                "-inf".into()
            }
        }
        Weight::Num(v) => format!("{v}"),
    }
}

/// RFC-4180 rows: `t, x0..x_{n-1}, u0..u_{m-1}, weight_so_far`. The final
/// state row leaves the control fields empty. `weight_so_far` at row `t` is
/// the prefix trajectory weight `αᵀ Ae(x_0) ⋯ Ae(x_t) β`.
fn trajectory_csv(
    scenario: &Scenario,
    tag: SemiringTag,
    trace: &Trace,
    controls: &ControlSequence,
) -> String {
    let n = trace.dim();
    let m = controls.dim();
    let mut out = String::new();
    out.push('t');
    for i in 0..n {
        let _ = write!(out, ",x{i}");
    }
    for i in 0..m {
        let _ = write!(out, ",u{i}");
    }
    out.push_str(",weight_so_far\r\n");
    let (mut q, beta) = scenario.automaton.alpha_beta(tag);
    for t in 0..trace.len() {
        let x = trace.state(t);
        q = scenario
            .automaton
            .step_weight_vector(&q, x, tag)
            .expect("trace dimensions were validated");
        let w = q.dot(&beta, tag).expect("beta matches q");
        let _ = write!(out, "{t}");
        for v in x {
            let _ = write!(out, ",{v}");
        }
        if t < controls.len() {
            for v in controls.control(t) {
                let _ = write!(out, ",{v}");
            }
        } else {
            for _ in 0..m {
                out.push(',');
            }
        }
        let _ = write!(out, ",{}", fmt_weight(tag, w));
        out.push_str("\r\n");
    }
    out
}

fn input_hash(scenario: &Scenario, tag: SemiringTag, mode: Mode, seed: u64) -> String {
    let mut h = Sha256::new();
    h.update(scenario.canonical_json.as_bytes());
    h.update([0]);
    h.update(tag.name().as_bytes());
    h.update([0]);
    h.update(mode.name().as_bytes());
    h.update([0]);
    h.update(seed.to_le_bytes());
    let digest = h.finalize();
    let mut hex = String::with_capacity(64);
    for b in digest {
        let _ = write!(hex, "{b:02x}");
    }
    hex
}

/// Executes the scenario and writes the trajectory CSV and stats JSON.
pub fn run_scenario(scenario: &Scenario, overrides: &Overrides) -> Result<RunArtifacts, RunError> {
    let mode = overrides.mode.unwrap_or(scenario.mode);
    let mut cfg = scenario.planner_config(mode);
    if let Some(tag) = overrides.semiring {
        cfg.semiring = tag;
    }
    if let Some(seed) = overrides.seed {
        cfg.seed = seed;
    }
    let tag = cfg.semiring;
    let started = Instant::now();

    let (trace, controls, t_star, weight_history, outcome_str, epochs_used) = match mode {
        Mode::OpenLoop => {
            let (alpha, _) = scenario.automaton.alpha_beta(tag);
            let result = open_loop(
                &scenario.model,
                &scenario.automaton,
                &scenario.x0,
                &alpha,
                &cfg,
                Some(&scenario.formula),
            )?;
            let outcome = match result.outcome {
                PlanOutcome::Satisfied => "satisfied",
                PlanOutcome::EpochsExhausted => "epochs_exhausted",
                PlanOutcome::DeadTape => "dead_tape",
            };
            let history = result.weight_history.iter().map(|&w| weight_to_json(tag, w)).collect();
            (result.trace, result.controls, result.t_star, history, outcome, result.epochs_used)
        }
        Mode::Mpc => {
            let result = match &scenario.lead_profile {
                Some(profile) => {
                    let mut env =
                        AccEnvironment { dt: scenario.model.dt, profile: profile.clone() };
                    mpc(
                        &scenario.model,
                        &mut env,
                        &scenario.automaton,
                        &scenario.x0,
                        &cfg,
                        scenario.total_steps,
                        Some(&scenario.formula),
                    )?
                }
                None => {
                    let mut env = ModelEnvironment { model: &scenario.model };
                    mpc(
                        &scenario.model,
                        &mut env,
                        &scenario.automaton,
                        &scenario.x0,
                        &cfg,
                        scenario.total_steps,
                        Some(&scenario.formula),
                    )?
                }
            };
            let outcome = match result.outcome {
                MpcOutcome::Completed => "completed",
                MpcOutcome::DeadWeightVector { .. } => "dead_weight_vector",
            };
            let history: Vec<Option<f64>> = result
                .steps
                .iter()
                .map(|s| weight_to_json(tag, s.final_weight))
                .collect();
            let epochs: usize = result.steps.iter().map(|s| s.epochs_used).sum();
            (result.executed, result.applied, None, history, outcome, epochs)
        }
    };

    // the independent monitor decides satisfaction
    let rho = scenario.formula.robustness(&trace, 0, WindowMode::Truncate).ok();
    let satisfied = rho.map_or(false, |r| r >= 0.0);
    let wall_clock_s = started.elapsed().as_secs_f64();

    let out_dir = overrides
        .out_dir
        .clone()
        .or_else(|| {
            scenario.file.output.as_ref().and_then(|o| o.dir.as_ref().map(PathBuf::from))
        })
        .unwrap_or_else(|| PathBuf::from("."));
    let prefix = scenario
        .file
        .output
        .as_ref()
        .and_then(|o| o.prefix.clone())
        .unwrap_or_else(|| scenario.name().to_string());
    let stem = format!("{prefix}_{}_{}", tag.name(), mode.name());
    let csv_path = out_dir.join(format!("{stem}.csv"));
    let stats_path = out_dir.join(format!("{stem}.stats.json"));

    let csv = trajectory_csv(scenario, tag, &trace, &controls);
    let report = RunReport {
        scenario: scenario.name().to_string(),
        semiring: tag.name().to_string(),
        mode: mode.name().to_string(),
        satisfied,
        t_star,
        rho,
        total_steps: (mode == Mode::Mpc).then_some(scenario.total_steps),
        epochs_used,
        outcome: outcome_str.to_string(),
        wall_clock_s,
        config: ConfigEcho::from(&cfg),
        input_hash: input_hash(scenario, tag, mode, cfg.seed),
        weight_history,
        trajectory_csv: csv_path.display().to_string(),
    };

    std::fs::create_dir_all(&out_dir)
        .map_err(|source| RunError::Io { path: out_dir.clone(), source })?;
    std::fs::write(&csv_path, csv.as_bytes())
        .map_err(|source| RunError::Io { path: csv_path.clone(), source })?;
    let stats = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(&stats_path, stats.as_bytes())
        .map_err(|source| RunError::Io { path: stats_path.clone(), source })?;

    Ok(RunArtifacts { report, csv_path, stats_path })
}

pub fn load_report(path: &Path) -> anyhow::Result<RunReport> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
