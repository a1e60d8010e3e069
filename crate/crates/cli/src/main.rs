use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use semiplan::semiring::SemiringTag;
use semiplan_cli::run::{load_report, run_scenario, Overrides, RunReport};
use semiplan_cli::scenario::{load_scenario, Mode};
use semiplan_cli::table;

/// Plan trajectories against automaton task specifications.
#[derive(Parser)]
#[command(name = "plan", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum SemiringArg {
    Boolean,
    Minmax,
    Maxplus,
    Minplus,
}

impl From<SemiringArg> for SemiringTag {
    fn from(s: SemiringArg) -> SemiringTag {
        match s {
            SemiringArg::Boolean => SemiringTag::Boolean,
            SemiringArg::Minmax => SemiringTag::MinMax,
            SemiringArg::Maxplus => SemiringTag::MaxPlus,
            SemiringArg::Minplus => SemiringTag::MinPlus,
        }
    }
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ModeArg {
    OpenLoop,
    Mpc,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::OpenLoop => Mode::OpenLoop,
            ModeArg::Mpc => Mode::Mpc,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file.
    scenario: PathBuf,
    /// Override the scenario's semiring.
    #[arg(long)]
    semiring: Option<SemiringArg>,
    /// Override the scenario's mode.
    #[arg(long)]
    mode: Option<ModeArg>,
    /// Override the planner seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for the trajectory CSV and stats JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its trajectory CSV and stats JSON.
    Run(RunArgs),
    /// Check a scenario file and report every validation issue.
    Validate {
        /// Scenario file.
        scenario: PathBuf,
    },
    /// Render a comparison table from stats JSON reports.
    Table {
        /// Stats JSON files produced by `plan run`.
        reports: Vec<PathBuf>,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run the cartesian product of scenarios x semirings x seeds.
    Sweep {
        /// Scenario files.
        scenarios: Vec<PathBuf>,
        /// Semirings to run (comma separated).
        #[arg(long, value_delimiter = ',')]
        semirings: Vec<SemiringArg>,
        /// Seeds to run (comma separated).
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seeds: Vec<u64>,
        /// Output directory.
        #[arg(long, default_value = "sweep-out")]
        out: PathBuf,
        /// Worker threads (defaults to the available parallelism).
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(
        env_logger::Env::new().filter_or("PLAN_LOG", "info").write_style("PLAN_LOG_STYLE"),
    )
    .format_timestamp(None)
    .init();
    match dispatch() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(3)
        }
    }
}

fn dispatch() -> anyhow::Result<ExitCode> {
    match Cli::parse().command {
        Command::Run(args) => cmd_run(args),
        Command::Validate { scenario } => cmd_validate(scenario),
        Command::Table { reports, csv } => cmd_table(reports, csv),
        Command::Sweep { scenarios, semirings, seeds, out, jobs } => {
            cmd_sweep(scenarios, semirings, seeds, out, jobs)
        }
    }
}

fn cmd_run(args: RunArgs) -> anyhow::Result<ExitCode> {
    let scenario = load_scenario(&args.scenario)
        .with_context(|| format!("loading {}", args.scenario.display()))?;
    let overrides = Overrides {
        semiring: args.semiring.map(Into::into),
        mode: args.mode.map(Into::into),
        seed: args.seed,
        out_dir: args.out,
    };
    let artifacts = run_scenario(&scenario, &overrides)?;
    let r = &artifacts.report;
    log::info!(
        "{} [{} {}]: outcome {}, t* {:?}, rho {:?}, {:.2}s",
        r.scenario,
        r.semiring,
        r.mode,
        r.outcome,
        r.t_star,
        r.rho,
        r.wall_clock_s
    );
    println!("trajectory: {}", artifacts.csv_path.display());
    println!("stats:      {}", artifacts.stats_path.display());
    if r.satisfied {
        println!("satisfied: rho = {}", r.rho.unwrap_or(f64::NAN));
        Ok(ExitCode::SUCCESS)
    } else if r.outcome == "dead_tape" || r.outcome == "dead_weight_vector" {
        println!("violation: specification irrecoverably violated ({})", r.outcome);
        println!("advice: try more epochs, a longer horizon, or random restarts");
        Ok(ExitCode::from(2))
    } else {
        println!("unsatisfied: rho = {:?}", r.rho);
        Ok(ExitCode::from(1))
    }
}

fn cmd_validate(path: PathBuf) -> anyhow::Result<ExitCode> {
    match load_scenario(&path) {
        Ok(s) => {
            println!(
                "{} ok: |Q| = {}, {} regions, mode {}",
                path.display(),
                s.automaton.n_locations(),
                s.regions.len(),
                s.mode.name()
            );
            Ok(ExitCode::SUCCESS)
        }
        Err(err) => {
            println!("{} invalid:\n{err}", path.display());
            Ok(ExitCode::from(1))
        }
    }
}

fn cmd_table(paths: Vec<PathBuf>, csv_out: Option<PathBuf>) -> anyhow::Result<ExitCode> {
    anyhow::ensure!(!paths.is_empty(), "at least one report required");
    let mut reports = Vec::new();
    for p in &paths {
        reports.push(load_report(p).with_context(|| format!("loading {}", p.display()))?);
    }
    reports.sort_by(|a, b| {
        (&a.scenario, &a.mode, &a.semiring).cmp(&(&b.scenario, &b.mode, &b.semiring))
    });
    let (text, csv) = table::render(&reports);
    print!("{text}");
    if let Some(path) = csv_out {
        std::fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
        println!("csv: {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(
    scenarios: Vec<PathBuf>,
    semirings: Vec<SemiringArg>,
    seeds: Vec<u64>,
    out: PathBuf,
    jobs: Option<usize>,
) -> anyhow::Result<ExitCode> {
    anyhow::ensure!(!scenarios.is_empty(), "at least one scenario required");
    anyhow::ensure!(!semirings.is_empty(), "at least one semiring required");
    let mut tasks: Vec<(PathBuf, SemiringTag, u64)> = Vec::new();
    for path in &scenarios {
        for &s in &semirings {
            for &seed in &seeds {
                tasks.push((path.clone(), s.into(), seed));
            }
        }
    }
    let jobs = jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
        .max(1);
    std::fs::create_dir_all(&out)?;

    let next = std::sync::atomic::AtomicUsize::new(0);
    let results: Vec<anyhow::Result<RunReport>> = std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for _ in 0..jobs.min(tasks.len()) {
            let tasks = &tasks;
            let next = &next;
            let out = &out;
            handles.push(scope.spawn(move || {
                let mut mine = Vec::new();
                loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    if i >= tasks.len() {
                        break;
                    }
                    let (path, semiring, seed) = &tasks[i];
                    let run_one = || -> anyhow::Result<RunReport> {
                        let scenario = load_scenario(path)
                            .with_context(|| format!("loading {}", path.display()))?;
                        let overrides = Overrides {
                            semiring: Some(*semiring),
                            mode: None,
                            seed: Some(*seed),
                            out_dir: Some(out.join(format!("seed{seed}"))),
                        };
                        Ok(run_scenario(&scenario, &overrides)?.report)
                    };
                    mine.push((i, run_one()));
                }
                mine
            }));
        }
        let mut indexed: Vec<(usize, anyhow::Result<RunReport>)> = Vec::new();
        for h in handles {
            indexed.extend(h.join().expect("worker panicked"));
        }
        indexed.sort_by_key(|(i, _)| *i);
        indexed.into_iter().map(|(_, r)| r).collect()
    });

    let mut reports = Vec::new();
    let mut failures = 0;
    for r in results {
        match r {
            Ok(report) => reports.push(report),
            Err(err) => {
                failures += 1;
                eprintln!("sweep error: {err:#}");
            }
        }
    }
    // deterministic merge order regardless of worker interleaving
    reports.sort_by(|a, b| {
        (&a.scenario, &a.mode, &a.semiring, a.config.seed).cmp(&(
            &b.scenario,
            &b.mode,
            &b.semiring,
            b.config.seed,
        ))
    });
    let (text, csv) = table::render(&reports);
    print!("{text}");
    let merged = out.join("sweep.csv");
    std::fs::write(&merged, csv)?;
    let merged_json = out.join("sweep.json");
    std::fs::write(&merged_json, serde_json::to_string_pretty(&reports)?)?;
    println!("merged: {} and {}", merged.display(), merged_json.display());
    Ok(if failures == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
