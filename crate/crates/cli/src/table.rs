//! Comparison tables over run reports.
//!
//! Rows are (scenario, mode) pairs, columns the four semirings plus two
//! reference columns quoting results reported for STLCG and a MILP encoding
//! on the same benchmark family. Those references are static constants, not
//! reproduced by this tool, and are labeled as such.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::run::RunReport;

/// Published reference numbers for the benchmark family, keyed by
/// (scenario, mode). Not produced by this tool.
const PAPER_REPORTED: &[(&str, &str, &str, &str)] = &[
    // (scenario, mode, stlcg, milp)
    ("phi1", "open_loop", "1164", "42265"),
    ("phi1", "mpc", "--", "--"),
    ("phi2", "open_loop", "234", "--"),
    ("phi2", "mpc", "--", "--"),
    ("acc", "mpc", "-2.21", "0.6"),
];

const SEMIRINGS: [&str; 4] = ["minmax", "maxplus", "boolean", "minplus"];

fn cell(report: &RunReport) -> String {
    match report.mode.as_str() {
        // open loop reports iterations to satisfaction
        "open_loop" => match report.t_star {
            Some(t) => format!("{t}"),
            None => match report.rho {
                Some(r) => format!("unsat (rho {r:.3})"),
                None => "unsat".into(),
            },
        },
        // closed loop reports the final robustness
        _ => match report.rho {
            Some(r) => format!("{r:.3}"),
            None => "--".into(),
        },
    }
}

fn reference_for(scenario: &str, mode: &str) -> (&'static str, &'static str) {
    for (s, m, stlcg, milp) in PAPER_REPORTED {
        if *s == scenario && *m == mode {
            return (stlcg, milp);
        }
    }
    ("--", "--")
}

/// Renders the text table and a CSV twin. Reports are merged by sorted
/// (scenario, mode, semiring) key; the first report wins on duplicates.
pub fn render(reports: &[RunReport]) -> (String, String) {
    let mut cells: BTreeMap<(String, String), BTreeMap<String, String>> = BTreeMap::new();
    for r in reports {
        cells
            .entry((r.scenario.clone(), r.mode.clone()))
            .or_default()
            .entry(r.semiring.clone())
            .or_insert_with(|| cell(r));
    }

    let headers: Vec<String> = ["scenario", "mode"]
        .into_iter()
        .map(String::from)
        .chain(SEMIRINGS.iter().map(|s| s.to_string()))
        .chain(["stlcg (paper-reported)".into(), "milp (paper-reported)".into()])
        .collect();
    let mut rows: Vec<Vec<String>> = Vec::new();
    for ((scenario, mode), by_semiring) in &cells {
        let (stlcg, milp) = reference_for(scenario, mode);
        let mut row = vec![scenario.clone(), mode.clone()];
        for s in SEMIRINGS {
            row.push(by_semiring.get(s).cloned().unwrap_or_else(|| "--".into()));
        }
        row.push(stlcg.into());
        row.push(milp.into());
        rows.push(row);
    }

    let mut widths: Vec<usize> = headers.iter().map(String::len).collect();
    for row in &rows {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut text = String::new();
    let write_row = |out: &mut String, cols: &[String], widths: &[usize]| {
        for (i, (c, w)) in cols.iter().zip(widths).enumerate() {
            if i > 0 {
                out.push_str("  ");
            }
            let _ = write!(out, "{c:<w$}");
        }
        while out.ends_with(' ') {
            out.pop();
        }
        out.push('\n');
    };
    write_row(&mut text, &headers, &widths);
    let rule: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
    text.push_str(&"-".repeat(rule));
    text.push('\n');
    for row in &rows {
        write_row(&mut text, row, &widths);
    }
    text.push_str(
        "open-loop cells: iterations to satisfaction (t*, lower is better); \
         closed-loop cells: final robustness (rho, higher is better).\n\
         stlcg/milp columns quote published numbers for reference; they are \
         not reproduced by this tool.\n",
    );

    let mut csv = String::new();
    csv.push_str(&headers.join(","));
    csv.push_str("\r\n");
    for row in &rows {
        let quoted: Vec<String> = row
            .iter()
            .map(|c| {
                if c.contains(',') || c.contains('"') {
                    format!("\"{}\"", c.replace('"', "\"\""))
                } else {
                    c.clone()
                }
            })
            .collect();
        csv.push_str(&quoted.join(","));
        csv.push_str("\r\n");
    }
    (text, csv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::run::ConfigEcho;

    fn report(scenario: &str, mode: &str, semiring: &str, t_star: Option<usize>, rho: Option<f64>) -> RunReport {
        RunReport {
            scenario: scenario.into(),
            semiring: semiring.into(),
            mode: mode.into(),
            satisfied: rho.map_or(false, |r| r >= 0.0),
            t_star,
            rho,
            total_steps: None,
            epochs_used: t_star.unwrap_or(0),
            outcome: "satisfied".into(),
            wall_clock_s: 0.0,
            config: ConfigEcho {
                horizon: 50,
                learning_rate: 0.05,
                epochs: 1400,
                seed: 0,
                bounds_mode: "project".into(),
                early_stop: true,
                restart_count: 0,
                warm_start: true,
                mpc_consumes_current_state: true,
                control_effort_weight: 0.0,
                adaptive_rate: false,
            },
            input_hash: "deadbeef".into(),
            weight_history: vec![],
            trajectory_csv: "x.csv".into(),
        }
    }

    #[test]
    fn renders_paper_reference_columns() {
        let reports =
            [report("phi1", "open_loop", "maxplus", Some(81), Some(0.02))];
        let (text, csv) = render(&reports);
        assert!(text.contains("1164"), "{text}");
        assert!(text.contains("42265"), "{text}");
        assert!(text.contains("81"), "{text}");
        assert!(csv.lines().count() >= 2);
    }

    #[test]
    fn missing_semirings_render_as_dashes() {
        let reports = [report("phi2", "mpc", "minmax", None, Some(0.06))];
        let (text, _) = render(&reports);
        let row = text.lines().find(|l| l.starts_with("phi2")).unwrap();
        assert!(row.contains("0.060"));
        assert!(row.contains("--"));
    }

    #[test]
    fn single_report_single_row() {
        let reports = [report("phi1", "open_loop", "minmax", Some(700), None)];
        let (text, _) = render(&reports);
        assert_eq!(text.lines().filter(|l| l.starts_with("phi1")).count(), 1);
    }
}
