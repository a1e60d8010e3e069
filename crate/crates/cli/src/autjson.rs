//! The automaton file format.
//!
//! ```json
//! {
//!   "locations": 5,
//!   "initial": [0],
//!   "accepting": [3],
//!   "deterministic": true,
//!   "transitions": [
//!     { "from": 0, "to": 1, "guard": "in(red) & !in(blue)" }
//!   ]
//! }
//! ```
//!
//! Guards use the guard grammar and resolve against the scenario's region
//! table. Saving an automaton prints each guard canonically, so a
//! load/save/load round trip is lossless.

use serde::{Deserialize, Serialize};

use semiplan::automaton::SymbolicAutomaton;
use semiplan::predicate::{parse_predicate, RegionTable};

use crate::scenario::Issue;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TransitionSpec {
    pub from: usize,
    pub to: usize,
    pub guard: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AutomatonFile {
    pub locations: usize,
    pub initial: Vec<usize>,
    pub accepting: Vec<usize>,
    pub deterministic: bool,
    pub transitions: Vec<TransitionSpec>,
}

impl AutomatonFile {
    pub fn to_automaton(
        &self,
        regions: &RegionTable,
        state_dim: usize,
    ) -> Result<SymbolicAutomaton, Vec<Issue>> {
        let mut issues = Vec::new();
        let mut transitions = Vec::new();
        for (i, t) in self.transitions.iter().enumerate() {
            match parse_predicate(&t.guard, regions) {
                Ok(p) => transitions.push((t.from, t.to, p)),
                Err(e) => issues.push(Issue {
                    pointer: format!("/transitions/{i}/guard"),
                    message: e.to_string(),
                }),
            }
        }
        if !issues.is_empty() {
            return Err(issues);
        }
        SymbolicAutomaton::new(state_dim, self.locations, &self.initial, &self.accepting, transitions)
            .map(|a| a.with_flags(self.deterministic, false))
            .map_err(|e| vec![Issue { pointer: String::new(), message: e.to_string() }])
    }

    pub fn from_automaton(a: &SymbolicAutomaton) -> AutomatonFile {
        let mut transitions: Vec<TransitionSpec> = a
            .transitions()
            .map(|(from, to, guard)| TransitionSpec { from, to, guard: guard.to_string() })
            .collect();
        transitions.sort_by_key(|t| (t.from, t.to));
        AutomatonFile {
            locations: a.n_locations(),
            initial: a.initial().to_vec(),
            accepting: a.accepting().to_vec(),
            deterministic: a.deterministic(),
            transitions,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use semiplan::automaton::{build_sequence_visit, DEFAULT_RUN_CAP};
    use semiplan::dynamics::Trace;
    use semiplan::predicate::RegionDef;

    fn regions() -> RegionTable {
        let mut t = RegionTable::new();
        t.insert(
            "red".into(),
            RegionDef::Box { lo: vec![0.5, -1.5], hi: vec![1.5, -0.5], proj: vec![0, 1] },
        );
        t.insert(
            "blue".into(),
            RegionDef::Box { lo: vec![-0.4, -0.4], hi: vec![0.4, 0.4], proj: vec![0, 1] },
        );
        t
    }

    #[test]
    fn round_trip_is_lossless() {
        let t = regions();
        let a = build_sequence_visit(&["red"], &["blue"], &t, 2).unwrap();
        let file = AutomatonFile::from_automaton(&a);
        let json = serde_json::to_string_pretty(&file).unwrap();
        let parsed: AutomatonFile = serde_json::from_str(&json).unwrap();
        assert_eq!(file, parsed);
        let b = parsed.to_automaton(&t, 2).unwrap();
        assert_eq!(a.n_locations(), b.n_locations());
        assert_eq!(a.initial(), b.initial());
        assert_eq!(a.accepting(), b.accepting());
        // the reparsed automaton behaves identically
        let trace = Trace::from_states([vec![-1.0, -1.0], vec![1.0, -1.0]]).unwrap();
        assert_eq!(
            a.accepts(&trace, DEFAULT_RUN_CAP).unwrap(),
            b.accepts(&trace, DEFAULT_RUN_CAP).unwrap()
        );
        assert_eq!(AutomatonFile::from_automaton(&b), file);
    }

    #[test]
    fn guard_errors_are_positioned() {
        let file = AutomatonFile {
            locations: 2,
            initial: vec![0],
            accepting: vec![1],
            deterministic: false,
            transitions: vec![TransitionSpec {
                from: 0,
                to: 1,
                guard: "in(nowhere)".into(),
            }],
        };
        let errs = file.to_automaton(&regions(), 2).unwrap_err();
        assert_eq!(errs.len(), 1);
        assert!(errs[0].pointer.contains("/transitions/0/guard"));
        assert!(errs[0].message.contains("nowhere"));
    }
}
