//! Scenario loading, execution and reporting for the `plan` binary.

pub mod autjson;
pub mod run;
pub mod scenario;
pub mod table;

pub use run::{run_scenario, Overrides, RunArtifacts, RunReport};
pub use scenario::{load_scenario, Mode, Scenario, ScenarioError};
