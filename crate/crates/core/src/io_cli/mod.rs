//! Scenario ingestion, whole-run orchestration and report output.

pub mod emit;
pub mod report;
pub mod scenario;

pub use emit::{emit_report, Manifest, ManifestEntry, OutputFormat};
pub use report::{run_buzz, run_scenario, RunReport};
pub use scenario::{load_scenario, parse_scenario, Loaded, Scenario, UnknownKeys};
