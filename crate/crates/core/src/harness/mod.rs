//! Experiment plumbing: run configs, training runs on disk, trace cost
//! reports, the math self-check and cross-run summaries.

pub mod compare;
pub mod config;
pub mod run;
pub mod runlog;
pub mod verify;

pub use compare::{compare, load_runlogs, Comparison, HumanSummary, TerminalStats};
pub use config::{AgentSpec, RunConfig, CONFIG_VERSION, SEED_OVERRIDE_VAR};
pub use run::{run_experiment, train, write_outputs, AgentRun};
pub use runlog::{read_policy, read_runlog, LoadedRunLog, RunMeta};
pub use verify::{run_verify, run_verify_with, CheckResult, VerifyReport};
