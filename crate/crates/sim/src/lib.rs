//! Experiment tooling for the one-bit feedback bandit: the built-in
//! instances, Monte-Carlo regret curves, bound overlays, self-checks and
//! pull traces used by the `onebit` binary.

pub mod experiment;
pub mod instances;
pub mod trace;
pub mod verify;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
