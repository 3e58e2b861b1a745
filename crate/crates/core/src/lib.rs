//! Stochastic multi-armed bandits where the learner sees one bit per pull.
//!
//! A follower pulls the arm the leader picks, keeps the reward statistics and
//! sends back a single bit. Bits are grouped into packets of growing length;
//! each completed packet carries a dyadic quantization of the arm's empirical
//! mean, and the leader runs a UCB-type index on those decoded means.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bounds;
pub mod codec;
pub mod engine;
pub mod policies;
pub mod schedule;

pub use bounds::{BoundReport, BoundsError, FormulaId};
pub use codec::{Bit, CodecError, DecodedEstimate, FollowerEncoder, LeaderDecoder};
pub use engine::{
    run_leader_follower, run_mab_baseline, ArmDistribution, EngineError, Instance, RngStream,
    RunResult,
};
pub use policies::{DecisionKind, PolicyError};
pub use schedule::{QuantLevel, ScheduleCursor, ScheduleError};
