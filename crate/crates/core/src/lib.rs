//! Spatial-correlation bit budgets for data-gathering sensor networks.
//!
//! * [`topology`] loads node positions and serves pairwise distances.
//! * [`correlation`] turns distances into per-node bit budgets under the
//!   power-law and Gaussian models and the min/max/additive rules.
//! * [`schedule`] evaluates polling orders and searches for the best and
//!   worst ones.
//! * [`codec`] sends the low bits of a reading and reconstructs it against a
//!   reference by nearest-codeword decoding.
//! * [`simulator`] runs end-to-end gathering over synthetic fields.
//! * [`cli`] is the command-line front end.

pub mod cli;
pub mod codec;
pub mod correlation;
pub mod error;
pub mod schedule;
pub mod simulator;
pub mod topology;

pub use codec::{correctness_radius, decode, encode, Codeword, Reading};
pub use correlation::{BitBudget, ConditioningRule, ModelSpec, Variant};
pub use error::{Error, Result};
pub use schedule::{
    evaluate, optimize, schedule_stats, BitReport, Objective, Schedule, ScheduleStats, StatsMode,
    Strategy,
};
pub use simulator::{fidelity_sweep, gather, generate_field, GatherResult, SensorField, SweepRow};
pub use topology::{NodeId, PositionRecord, Topology};
