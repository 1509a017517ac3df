//! Self-optimising fuzzy-logic handover (FLHA) for two-tier HetNets.
//!
//! The crate hosts a deterministic fixed-step mobility simulator (macro and
//! small cells on separate bands) and four handover triggering mechanisms:
//!
//! - the RSRP-based A3 event with hysteresis margin and time-to-trigger,
//! - an expert-designed FLHA over evenly spaced membership functions,
//! - FLHA-Q: rules learned by Q-learning over evenly spaced membership functions,
//! - FLHA-SON: membership functions self-configured by subtractive clustering
//!   of measurement history, rules and triggering threshold self-optimised by
//!   Q-learning.
//!
//! ## Pipeline
//!
//! 1. [`sim::collect_history`] records serving-link RSRP/SINR/distance under A3.
//! 2. [`cluster::configure_mfs`] turns that history into one membership
//!    function per metric.
//! 3. [`qlearn::train`] learns a Q-table over the fuzzified state space;
//!    [`qlearn::extract_rules`] and [`qlearn::select_threshold`] convert it into
//!    a rule base, an output membership function and a triggering threshold.
//! 4. [`sim::run`] evaluates any [`handover::TriggerMechanism`] and returns the
//!    event log, per-step link records and a [`kpi::KpiReport`].
//!
//! [`pipeline`] wires these steps together and owns the on-disk artifact layout.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod cluster;
pub mod fuzzy;
pub mod handover;
pub mod kpi;
pub mod mobility;
pub mod pipeline;
pub mod qlearn;
pub mod rng;
pub mod scenario;
pub mod sim;

pub use channel::{LinkMeasurement, NoiseModel};
pub use cluster::{ClusteringParams, HistoryDataset};
pub use fuzzy::{FuzzyRule, FuzzySet, Label, MembershipFunction, Metric, Polarity, RuleBase};
pub use handover::{HoEvent, HoOutcome, TriggerMechanism};
pub use kpi::KpiReport;
pub use qlearn::{FuzzyState, QLearnParams, QTable};
pub use scenario::{BaseStation, BsId, ScenarioConfig, Tier, UserEquipment};

use thiserror::Error;

/// Crate-level error, wrapping the per-module error types.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(#[from] scenario::ConfigError),

    #[error("channel error: {0}")]
    Channel(#[from] channel::ChannelError),

    #[error("fuzzy inference error: {0}")]
    Fuzzy(#[from] fuzzy::FuzzyError),

    #[error("clustering error: {0}")]
    Cluster(#[from] cluster::ClusterError),

    #[error("q-learning error: {0}")]
    QLearn(#[from] qlearn::QLearnError),

    #[error("simulation error: {0}")]
    Sim(#[from] sim::SimError),

    #[error("artifact error: {0}")]
    Artifact(#[from] pipeline::ArtifactError),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
