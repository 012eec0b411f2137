//! Relay coordination for opportunistic routing.
//!
//! Opportunistic routing hands each packet to a set of candidate relays
//! instead of one fixed next hop. Timer-based coordination then decides who
//! actually forwards: candidates fire in priority order, and everyone who
//! overhears the winner's ACK drops their copy. Candidates that miss the ACK
//! forward duplicates, so the scheme works best when the relays are fully
//! connected.
//!
//! This crate implements the DDA (delay-based duplicate-transmission avoid)
//! coordination pipeline:
//!
//! - [`relay_graph`] — candidate connectivity, neighbor-row D-test, and
//!   exhaustive enumeration of fully connected relaying networks.
//! - [`delay`] — expected one-hop relaying delay of a prioritized relay set,
//!   network delivery ratio, and the delay-sensitivity analysis that
//!   justifies PDR-descending priorities.
//! - [`scoring`] — network ETX, deteriorated delay/utility, relative-variance
//!   weights, order numbers, and the final rank-aggregated network utility.
//! - [`select`] — the end-to-end selection procedure: enumerate, score, pick
//!   the relaying network, assign relay priorities.
//! - [`sim`] — a seeded discrete-event simulator comparing DDA against
//!   ExOR-style and SOAR-style timer coordination on random geometric
//!   topologies.
//! - [`scenario`] — batch sweep driver: config parsing, parallel execution,
//!   CSV/JSONL emission, and scheme comparison with trend assertions.

pub mod delay;
pub mod relay_graph;
pub mod scenario;
pub mod scoring;
pub mod select;
pub mod sim;

pub use delay::{DelayError, PrioritizedPdrVector, SensitivityReport};
pub use relay_graph::{CandidateGraph, GraphError, NetworkKind, NodeId, SubsetClassification};
pub use scenario::{ComparisonReport, RunRecord, ScenarioConfig, ScenarioError};
pub use scoring::{NetworkScore, RankDirection, RankingWeights, ScoringError};
pub use select::{
    PrioritizedRelay, PriorityMode, RelayProfile, ScoringMode, SelectConfig, SelectError,
    SelectionResult,
};
pub use sim::{RunMetrics, Scheme, SimError, SimParams, World};
