//! Quorum-based channel-hopping rendezvous for cognitive radio networks.
//!
//! Secondary users hop over `N` licensed channels following a shared
//! `ceil(sqrt(N)) x ceil(sqrt(N))` grid quorum and meet whenever their
//! row/column selections overlap. Primary users occupy channels according
//! to an ON-OFF Markov process. The [`engine`] drives the slotted
//! simulation and the [`metrics`] module turns its counters into rendezvous
//! rate, time to rendezvous, energy per rendezvous and forced blocking.

pub mod channel;
pub mod engine;
pub mod metrics;
pub mod quorum;

pub use channel::{ChannelProcess, ChannelState, PuChannel};
pub use engine::{
    run, run_detailed, ContentionPolicy, ControllerDecision, LoadPhase, Occupancy, PairingPolicy,
    RunOutput, SimConfig, SimError, Simulation, SlotOutcome,
};
pub use metrics::{CellKey, MetricsAccumulator, MetricsError, MetricsReport};
pub use quorum::{
    build_grid, AdaptiveThresholds, GridQuorum, QuorumSelection, SelectionScheme, TrafficRegion,
};
