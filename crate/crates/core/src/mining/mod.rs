//! Process discovery and organizational mining over event logs.

mod alpha;
mod footprint;
mod replay;
mod social;

use thiserror::Error;

pub use alpha::alpha_discover;
pub use footprint::{directly_follows, footprint, Footprint, Relation};
pub use replay::{token_replay, FitnessReport};
pub use social::{degree_stats, handover_network, Degree, Sociogram};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MiningError {
    #[error("cannot discover a model from an empty log")]
    EmptyLog,
    #[error("trace {0} is empty")]
    EmptyTrace(usize),
    #[error("event {index} ({activity}) of case {case_id} has no resource")]
    MissingResource {
        case_id: String,
        index: usize,
        activity: String,
    },
}
