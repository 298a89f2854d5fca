//! Workflow toolkit for crisis-response plans.
//!
//! Plans are compiled to workflow nets, checked for soundness, run as cases
//! through role-based worklists or seeded simulation, and the resulting
//! event logs are mined for process models and handover networks.

pub mod analysis;
pub mod compile;
pub mod corpus;
pub mod engine;
pub mod eventlog;
pub mod mining;
pub mod net;
pub mod plan;

#[cfg(any(test, feature = "testing"))]
pub mod testing;
