//! Event logs: cases of ordered events, with CSV and XES serialization.

mod csv;
mod xes;

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use self::csv::{read_csv, write_csv, CSV_HEADER};
pub use self::xes::{read_xes, write_xes};

pub const COMPLETE: &str = "complete";

/// Start of the synthetic clock used for simulated and fixture logs.
pub fn base_epoch() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2012, 1, 1, 0, 0, 0).unwrap()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub case_id: String,
    pub activity: String,
    pub resource: Option<String>,
    pub lifecycle: String,
    pub timestamp: DateTime<Utc>,
}

impl Event {
    pub fn complete(case_id: impl Into<String>, activity: impl Into<String>, timestamp: DateTime<Utc>) -> Self {
        Self {
            case_id: case_id.into(),
            activity: activity.into(),
            resource: None,
            lifecycle: COMPLETE.to_string(),
            timestamp,
        }
    }

    pub fn with_resource(mut self, resource: impl Into<String>) -> Self {
        self.resource = Some(resource.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub case_id: String,
    pub events: Vec<Event>,
}

impl Trace {
    pub fn new(case_id: impl Into<String>) -> Self {
        Self {
            case_id: case_id.into(),
            events: Vec::new(),
        }
    }

    /// Restores timestamp order; events with equal timestamps keep their
    /// insertion order.
    pub fn sort_events(&mut self) {
        self.events.sort_by_key(|e| e.timestamp);
    }

    pub fn activities(&self) -> Vec<String> {
        self.events.iter().map(|e| e.activity.clone()).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventLog {
    pub traces: Vec<Trace>,
    pub attributes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LogError {
    #[error("expected CSV header `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("malformed row at line {line}: {message}")]
    MalformedRow { line: u64, message: String },
    #[error("XML error: {0}")]
    Xml(String),
    #[error("{element} without {key}")]
    MissingAttribute { element: String, key: String },
    #[error("case {0} appears in more than one trace")]
    DuplicateCase(String),
    #[error("activity {0} has no role mapping")]
    UnmappedActivity(String),
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_traces(traces: Vec<Trace>) -> Result<Self, LogError> {
        let mut log = Self::new();
        for t in traces {
            log.push_trace(t)?;
        }
        Ok(log)
    }

    pub fn push_trace(&mut self, trace: Trace) -> Result<(), LogError> {
        if self.traces.iter().any(|t| t.case_id == trace.case_id) {
            return Err(LogError::DuplicateCase(trace.case_id));
        }
        self.traces.push(trace);
        Ok(())
    }

    pub fn event_count(&self) -> usize {
        self.traces.iter().map(|t| t.events.len()).sum()
    }

    pub fn activities(&self) -> BTreeSet<String> {
        self.traces
            .iter()
            .flat_map(|t| t.events.iter().map(|e| e.activity.clone()))
            .collect()
    }
}

/// Per trace, the activities of its `complete` events in order.
pub fn project_completions(log: &EventLog) -> Vec<Vec<String>> {
    log.traces
        .iter()
        .map(|t| {
            t.events
                .iter()
                .filter(|e| e.lifecycle.eq_ignore_ascii_case(COMPLETE))
                .map(|e| e.activity.clone())
                .collect()
        })
        .collect()
}

/// Replaces every event's resource with the role its activity maps to.
pub fn attach_resources(log: &EventLog, role_map: &BTreeMap<String, String>) -> Result<EventLog, LogError> {
    let mut out = log.clone();
    for e in out.traces.iter_mut().flat_map(|t| t.events.iter_mut()) {
        let role = role_map
            .get(&e.activity)
            .ok_or_else(|| LogError::UnmappedActivity(e.activity.clone()))?;
        e.resource = Some(role.clone());
    }
    Ok(out)
}
