//! Handover-of-work sociograms.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::MiningError;
use crate::eventlog::EventLog;

/// Weighted directed graph over resources.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Sociogram {
    pub nodes: BTreeSet<String>,
    pub edges: BTreeMap<(String, String), u64>,
}

impl Sociogram {
    pub fn weight(&self, from: &str, to: &str) -> u64 {
        self.edges
            .get(&(from.to_string(), to.to_string()))
            .copied()
            .unwrap_or(0)
    }

    pub fn total_weight(&self) -> u64 {
        self.edges.values().sum()
    }

    /// DOT digraph with edges labeled by weight.
    pub fn to_dot(&self, include_self_loops: bool) -> String {
        let mut s = String::from("digraph handover {\n");
        for n in &self.nodes {
            let _ = writeln!(s, "  \"{}\" [label=\"{}\"];", escape(n), escape(n));
        }
        for ((a, b), w) in &self.edges {
            if a == b && !include_self_loops {
                continue;
            }
            let _ = writeln!(
                s,
                "  \"{}\" -> \"{}\" [label=\"{w}\", weight={w}];",
                escape(a),
                escape(b)
            );
        }
        s.push_str("}\n");
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Counts, for each adjacent event pair in a trace, a handover from the
/// first event's resource to the second's.
pub fn handover_network(log: &EventLog) -> Result<Sociogram, MiningError> {
    let mut g = Sociogram::default();
    for trace in &log.traces {
        let mut previous: Option<&str> = None;
        for (index, e) in trace.events.iter().enumerate() {
            let r = e
                .resource
                .as_deref()
                .ok_or_else(|| MiningError::MissingResource {
                    case_id: trace.case_id.clone(),
                    index,
                    activity: e.activity.clone(),
                })?;
            g.nodes.insert(r.to_string());
            if let Some(p) = previous {
                *g.edges.entry((p.to_string(), r.to_string())).or_default() += 1;
            }
            previous = Some(r);
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Degree {
    pub in_weight: u64,
    pub out_weight: u64,
    pub total: u64,
}

pub fn degree_stats(g: &Sociogram, include_self_loops: bool) -> BTreeMap<String, Degree> {
    let mut out: BTreeMap<String, Degree> = g
        .nodes
        .iter()
        .map(|n| (n.clone(), Degree::default()))
        .collect();
    for ((a, b), w) in &g.edges {
        if a == b && !include_self_loops {
            continue;
        }
        out.entry(a.clone()).or_default().out_weight += w;
        out.entry(b.clone()).or_default().in_weight += w;
    }
    for d in out.values_mut() {
        d.total = d.in_weight + d.out_weight;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eventlog::{base_epoch, Event, Trace};

    fn log_of(resources: &[&str]) -> EventLog {
        let mut t = Trace::new("1");
        for (k, r) in resources.iter().enumerate() {
            t.events.push(Event::complete("1", format!("a{k}"), base_epoch()).with_resource(*r));
        }
        EventLog::from_traces(vec![t]).unwrap()
    }

    #[test]
    fn one_actor_three_events_is_a_self_loop() {
        let g = handover_network(&log_of(&["X", "X", "X"])).unwrap();
        assert_eq!(g.edges.len(), 1);
        assert_eq!(g.weight("X", "X"), 2);
    }

    #[test]
    fn empty_log_gives_empty_sociogram() {
        let g = handover_network(&EventLog::new()).unwrap();
        assert!(g.nodes.is_empty() && g.edges.is_empty());
        assert!(degree_stats(&g, false).is_empty());
    }

    #[test]
    fn single_edge_degrees() {
        let g = Sociogram {
            nodes: BTreeSet::from(["A".to_string(), "B".to_string()]),
            edges: BTreeMap::from([(("A".to_string(), "B".to_string()), 3)]),
        };
        let d = degree_stats(&g, true);
        assert_eq!(d["A"], Degree { in_weight: 0, out_weight: 3, total: 3 });
        assert_eq!(d["B"], Degree { in_weight: 3, out_weight: 0, total: 3 });
    }

    #[test]
    fn self_loops_only_counted_on_request() {
        let g = handover_network(&log_of(&["X", "X", "Y"])).unwrap();
        assert_eq!(degree_stats(&g, false)["X"].total, 1);
        assert_eq!(degree_stats(&g, true)["X"].total, 3);
        assert!(!g.to_dot(false).contains("\"X\" -> \"X\""));
        assert!(g.to_dot(true).contains("\"X\" -> \"X\" [label=\"1\""));
    }

    #[test]
    fn missing_resource_named() {
        let mut log = log_of(&["X"]);
        log.traces[0].events[0].resource = None;
        assert!(matches!(
            handover_network(&log),
            Err(MiningError::MissingResource { index: 0, .. })
        ));
    }
}
