//! Reachability graphs and the three-part soundness check.

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::net::{Marking, WorkflowNet};

pub const DEFAULT_STATE_SPACE_CAP: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReachabilityGraph {
    /// Distinct markings in discovery order; index 0 is the initial marking.
    pub nodes: Vec<Marking>,
    /// `(source index, transition id, target index)`.
    pub edges: Vec<(usize, String, usize)>,
    pub truncated: bool,
}

impl ReachabilityGraph {
    pub fn initial(&self) -> &Marking {
        &self.nodes[0]
    }
}

/// Dense view of a net: places and transitions by index, markings as
/// token vectors.
struct Indexed<'a> {
    places: Vec<&'a str>,
    transitions: Vec<(&'a str, Vec<usize>, Vec<usize>)>,
}

impl<'a> Indexed<'a> {
    fn new(net: &'a WorkflowNet, extra: &'a Marking) -> Self {
        let mut names: BTreeSet<&str> = net.places.iter().map(String::as_str).collect();
        names.extend(extra.iter().map(|(p, _)| p));
        let places: Vec<&str> = names.into_iter().collect();
        let pos: HashMap<&str, usize> = places.iter().enumerate().map(|(k, p)| (*p, k)).collect();
        let transitions = net
            .transitions
            .values()
            .map(|t| {
                (
                    t.id.as_str(),
                    t.inputs.iter().map(|p| pos[p.as_str()]).collect(),
                    t.outputs.iter().map(|p| pos[p.as_str()]).collect(),
                )
            })
            .collect();
        Self { places, transitions }
    }

    fn dense(&self, m: &Marking) -> Vec<u32> {
        self.places.iter().map(|p| m.get(p)).collect()
    }

    fn sparse(&self, v: &[u32]) -> Marking {
        self.places.iter().zip(v).map(|(p, &c)| (*p, c)).collect()
    }
}

/// Breadth-first exploration from `initial`, transitions tried in id
/// order. Stops with `truncated = true` once more than `cap` distinct
/// markings would be needed.
pub fn reachability_graph(net: &WorkflowNet, initial: &Marking, cap: usize) -> ReachabilityGraph {
    let cap = cap.max(1);
    let idx = Indexed::new(net, initial);
    let start = idx.dense(initial);
    let mut ids: HashMap<Vec<u32>, usize> = HashMap::from([(start.clone(), 0)]);
    let mut dense = vec![start];
    let mut edges = Vec::new();
    let mut truncated = false;
    let mut queue = VecDeque::from([0usize]);

    'explore: while let Some(src) = queue.pop_front() {
        for (tid, inputs, outputs) in &idx.transitions {
            if inputs.iter().any(|&p| dense[src][p] == 0) {
                continue;
            }
            let mut next = dense[src].clone();
            for &p in inputs {
                next[p] -= 1;
            }
            for &p in outputs {
                next[p] += 1;
            }
            let dst = match ids.get(&next) {
                Some(&d) => d,
                None => {
                    if dense.len() >= cap {
                        truncated = true;
                        break 'explore;
                    }
                    let d = dense.len();
                    ids.insert(next.clone(), d);
                    dense.push(next);
                    queue.push_back(d);
                    d
                }
            };
            edges.push((src, tid.to_string(), dst));
        }
    }

    ReachabilityGraph {
        nodes: dense.iter().map(|v| idx.sparse(v)).collect(),
        edges,
        truncated,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SoundnessReport {
    pub option_to_complete: bool,
    pub proper_completion: bool,
    pub dead_transitions: BTreeSet<String>,
    pub sound: bool,
    /// Distinct reachable markings explored.
    pub state_count: usize,
    /// Reachable markings from which the final marking cannot be reached.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stuck_markings: Vec<Marking>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SoundnessError {
    #[error("state space exceeded the cap of {cap} markings")]
    StateSpaceExceeded { cap: usize },
}

/// How many stuck markings a report keeps as witnesses.
const STUCK_WITNESSES: usize = 5;

pub fn check_soundness(net: &WorkflowNet, cap: usize) -> Result<SoundnessReport, SoundnessError> {
    let graph = reachability_graph(net, &net.initial_marking(), cap);
    if graph.truncated {
        return Err(SoundnessError::StateSpaceExceeded { cap });
    }
    let final_marking = net.final_marking();

    let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); graph.nodes.len()];
    for (src, _, dst) in &graph.edges {
        reverse[*dst].push(*src);
    }
    let mut can_finish = vec![false; graph.nodes.len()];
    let mut stack: Vec<usize> = graph
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, m)| **m == final_marking)
        .map(|(k, _)| k)
        .collect();
    for &k in &stack {
        can_finish[k] = true;
    }
    while let Some(k) = stack.pop() {
        for &p in &reverse[k] {
            if !can_finish[p] {
                can_finish[p] = true;
                stack.push(p);
            }
        }
    }
    let stuck: Vec<Marking> = graph
        .nodes
        .iter()
        .zip(&can_finish)
        .filter(|(_, ok)| !**ok)
        .map(|(m, _)| m.clone())
        .collect();
    let option_to_complete = stuck.is_empty();

    let proper_completion = graph
        .nodes
        .iter()
        .all(|m| m.get(&net.sink) == 0 || *m == final_marking);

    let fired: BTreeSet<&str> = graph.edges.iter().map(|(_, t, _)| t.as_str()).collect();
    let dead_transitions: BTreeSet<String> = net
        .transitions
        .keys()
        .filter(|t| !fired.contains(t.as_str()))
        .cloned()
        .collect();

    Ok(SoundnessReport {
        sound: option_to_complete && proper_completion && dead_transitions.is_empty(),
        option_to_complete,
        proper_completion,
        dead_transitions,
        state_count: graph.nodes.len(),
        stuck_markings: stuck.into_iter().take(STUCK_WITNESSES).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::Transition;

    fn single() -> WorkflowNet {
        let mut net = WorkflowNet::new();
        net.add_transition(Transition::visible("t").with_inputs(["i"]).with_outputs(["o"]));
        net
    }

    fn and_block() -> WorkflowNet {
        let mut net = WorkflowNet::new();
        net.add_transition(Transition::silent("split").with_inputs(["i"]).with_outputs(["p1", "p2"]));
        net.add_transition(Transition::visible("a").with_inputs(["p1"]).with_outputs(["p3"]));
        net.add_transition(Transition::visible("b").with_inputs(["p2"]).with_outputs(["p4"]));
        net.add_transition(Transition::silent("join").with_inputs(["p3", "p4"]).with_outputs(["o"]));
        net
    }

    /// Hand-enumerated markings of `and_block`.
    fn and_block_markings() -> BTreeSet<Marking> {
        [
            vec![("i", 1)],
            vec![("p1", 1), ("p2", 1)],
            vec![("p3", 1), ("p2", 1)],
            vec![("p1", 1), ("p4", 1)],
            vec![("p3", 1), ("p4", 1)],
            vec![("o", 1)],
        ]
        .into_iter()
        .map(Marking::from_iter)
        .collect()
    }

    #[test]
    fn sequence_graph() {
        let net = single();
        let g = reachability_graph(&net, &net.initial_marking(), 10);
        assert_eq!(g.nodes.len(), 2);
        assert_eq!(g.edges.len(), 1);
        assert!(!g.truncated);
    }

    #[test]
    fn and_block_has_six_markings() {
        let net = and_block();
        let g = reachability_graph(&net, &net.initial_marking(), 100);
        let found: BTreeSet<Marking> = g.nodes.iter().cloned().collect();
        assert_eq!(found, and_block_markings());
        assert_eq!(g.nodes.len(), 6);
        for (s, t, d) in &g.edges {
            assert_eq!(net.fire(&g.nodes[*s], t).unwrap(), g.nodes[*d]);
        }
    }

    #[test]
    fn cap_one_truncates() {
        let net = single();
        assert!(reachability_graph(&net, &net.initial_marking(), 1).truncated);
    }

    #[test]
    fn exploration_is_deterministic() {
        let net = and_block();
        let a = reachability_graph(&net, &net.initial_marking(), 100);
        let b = reachability_graph(&net, &net.initial_marking(), 100);
        assert_eq!(a, b);
    }

    #[test]
    fn single_transition_net_is_sound() {
        let r = check_soundness(&single(), DEFAULT_STATE_SPACE_CAP).unwrap();
        assert!(r.sound && r.option_to_complete && r.proper_completion);
        assert!(r.dead_transitions.is_empty());
    }

    #[test]
    fn never_marked_input_makes_a_dead_transition() {
        let mut net = single();
        net.add_transition(Transition::visible("ghost").with_inputs(["never"]).with_outputs(["o"]));
        let r = check_soundness(&net, DEFAULT_STATE_SPACE_CAP).unwrap();
        assert_eq!(r.dead_transitions, BTreeSet::from(["ghost".to_string()]));
        assert!(!r.sound);
    }

    #[test]
    fn leftover_tokens_break_proper_completion() {
        let mut net = WorkflowNet::new();
        net.add_transition(Transition::silent("split").with_inputs(["i"]).with_outputs(["p", "o"]));
        net.add_transition(Transition::visible("a").with_inputs(["p"]).with_outputs(["q"]));
        let r = check_soundness(&net, DEFAULT_STATE_SPACE_CAP).unwrap();
        assert!(!r.proper_completion);
        assert!(!r.option_to_complete);
        assert!(!r.sound);
    }

    #[test]
    fn unbounded_net_exceeds_cap() {
        let mut net = single();
        net.add_transition(Transition::visible("pump").with_outputs(["q"]));
        assert_eq!(
            check_soundness(&net, 50),
            Err(SoundnessError::StateSpaceExceeded { cap: 50 })
        );
    }
}
