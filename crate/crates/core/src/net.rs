//! Workflow nets and their firing rule.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SOURCE: &str = "i";
pub const SINK: &str = "o";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub id: String,
    /// Visible activity label; `None` marks a silent transition.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Plan task this transition was compiled from, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<String>,
    /// Silent transition that bypasses `task`.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub bypass: bool,
    pub inputs: BTreeSet<String>,
    pub outputs: BTreeSet<String>,
}

impl Transition {
    pub fn visible(id: impl Into<String>) -> Self {
        let id = id.into();
        Self {
            label: Some(id.clone()),
            id,
            task: None,
            bypass: false,
            inputs: BTreeSet::new(),
            outputs: BTreeSet::new(),
        }
    }

    pub fn silent(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            label: None,
            task: None,
            bypass: false,
            inputs: BTreeSet::new(),
            outputs: BTreeSet::new(),
        }
    }

    pub fn with_inputs<I, S>(mut self, places: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.inputs.extend(places.into_iter().map(Into::into));
        self
    }

    pub fn with_outputs<I, S>(mut self, places: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.outputs.extend(places.into_iter().map(Into::into));
        self
    }

    pub fn is_silent(&self) -> bool {
        self.label.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Arc {
    PlaceToTransition { place: String, transition: String },
    TransitionToPlace { transition: String, place: String },
}

/// A Petri net with a distinguished source place and sink place.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkflowNet {
    pub source: String,
    pub sink: String,
    pub places: BTreeSet<String>,
    pub transitions: BTreeMap<String, Transition>,
}

impl Default for WorkflowNet {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetError {
    #[error("transition {0} is not enabled")]
    NotEnabled(String),
    #[error("unknown transition {0}")]
    UnknownTransition(String),
}

impl WorkflowNet {
    /// An empty net with places `i` and `o`.
    pub fn new() -> Self {
        Self {
            source: SOURCE.to_string(),
            sink: SINK.to_string(),
            places: BTreeSet::from([SOURCE.to_string(), SINK.to_string()]),
            transitions: BTreeMap::new(),
        }
    }

    /// Adds a transition together with any places it mentions.
    pub fn add_transition(&mut self, t: Transition) {
        self.places.extend(t.inputs.iter().cloned());
        self.places.extend(t.outputs.iter().cloned());
        self.transitions.insert(t.id.clone(), t);
    }

    pub fn add_place(&mut self, place: impl Into<String>) {
        self.places.insert(place.into());
    }

    pub fn transition(&self, id: &str) -> Option<&Transition> {
        self.transitions.get(id)
    }

    pub fn arcs(&self) -> impl Iterator<Item = Arc> + '_ {
        self.transitions.values().flat_map(|t| {
            t.inputs
                .iter()
                .map(|p| Arc::PlaceToTransition {
                    place: p.clone(),
                    transition: t.id.clone(),
                })
                .chain(t.outputs.iter().map(|p| Arc::TransitionToPlace {
                    transition: t.id.clone(),
                    place: p.clone(),
                }))
        })
    }

    pub fn visible_transitions(&self) -> impl Iterator<Item = &Transition> {
        self.transitions.values().filter(|t| !t.is_silent())
    }

    /// Visible transitions carrying `label`, in id order.
    pub fn transitions_labeled<'a>(&'a self, label: &'a str) -> impl Iterator<Item = &'a Transition> {
        self.transitions
            .values()
            .filter(move |t| t.label.as_deref() == Some(label))
    }

    pub fn initial_marking(&self) -> Marking {
        Marking::from_iter([(self.source.clone(), 1)])
    }

    pub fn final_marking(&self) -> Marking {
        Marking::from_iter([(self.sink.clone(), 1)])
    }

    pub fn is_enabled(&self, m: &Marking, t: &Transition) -> bool {
        t.inputs.iter().all(|p| m.get(p) >= 1)
    }

    /// Ids of transitions whose input places all hold a token, in id order.
    pub fn enabled_transitions(&self, m: &Marking) -> Vec<&str> {
        self.transitions
            .values()
            .filter(|t| self.is_enabled(m, t))
            .map(|t| t.id.as_str())
            .collect()
    }

    pub fn fire(&self, m: &Marking, t: &str) -> Result<Marking, NetError> {
        let tr = self
            .transitions
            .get(t)
            .ok_or_else(|| NetError::UnknownTransition(t.to_string()))?;
        if !self.is_enabled(m, tr) {
            return Err(NetError::NotEnabled(t.to_string()));
        }
        let mut next = m.clone();
        for p in &tr.inputs {
            next.remove(p, 1);
        }
        for p in &tr.outputs {
            next.add(p, 1);
        }
        Ok(next)
    }

    /// Workflow-net structural problems; empty when the net is well formed.
    pub fn structure_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for t in self.transitions.values() {
            if t.outputs.contains(&self.source) {
                out.push(format!("source place {} has incoming arc from {}", self.source, t.id));
            }
            if t.inputs.contains(&self.sink) {
                out.push(format!("sink place {} has outgoing arc to {}", self.sink, t.id));
            }
            for p in t.inputs.iter().chain(&t.outputs) {
                if !self.places.contains(p) {
                    out.push(format!("transition {} uses undeclared place {p}", t.id));
                }
            }
        }
        for p in [&self.source, &self.sink] {
            if !self.places.contains(p) {
                out.push(format!("missing place {p}"));
            }
        }
        let forward = self.node_closure(&self.source, false);
        let backward = self.node_closure(&self.sink, true);
        let nodes = self
            .places
            .iter()
            .map(|p| Node::Place(p.as_str()))
            .chain(self.transitions.keys().map(|t| Node::Transition(t.as_str())));
        for n in nodes {
            if !forward.contains(&n) || !backward.contains(&n) {
                out.push(format!("{n} is not on a path from {} to {}", self.source, self.sink));
            }
        }
        out
    }

    fn node_closure<'a>(&'a self, start: &'a str, reverse: bool) -> HashSet<Node<'a>> {
        let mut seen = HashSet::from([Node::Place(start)]);
        let mut queue = VecDeque::from([Node::Place(start)]);
        while let Some(n) = queue.pop_front() {
            let mut next = Vec::new();
            match n {
                Node::Place(p) => {
                    for t in self.transitions.values() {
                        let side = if reverse { &t.outputs } else { &t.inputs };
                        if side.contains(p) {
                            next.push(Node::Transition(t.id.as_str()));
                        }
                    }
                }
                Node::Transition(id) => {
                    let t = &self.transitions[id];
                    let side = if reverse { &t.inputs } else { &t.outputs };
                    next.extend(side.iter().map(|p| Node::Place(p.as_str())));
                }
            }
            for n in next {
                if seen.insert(n) {
                    queue.push_back(n);
                }
            }
        }
        seen
    }

    /// Shortest sequence of transitions accepted by `allowed` leading from
    /// `m` to a marking satisfying `goal`. Breadth-first, transitions tried
    /// in id order, at most `limit` markings visited.
    pub fn shortest_path<F, G>(
        &self,
        m: &Marking,
        allowed: F,
        goal: G,
        limit: usize,
    ) -> Option<(Vec<String>, Marking)>
    where
        F: Fn(&Transition) -> bool,
        G: Fn(&Marking) -> bool,
    {
        if goal(m) {
            return Some((Vec::new(), m.clone()));
        }
        let candidates: Vec<&Transition> = self.transitions.values().filter(|t| allowed(t)).collect();
        let mut parents: Vec<(usize, &str)> = vec![(usize::MAX, "")];
        let mut markings = vec![m.clone()];
        let mut seen = HashSet::from([m.clone()]);
        let mut queue = VecDeque::from([0usize]);
        while let Some(idx) = queue.pop_front() {
            for t in &candidates {
                if !self.is_enabled(&markings[idx], t) {
                    continue;
                }
                let next = self.fire(&markings[idx], &t.id).expect("enabled");
                if !seen.insert(next.clone()) {
                    continue;
                }
                markings.push(next);
                parents.push((idx, t.id.as_str()));
                let here = markings.len() - 1;
                if goal(&markings[here]) {
                    let mut path = Vec::new();
                    let mut cur = here;
                    while cur != 0 {
                        let (parent, t) = parents[cur];
                        path.push(t.to_string());
                        cur = parent;
                    }
                    path.reverse();
                    return Some((path, markings.swap_remove(here)));
                }
                if markings.len() >= limit {
                    return None;
                }
                queue.push_back(here);
            }
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Node<'a> {
    Place(&'a str),
    Transition(&'a str),
}

impl fmt::Display for Node<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Place(p) => write!(f, "place {p}"),
            Node::Transition(t) => write!(f, "transition {t}"),
        }
    }
}

/// Token counts per place. Zero counts are never stored, so two markings
/// with the same tokens compare and hash equal.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Marking(BTreeMap<String, u32>);

impl Marking {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, place: &str) -> u32 {
        self.0.get(place).copied().unwrap_or(0)
    }

    pub fn add(&mut self, place: &str, n: u32) {
        if n > 0 {
            *self.0.entry(place.to_string()).or_default() += n;
        }
    }

    /// Removes up to `n` tokens; returns how many were actually removed.
    pub fn remove(&mut self, place: &str, n: u32) -> u32 {
        let Some(count) = self.0.get_mut(place) else {
            return 0;
        };
        let taken = n.min(*count);
        *count -= taken;
        if *count == 0 {
            self.0.remove(place);
        }
        taken
    }

    pub fn total(&self) -> u64 {
        self.0.values().map(|&c| u64::from(c)).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> {
        self.0.iter().map(|(p, &c)| (p.as_str(), c))
    }
}

impl<S: Into<String>> FromIterator<(S, u32)> for Marking {
    fn from_iter<I: IntoIterator<Item = (S, u32)>>(iter: I) -> Self {
        let mut m = Marking::new();
        for (p, c) in iter {
            m.add(&p.into(), c);
        }
        m
    }
}

impl fmt::Display for Marking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, (p, c)) in self.iter().enumerate() {
            if k > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{p}:{c}")?;
        }
        f.write_str("}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

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

    #[test]
    fn enabled_in_source_and_sink() {
        let net = single();
        assert_eq!(net.enabled_transitions(&Marking::from_iter([("i", 1)])), vec!["t"]);
        assert!(net.enabled_transitions(&Marking::from_iter([("o", 1)])).is_empty());
    }

    #[test]
    fn and_join_needs_every_input() {
        let net = and_block();
        let only_p3 = Marking::from_iter([("p3", 1)]);
        assert!(!net.enabled_transitions(&only_p3).contains(&"join"));
        let both = Marking::from_iter([("p3", 1), ("p4", 1)]);
        assert!(net.enabled_transitions(&both).contains(&"join"));
    }

    #[test]
    fn firing_moves_tokens() {
        let net = single();
        let after = net.fire(&Marking::from_iter([("i", 1)]), "t").unwrap();
        assert_eq!(after, Marking::from_iter([("o", 1)]));
        assert_eq!(
            net.fire(&after, "t"),
            Err(NetError::NotEnabled("t".to_string()))
        );
        let split = and_block().fire(&and_block().initial_marking(), "split").unwrap();
        assert_eq!(split, Marking::from_iter([("p1", 1), ("p2", 1)]));
    }

    #[test]
    fn markings_drop_zero_counts() {
        let mut m = Marking::from_iter([("a", 1), ("b", 0)]);
        assert_eq!(m, Marking::from_iter([("a", 1)]));
        assert_eq!(m.remove("a", 3), 1);
        assert!(m.is_empty());
        assert_eq!(m.to_string(), "{}");
    }

    #[test]
    fn structure_check_flags_stranded_nodes() {
        assert!(and_block().structure_violations().is_empty());
        let mut net = single();
        net.add_transition(Transition::visible("x").with_inputs(["lonely"]).with_outputs(["o"]));
        let v = net.structure_violations();
        assert!(v.iter().any(|s| s.contains("lonely")), "{v:?}");
    }

    #[test]
    fn shortest_path_finds_silent_prefix() {
        let net = and_block();
        let (path, m) = net
            .shortest_path(
                &net.initial_marking(),
                Transition::is_silent,
                |m| m.get("p1") == 1,
                100,
            )
            .unwrap();
        assert_eq!(path, vec!["split".to_string()]);
        assert_eq!(m.get("p2"), 1);
    }
}
