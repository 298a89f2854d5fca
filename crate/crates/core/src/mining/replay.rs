//! Token-based replay.
//!
//! Silent transitions are fired on demand: when the next event's transition
//! is not enabled, the shortest sequence of silent transitions that enables
//! it is replayed first, and the same is done to mark the sink at the end of
//! a trace. Only if no such sequence exists are missing tokens created.

use serde::{Deserialize, Serialize};

use crate::net::{Marking, Transition, WorkflowNet};

/// Upper bound on markings visited while searching for a silent prefix.
const SILENT_SEARCH_LIMIT: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessReport {
    pub produced: u64,
    pub consumed: u64,
    pub missing: u64,
    pub remaining: u64,
    pub fitness: f64,
}

impl FitnessReport {
    fn from_counts(produced: u64, consumed: u64, missing: u64, remaining: u64) -> Self {
        let fitness = if produced == 0 || consumed == 0 {
            1.0
        } else {
            0.5 * (1.0 - missing as f64 / consumed as f64) + 0.5 * (1.0 - remaining as f64 / produced as f64)
        };
        Self {
            produced,
            consumed,
            missing,
            remaining,
            fitness,
        }
    }
}

#[derive(Default)]
struct Counts {
    produced: u64,
    consumed: u64,
    missing: u64,
    remaining: u64,
}

impl Counts {
    fn fire(&mut self, m: &mut Marking, t: &Transition) {
        for p in &t.inputs {
            if m.remove(p, 1) == 0 {
                self.missing += 1;
            }
            self.consumed += 1;
        }
        for p in &t.outputs {
            m.add(p, 1);
            self.produced += 1;
        }
    }
}

pub fn token_replay<S: AsRef<str>>(net: &WorkflowNet, traces: &[Vec<S>]) -> FitnessReport {
    let mut counts = Counts::default();
    for trace in traces {
        replay_trace(net, trace, &mut counts);
    }
    FitnessReport::from_counts(counts.produced, counts.consumed, counts.missing, counts.remaining)
}

fn replay_trace<S: AsRef<str>>(net: &WorkflowNet, trace: &[S], counts: &mut Counts) {
    let mut m = net.initial_marking();
    counts.produced += 1;

    for activity in trace {
        let candidates: Vec<&Transition> = net.transitions_labeled(activity.as_ref()).collect();
        if candidates.is_empty() {
            counts.produced += 1;
            counts.consumed += 1;
            counts.missing += 1;
            counts.remaining += 1;
            continue;
        }
        let chosen = match candidates.iter().find(|t| net.is_enabled(&m, t)) {
            Some(t) => *t,
            None => {
                let found = net.shortest_path(
                    &m,
                    Transition::is_silent,
                    |m| candidates.iter().any(|t| net.is_enabled(m, t)),
                    SILENT_SEARCH_LIMIT,
                );
                if let Some((path, _)) = found {
                    for id in &path {
                        counts.fire(&mut m, &net.transitions[id]);
                    }
                }
                candidates
                    .iter()
                    .find(|t| net.is_enabled(&m, t))
                    .copied()
                    .unwrap_or(candidates[0])
            }
        };
        counts.fire(&mut m, chosen);
    }

    if m.get(&net.sink) == 0 {
        let sink = net.sink.as_str();
        if let Some((path, _)) =
            net.shortest_path(&m, Transition::is_silent, |m| m.get(sink) > 0, SILENT_SEARCH_LIMIT)
        {
            for id in &path {
                counts.fire(&mut m, &net.transitions[id]);
            }
        }
    }
    if m.remove(&net.sink, 1) == 0 {
        counts.missing += 1;
    }
    counts.consumed += 1;
    counts.remaining += m.total();
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single() -> WorkflowNet {
        let mut net = WorkflowNet::new();
        net.add_transition(Transition::visible("a").with_inputs(["i"]).with_outputs(["o"]));
        net
    }

    fn chain() -> WorkflowNet {
        let mut net = WorkflowNet::new();
        net.add_transition(Transition::visible("a").with_inputs(["i"]).with_outputs(["p1"]));
        net.add_transition(Transition::visible("b").with_inputs(["p1"]).with_outputs(["p2"]));
        net.add_transition(Transition::visible("c").with_inputs(["p2"]).with_outputs(["o"]));
        net
    }

    #[test]
    fn perfect_single_event() {
        let r = token_replay(&single(), &[vec!["a"]]);
        assert_eq!((r.produced, r.consumed, r.missing, r.remaining), (2, 2, 0, 0));
        assert_eq!(r.fitness, 1.0);
    }

    #[test]
    fn skipped_middle_event() {
        let r = token_replay(&chain(), &[vec!["a", "c"]]);
        assert_eq!((r.produced, r.consumed, r.missing, r.remaining), (3, 3, 1, 1));
        assert!((r.fitness - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_trace_scores_zero() {
        let r = token_replay::<&str>(&single(), &[vec![]]);
        assert_eq!((r.produced, r.consumed, r.missing, r.remaining), (1, 1, 1, 1));
        assert_eq!(r.fitness, 0.0);
    }

    #[test]
    fn unknown_activity_counts_missing_and_remaining() {
        let r = token_replay(&single(), &[vec!["a", "zzz"]]);
        assert_eq!((r.missing, r.remaining), (1, 1));
        assert!(r.fitness < 1.0 && r.fitness > 0.0);
    }

    #[test]
    fn silent_transitions_are_replayed_on_demand() {
        let mut net = WorkflowNet::new();
        net.add_transition(Transition::silent("split").with_inputs(["i"]).with_outputs(["p1", "p2"]));
        net.add_transition(Transition::visible("a").with_inputs(["p1"]).with_outputs(["p3"]));
        net.add_transition(Transition::visible("b").with_inputs(["p2"]).with_outputs(["p4"]));
        net.add_transition(Transition::silent("join").with_inputs(["p3", "p4"]).with_outputs(["o"]));
        let r = token_replay(&net, &[vec!["b", "a"]]);
        assert_eq!((r.missing, r.remaining), (0, 0));
        assert_eq!(r.fitness, 1.0);
    }
}
