//! The classical alpha algorithm.
//!
//! Maximal place candidates (A, B) are grown by merging: every valid pair
//! is a union of valid singleton pairs ({a}, {b}) and every subset of a
//! valid pair is valid, so closing the singletons under pairwise union
//! reaches every valid pair without enumerating the powerset.

use std::collections::BTreeSet;

use super::footprint::{footprint, Footprint};
use super::MiningError;
use crate::net::{Transition, WorkflowNet};

type Set = BTreeSet<String>;

pub fn alpha_discover<S: AsRef<str>>(traces: &[Vec<S>]) -> Result<WorkflowNet, MiningError> {
    if traces.is_empty() {
        return Err(MiningError::EmptyLog);
    }
    if let Some(k) = traces.iter().position(Vec::is_empty) {
        return Err(MiningError::EmptyTrace(k));
    }
    let fp = footprint(traces);
    let initial: Set = traces.iter().map(|t| t[0].as_ref().to_string()).collect();
    let last: Set = traces
        .iter()
        .map(|t| t[t.len() - 1].as_ref().to_string())
        .collect();

    let places = maximal_pairs(&fp);

    let mut net = WorkflowNet::new();
    for a in &fp.activities {
        net.add_transition(Transition::visible(a.clone()));
    }
    let source = net.source.clone();
    let sink = net.sink.clone();
    for a in &initial {
        net.transitions.get_mut(a).unwrap().inputs.insert(source.clone());
    }
    for a in &last {
        net.transitions.get_mut(a).unwrap().outputs.insert(sink.clone());
    }
    for (from, to) in &places {
        let place = format!(
            "p({}|{})",
            from.iter().cloned().collect::<Vec<_>>().join(","),
            to.iter().cloned().collect::<Vec<_>>().join(",")
        );
        net.add_place(place.clone());
        for a in from {
            net.transitions.get_mut(a).unwrap().outputs.insert(place.clone());
        }
        for b in to {
            net.transitions.get_mut(b).unwrap().inputs.insert(place.clone());
        }
    }
    Ok(net)
}

fn internally_unrelated(fp: &Footprint, set: &Set) -> bool {
    set.iter().all(|x| set.iter().all(|y| fp.is_unrelated(x, y)))
}

fn all_causal(fp: &Footprint, from: &Set, to: &Set) -> bool {
    from.iter().all(|a| to.iter().all(|b| fp.is_causal(a, b)))
}

/// The maximal (A, B) pairs with A -> B crosswise and # inside A and B.
pub(crate) fn maximal_pairs(fp: &Footprint) -> BTreeSet<(Set, Set)> {
    let mut pairs: BTreeSet<(Set, Set)> = BTreeSet::new();
    for a in &fp.activities {
        for b in &fp.activities {
            let (from, to) = (Set::from([a.clone()]), Set::from([b.clone()]));
            if fp.is_causal(a, b) && internally_unrelated(fp, &from) && internally_unrelated(fp, &to) {
                pairs.insert((from, to));
            }
        }
    }

    let mut frontier: Vec<(Set, Set)> = pairs.iter().cloned().collect();
    while !frontier.is_empty() {
        let mut next = Vec::new();
        let snapshot: Vec<(Set, Set)> = pairs.iter().cloned().collect();
        for (fa, fb) in &frontier {
            for (sa, sb) in &snapshot {
                let from: Set = fa.union(sa).cloned().collect();
                let to: Set = fb.union(sb).cloned().collect();
                if pairs.contains(&(from.clone(), to.clone())) {
                    continue;
                }
                if internally_unrelated(fp, &from)
                    && internally_unrelated(fp, &to)
                    && all_causal(fp, &from, &to)
                {
                    pairs.insert((from.clone(), to.clone()));
                    next.push((from, to));
                }
            }
        }
        frontier = next;
    }

    pairs
        .iter()
        .filter(|(a, b)| {
            !pairs
                .iter()
                .any(|(a2, b2)| (a2, b2) != (a, b) && a.is_subset(a2) && b.is_subset(b2))
        })
        .cloned()
        .collect()
}
