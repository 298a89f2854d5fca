//! Seeded auto-simulation.
//!
//! All cases draw from one ChaCha8 stream seeded with the policy seed. At
//! each step of a case the enabled transitions are computed in id order.
//! Every place with two or more enabled consumers needs a choice; places
//! are visited in name order and a choice is drawn (uniformly among the
//! consumers) only when the place has no standing choice that is still
//! enabled. Consumers not chosen are excluded. A silent candidate fires
//! without a draw; otherwise one visible candidate is drawn uniformly.
//! Each visible firing is logged at the case clock, which then advances by
//! the think time.

use std::collections::{BTreeMap, BTreeSet};

use chrono::Duration;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EngineError, LoadedPlan};
use crate::eventlog::{base_epoch, Event, EventLog, Trace};
use crate::net::Transition;
use crate::plan::Plan;

/// Firings allowed per case before the run is declared non-terminating.
const MAX_STEPS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SimulationPolicy {
    pub seed: u64,
    /// Seconds between consecutive events of a case.
    pub think_time: i64,
}

impl SimulationPolicy {
    pub fn seeded(seed: u64) -> Self {
        Self {
            seed,
            think_time: super::STEP_SECONDS,
        }
    }
}

pub fn auto_simulate(plan: &Plan, n_cases: usize, policy: SimulationPolicy) -> Result<EventLog, EngineError> {
    let loaded = LoadedPlan::new(plan.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
    let mut log = EventLog::new();
    log.attributes.insert("plan".into(), plan.id.clone());
    log.attributes.insert("seed".into(), policy.seed.to_string());
    for k in 1..=n_cases {
        let trace = simulate_case(&loaded, &k.to_string(), policy, &mut rng)?;
        log.push_trace(trace).expect("case ids are distinct");
    }
    Ok(log)
}

fn simulate_case(
    loaded: &LoadedPlan,
    case_id: &str,
    policy: SimulationPolicy,
    rng: &mut ChaCha8Rng,
) -> Result<Trace, EngineError> {
    let net = &loaded.net;
    let mut m = net.initial_marking();
    let mut clock = base_epoch();
    let mut trace = Trace::new(case_id);
    let mut choices: BTreeMap<String, String> = BTreeMap::new();

    for _ in 0..MAX_STEPS {
        let enabled: Vec<&Transition> = net
            .enabled_transitions(&m)
            .into_iter()
            .map(|id| &net.transitions[id])
            .collect();
        if enabled.is_empty() {
            if m == net.final_marking() {
                return Ok(trace);
            }
            return Err(EngineError::Deadlock {
                case: case_id.to_string(),
                marking: m,
            });
        }

        let mut consumers: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for t in &enabled {
            for p in &t.inputs {
                consumers.entry(p.as_str()).or_default().push(t.id.as_str());
            }
        }
        let mut excluded: BTreeSet<&str> = BTreeSet::new();
        for (place, ts) in consumers.iter().filter(|(_, ts)| ts.len() >= 2) {
            let standing = choices
                .get(*place)
                .filter(|c| ts.contains(&c.as_str()))
                .cloned();
            let chosen = match standing {
                Some(c) => c,
                None => {
                    let c = ts[rng.random_range(0..ts.len())].to_string();
                    choices.insert(place.to_string(), c.clone());
                    c
                }
            };
            excluded.extend(ts.iter().filter(|t| **t != chosen));
        }
        let mut candidates: Vec<&Transition> = enabled
            .iter()
            .copied()
            .filter(|t| !excluded.contains(t.id.as_str()))
            .collect();
        if candidates.is_empty() {
            candidates = enabled;
        }

        let fired = match candidates.iter().find(|t| t.is_silent()) {
            Some(t) => *t,
            None => candidates[rng.random_range(0..candidates.len())],
        };
        m = net.fire(&m, &fired.id).expect("enabled");
        if let Some(label) = &fired.label {
            let mut event = Event::complete(case_id, label.clone(), clock);
            if let Some(actor) = first_actor(loaded, fired) {
                event = event.with_resource(actor);
            }
            trace.events.push(event);
            clock += Duration::seconds(policy.think_time);
        }
    }
    Err(EngineError::NonCompletion {
        case: case_id.to_string(),
        steps: MAX_STEPS,
    })
}

fn first_actor(loaded: &LoadedPlan, t: &Transition) -> Option<String> {
    let role = loaded.role_of(t);
    loaded
        .plan
        .role(&role)
        .and_then(|r| r.actors.iter().min())
        .cloned()
}
