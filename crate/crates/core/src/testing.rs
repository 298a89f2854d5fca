//! Proptest strategies and brute-force oracles shared by test suites.

use std::collections::{BTreeMap, BTreeSet};

use chrono::Duration;
use proptest::prelude::*;

use crate::eventlog::{base_epoch, Event, EventLog, Trace};
use crate::net::{Marking, Transition, WorkflowNet, SINK, SOURCE};
use crate::plan::{CoupledChoice, Flow, Gateway, GatewayKind, Plan, RoleDef, TaskDef};

/// Block-structured control flow used to build random plans.
#[derive(Debug, Clone)]
pub enum Block {
    Task { optional: bool, multiplicity: u32 },
    Seq(Vec<Block>),
    /// Parallel branches; when the flag is set and the first two branches
    /// are plain tasks, they form a coupled choice.
    And(Vec<Block>, bool),
    Xor(Vec<Block>),
}

pub fn block() -> impl Strategy<Value = Block> {
    let leaf = (prop::bool::weighted(0.2), prop_oneof![4 => Just(1u32), 1 => 2..=3u32])
        .prop_map(|(optional, multiplicity)| Block::Task { optional, multiplicity });
    leaf.prop_recursive(3, 10, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..=3).prop_map(Block::Seq),
            (prop::collection::vec(inner.clone(), 2..=3), any::<bool>())
                .prop_map(|(bs, coupled)| Block::And(bs, coupled)),
            prop::collection::vec(inner, 2..=3).prop_map(Block::Xor),
        ]
    })
}

/// Random valid plans: a start task, a random block and an end task,
/// with tasks spread over three roles.
pub fn plan() -> impl Strategy<Value = Plan> {
    block().prop_map(|b| plan_from_block(&b))
}

pub fn plan_from_block(b: &Block) -> Plan {
    let mut builder = Builder::default();
    let start = builder.task(false, 1);
    let (entry, exit) = builder.block(b);
    let end = builder.task(false, 1);
    builder.flow(&start, &entry);
    builder.flow(&exit, &end);
    Plan {
        id: "random".into(),
        roles: ["R1", "R2", "R3"]
            .iter()
            .map(|r| RoleDef {
                id: r.to_string(),
                name: format!("role {r}"),
                actors: vec![format!("{}-a", r.to_lowercase()), format!("{}-b", r.to_lowercase())],
            })
            .collect(),
        tasks: builder.tasks,
        gateways: builder.gateways,
        flows: builder.flows,
        message_flows: vec![],
        coupled_choices: builder.coupled,
    }
}

#[derive(Default)]
struct Builder {
    tasks: Vec<TaskDef>,
    gateways: Vec<Gateway>,
    flows: Vec<Flow>,
    coupled: Vec<CoupledChoice>,
}

impl Builder {
    fn task(&mut self, optional: bool, multiplicity: u32) -> String {
        let n = self.tasks.len() + 1;
        let id = format!("t{n}");
        let role = format!("R{}", n % 3 + 1);
        let mut t = TaskDef::new(id.clone(), format!("task {n}"), role).with_multiplicity(multiplicity);
        t.optional = optional;
        self.tasks.push(t);
        id
    }

    fn gateway(&mut self, kind: GatewayKind) -> String {
        let id = format!("g{}", self.gateways.len() + 1);
        self.gateways.push(Gateway::new(id.clone(), kind));
        id
    }

    fn flow(&mut self, from: &str, to: &str) {
        self.flows.push(Flow::new(from, to));
    }

    fn block(&mut self, b: &Block) -> (String, String) {
        match b {
            Block::Task { optional, multiplicity } => {
                let id = self.task(*optional, *multiplicity);
                (id.clone(), id)
            }
            Block::Seq(bs) => {
                let parts: Vec<(String, String)> = bs.iter().map(|b| self.block(b)).collect();
                for w in parts.windows(2) {
                    self.flow(&w[0].1, &w[1].0);
                }
                (parts[0].0.clone(), parts[parts.len() - 1].1.clone())
            }
            Block::And(bs, coupled) => {
                let (split, join) = self.branches(bs, GatewayKind::AndSplit, GatewayKind::AndJoin);
                let plain = |b: &Block| matches!(b, Block::Task { optional: false, multiplicity: 1 });
                if *coupled && plain(&bs[0]) && plain(&bs[1]) {
                    let targets: Vec<String> = self
                        .flows
                        .iter()
                        .filter(|f| f.from == split)
                        .map(|f| f.to.clone())
                        .take(2)
                        .collect();
                    self.coupled.push(CoupledChoice {
                        id: format!("c{}", self.coupled.len() + 1),
                        split: split.clone(),
                        join: join.clone(),
                        tasks: targets,
                    });
                }
                (split, join)
            }
            Block::Xor(bs) => self.branches(bs, GatewayKind::XorSplit, GatewayKind::XorJoin),
        }
    }

    fn branches(&mut self, bs: &[Block], split_kind: GatewayKind, join_kind: GatewayKind) -> (String, String) {
        let split = self.gateway(split_kind);
        let parts: Vec<(String, String)> = bs.iter().map(|b| self.block(b)).collect();
        let join = self.gateway(join_kind);
        for (entry, exit) in &parts {
            self.flow(&split, entry);
            self.flow(exit, &join);
        }
        (split, join)
    }
}

/// Random activity sequences over a small alphabet, empty traces allowed.
pub fn traces() -> impl Strategy<Value = Vec<Vec<String>>> {
    let activity = prop::sample::select(vec!["a", "b", "c", "d", "e", "f"]).prop_map(String::from);
    prop::collection::vec(prop::collection::vec(activity, 0..8), 0..6)
}

/// Random logs with resources on every event and increasing timestamps.
pub fn log_with_resources() -> impl Strategy<Value = EventLog> {
    let event = (
        prop::sample::select(vec!["a", "b", "c", "d"]),
        prop::sample::select(vec!["X", "Y", "Z"]),
    );
    prop::collection::vec(prop::collection::vec(event, 0..10), 0..6).prop_map(|cases| {
        let traces = cases
            .into_iter()
            .enumerate()
            .map(|(k, events)| {
                let case = (k + 1).to_string();
                let mut t = Trace::new(case.clone());
                for (j, (a, r)) in events.into_iter().enumerate() {
                    let ts = base_epoch() + Duration::seconds(60 * j as i64);
                    t.events.push(Event::complete(case.clone(), a, ts).with_resource(r));
                }
                t
            })
            .collect();
        EventLog::from_traces(traces).expect("distinct case ids")
    })
}

/// Random nets over `i`, `o` and up to eight inner places, with up to six
/// transitions whose pre- and post-sets are non-empty.
pub fn small_net() -> impl Strategy<Value = WorkflowNet> {
    (0usize..=8).prop_flat_map(|inner| {
        let mut names: Vec<String> = vec![SOURCE.to_string(), SINK.to_string()];
        names.extend((0..inner).map(|k| format!("p{k}")));
        let place = prop::sample::select(names);
        let arcs = prop::collection::btree_set(place, 1..=3);
        prop::collection::vec((arcs.clone(), arcs), 1..=6).prop_map(|ts| {
            let mut net = WorkflowNet::new();
            for (k, (inputs, outputs)) in ts.into_iter().enumerate() {
                net.add_transition(Transition::visible(format!("t{k}")).with_inputs(inputs).with_outputs(outputs));
            }
            net
        })
    })
}

/// Soundness verdict computed by exhaustive search straight from the
/// definition: (option to complete, proper completion, dead transitions).
/// `None` when more than `cap` markings are reachable.
pub fn brute_force_soundness(net: &WorkflowNet, cap: usize) -> Option<(bool, bool, BTreeSet<String>)> {
    let reachable_from = |start: &Marking| -> Option<BTreeSet<Marking>> {
        let mut seen = BTreeSet::from([start.clone()]);
        let mut stack = vec![start.clone()];
        while let Some(m) = stack.pop() {
            for t in net.transitions.keys() {
                if let Ok(next) = net.fire(&m, t) {
                    if seen.insert(next.clone()) {
                        if seen.len() > cap {
                            return None;
                        }
                        stack.push(next);
                    }
                }
            }
        }
        Some(seen)
    };
    let all = reachable_from(&net.initial_marking())?;
    let final_marking = net.final_marking();
    let option = all
        .iter()
        .all(|m| reachable_from(m).is_some_and(|r| r.contains(&final_marking)));
    let proper = all.iter().all(|m| m.get(SINK) == 0 || *m == final_marking);
    let dead = net
        .transitions
        .keys()
        .filter(|t| all.iter().all(|m| net.fire(m, t).is_err()))
        .cloned()
        .collect();
    Some((option, proper, dead))
}

/// Places that ever hold more than one token, searched exhaustively.
pub fn unsafe_places(net: &WorkflowNet, cap: usize) -> Option<BTreeSet<String>> {
    let mut seen = BTreeSet::from([net.initial_marking()]);
    let mut stack = vec![net.initial_marking()];
    let mut over: BTreeMap<String, u32> = BTreeMap::new();
    while let Some(m) = stack.pop() {
        for (p, n) in m.iter() {
            if n > 1 {
                over.insert(p.to_string(), n);
            }
        }
        for t in net.transitions.keys() {
            if let Ok(next) = net.fire(&m, t) {
                if seen.insert(next.clone()) {
                    if seen.len() > cap {
                        return None;
                    }
                    stack.push(next);
                }
            }
        }
    }
    Some(over.into_keys().collect())
}
