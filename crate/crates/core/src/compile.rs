//! Compiles a validated [`Plan`] into a [`WorkflowNet`].
//!
//! Tasks and AND gateways become transitions, XOR gateways become places.
//! A flow between two transition-like nodes gets its own place named
//! `from->to`; a flow between two XOR gateways gets a silent `route:`
//! transition. Optional tasks get a silent `skip:` bypass. A task with
//! multiplicity k is wrapped in a silent `fork:`/`merge:` pair around k
//! visible copies labeled `T#1..T#k`.
//!
//! A coupled pair (a, b) scoped by split S and join J compiles to a single
//! skip permit: S puts a token in `permit:<id>`, each member's bypass
//! consumes it and marks `spent:<id>`, so at most one member can be
//! skipped. J is split into one silent variant per combination of permit
//! states of the pairs it closes.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::net::{Transition, WorkflowNet};
use crate::plan::{GatewayKind, NodeKind, Plan, Violation};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error("plan is invalid: {}", .0.first().map(ToString::to_string).unwrap_or_default())]
    Invalid(Vec<Violation>),
    #[error("gateway {id} of kind {kind} is not supported")]
    UnsupportedGateway { id: String, kind: GatewayKind },
}

pub fn permit_place(choice: &str) -> String {
    format!("permit:{choice}")
}

pub fn spent_place(choice: &str) -> String {
    format!("spent:{choice}")
}

pub fn plan_to_net(plan: &Plan) -> Result<WorkflowNet, CompileError> {
    let violations = crate::plan::validate_plan(plan);
    if !violations.is_empty() {
        return Err(CompileError::Invalid(violations));
    }
    if let Some(g) = plan
        .gateways
        .iter()
        .find(|g| matches!(g.kind, GatewayKind::OrSplit | GatewayKind::OrJoin))
    {
        return Err(CompileError::UnsupportedGateway {
            id: g.id.clone(),
            kind: g.kind,
        });
    }

    let kinds = plan.node_kinds();
    let is_place = |n: &str| matches!(kinds[n], NodeKind::Gateway(k) if k.is_xor());
    let start = plan.start_nodes()[0];
    let end = plan.end_nodes()[0];
    let xor_place = |n: &str| -> String {
        if n == start {
            crate::net::SOURCE.to_string()
        } else if n == end {
            crate::net::SINK.to_string()
        } else {
            format!("xor:{n}")
        }
    };

    let mut net = WorkflowNet::new();
    let mut pre: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
    let mut post: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();

    for f in &plan.flows {
        let (from, to) = (f.from.as_str(), f.to.as_str());
        match (is_place(from), is_place(to)) {
            (false, false) => {
                let p = format!("{from}->{to}");
                post.entry(from).or_default().insert(p.clone());
                pre.entry(to).or_default().insert(p);
            }
            (false, true) => {
                post.entry(from).or_default().insert(xor_place(to));
            }
            (true, false) => {
                pre.entry(to).or_default().insert(xor_place(from));
            }
            (true, true) => net.add_transition(
                Transition::silent(format!("route:{from}->{to}"))
                    .with_inputs([xor_place(from)])
                    .with_outputs([xor_place(to)]),
            ),
        }
    }
    if !is_place(start) {
        pre.entry(start).or_default().insert(crate::net::SOURCE.to_string());
    }
    if !is_place(end) {
        post.entry(end).or_default().insert(crate::net::SINK.to_string());
    }
    for g in plan.gateways.iter().filter(|g| g.kind.is_xor()) {
        net.add_place(xor_place(&g.id));
    }

    let mut member_of: BTreeMap<&str, &str> = BTreeMap::new();
    for c in &plan.coupled_choices {
        for t in &c.tasks {
            member_of.insert(t.as_str(), c.id.as_str());
        }
    }

    let empty = BTreeSet::new();
    for g in plan.gateways.iter().filter(|g| g.kind.is_and()) {
        let inputs = pre.get(g.id.as_str()).unwrap_or(&empty);
        let mut outputs = post.get(g.id.as_str()).unwrap_or(&empty).clone();
        let id = format!("and:{}", g.id);
        if g.kind == GatewayKind::AndSplit {
            for c in plan.coupled_choices.iter().filter(|c| c.split == g.id) {
                outputs.insert(permit_place(&c.id));
            }
            net.add_transition(Transition::silent(id).with_inputs(inputs.clone()).with_outputs(outputs));
            continue;
        }
        let closed: Vec<&str> = plan
            .coupled_choices
            .iter()
            .filter(|c| c.join == g.id)
            .map(|c| c.id.as_str())
            .collect();
        if closed.is_empty() {
            net.add_transition(Transition::silent(id).with_inputs(inputs.clone()).with_outputs(outputs));
            continue;
        }
        for mask in 0u32..(1 << closed.len()) {
            let mut variant_inputs = inputs.clone();
            let mut suffix = Vec::new();
            for (k, c) in closed.iter().enumerate() {
                if mask & (1 << k) == 0 {
                    variant_inputs.insert(permit_place(c));
                    suffix.push(format!("{c}=unused"));
                } else {
                    variant_inputs.insert(spent_place(c));
                    suffix.push(format!("{c}=spent"));
                }
            }
            net.add_transition(
                Transition::silent(format!("{id}[{}]", suffix.join(",")))
                    .with_inputs(variant_inputs)
                    .with_outputs(outputs.clone()),
            );
        }
    }

    for task in &plan.tasks {
        let inputs = pre.get(task.id.as_str()).unwrap_or(&empty);
        let outputs = post.get(task.id.as_str()).unwrap_or(&empty);
        if task.multiplicity <= 1 {
            let mut t = Transition::visible(task.id.clone())
                .with_inputs(inputs.clone())
                .with_outputs(outputs.clone());
            t.task = Some(task.id.clone());
            net.add_transition(t);
        } else {
            let copies: Vec<String> = (1..=task.multiplicity).map(|k| format!("{}#{k}", task.id)).collect();
            let mut fork = Transition::silent(format!("fork:{}", task.id))
                .with_inputs(inputs.clone())
                .with_outputs(copies.iter().map(|c| format!("{c}:in")));
            fork.task = Some(task.id.clone());
            net.add_transition(fork);
            for c in &copies {
                let mut t = Transition::visible(c.clone())
                    .with_inputs([format!("{c}:in")])
                    .with_outputs([format!("{c}:out")]);
                t.task = Some(task.id.clone());
                net.add_transition(t);
            }
            let mut merge = Transition::silent(format!("merge:{}", task.id))
                .with_inputs(copies.iter().map(|c| format!("{c}:out")))
                .with_outputs(outputs.clone());
            merge.task = Some(task.id.clone());
            net.add_transition(merge);
        }

        let mut skip = Transition::silent(format!("skip:{}", task.id))
            .with_inputs(inputs.clone())
            .with_outputs(outputs.clone());
        skip.task = Some(task.id.clone());
        skip.bypass = true;
        if let Some(choice) = member_of.get(task.id.as_str()) {
            skip.inputs.insert(permit_place(choice));
            skip.outputs.insert(spent_place(choice));
            net.add_transition(skip);
        } else if task.optional {
            net.add_transition(skip);
        }
    }

    Ok(net)
}
