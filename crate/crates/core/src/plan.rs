//! Structured plan documents.
//!
//! A [`Plan`] names the roles taking part in a response, the tasks each role
//! performs, and the control flow between tasks expressed with AND/XOR
//! gateways. Plans are exchanged as JSON:
//!
//! ```json
//! {
//!   "id": "drill",
//!   "roles": [{ "id": "A1", "name": "Duty desk", "actors": ["alice"] }],
//!   "tasks": [{ "id": "T1", "label": "Raise alarm", "role": "A1" }],
//!   "gateways": [],
//!   "flows": [],
//!   "messageFlows": []
//! }
//! ```
//!
//! Besides the four gateway kinds, a plan may declare `coupledChoices`: a
//! pair of tasks in parallel branches of which at least one must run. Each
//! pair is scoped by the AND-split that opens the branches and the AND-join
//! that closes them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Plan {
    pub id: String,
    pub roles: Vec<RoleDef>,
    pub tasks: Vec<TaskDef>,
    #[serde(default)]
    pub gateways: Vec<Gateway>,
    #[serde(default)]
    pub flows: Vec<Flow>,
    #[serde(default)]
    pub message_flows: Vec<Flow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coupled_choices: Vec<CoupledChoice>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleDef {
    pub id: String,
    pub name: String,
    pub actors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskDef {
    pub id: String,
    pub label: String,
    pub role: String,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub multiplicity: u32,
    #[serde(default, skip_serializing_if = "is_false")]
    pub optional: bool,
}

fn one() -> u32 {
    1
}

fn is_one(v: &u32) -> bool {
    *v == 1
}

fn is_false(v: &bool) -> bool {
    !*v
}

impl TaskDef {
    pub fn new(id: impl Into<String>, label: impl Into<String>, role: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            label: label.into(),
            role: role.into(),
            multiplicity: 1,
            optional: false,
        }
    }

    pub fn optional(mut self) -> Self {
        self.optional = true;
        self
    }

    pub fn with_multiplicity(mut self, multiplicity: u32) -> Self {
        self.multiplicity = multiplicity;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GatewayKind {
    #[serde(rename = "AND-split")]
    AndSplit,
    #[serde(rename = "AND-join")]
    AndJoin,
    #[serde(rename = "XOR-split")]
    XorSplit,
    #[serde(rename = "XOR-join")]
    XorJoin,
    /// Accepted by the parser so that documents using it get a compile
    /// error instead of a syntax error; never compiled.
    #[serde(rename = "OR-split")]
    OrSplit,
    #[serde(rename = "OR-join")]
    OrJoin,
}

impl GatewayKind {
    pub fn is_split(self) -> bool {
        matches!(self, Self::AndSplit | Self::XorSplit | Self::OrSplit)
    }

    pub fn is_and(self) -> bool {
        matches!(self, Self::AndSplit | Self::AndJoin)
    }

    pub fn is_xor(self) -> bool {
        matches!(self, Self::XorSplit | Self::XorJoin)
    }
}

impl fmt::Display for GatewayKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::AndSplit => "AND-split",
            Self::AndJoin => "AND-join",
            Self::XorSplit => "XOR-split",
            Self::XorJoin => "XOR-join",
            Self::OrSplit => "OR-split",
            Self::OrJoin => "OR-join",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gateway {
    pub id: String,
    pub kind: GatewayKind,
}

impl Gateway {
    pub fn new(id: impl Into<String>, kind: GatewayKind) -> Self {
        Self { id: id.into(), kind }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Flow {
    pub from: String,
    pub to: String,
}

impl Flow {
    pub fn new(from: impl Into<String>, to: impl Into<String>) -> Self {
        Self {
            from: from.into(),
            to: to.into(),
        }
    }
}

/// Two tasks in parallel branches of which one, the other, or both run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoupledChoice {
    pub id: String,
    /// AND-split that opens the branches holding the tasks.
    pub split: String,
    /// AND-join that closes them.
    pub join: String,
    pub tasks: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViolationKind {
    /// An identifier points at nothing.
    Reference,
    /// Duplicate ids, bad gateway degrees, start/end or connectivity problems.
    Structure,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// The offending node, role or flow identifiers.
    pub nodes: Vec<String>,
    pub message: String,
}

impl Violation {
    fn reference(nodes: Vec<String>, message: impl Into<String>) -> Self {
        Self {
            kind: ViolationKind::Reference,
            nodes,
            message: message.into(),
        }
    }

    fn structure(nodes: Vec<String>, message: impl Into<String>) -> Self {
        Self {
            kind: ViolationKind::Structure,
            nodes,
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}]", self.message, self.nodes.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("reference error: {0}")]
    Reference(Violation),
    #[error("structure error: {0}")]
    Structure(Violation),
}

/// Parses a plan document and checks every plan invariant.
pub fn parse_plan(document: &str) -> Result<Plan, PlanError> {
    let plan: Plan = serde_json::from_str(document).map_err(|e| PlanError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let violations = validate_plan(&plan);
    if let Some(v) = violations
        .iter()
        .find(|v| v.kind == ViolationKind::Reference)
    {
        return Err(PlanError::Reference(v.clone()));
    }
    if let Some(v) = violations.into_iter().next() {
        return Err(PlanError::Structure(v));
    }
    Ok(plan)
}

/// Pretty JSON in the plan-document format.
pub fn serialize_plan(plan: &Plan) -> String {
    serde_json::to_string_pretty(plan).expect("plan serialization is infallible")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum NodeKind {
    Task,
    Gateway(GatewayKind),
}

impl Plan {
    pub fn role(&self, id: &str) -> Option<&RoleDef> {
        self.roles.iter().find(|r| r.id == id)
    }

    pub fn task(&self, id: &str) -> Option<&TaskDef> {
        self.tasks.iter().find(|t| t.id == id)
    }

    /// Task id to role id.
    pub fn role_map(&self) -> BTreeMap<String, String> {
        self.tasks
            .iter()
            .map(|t| (t.id.clone(), t.role.clone()))
            .collect()
    }

    /// Number of visible transitions the compiled net will carry.
    pub fn task_instance_count(&self) -> usize {
        self.tasks.iter().map(|t| t.multiplicity as usize).sum()
    }

    pub(crate) fn node_kinds(&self) -> BTreeMap<&str, NodeKind> {
        let mut kinds = BTreeMap::new();
        for t in &self.tasks {
            kinds.insert(t.id.as_str(), NodeKind::Task);
        }
        for g in &self.gateways {
            kinds.insert(g.id.as_str(), NodeKind::Gateway(g.kind));
        }
        kinds
    }

    /// Nodes without incoming flows, in declaration order.
    pub fn start_nodes(&self) -> Vec<&str> {
        let targets: BTreeSet<&str> = self.flows.iter().map(|f| f.to.as_str()).collect();
        self.node_ids().filter(|n| !targets.contains(n)).collect()
    }

    /// Nodes without outgoing flows, in declaration order.
    pub fn end_nodes(&self) -> Vec<&str> {
        let sources: BTreeSet<&str> = self.flows.iter().map(|f| f.from.as_str()).collect();
        self.node_ids().filter(|n| !sources.contains(n)).collect()
    }

    fn node_ids(&self) -> impl Iterator<Item = &str> {
        self.tasks
            .iter()
            .map(|t| t.id.as_str())
            .chain(self.gateways.iter().map(|g| g.id.as_str()))
    }
}

/// Checks every plan invariant. An empty result means the plan is valid.
pub fn validate_plan(plan: &Plan) -> Vec<Violation> {
    let mut out = Vec::new();

    let mut seen = BTreeSet::new();
    for r in &plan.roles {
        if !seen.insert(r.id.as_str()) {
            out.push(Violation::structure(vec![r.id.clone()], "duplicate role id"));
        }
        if r.actors.is_empty() {
            out.push(Violation::structure(vec![r.id.clone()], "role has no actors"));
        }
    }

    let mut seen = BTreeSet::new();
    for id in plan.node_ids() {
        if !seen.insert(id) {
            out.push(Violation::structure(vec![id.to_string()], "duplicate node id"));
        }
    }

    for t in &plan.tasks {
        if plan.role(&t.role).is_none() {
            out.push(Violation::reference(
                vec![t.id.clone(), t.role.clone()],
                "task references an unknown role",
            ));
        }
        if t.multiplicity == 0 {
            out.push(Violation::structure(
                vec![t.id.clone()],
                "task multiplicity must be at least 1",
            ));
        }
    }

    let kinds = plan.node_kinds();
    let mut dangling = false;
    let mut seen_flows = BTreeSet::new();
    for f in &plan.flows {
        for end in [&f.from, &f.to] {
            if !kinds.contains_key(end.as_str()) {
                dangling = true;
                out.push(Violation::reference(
                    vec![end.clone()],
                    format!("flow {} -> {} references an undeclared node", f.from, f.to),
                ));
            }
        }
        if !seen_flows.insert((f.from.as_str(), f.to.as_str())) {
            out.push(Violation::structure(
                vec![f.from.clone(), f.to.clone()],
                "duplicate flow",
            ));
        }
        if f.from == f.to {
            out.push(Violation::structure(vec![f.from.clone()], "flow loops on itself"));
        }
    }
    for f in &plan.message_flows {
        for end in [&f.from, &f.to] {
            if !kinds.contains_key(end.as_str()) {
                out.push(Violation::reference(
                    vec![end.clone()],
                    format!(
                        "message flow {} -> {} references an undeclared node",
                        f.from, f.to
                    ),
                ));
            }
        }
    }

    let starts = plan.start_nodes();
    if starts.len() != 1 {
        out.push(Violation::structure(
            starts.iter().map(|s| s.to_string()).collect(),
            format!("expected exactly one start node, found {}", starts.len()),
        ));
    }
    let ends = plan.end_nodes();
    if ends.len() != 1 {
        out.push(Violation::structure(
            ends.iter().map(|s| s.to_string()).collect(),
            format!("expected exactly one end node, found {}", ends.len()),
        ));
    }

    let mut incoming: BTreeMap<&str, usize> = BTreeMap::new();
    let mut outgoing: BTreeMap<&str, usize> = BTreeMap::new();
    for f in &plan.flows {
        *outgoing.entry(f.from.as_str()).or_default() += 1;
        *incoming.entry(f.to.as_str()).or_default() += 1;
    }
    for t in &plan.tasks {
        let (i, o) = (
            incoming.get(t.id.as_str()).copied().unwrap_or(0),
            outgoing.get(t.id.as_str()).copied().unwrap_or(0),
        );
        if i > 1 || o > 1 {
            out.push(Violation::structure(
                vec![t.id.clone()],
                "a task has at most one incoming and one outgoing flow; use a gateway",
            ));
        }
    }
    for g in &plan.gateways {
        let (i, o) = (
            incoming.get(g.id.as_str()).copied().unwrap_or(0),
            outgoing.get(g.id.as_str()).copied().unwrap_or(0),
        );
        let ok = if g.kind.is_split() {
            i == 1 && o >= 2
        } else {
            i >= 2 && o == 1
        };
        if !ok {
            out.push(Violation::structure(
                vec![g.id.clone()],
                format!("{} has {i} incoming and {o} outgoing flows", g.kind),
            ));
        }
    }

    if starts.len() == 1 && ends.len() == 1 && !dangling {
        let forward = reachable(plan, starts[0], false);
        let backward = reachable(plan, ends[0], true);
        let stranded: Vec<String> = plan
            .node_ids()
            .filter(|n| !forward.contains(n) || !backward.contains(n))
            .map(str::to_string)
            .collect();
        if !stranded.is_empty() {
            out.push(Violation::structure(
                stranded,
                "nodes not on a path from the start node to the end node",
            ));
        }
    }

    validate_coupled_choices(plan, &kinds, &mut out);
    out
}

fn validate_coupled_choices(
    plan: &Plan,
    kinds: &BTreeMap<&str, NodeKind>,
    out: &mut Vec<Violation>,
) {
    let mut coupled = BTreeSet::new();
    let mut ids = BTreeSet::new();
    for c in &plan.coupled_choices {
        if !ids.insert(c.id.as_str()) || kinds.contains_key(c.id.as_str()) {
            out.push(Violation::structure(
                vec![c.id.clone()],
                "duplicate coupled choice id",
            ));
        }
        for (gw, want) in [(&c.split, GatewayKind::AndSplit), (&c.join, GatewayKind::AndJoin)] {
            match kinds.get(gw.as_str()) {
                None => out.push(Violation::reference(
                    vec![c.id.clone(), gw.clone()],
                    "coupled choice references an undeclared gateway",
                )),
                Some(NodeKind::Gateway(k)) if *k == want => {}
                Some(_) => out.push(Violation::structure(
                    vec![c.id.clone(), gw.clone()],
                    format!("coupled choice scope must be an {want}"),
                )),
            }
        }
        let distinct: BTreeSet<&String> = c.tasks.iter().collect();
        if c.tasks.len() != 2 || distinct.len() != 2 {
            out.push(Violation::structure(
                vec![c.id.clone()],
                "a coupled choice pairs exactly two distinct tasks",
            ));
        }
        for t in &c.tasks {
            match plan.task(t) {
                None => out.push(Violation::reference(
                    vec![c.id.clone(), t.clone()],
                    "coupled choice references an undeclared task",
                )),
                Some(task) if task.optional => out.push(Violation::structure(
                    vec![c.id.clone(), t.clone()],
                    "a coupled task cannot also be optional",
                )),
                Some(_) => {}
            }
            if !coupled.insert(t.as_str()) {
                out.push(Violation::structure(
                    vec![c.id.clone(), t.clone()],
                    "task belongs to more than one coupled choice",
                ));
            }
        }
    }
}

fn reachable<'a>(plan: &'a Plan, from: &'a str, reverse: bool) -> BTreeSet<&'a str> {
    let mut seen = BTreeSet::from([from]);
    let mut stack = vec![from];
    while let Some(n) = stack.pop() {
        for f in &plan.flows {
            let (a, b) = if reverse {
                (f.to.as_str(), f.from.as_str())
            } else {
                (f.from.as_str(), f.to.as_str())
            };
            if a == n && seen.insert(b) {
                stack.push(b);
            }
        }
    }
    seen
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn minimal() -> Plan {
        Plan {
            id: "minimal".into(),
            roles: vec![RoleDef {
                id: "R".into(),
                name: "Responder".into(),
                actors: vec!["ann".into()],
            }],
            tasks: vec![TaskDef::new("T", "Do it", "R")],
            gateways: vec![],
            flows: vec![],
            message_flows: vec![],
            coupled_choices: vec![],
        }
    }

    #[test]
    fn minimal_document_parses() {
        let doc = r#"{
            "id": "minimal",
            "roles": [{"id": "R", "name": "Responder", "actors": ["ann"]}],
            "tasks": [{"id": "T", "label": "Do it", "role": "R"}],
            "gateways": [],
            "flows": [],
            "messageFlows": []
        }"#;
        let plan = parse_plan(doc).unwrap();
        assert_eq!(plan.tasks.len(), 1);
        assert!(plan.gateways.is_empty());
        assert_eq!(plan, minimal());
    }

    #[test]
    fn dangling_flow_is_a_reference_error() {
        let doc = r#"{
            "id": "p",
            "roles": [{"id": "R", "name": "r", "actors": ["a"]}],
            "tasks": [{"id": "T1", "label": "x", "role": "R"}],
            "flows": [{"from": "T1", "to": "T99"}]
        }"#;
        match parse_plan(doc) {
            Err(PlanError::Reference(v)) => assert_eq!(v.nodes, vec!["T99".to_string()]),
            other => panic!("expected reference error, got {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_plan("{\n  \"id\": 3,\n").unwrap_err();
        match err {
            PlanError::Syntax { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn two_start_nodes_is_a_structure_error() {
        let mut plan = minimal();
        plan.tasks.push(TaskDef::new("U", "other", "R"));
        plan.tasks.push(TaskDef::new("V", "end", "R"));
        plan.flows = vec![Flow::new("T", "V"), Flow::new("U", "V")];
        let doc = serialize_plan(&plan);
        assert!(matches!(parse_plan(&doc), Err(PlanError::Structure(_))));
    }

    #[test]
    fn valid_minimal_plan_has_no_violations() {
        assert!(validate_plan(&minimal()).is_empty());
    }

    #[test]
    fn two_end_nodes_named_in_one_violation() {
        let mut plan = minimal();
        plan.tasks.push(TaskDef::new("A", "a", "R"));
        plan.tasks.push(TaskDef::new("B", "b", "R"));
        plan.gateways.push(Gateway::new("S", GatewayKind::AndSplit));
        plan.flows = vec![Flow::new("T", "S"), Flow::new("S", "A"), Flow::new("S", "B")];
        let v = validate_plan(&plan);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].kind, ViolationKind::Structure);
        assert_eq!(v[0].nodes, vec!["A".to_string(), "B".to_string()]);
    }

    #[test]
    fn unknown_role_and_zero_multiplicity_are_reported() {
        let mut plan = minimal();
        plan.tasks[0].role = "Nope".into();
        plan.tasks[0].multiplicity = 0;
        let v = validate_plan(&plan);
        assert!(v.iter().any(|v| v.kind == ViolationKind::Reference));
        assert!(v.iter().any(|v| v.message.contains("multiplicity")));
    }

    #[test]
    fn role_without_actors_is_reported() {
        let mut plan = minimal();
        plan.roles[0].actors.clear();
        assert_eq!(validate_plan(&plan).len(), 1);
    }

    #[test]
    fn gateway_degrees_are_checked() {
        let mut plan = minimal();
        plan.tasks.push(TaskDef::new("U", "u", "R"));
        plan.gateways.push(Gateway::new("J", GatewayKind::XorJoin));
        plan.flows = vec![Flow::new("T", "J"), Flow::new("J", "U")];
        let v = validate_plan(&plan);
        assert!(v.iter().any(|v| v.nodes == vec!["J".to_string()]), "{v:?}");
    }

    #[test]
    fn or_join_parses_as_a_gateway_kind() {
        let g: Gateway = serde_json::from_str(r#"{"id":"g","kind":"OR-join"}"#).unwrap();
        assert_eq!(g.kind, GatewayKind::OrJoin);
        assert!(serde_json::from_str::<Gateway>(r#"{"id":"g","kind":"maybe"}"#).is_err());
    }

    #[test]
    fn optional_fields_default_and_are_omitted_when_default() {
        let t: TaskDef = serde_json::from_str(r#"{"id":"T","label":"l","role":"R"}"#).unwrap();
        assert_eq!(t.multiplicity, 1);
        assert!(!t.optional);
        let json = serde_json::to_string(&t).unwrap();
        assert!(!json.contains("multiplicity") && !json.contains("optional"));
    }
}
