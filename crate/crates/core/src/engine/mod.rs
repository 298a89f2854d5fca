//! Case execution over compiled plans with role-based worklists.
//!
//! Work items stand for visible transitions. An item is offered when its
//! transition is enabled, possibly after a run of silent routing
//! transitions that no bypass takes part in. Silent routing transitions
//! that compete with nothing are fired eagerly; contested ones are fired
//! only as the prefix of the item being completed. Items whose transition
//! can no longer be reached are withdrawn.

mod simulate;

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compile::{plan_to_net, CompileError};
use crate::eventlog::{base_epoch, Event, EventLog, Trace};
use crate::net::{Marking, Transition, WorkflowNet};
use crate::plan::{validate_plan, Plan, Violation};

pub use simulate::{auto_simulate, SimulationPolicy};

/// Seconds the case clock advances per completed work item.
pub const STEP_SECONDS: i64 = 60;

/// Markings explored when looking ahead through silent routing.
const LOOKAHEAD_LIMIT: usize = 512;

/// Eager silent firings allowed per action before giving up.
const EAGER_LIMIT: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CaseId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WorkItemId(pub u64);

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for WorkItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseStatus {
    Running,
    Completed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ItemState {
    Enabled,
    Offered,
    Allocated,
    Started,
    Completed,
    Skipped,
    /// Its task can no longer run in this case, typically because an
    /// exclusive competitor was completed.
    Withdrawn,
}

impl ItemState {
    pub fn is_open(self) -> bool {
        matches!(self, ItemState::Offered | ItemState::Allocated | ItemState::Started)
    }
}

impl fmt::Display for ItemState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ItemState::Enabled => "enabled",
            ItemState::Offered => "offered",
            ItemState::Allocated => "allocated",
            ItemState::Started => "started",
            ItemState::Completed => "completed",
            ItemState::Skipped => "skipped",
            ItemState::Withdrawn => "withdrawn",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Allocate,
    Start,
    Complete,
    Skip,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Action::Allocate => "allocate",
            Action::Start => "start",
            Action::Complete => "complete",
            Action::Skip => "skip",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WorkItem {
    pub id: WorkItemId,
    pub case_id: CaseId,
    pub task: String,
    /// Transition id; differs from `task` only for multi-instance tasks.
    pub instance: String,
    pub label: String,
    pub role: String,
    pub state: ItemState,
    pub actor: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Case {
    pub id: CaseId,
    pub plan_id: String,
    pub marking: Marking,
    pub status: CaseStatus,
    pub clock: DateTime<Utc>,
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CaseSnapshot {
    pub id: CaseId,
    pub plan_id: String,
    pub status: CaseStatus,
    pub marking: Marking,
    pub clock: DateTime<Utc>,
    /// Per task instance: "pending" or the state of its latest work item.
    pub tasks: BTreeMap<String, String>,
    pub event_count: usize,
    pub work_items: Vec<WorkItem>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("unknown plan {0}")]
    UnknownPlan(String),
    #[error("plan is invalid: {}", .0.first().map(ToString::to_string).unwrap_or_default())]
    InvalidPlan(Vec<Violation>),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error("unknown case {0}")]
    UnknownCase(CaseId),
    #[error("unknown work item {0}")]
    UnknownItem(WorkItemId),
    #[error("unknown role {0}")]
    UnknownRole(String),
    #[error("work item {item} is {state}; cannot {action}")]
    IllegalTransition {
        item: WorkItemId,
        state: ItemState,
        action: Action,
    },
    #[error("actor {actor} does not play role {role}")]
    RoleMismatch { actor: String, role: String },
    #[error("work item {item} is held by {holder}, not {actor}")]
    ActorMismatch {
        item: WorkItemId,
        holder: String,
        actor: String,
    },
    #[error("work item {0} is no longer enabled")]
    StaleItem(WorkItemId),
    #[error("case {case} deadlocked in marking {marking}")]
    Deadlock { case: String, marking: Marking },
    #[error("case {case} did not complete within {steps} steps")]
    NonCompletion { case: String, steps: usize },
}

#[derive(Debug, Clone)]
pub struct LoadedPlan {
    pub plan: Plan,
    pub net: WorkflowNet,
}

impl LoadedPlan {
    pub fn new(plan: Plan) -> Result<Self, EngineError> {
        let violations = validate_plan(&plan);
        if !violations.is_empty() {
            return Err(EngineError::InvalidPlan(violations));
        }
        let net = plan_to_net(&plan)?;
        Ok(Self { plan, net })
    }

    fn role_of(&self, t: &Transition) -> String {
        t.task
            .as_deref()
            .and_then(|task| self.plan.task(task))
            .map(|task| task.role.clone())
            .unwrap_or_default()
    }
}

/// Owner of all plans, cases and work items. Callers sharing an engine
/// across threads wrap it in a lock, which serializes mutations per case.
#[derive(Debug, Default)]
pub struct Engine {
    plans: BTreeMap<String, LoadedPlan>,
    cases: BTreeMap<CaseId, Case>,
    items: BTreeMap<WorkItemId, WorkItem>,
    next_case: u64,
    next_item: u64,
}

impl Engine {
    pub fn new() -> Self {
        Self::default()
    }

    /// Validates, compiles and registers a plan under its id, replacing any
    /// earlier plan with that id.
    pub fn register_plan(&mut self, plan: Plan) -> Result<&LoadedPlan, EngineError> {
        let loaded = LoadedPlan::new(plan)?;
        let id = loaded.plan.id.clone();
        self.plans.insert(id.clone(), loaded);
        Ok(&self.plans[&id])
    }

    pub fn plan(&self, id: &str) -> Option<&LoadedPlan> {
        self.plans.get(id)
    }

    pub fn plans(&self) -> impl Iterator<Item = &LoadedPlan> {
        self.plans.values()
    }

    pub fn cases(&self) -> impl Iterator<Item = &Case> {
        self.cases.values()
    }

    pub fn case(&self, id: CaseId) -> Result<&Case, EngineError> {
        self.cases.get(&id).ok_or(EngineError::UnknownCase(id))
    }

    pub fn item(&self, id: WorkItemId) -> Result<&WorkItem, EngineError> {
        self.items.get(&id).ok_or(EngineError::UnknownItem(id))
    }

    pub fn items_of(&self, case: CaseId) -> impl Iterator<Item = &WorkItem> {
        self.items.values().filter(move |w| w.case_id == case)
    }

    pub fn create_case(&mut self, plan_id: &str) -> Result<CaseId, EngineError> {
        let loaded = self
            .plans
            .get(plan_id)
            .ok_or_else(|| EngineError::UnknownPlan(plan_id.to_string()))?;
        self.next_case += 1;
        let id = CaseId(self.next_case);
        let case = Case {
            id,
            plan_id: plan_id.to_string(),
            marking: loaded.net.initial_marking(),
            status: CaseStatus::Running,
            clock: base_epoch(),
            events: Vec::new(),
        };
        self.cases.insert(id, case);
        self.settle(id, None);
        Ok(id)
    }

    /// Open items of a role across all cases, oldest first.
    pub fn worklist(&self, role: &str) -> Result<Vec<WorkItem>, EngineError> {
        let known = self.plans.values().any(|p| p.plan.role(role).is_some());
        if !known {
            return Err(EngineError::UnknownRole(role.to_string()));
        }
        Ok(self
            .items
            .values()
            .filter(|w| w.role == role && w.state.is_open())
            .cloned()
            .collect())
    }

    pub fn act(&mut self, item_id: WorkItemId, action: Action, actor: &str) -> Result<WorkItem, EngineError> {
        let item = self.item(item_id)?.clone();
        let case = self.case(item.case_id)?;
        let loaded = &self.plans[&case.plan_id];
        let role = loaded
            .plan
            .role(&item.role)
            .ok_or_else(|| EngineError::UnknownRole(item.role.clone()))?;
        if item.state == ItemState::Withdrawn {
            return Err(EngineError::StaleItem(item_id));
        }
        let legal = matches!(
            (item.state, action),
            (ItemState::Offered, Action::Allocate)
                | (ItemState::Allocated, Action::Start)
                | (ItemState::Started, Action::Complete)
                | (ItemState::Offered, Action::Skip)
        );
        if !legal {
            return Err(EngineError::IllegalTransition {
                item: item_id,
                state: item.state,
                action,
            });
        }
        if !role.actors.iter().any(|a| a == actor) {
            return Err(EngineError::RoleMismatch {
                actor: actor.to_string(),
                role: item.role.clone(),
            });
        }
        if let Some(holder) = &item.actor {
            if holder != actor {
                return Err(EngineError::ActorMismatch {
                    item: item_id,
                    holder: holder.clone(),
                    actor: actor.to_string(),
                });
            }
        }

        match action {
            Action::Allocate => {
                let w = self.items.get_mut(&item_id).expect("checked");
                w.state = ItemState::Allocated;
                w.actor = Some(actor.to_string());
            }
            Action::Start => {
                self.items.get_mut(&item_id).expect("checked").state = ItemState::Started;
            }
            Action::Complete => self.complete(&item, actor)?,
            Action::Skip => self.skip(&item)?,
        }
        Ok(self.items[&item_id].clone())
    }

    fn complete(&mut self, item: &WorkItem, actor: &str) -> Result<(), EngineError> {
        let case = &self.cases[&item.case_id];
        let net = &self.plans[&case.plan_id].net;
        let path = offerable(net, &case.marking)
            .remove(&item.instance)
            .ok_or(EngineError::StaleItem(item.id))?;
        let mut m = case.marking.clone();
        for t in path.iter().chain([&item.instance]) {
            m = net.fire(&m, t).expect("lookahead path is enabled");
        }
        let case = self.cases.get_mut(&item.case_id).expect("checked");
        case.marking = m;
        let event = Event::complete(case.id.to_string(), item.label.clone(), case.clock).with_resource(actor);
        case.events.push(event);
        case.clock += Duration::seconds(STEP_SECONDS);
        self.items.get_mut(&item.id).expect("checked").state = ItemState::Completed;
        self.settle(item.case_id, None);
        Ok(())
    }

    fn skip(&mut self, item: &WorkItem) -> Result<(), EngineError> {
        let case = &self.cases[&item.case_id];
        let net = &self.plans[&case.plan_id].net;
        let bypass = net
            .transitions
            .values()
            .find(|t| t.bypass && t.task.as_deref() == Some(item.task.as_str()) && net.is_enabled(&case.marking, t))
            .map(|t| t.id.clone());
        let Some(bypass) = bypass else {
            return Err(EngineError::IllegalTransition {
                item: item.id,
                state: item.state,
                action: Action::Skip,
            });
        };
        let m = net.fire(&case.marking, &bypass).expect("enabled");
        self.cases.get_mut(&item.case_id).expect("checked").marking = m;
        self.settle(item.case_id, Some(item.task.clone()));
        Ok(())
    }

    /// Fires uncontested silent routing, then reconciles work items with
    /// what is offerable in the new marking.
    fn settle(&mut self, case_id: CaseId, skipped_task: Option<String>) {
        let case = self.cases.get_mut(&case_id).expect("known case");
        let loaded = &self.plans[&case.plan_id];
        let net = &loaded.net;
        case.marking = fire_uncontested(net, case.marking.clone());
        if case.marking == net.final_marking() {
            case.status = CaseStatus::Completed;
        }
        let reachable = offerable(net, &case.marking);

        let mut open: BTreeSet<String> = BTreeSet::new();
        for w in self.items.values_mut().filter(|w| w.case_id == case_id && w.state.is_open()) {
            if reachable.contains_key(&w.instance) {
                open.insert(w.instance.clone());
            } else if skipped_task.as_deref() == Some(w.task.as_str()) {
                w.state = ItemState::Skipped;
                w.actor = None;
            } else {
                w.state = ItemState::Withdrawn;
                w.actor = None;
            }
        }
        for instance in reachable.keys().filter(|i| !open.contains(*i)) {
            let t = &net.transitions[instance];
            self.next_item += 1;
            let id = WorkItemId(self.next_item);
            self.items.insert(
                id,
                WorkItem {
                    id,
                    case_id,
                    task: t.task.clone().unwrap_or_else(|| t.id.clone()),
                    instance: t.id.clone(),
                    label: t.label.clone().unwrap_or_else(|| t.id.clone()),
                    role: loaded.role_of(t),
                    state: ItemState::Offered,
                    actor: None,
                },
            );
        }
    }

    pub fn case_state(&self, id: CaseId) -> Result<CaseSnapshot, EngineError> {
        let case = self.case(id)?;
        let net = &self.plans[&case.plan_id].net;
        let mut tasks: BTreeMap<String, String> = net
            .visible_transitions()
            .map(|t| (t.id.clone(), "pending".to_string()))
            .collect();
        let work_items: Vec<WorkItem> = self.items_of(id).cloned().collect();
        for w in &work_items {
            tasks.insert(w.instance.clone(), w.state.to_string());
        }
        Ok(CaseSnapshot {
            id,
            plan_id: case.plan_id.clone(),
            status: case.status,
            marking: case.marking.clone(),
            clock: case.clock,
            tasks,
            event_count: case.events.len(),
            work_items,
        })
    }

    /// Event log of the given cases, in the order requested.
    pub fn log_of(&self, cases: &[CaseId]) -> Result<EventLog, EngineError> {
        let mut log = EventLog::new();
        for id in cases {
            let case = self.case(*id)?;
            let mut trace = Trace::new(id.to_string());
            trace.events = case.events.clone();
            log.push_trace(trace).map_err(|_| EngineError::UnknownCase(*id))?;
        }
        Ok(log)
    }
}

fn is_routing(t: &Transition) -> bool {
    t.is_silent() && !t.bypass
}

/// Fires silent routing transitions that share no input place with any
/// other enabled transition until none is left.
fn fire_uncontested(net: &WorkflowNet, mut m: Marking) -> Marking {
    for _ in 0..EAGER_LIMIT {
        let enabled: Vec<&Transition> = net
            .enabled_transitions(&m)
            .into_iter()
            .map(|id| &net.transitions[id])
            .collect();
        let pick = enabled.iter().find(|t| {
            is_routing(t)
                && !enabled
                    .iter()
                    .any(|u| u.id != t.id && !u.inputs.is_disjoint(&t.inputs))
        });
        match pick {
            Some(t) => m = net.fire(&m, &t.id).expect("enabled"),
            None => break,
        }
    }
    m
}

/// Visible transitions enabled in `m` or after silent routing, each with
/// the shortest routing prefix that enables it.
fn offerable(net: &WorkflowNet, m: &Marking) -> BTreeMap<String, Vec<String>> {
    let routing: Vec<&Transition> = net.transitions.values().filter(|t| is_routing(t)).collect();
    let mut found: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut seen = HashSet::from([m.clone()]);
    let mut queue = VecDeque::from([(m.clone(), Vec::<String>::new())]);
    while let Some((m, path)) = queue.pop_front() {
        for t in net.visible_transitions() {
            if net.is_enabled(&m, t) && !found.contains_key(&t.id) {
                found.insert(t.id.clone(), path.clone());
            }
        }
        for t in &routing {
            if !net.is_enabled(&m, t) || seen.len() >= LOOKAHEAD_LIMIT {
                continue;
            }
            let next = net.fire(&m, &t.id).expect("enabled");
            if seen.insert(next.clone()) {
                let mut p = path.clone();
                p.push(t.id.clone());
                queue.push_back((next, p));
            }
        }
    }
    found
}
