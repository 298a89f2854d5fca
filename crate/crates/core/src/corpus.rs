//! The Ho Chi Minh City tsunami response plan and its two-case fixture log.
//!
//! Response phase only. Seven role groups, twenty-four tasks; the police and
//! military variants of evacuation, transfer, damage survey and fishermen
//! search are coupled so that at least one of the two forces performs each.

use chrono::Duration;

use crate::eventlog::{base_epoch, Event, EventLog, Trace};
use crate::plan::{CoupledChoice, Flow, Gateway, GatewayKind, Plan, RoleDef, TaskDef};

pub const PLAN_ID: &str = "hcmc-tsunami";

/// Seconds between consecutive events of a case on the synthetic clock.
pub const STEP_SECONDS: i64 = 60;

/// The plan document shipped with the repository.
pub const PLAN_JSON: &str = include_str!("../data/hcmc-tsunami.json");

pub const ROLES: [(&str, &str, &[&str]); 7] = [
    ("A1", "Institute of Geophysics", &["igp-duty-officer"]),
    ("A2", "Local administration", &["city-command-center", "district-committee"]),
    ("A3", "Military", &["border-guard", "city-high-command"]),
    ("A4", "Police", &["city-police", "fire-police"]),
    ("A5", "Local civil defense forces", &["civil-defense", "young-volunteers"]),
    ("A6", "Communication unit", &["htv-station", "voh-radio"]),
    ("A7", "Health and Red Cross organizations", &["health-department", "red-cross"]),
];

pub const TASKS: [(&str, &str, &str); 24] = [
    ("T1", "Detect tsunami risk", "A1"),
    ("T2", "Inform tsunami start", "A1"),
    ("T3", "Receive tsunami start", "A2"),
    ("T4", "Fire the flares", "A2"),
    ("T5", "Notify functional units to start", "A2"),
    ("T6", "Inform by portable speakers", "A5"),
    ("T7", "Broadcast over the media", "A6"),
    ("T8", "Evacuate people", "A3"),
    ("T8'", "Evacuate people", "A4"),
    ("T9", "Transfer injuries to safe places", "A3"),
    ("T9'", "Transfer injuries to safe places", "A4"),
    ("T10", "Inform, guide the fisherman", "A3"),
    ("T11", "Protect the property", "A4"),
    ("T12", "Perform the first aid", "A7"),
    ("T13", "Call ambulance", "A7"),
    ("T14", "Detect tsunami end", "A1"),
    ("T15", "Inform tsunami end", "A1"),
    ("T16", "Receive tsunami end", "A2"),
    ("T17", "Notify functional units to end", "A2"),
    ("T18", "Identify damages", "A3"),
    ("T18'", "Identify damages", "A4"),
    ("T19", "Search distress fishermen", "A3"),
    ("T19'", "Search distress fishermen", "A4"),
    ("T20", "Close crisis response", "A2"),
];

pub const FIXTURE_CASE_1: [&str; 24] = [
    "T1", "T2", "T3", "T4", "T5", "T6", "T7", "T8", "T9", "T10", "T8'", "T11", "T9'", "T12", "T13",
    "T14", "T15", "T16", "T17", "T18", "T18'", "T19", "T19'", "T20",
];

pub const FIXTURE_CASE_2: [&str; 19] = [
    "T1", "T2", "T3", "T5", "T4", "T7", "T8", "T6", "T10", "T9", "T11", "T12", "T14", "T15", "T16",
    "T17", "T19", "T18'", "T20",
];

const GATEWAYS: [(&str, GatewayKind); 8] = [
    ("G-alert", GatewayKind::AndSplit),
    ("G-units", GatewayKind::AndSplit),
    ("G-military", GatewayKind::AndSplit),
    ("G-military-done", GatewayKind::AndJoin),
    ("G-police", GatewayKind::AndSplit),
    ("G-police-done", GatewayKind::AndJoin),
    ("G-response-done", GatewayKind::AndJoin),
    ("G-aftermath", GatewayKind::AndSplit),
];

const AFTERMATH_DONE: (&str, GatewayKind) = ("G-aftermath-done", GatewayKind::AndJoin);

const FLOWS: [(&str, &str); 39] = [
    ("T1", "T2"),
    ("T2", "T3"),
    ("T3", "G-alert"),
    ("G-alert", "T4"),
    ("G-alert", "T5"),
    ("T5", "G-units"),
    ("G-units", "T6"),
    ("G-units", "T7"),
    ("G-units", "G-military"),
    ("G-units", "G-police"),
    ("G-units", "T12"),
    ("G-military", "T8"),
    ("G-military", "T9"),
    ("G-military", "T10"),
    ("T8", "G-military-done"),
    ("T9", "G-military-done"),
    ("T10", "G-military-done"),
    ("G-police", "T8'"),
    ("G-police", "T9'"),
    ("G-police", "T11"),
    ("T8'", "G-police-done"),
    ("T9'", "G-police-done"),
    ("T11", "G-police-done"),
    ("T12", "T13"),
    ("T4", "G-response-done"),
    ("T6", "G-response-done"),
    ("T7", "G-response-done"),
    ("G-military-done", "G-response-done"),
    ("G-police-done", "G-response-done"),
    ("T13", "G-response-done"),
    ("G-response-done", "T14"),
    ("T14", "T15"),
    ("T15", "T16"),
    ("T16", "T17"),
    ("T17", "G-aftermath"),
    ("G-aftermath", "T18"),
    ("G-aftermath", "T18'"),
    ("G-aftermath", "T19"),
    ("G-aftermath", "T19'"),
];

const LATE_FLOWS: [(&str, &str); 5] = [
    ("T18", "G-aftermath-done"),
    ("T18'", "G-aftermath-done"),
    ("T19", "G-aftermath-done"),
    ("T19'", "G-aftermath-done"),
    ("G-aftermath-done", "T20"),
];

const COUPLED: [(&str, &str, &str, [&str; 2]); 4] = [
    ("X-evacuate", "G-units", "G-response-done", ["T8", "T8'"]),
    ("X-transfer", "G-units", "G-response-done", ["T9", "T9'"]),
    ("X-damages", "G-aftermath", "G-aftermath-done", ["T18", "T18'"]),
    ("X-fishermen", "G-aftermath", "G-aftermath-done", ["T19", "T19'"]),
];

pub fn builtin_plan() -> Plan {
    let roles = ROLES
        .iter()
        .map(|(id, name, actors)| RoleDef {
            id: id.to_string(),
            name: name.to_string(),
            actors: actors.iter().map(|a| a.to_string()).collect(),
        })
        .collect();
    let tasks = TASKS
        .iter()
        .map(|(id, label, role)| {
            let t = TaskDef::new(*id, *label, *role);
            if *id == "T13" {
                t.optional()
            } else {
                t
            }
        })
        .collect();
    let gateways = GATEWAYS
        .iter()
        .chain([&AFTERMATH_DONE])
        .map(|(id, kind)| Gateway::new(*id, *kind))
        .collect();
    let flows = FLOWS
        .iter()
        .chain(LATE_FLOWS.iter())
        .map(|(a, b)| Flow::new(*a, *b))
        .collect();
    let coupled_choices = COUPLED
        .iter()
        .map(|(id, split, join, tasks)| CoupledChoice {
            id: id.to_string(),
            split: split.to_string(),
            join: join.to_string(),
            tasks: tasks.iter().map(|t| t.to_string()).collect(),
        })
        .collect();
    Plan {
        id: PLAN_ID.to_string(),
        roles,
        tasks,
        gateways,
        flows,
        message_flows: vec![Flow::new("T2", "T3"), Flow::new("T15", "T16")],
        coupled_choices,
    }
}

/// The two recorded cases, one event per minute from the base epoch, with
/// each event's resource set to the role performing the task.
pub fn fixture_log() -> EventLog {
    let role_of = |a: &str| {
        TASKS
            .iter()
            .find(|(id, _, _)| *id == a)
            .map(|(_, _, role)| *role)
            .expect("fixture activities are corpus tasks")
    };
    let traces = [("1", &FIXTURE_CASE_1[..]), ("2", &FIXTURE_CASE_2[..])]
        .into_iter()
        .map(|(case, acts)| {
            let mut t = Trace::new(case);
            for (k, a) in acts.iter().enumerate() {
                let ts = base_epoch() + Duration::seconds(STEP_SECONDS * k as i64);
                t.events.push(Event::complete(case, *a, ts).with_resource(role_of(a)));
            }
            t
        })
        .collect();
    EventLog::from_traces(traces).expect("fixture case ids are distinct")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::{parse_plan, validate_plan};

    #[test]
    fn seven_roles_twenty_four_tasks() {
        let plan = builtin_plan();
        assert_eq!(plan.roles.len(), 7);
        assert_eq!(plan.tasks.len(), 24);
    }

    #[test]
    fn builtin_plan_validates() {
        assert_eq!(validate_plan(&builtin_plan()), vec![]);
    }

    #[test]
    fn shipped_json_matches_constant() {
        assert_eq!(parse_plan(PLAN_JSON).unwrap(), builtin_plan());
    }

    #[test]
    fn fixture_shape() {
        let log = fixture_log();
        assert_eq!(log.traces.len(), 2);
        assert_eq!(log.traces[0].events.len(), 24);
        assert_eq!(log.traces[1].events.len(), 19);
        assert_eq!(log.event_count(), 43);
        let e = &log.traces[0].events[10];
        assert_eq!((e.activity.as_str(), e.resource.as_deref()), ("T8'", Some("A4")));
        assert_eq!(log.traces[1].events[3].activity, "T5");
        assert_eq!(log.traces[1].events[4].activity, "T4");
    }

    #[test]
    fn fixture_and_plan_share_activities() {
        let plan_tasks: std::collections::BTreeSet<String> =
            builtin_plan().tasks.iter().map(|t| t.id.clone()).collect();
        assert_eq!(fixture_log().activities(), plan_tasks);
    }
}
