//! The XES subset used here: log/trace/event elements carrying `string`
//! and `date` attributes from the concept, org, lifecycle and time
//! extensions. Other attribute types are read and ignored.

use std::fmt::Write as _;

use chrono::{DateTime, SecondsFormat, Utc};
use quick_xml::escape::escape;
use quick_xml::events::{BytesStart, Event as XmlEvent};
use quick_xml::Reader;

use super::{Event, EventLog, LogError, Trace, COMPLETE};

const EXTENSIONS: [(&str, &str); 4] = [
    ("Concept", "concept"),
    ("Organizational", "org"),
    ("Lifecycle", "lifecycle"),
    ("Time", "time"),
];

pub fn write_xes(log: &EventLog) -> String {
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    s.push_str("<log xes.version=\"1.0\" xes.features=\"\" xmlns=\"http://www.xes-standard.org/\">\n");
    for (name, prefix) in EXTENSIONS {
        let _ = writeln!(
            s,
            "  <extension name=\"{name}\" prefix=\"{prefix}\" uri=\"http://www.xes-standard.org/{prefix}.xesext\"/>"
        );
    }
    for (k, v) in &log.attributes {
        string_attr(&mut s, 1, k, v);
    }
    for t in &log.traces {
        s.push_str("  <trace>\n");
        string_attr(&mut s, 2, "concept:name", &t.case_id);
        for e in &t.events {
            s.push_str("    <event>\n");
            string_attr(&mut s, 3, "concept:name", &e.activity);
            if let Some(r) = &e.resource {
                string_attr(&mut s, 3, "org:resource", r);
            }
            string_attr(&mut s, 3, "lifecycle:transition", &e.lifecycle);
            let _ = writeln!(
                s,
                "      <date key=\"time:timestamp\" value=\"{}\"/>",
                e.timestamp.to_rfc3339_opts(SecondsFormat::Millis, true)
            );
            s.push_str("    </event>\n");
        }
        s.push_str("  </trace>\n");
    }
    s.push_str("</log>\n");
    s
}

fn string_attr(s: &mut String, depth: usize, key: &str, value: &str) {
    let _ = writeln!(
        s,
        "{}<string key=\"{}\" value=\"{}\"/>",
        "  ".repeat(depth),
        escape(key),
        escape(value)
    );
}

#[derive(Default)]
struct PendingEvent {
    activity: Option<String>,
    resource: Option<String>,
    lifecycle: Option<String>,
    timestamp: Option<DateTime<Utc>>,
}

struct PendingTrace {
    case_id: Option<String>,
    events: Vec<PendingEvent>,
}

pub fn read_xes(text: &str) -> Result<EventLog, LogError> {
    let mut reader = Reader::from_str(text);
    reader.config_mut().trim_text(true);

    let mut log = EventLog::new();
    let mut saw_log = false;
    let mut trace: Option<PendingTrace> = None;
    let mut event: Option<PendingEvent> = None;
    // Depth of attribute elements currently open; nested attributes and
    // anything under <global> are not part of the subset.
    let mut attr_depth = 0usize;
    let mut in_global = false;

    loop {
        let ev = reader
            .read_event()
            .map_err(|e| LogError::Xml(format!("at byte {}: {e}", reader.error_position())))?;
        match ev {
            XmlEvent::Start(ref e) | XmlEvent::Empty(ref e) => {
                let empty = matches!(ev, XmlEvent::Empty(_));
                let name = e.name();
                match name.as_ref() {
                    b"log" => saw_log = true,
                    b"global" => in_global = !empty,
                    b"trace" => {
                        trace = Some(PendingTrace {
                            case_id: None,
                            events: Vec::new(),
                        });
                        if empty {
                            finish_trace(&mut log, trace.take())?;
                        }
                    }
                    b"event" => {
                        event = Some(PendingEvent::default());
                        if empty {
                            finish_event(&mut trace, event.take())?;
                        }
                    }
                    b"string" | b"date" | b"int" | b"float" | b"boolean" | b"id" | b"list" | b"container" => {
                        if attr_depth == 0 && !in_global {
                            let (key, value) = key_value(e)?;
                            apply_attribute(&mut log, &mut trace, &mut event, name.as_ref(), key, value)?;
                        }
                        if !empty {
                            attr_depth += 1;
                        }
                    }
                    _ => {}
                }
            }
            XmlEvent::End(ref e) => match e.name().as_ref() {
                b"global" => in_global = false,
                b"event" => finish_event(&mut trace, event.take())?,
                b"trace" => finish_trace(&mut log, trace.take())?,
                b"string" | b"date" | b"int" | b"float" | b"boolean" | b"id" | b"list" | b"container" => {
                    attr_depth = attr_depth.saturating_sub(1);
                }
                _ => {}
            },
            XmlEvent::Eof => break,
            _ => {}
        }
    }
    if !saw_log {
        return Err(LogError::Xml("no <log> element".into()));
    }
    Ok(log)
}

fn key_value(e: &BytesStart<'_>) -> Result<(String, Option<String>), LogError> {
    let mut key = None;
    let mut value = None;
    for a in e.attributes() {
        let a = a.map_err(|err| LogError::Xml(err.to_string()))?;
        let v = a
            .unescape_value()
            .map_err(|err| LogError::Xml(err.to_string()))?
            .into_owned();
        match a.key.as_ref() {
            b"key" => key = Some(v),
            b"value" => value = Some(v),
            _ => {}
        }
    }
    let key = key.ok_or_else(|| LogError::MissingAttribute {
        element: String::from_utf8_lossy(e.name().as_ref()).into_owned(),
        key: "key".into(),
    })?;
    Ok((key, value))
}

fn apply_attribute(
    log: &mut EventLog,
    trace: &mut Option<PendingTrace>,
    event: &mut Option<PendingEvent>,
    kind: &[u8],
    key: String,
    value: Option<String>,
) -> Result<(), LogError> {
    let Some(value) = value else {
        return Ok(());
    };
    if let Some(ev) = event.as_mut() {
        match (kind, key.as_str()) {
            (b"string", "concept:name") => ev.activity = Some(value),
            (b"string", "org:resource") => ev.resource = Some(value),
            (b"string", "lifecycle:transition") => ev.lifecycle = Some(value),
            (b"date", "time:timestamp") => {
                let ts = DateTime::parse_from_rfc3339(&value)
                    .map_err(|e| LogError::Xml(format!("bad time:timestamp `{value}`: {e}")))?;
                ev.timestamp = Some(ts.with_timezone(&Utc));
            }
            _ => {}
        }
    } else if let Some(tr) = trace.as_mut() {
        if kind == b"string" && key == "concept:name" {
            tr.case_id = Some(value);
        }
    } else if kind == b"string" {
        log.attributes.insert(key, value);
    }
    Ok(())
}

fn finish_event(trace: &mut Option<PendingTrace>, event: Option<PendingEvent>) -> Result<(), LogError> {
    let (Some(tr), Some(ev)) = (trace.as_mut(), event) else {
        return Ok(());
    };
    tr.events.push(ev);
    Ok(())
}

fn finish_trace(log: &mut EventLog, trace: Option<PendingTrace>) -> Result<(), LogError> {
    let Some(tr) = trace else {
        return Ok(());
    };
    let case_id = tr.case_id.ok_or_else(|| LogError::MissingAttribute {
        element: "trace".into(),
        key: "concept:name".into(),
    })?;
    let mut out = Trace::new(case_id.clone());
    for ev in tr.events {
        let activity = ev.activity.ok_or_else(|| LogError::MissingAttribute {
            element: format!("event in trace {case_id}"),
            key: "concept:name".into(),
        })?;
        let timestamp = ev.timestamp.ok_or_else(|| LogError::MissingAttribute {
            element: format!("event {activity} in trace {case_id}"),
            key: "time:timestamp".into(),
        })?;
        out.events.push(Event {
            case_id: case_id.clone(),
            activity,
            resource: ev.resource,
            lifecycle: ev.lifecycle.unwrap_or_else(|| COMPLETE.to_string()),
            timestamp,
        });
    }
    out.sort_events();
    log.push_trace(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eventlog::base_epoch;

    #[test]
    fn empty_log_is_a_skeleton() {
        let text = write_xes(&EventLog::new());
        assert!(text.contains("<log ") && text.contains("</log>"));
        assert!(!text.contains("<trace>"));
        assert_eq!(read_xes(&text).unwrap(), EventLog::new());
    }

    #[test]
    fn one_event_round_trip() {
        let mut t = Trace::new("case <1>");
        t.events.push(Event::complete("case <1>", "T8'", base_epoch()).with_resource("A&4"));
        let mut log = EventLog::from_traces(vec![t]).unwrap();
        log.attributes.insert("source".into(), "drill".into());
        assert_eq!(read_xes(&write_xes(&log)).unwrap(), log);
    }

    #[test]
    fn missing_activity_name_is_an_error() {
        let text = r#"<log><trace><string key="concept:name" value="1"/>
            <event><date key="time:timestamp" value="2012-01-01T00:00:00Z"/></event>
            </trace></log>"#;
        assert!(matches!(
            read_xes(text),
            Err(LogError::MissingAttribute { key, .. }) if key == "concept:name"
        ));
    }

    #[test]
    fn malformed_xml_is_an_error() {
        assert!(matches!(read_xes("<log><trace></log>"), Err(LogError::Xml(_))));
    }

    #[test]
    fn foreign_attributes_are_ignored() {
        let text = r#"<?xml version="1.0"?>
            <log>
              <global scope="event"><string key="concept:name" value="UNKNOWN"/></global>
              <trace>
                <string key="concept:name" value="7"/>
                <event>
                  <string key="concept:name" value="a"/>
                  <float key="cost" value="1.5"/>
                  <date key="time:timestamp" value="2012-01-01T00:01:00.000+00:00"/>
                </event>
              </trace>
            </log>"#;
        let log = read_xes(text).unwrap();
        assert_eq!(log.traces[0].case_id, "7");
        assert_eq!(log.traces[0].events[0].activity, "a");
        assert_eq!(log.traces[0].events[0].lifecycle, "complete");
        assert!(log.attributes.is_empty());
    }
}
