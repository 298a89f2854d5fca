use chrono::{DateTime, SecondsFormat, Utc};

use super::{Event, EventLog, LogError, Trace};

pub const CSV_HEADER: &str = "case_id,activity,resource,lifecycle,timestamp";

/// One row per event, grouped by case in trace order.
pub fn write_csv(log: &EventLog) -> String {
    let mut w = ::csv::WriterBuilder::new()
        .terminator(::csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(CSV_HEADER.split(','))
        .expect("writing to memory");
    for e in log.traces.iter().flat_map(|t| &t.events) {
        let ts = e.timestamp.to_rfc3339_opts(SecondsFormat::AutoSi, true);
        w.write_record([
            e.case_id.as_str(),
            e.activity.as_str(),
            e.resource.as_deref().unwrap_or(""),
            e.lifecycle.as_str(),
            ts.as_str(),
        ])
        .expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flushing to memory")).expect("csv output is utf-8")
}

pub fn read_csv(text: &str) -> Result<EventLog, LogError> {
    let mut r = ::csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = r
        .headers()
        .map_err(|e| LogError::MalformedRow {
            line: 1,
            message: e.to_string(),
        })?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != CSV_HEADER {
        return Err(LogError::Header {
            expected: CSV_HEADER.to_string(),
            found: header,
        });
    }

    let mut log = EventLog::new();
    for record in r.records() {
        let record = record.map_err(|e| LogError::MalformedRow {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let bad = |message: String| LogError::MalformedRow { line, message };
        if record.len() != 5 {
            return Err(bad(format!("expected 5 fields, found {}", record.len())));
        }
        let case_id = &record[0];
        let activity = &record[1];
        if case_id.is_empty() {
            return Err(bad("empty case_id".into()));
        }
        if activity.is_empty() {
            return Err(bad("empty activity".into()));
        }
        let timestamp = DateTime::parse_from_rfc3339(&record[4])
            .map_err(|e| bad(format!("timestamp `{}`: {e}", &record[4])))?
            .with_timezone(&Utc);
        let event = Event {
            case_id: case_id.to_string(),
            activity: activity.to_string(),
            resource: (!record[2].is_empty()).then(|| record[2].to_string()),
            lifecycle: if record[3].is_empty() {
                super::COMPLETE.to_string()
            } else {
                record[3].to_string()
            },
            timestamp,
        };
        match log.traces.iter_mut().find(|t| t.case_id == case_id) {
            Some(t) => t.events.push(event),
            None => {
                let mut t = Trace::new(case_id);
                t.events.push(event);
                log.traces.push(t);
            }
        }
    }
    for t in &mut log.traces {
        t.sort_events();
    }
    Ok(log)
}
