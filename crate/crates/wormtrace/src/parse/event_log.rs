//! Windows-style event logs (security, system, application): CSV lines of
//! `timestamp,event_id,image_file_name,event_message` with RFC 4180 quoting.

use chrono::NaiveDateTime;

use crate::model::{Attr, LogSource, NormalizedEvent};

use super::{
    data_lines, declared_host, scan_header, skip_or_abort, LogFile, ParseError, ParseMode,
    ParsedLog,
};

pub fn parse_event_log(path: &str, text: &str, mode: ParseMode) -> Result<ParsedLog, ParseError> {
    let header = scan_header(text);
    let kind = header.log_kind.clone().unwrap_or_default();
    let source = match LogSource::from_str(&kind) {
        Some(s @ (LogSource::Security | LogSource::System | LogSource::Application)) => s,
        _ => return Err(ParseError::UnknownLogKind { path: path.to_string(), kind }),
    };
    let host = declared_host(path, &header)?;

    let mut events = Vec::new();
    let mut skipped = Vec::new();
    // One csv record per file line. The format is line-oriented, so quoted
    // fields may hold commas and doubled quotes but never newlines; feeding
    // the reader a line at a time keeps diagnostics on real line numbers.
    for (line_no, line) in data_lines(text) {
        match parse_line(line, source) {
            Ok(mut event) => {
                event.host = host.clone();
                event.seq = events.len() as u64;
                events.push(event);
            }
            Err(reason) => skip_or_abort(mode, &mut skipped, path, line_no, reason)?,
        }
    }
    Ok(ParsedLog {
        file: LogFile { path: path.to_string(), declared_kind: source, declared_host: Some(host) },
        events,
        skipped,
    })
}

fn parse_line(line: &str, source: LogSource) -> Result<NormalizedEvent, String> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(line.as_bytes());
    let record = reader
        .records()
        .next()
        .ok_or_else(|| "empty record".to_string())?
        .map_err(|e| e.to_string())?;
    if record.len() != 4 {
        return Err(format!("expected 4 fields, found {}", record.len()));
    }
    let timestamp = NaiveDateTime::parse_from_str(&record[0], "%Y-%m-%dT%H:%M:%S")
        .map_err(|_| format!("bad timestamp {:?}", &record[0]))?;
    let event_id = &record[1];
    if event_id.is_empty() || !event_id.bytes().all(|b| b.is_ascii_digit()) {
        return Err(format!("bad event id {event_id:?}"));
    }
    let mut event = NormalizedEvent {
        host: crate::model::HostId::sentinel(), // replaced by the caller
        source,
        timestamp,
        seq: 0,
        attrs: Default::default(),
    };
    event.attrs.insert(Attr::EventId, event_id.trim_start_matches('0').to_string());
    if event.attr(Attr::EventId) == Some("") {
        event.attrs.insert(Attr::EventId, "0".to_string());
    }
    if !record[2].is_empty() {
        event.attrs.insert(Attr::ImageFileName, record[2].to_string());
    }
    if !record[3].is_empty() {
        event.attrs.insert(Attr::EventMessage, record[3].to_string());
    }
    Ok(event)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_new_process_event() {
        let text = "#Log: security\n#Host: Roslan 192.112.112.200\n2004-05-11T10:23:05,592,C:\\WINDOWS\\system32\\ftp.exe,\"A new process has been created\"\n";
        let parsed = parse_event_log("sec.log", text, ParseMode::Strict).unwrap();
        let e = &parsed.events[0];
        assert_eq!(e.source, LogSource::Security);
        assert_eq!(e.attr(Attr::EventId), Some("592"));
        assert_eq!(e.attr(Attr::ImageFileName), Some("C:\\WINDOWS\\system32\\ftp.exe"));
        assert_eq!(e.attr(Attr::EventMessage), Some("A new process has been created"));
    }

    #[test]
    fn empty_image_file_name_is_absent() {
        let text = "#Log: application\n#Host: Roslan 192.112.112.200\n2004-05-11T10:24:02,1015,,\"lsass.exe failed\"\n";
        let parsed = parse_event_log("app.log", text, ParseMode::Strict).unwrap();
        let e = &parsed.events[0];
        assert_eq!(e.attr(Attr::EventId), Some("1015"));
        assert_eq!(e.attr(Attr::ImageFileName), None);
        assert_eq!(e.attr(Attr::EventMessage), Some("lsass.exe failed"));
    }

    #[test]
    fn quoting_protects_commas_and_quotes() {
        let text = "#Log: system\n#Host: Roslan 192.112.112.200\n2004-05-11T10:24:01,1074,,\"shutdown, then \"\"restart\"\"\"\n";
        let parsed = parse_event_log("sys.log", text, ParseMode::Strict).unwrap();
        assert_eq!(
            parsed.events[0].attr(Attr::EventMessage),
            Some("shutdown, then \"restart\"")
        );
    }

    #[test]
    fn arity_and_timestamp_failures_name_their_line() {
        let text = "#Log: security\n#Host: Roslan 192.112.112.200\n# comment\ngarbage\n2004-05-11T10:23:05,592,,\"ok\"\nlater,592,,\"bad ts\"\n";
        let parsed = parse_event_log("sec.log", text, ParseMode::Lenient).unwrap();
        assert_eq!(parsed.events.len(), 1);
        let lines: Vec<u64> = parsed.skipped.iter().map(|d| d.line).collect();
        assert_eq!(lines, vec![4, 6]);
        let err = parse_event_log("sec.log", text, ParseMode::Strict).unwrap_err();
        assert!(matches!(err, ParseError::MalformedLine { line: 4, .. }));
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let text = "#Log: firewall\n#Host: Roslan 192.112.112.200\n";
        assert!(matches!(
            parse_event_log("x.log", text, ParseMode::Strict),
            Err(ParseError::UnknownLogKind { .. })
        ));
    }

    #[test]
    fn event_id_leading_zeros_normalize() {
        let text = "#Log: system\n#Host: R 10.0.0.1\n2004-05-11T10:24:01,0592,,\"m\"\n";
        let parsed = parse_event_log("sys.log", text, ParseMode::Strict).unwrap();
        assert_eq!(parsed.events[0].attr(Attr::EventId), Some("592"));
    }
}
