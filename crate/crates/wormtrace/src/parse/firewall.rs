//! Firewall connection logs: space-delimited
//! `date time action protocol src-ip dst-ip src-port dst-port` lines.

use chrono::NaiveDateTime;

use crate::model::{canonical_host, Attr, LogSource, NormalizedEvent};

use super::{data_lines, declared_host, scan_header, skip_or_abort, LogFile, ParseError, ParseMode, ParsedLog};

pub fn parse_firewall_log(path: &str, text: &str, mode: ParseMode) -> Result<ParsedLog, ParseError> {
    let header = scan_header(text);
    let kind = header.log_kind.clone().unwrap_or_default();
    if kind != LogSource::Firewall.as_str() {
        return Err(ParseError::UnknownLogKind { path: path.to_string(), kind });
    }
    let host = declared_host(path, &header)?;

    let mut events = Vec::new();
    let mut skipped = Vec::new();
    for (line_no, line) in data_lines(text) {
        match parse_line(line) {
            Ok(mut event) => {
                event.host = host.clone();
                event.seq = events.len() as u64;
                events.push(event);
            }
            Err(reason) => skip_or_abort(mode, &mut skipped, path, line_no, reason)?,
        }
    }
    Ok(ParsedLog {
        file: LogFile {
            path: path.to_string(),
            declared_kind: LogSource::Firewall,
            declared_host: Some(host),
        },
        events,
        skipped,
    })
}

fn parse_line(line: &str) -> Result<NormalizedEvent, String> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 8 {
        return Err(format!("expected 8 fields, found {}", fields.len()));
    }
    let timestamp = NaiveDateTime::parse_from_str(&format!("{} {}", fields[0], fields[1]), "%Y-%m-%d %H:%M:%S")
        .map_err(|_| format!("bad timestamp {:?}", format!("{} {}", fields[0], fields[1])))?;
    let src = canonical_host(fields[4], None).map_err(|e| e.to_string())?;
    let dst = canonical_host(fields[5], None).map_err(|e| e.to_string())?;
    let src_port = parse_port(fields[6])?;
    let dst_port = parse_port(fields[7])?;

    let mut event = NormalizedEvent {
        host: crate::model::HostId::sentinel(), // replaced by the caller
        source: LogSource::Firewall,
        timestamp,
        seq: 0,
        attrs: Default::default(),
    };
    event.attrs.insert(Attr::Action, fields[2].to_string());
    event.attrs.insert(Attr::Protocol, fields[3].to_string());
    event.attrs.insert(Attr::SrcIp, src.ip_string());
    event.attrs.insert(Attr::DstIp, dst.ip_string());
    event.attrs.insert(Attr::SrcPort, src_port);
    event.attrs.insert(Attr::DstPort, dst_port);
    Ok(event)
}

pub(crate) fn parse_port(s: &str) -> Result<String, String> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(format!("bad port {s:?}"));
    }
    s.parse::<u16>().map(|p| p.to_string()).map_err(|_| format!("port {s:?} out of range"))
}
