//! IDS fast-alert logs. Alert lines carry no year, so the file header must
//! supply one (`#Year:`), and no single host owns the file, so a `#Host:`
//! header is rejected and events get the sentinel owner.

use std::sync::LazyLock;

use chrono::NaiveDate;
use regex::Regex;

use crate::model::{canonical_host, Attr, HostId, LogSource, NormalizedEvent};

use super::{data_lines, scan_header, skip_or_abort, LogFile, ParseError, ParseMode, ParsedLog};

use super::firewall::parse_port;

static ALERT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"^(\d{2})/(\d{2})-(\d{2}):(\d{2}):(\d{2})\.(\d{6}) \[\*\*\] \[\d+:\d+:\d+\] (.*?) \[\*\*\] \[Priority: \d+\] \{(\w+)\} (\S+):(\d+) -> (\S+):(\d+)$",
    )
    .expect("alert regex compiles")
});

pub fn parse_ids_alert_log(path: &str, text: &str, mode: ParseMode) -> Result<ParsedLog, ParseError> {
    let header = scan_header(text);
    let kind = header.log_kind.clone().unwrap_or_default();
    if kind != LogSource::IdsAlert.as_str() {
        return Err(ParseError::UnknownLogKind { path: path.to_string(), kind });
    }
    if header.host.is_some() {
        return Err(ParseError::UnexpectedHeader { path: path.to_string(), directive: "#Host" });
    }
    let year: i32 = header
        .year
        .as_deref()
        .and_then(|y| y.parse().ok())
        .filter(|y| (1970..=9999).contains(y))
        .ok_or(ParseError::MissingHeader { path: path.to_string(), directive: "#Year" })?;

    let mut events = Vec::new();
    let mut skipped = Vec::new();
    for (line_no, line) in data_lines(text) {
        match parse_line(line, year) {
            Ok(mut event) => {
                event.seq = events.len() as u64;
                events.push(event);
            }
            Err(reason) => skip_or_abort(mode, &mut skipped, path, line_no, reason)?,
        }
    }
    Ok(ParsedLog {
        file: LogFile { path: path.to_string(), declared_kind: LogSource::IdsAlert, declared_host: None },
        events,
        skipped,
    })
}

fn parse_line(line: &str, year: i32) -> Result<NormalizedEvent, String> {
    let caps = ALERT.captures(line).ok_or_else(|| "unrecognized alert line".to_string())?;
    let num = |i: usize| caps[i].parse::<u32>().unwrap();
    // Sub-second precision is dropped: the event model orders at seconds.
    let timestamp = NaiveDate::from_ymd_opt(year, num(1), num(2))
        .and_then(|d| d.and_hms_opt(num(3), num(4), num(5)))
        .ok_or_else(|| format!("bad timestamp {}/{}-{}:{}:{}", &caps[1], &caps[2], &caps[3], &caps[4], &caps[5]))?;
    let src = canonical_host(&caps[9], None).map_err(|e| e.to_string())?;
    let dst = canonical_host(&caps[11], None).map_err(|e| e.to_string())?;
    let src_port = parse_port(&caps[10])?;
    let dst_port = parse_port(&caps[12])?;

    let mut event = NormalizedEvent {
        host: HostId::sentinel(),
        source: LogSource::IdsAlert,
        timestamp,
        seq: 0,
        attrs: Default::default(),
    };
    event.attrs.insert(Attr::AlertMessage, caps[7].to_string());
    event.attrs.insert(Attr::Protocol, caps[8].to_string());
    event.attrs.insert(Attr::SrcIp, src.ip_string());
    event.attrs.insert(Attr::DstIp, dst.ip_string());
    event.attrs.insert(Attr::SrcPort, src_port);
    event.attrs.insert(Attr::DstPort, dst_port);
    Ok(event)
}
