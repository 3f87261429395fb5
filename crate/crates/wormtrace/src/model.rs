//! Normalized event model shared by the parsers, the match engine and the
//! reports. Every log line, whatever its origin, becomes a [`NormalizedEvent`].

use std::collections::BTreeMap;
use std::fmt;
use std::net::Ipv4Addr;

use chrono::NaiveDateTime;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed IPv4 address {0:?}")]
pub struct MalformedIp(pub String);

/// Host identity. Equality, ordering and hashing consider only the address;
/// the name is display decoration picked up from log headers.
#[derive(Debug, Clone)]
pub struct HostId {
    ip: Ipv4Addr,
    name: Option<String>,
}

impl HostId {
    pub fn new(ip: Ipv4Addr, name: Option<String>) -> Self {
        HostId { ip, name }
    }

    /// Placeholder owner for events that no single host produced (IDS alerts).
    pub fn sentinel() -> Self {
        HostId { ip: Ipv4Addr::UNSPECIFIED, name: None }
    }

    pub fn is_sentinel(&self) -> bool {
        self.ip == Ipv4Addr::UNSPECIFIED
    }

    pub fn ip(&self) -> Ipv4Addr {
        self.ip
    }

    pub fn ip_string(&self) -> String {
        self.ip.to_string()
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }
}

impl PartialEq for HostId {
    fn eq(&self, other: &Self) -> bool {
        self.ip == other.ip
    }
}

impl Eq for HostId {}

impl PartialOrd for HostId {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HostId {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.ip.cmp(&other.ip)
    }
}

impl std::hash::Hash for HostId {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.ip.hash(state);
    }
}

impl fmt::Display for HostId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.ip)
    }
}

/// Parses a dotted-quad address, stripping octet leading zeros, and pairs it
/// with an optional display name. Idempotent on its own output.
pub fn canonical_host(ip: &str, name: Option<&str>) -> Result<HostId, MalformedIp> {
    let mut octets = [0u8; 4];
    let mut parts = 0;
    for part in ip.split('.') {
        if parts == 4 {
            return Err(MalformedIp(ip.to_string()));
        }
        if part.is_empty() || part.len() > 3 || !part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(MalformedIp(ip.to_string()));
        }
        let value: u16 = part.parse().map_err(|_| MalformedIp(ip.to_string()))?;
        if value > 255 {
            return Err(MalformedIp(ip.to_string()));
        }
        octets[parts] = value as u8;
        parts += 1;
    }
    if parts != 4 {
        return Err(MalformedIp(ip.to_string()));
    }
    Ok(HostId::new(octets.into(), name.map(str::to_string)))
}

/// Log kinds, declared in tiebreak order: events with equal timestamps sort
/// firewall first and IDS alerts last.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LogSource {
    Firewall,
    Security,
    System,
    Application,
    IdsAlert,
}

impl LogSource {
    pub fn rank(self) -> u8 {
        self as u8
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LogSource::Firewall => "firewall",
            LogSource::Security => "security",
            LogSource::System => "system",
            LogSource::Application => "application",
            LogSource::IdsAlert => "ids",
        }
    }

    pub fn from_str(s: &str) -> Option<Self> {
        Some(match s {
            "firewall" => LogSource::Firewall,
            "security" => LogSource::Security,
            "system" => LogSource::System,
            "application" => LogSource::Application,
            "ids" => LogSource::IdsAlert,
            _ => return None,
        })
    }
}

impl fmt::Display for LogSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The closed set of event attributes. Parsers only ever emit these, so a
/// typo in a ruleset cannot silently create an attribute nothing produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Attr {
    Action,
    Protocol,
    SrcIp,
    DstIp,
    SrcPort,
    DstPort,
    EventId,
    ImageFileName,
    EventMessage,
    AlertMessage,
}

impl Attr {
    pub fn as_str(self) -> &'static str {
        match self {
            Attr::Action => "action",
            Attr::Protocol => "protocol",
            Attr::SrcIp => "src_ip",
            Attr::DstIp => "dst_ip",
            Attr::SrcPort => "src_port",
            Attr::DstPort => "dst_port",
            Attr::EventId => "event_id",
            Attr::ImageFileName => "image_file_name",
            Attr::EventMessage => "event_message",
            Attr::AlertMessage => "alert_message",
        }
    }

    pub fn from_str(s: &str) -> Option<Self> {
        Some(match s {
            "action" => Attr::Action,
            "protocol" => Attr::Protocol,
            "src_ip" => Attr::SrcIp,
            "dst_ip" => Attr::DstIp,
            "src_port" => Attr::SrcPort,
            "dst_port" => Attr::DstPort,
            "event_id" => Attr::EventId,
            "image_file_name" => Attr::ImageFileName,
            "event_message" => Attr::EventMessage,
            "alert_message" => Attr::AlertMessage,
            _ => return None,
        })
    }

    pub fn is_port(self) -> bool {
        matches!(self, Attr::SrcPort | Attr::DstPort)
    }
}

impl fmt::Display for Attr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One log line in normalized form. `seq` is the 0-based position among the
/// events parsed from the same file and breaks timestamp ties, so seconds
/// precision never reorders lines within a file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizedEvent {
    pub host: HostId,
    pub source: LogSource,
    pub timestamp: NaiveDateTime,
    pub seq: u64,
    pub attrs: BTreeMap<Attr, String>,
}

impl NormalizedEvent {
    pub fn attr(&self, attr: Attr) -> Option<&str> {
        self.attrs.get(&attr).map(String::as_str)
    }

    pub fn order_key(&self) -> EventOrderKey {
        EventOrderKey {
            timestamp: self.timestamp,
            source_rank: self.source.rank(),
            seq: self.seq,
            host: self.host.ip(),
        }
    }
}

/// Total order over corpus events: timestamp, then source rank, then file
/// sequence, then owner address so distinct files cannot tie. Sorting any
/// permutation of a corpus yields one unique sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct EventOrderKey {
    timestamp: NaiveDateTime,
    source_rank: u8,
    seq: u64,
    host: Ipv4Addr,
}

pub fn sort_events(events: &mut [NormalizedEvent]) {
    events.sort_by_key(NormalizedEvent::order_key);
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn ts(s: &str) -> NaiveDateTime {
        NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S").unwrap()
    }

    fn ev(ip: &str, source: LogSource, t: &str, seq: u64) -> NormalizedEvent {
        NormalizedEvent {
            host: canonical_host(ip, None).unwrap(),
            source,
            timestamp: ts(t),
            seq,
            attrs: BTreeMap::new(),
        }
    }

    #[test]
    fn canonicalizes_leading_zeros() {
        let h = canonical_host("192.112.112.001", Some("Roslan")).unwrap();
        assert_eq!(h.ip_string(), "192.112.112.1");
        assert_eq!(h.name(), Some("Roslan"));
        let again = canonical_host(&h.ip_string(), h.name()).unwrap();
        assert_eq!(again.ip_string(), h.ip_string());
    }

    #[test]
    fn rejects_junk_addresses() {
        for bad in ["not-an-ip", "1.2.3", "1.2.3.4.5", "256.1.1.1", "1..2.3", "1.2.3.+4", "1.2.3.1000"] {
            assert!(canonical_host(bad, None).is_err(), "{bad} accepted");
        }
    }

    #[test]
    fn name_does_not_affect_identity() {
        let a = canonical_host("192.112.111.104", Some("Selamat")).unwrap();
        let b = canonical_host("192.112.111.104", None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.cmp(&b), std::cmp::Ordering::Equal);
    }

    #[test]
    fn source_rank_breaks_timestamp_ties() {
        let fw = ev("10.0.0.1", LogSource::Firewall, "2004-05-11T10:23:01", 9);
        let ids = ev("0.0.0.0", LogSource::IdsAlert, "2004-05-11T10:23:01", 0);
        assert!(fw.order_key() < ids.order_key());
    }

    #[test]
    fn seq_breaks_full_ties() {
        let a = ev("10.0.0.1", LogSource::Security, "2004-05-11T10:23:01", 3);
        let b = ev("10.0.0.1", LogSource::Security, "2004-05-11T10:23:01", 7);
        assert!(a.order_key() < b.order_key());
    }

    #[test]
    fn timestamp_dominates_source_rank() {
        let ids = ev("0.0.0.0", LogSource::IdsAlert, "2004-05-11T10:23:01", 5);
        let fw = ev("10.0.0.1", LogSource::Firewall, "2004-05-11T10:23:02", 0);
        assert!(ids.order_key() < fw.order_key());
    }

    #[test]
    fn sorting_any_permutation_is_stable() {
        let mut events = Vec::new();
        for (i, ip) in ["10.0.0.2", "10.0.0.1", "10.0.0.3"].iter().enumerate() {
            for seq in 0..4u64 {
                let d = NaiveDate::from_ymd_opt(2004, 5, 11).unwrap();
                events.push(NormalizedEvent {
                    host: canonical_host(ip, None).unwrap(),
                    source: if seq % 2 == 0 { LogSource::Firewall } else { LogSource::System },
                    timestamp: d.and_hms_opt(10, 23, (seq % 3) as u32).unwrap(),
                    seq,
                    attrs: BTreeMap::new(),
                });
                let _ = i;
            }
        }
        let mut sorted = events.clone();
        sort_events(&mut sorted);
        let mut reversed: Vec<_> = events.iter().rev().cloned().collect();
        sort_events(&mut reversed);
        let mut rotated = events.clone();
        rotated.rotate_left(5);
        sort_events(&mut rotated);
        assert_eq!(sorted, reversed);
        assert_eq!(sorted, rotated);
    }
}
