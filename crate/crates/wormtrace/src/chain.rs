//! Attack-chain reconstruction: who attacked whom, in what order, and how
//! far each host sits from the origin of the outbreak.
//!
//! Edges come from evidence witnesses that name both endpoints: host-level
//! firewall hits in the four exploit-chain categories, and IDS alerts whose
//! pattern attributes the victim (binds dst_ip). An alert that only
//! attributes the source (e.g. a scan alarm) names no victim and creates no
//! edge. Compromise levels are graph distance over complete edges from the
//! origin attackers, with timestamps used only to order traversal.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use chrono::NaiveDateTime;

use crate::classify::{ExploitStatus, HostClassification, Role};
use crate::model::{canonical_host, Attr, HostId, LogSource, NormalizedEvent};
use crate::rules::{EvidenceMatrix, HostBinding, PatternLevel, TraceCategory};

/// One directed attack between two hosts, merged over every witness.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackEdge {
    pub src: HostId,
    pub dst: HostId,
    /// A worm-body transfer was witnessed on either side.
    pub complete: bool,
    pub first_seen: NaiveDateTime,
    /// Indices into the corpus event list, ascending and deduplicated.
    pub witnesses: Vec<usize>,
}

/// Distance from the outbreak origin, or LEAF for targeted-but-uncompromised.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainLevel {
    Ranked(u32),
    Leaf,
}

impl fmt::Display for ChainLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChainLevel::Ranked(n) => write!(f, "{n}"),
            ChainLevel::Leaf => write!(f, "LEAF"),
        }
    }
}

/// Ranked levels serialize as numbers, LEAF as the string "LEAF".
impl serde::Serialize for ChainLevel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ChainLevel::Ranked(n) => s.serialize_u32(*n),
            ChainLevel::Leaf => s.serialize_str("LEAF"),
        }
    }
}

/// A host's place in the chain. `role` is None for hosts that appear only as
/// edge endpoints without evidence of their own.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainNode {
    pub role: Option<Role>,
    pub level: Option<ChainLevel>,
}

/// Structural problems worth reporting without failing the analysis: honest
/// worm traffic never produces them, damaged or partial logs can.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChainDiagnostic {
    /// Compromised (or transfer-witnessed) host with no path from any origin.
    Orphan { host: HostId },
    /// Complete edge that closes a cycle in the infection graph.
    BackEdge { src: HostId, dst: HostId },
    /// Complete edge seen before its source's own earliest infection.
    TemporalAnomaly { src: HostId, dst: HostId },
    /// Complete edge into a host classified as an origin attacker.
    EdgeIntoOrigin { src: HostId, dst: HostId },
    /// Complete edge into a host whose own evidence shows no complete exploit.
    EdgeIntoUncompromised { src: HostId, dst: HostId },
}

impl fmt::Display for ChainDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChainDiagnostic::Orphan { host } => {
                write!(f, "orphan: {} is compromised but unreachable from any origin", host.ip_string())
            }
            ChainDiagnostic::BackEdge { src, dst } => {
                write!(f, "cycle: complete edge {} -> {} closes a loop", src.ip_string(), dst.ip_string())
            }
            ChainDiagnostic::TemporalAnomaly { src, dst } => write!(
                f,
                "temporal anomaly: edge {} -> {} first seen before {} was itself infected",
                src.ip_string(),
                dst.ip_string(),
                src.ip_string()
            ),
            ChainDiagnostic::EdgeIntoOrigin { src, dst } => write!(
                f,
                "complete edge {} -> {} targets an origin attacker",
                src.ip_string(),
                dst.ip_string()
            ),
            ChainDiagnostic::EdgeIntoUncompromised { src, dst } => write!(
                f,
                "complete edge {} -> {} but {} shows no complete exploit of its own",
                src.ip_string(),
                dst.ip_string(),
                dst.ip_string()
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackChain {
    pub nodes: BTreeMap<HostId, ChainNode>,
    pub edges: Vec<AttackEdge>,
    pub diagnostics: Vec<ChainDiagnostic>,
}

/// True when witnesses of this cell name both endpoints of an attack.
fn attributes_both_endpoints(cell: &crate::rules::EvidenceCell) -> bool {
    match cell.level {
        PatternLevel::Host => {
            cell.source == LogSource::Firewall && TraceCategory::chain().contains(&cell.category)
        }
        PatternLevel::Network => cell.binding == HostBinding::DstIp,
    }
}

/// Merges evidence witnesses into directed edges. The FTP control channel is
/// the one leg the victim opens toward the attacker, so its witnesses map to
/// an edge against the flow; every other witness maps src -> dst.
pub fn extract_edges(
    events: &[NormalizedEvent],
    evidence: &BTreeMap<HostId, EvidenceMatrix>,
) -> Vec<AttackEdge> {
    #[derive(Default)]
    struct Acc {
        complete: bool,
        witnesses: BTreeSet<usize>,
    }
    // Evidence keys carry host names learned from log headers; reuse them so
    // edge endpoints stay named wherever the corpus knew a name.
    let named = |bare: HostId| -> HostId {
        evidence.get_key_value(&bare).map(|(k, _)| k.clone()).unwrap_or(bare)
    };
    let mut acc: BTreeMap<(HostId, HostId), Acc> = BTreeMap::new();
    for matrix in evidence.values() {
        for cell in matrix.cells.values() {
            if !cell.found || !attributes_both_endpoints(cell) {
                continue;
            }
            for &w in &cell.witnesses {
                let event = &events[w];
                let (Some(src), Some(dst)) = (event.attr(Attr::SrcIp), event.attr(Attr::DstIp))
                else {
                    continue;
                };
                let (Ok(src), Ok(dst)) = (canonical_host(src, None), canonical_host(dst, None))
                else {
                    continue;
                };
                let (from, to) = if cell.category == TraceCategory::ExploitFtp {
                    (dst, src)
                } else {
                    (src, dst)
                };
                if from == to {
                    continue;
                }
                let entry = acc.entry((named(from), named(to))).or_default();
                entry.witnesses.insert(w);
                entry.complete |= cell.category == TraceCategory::ExploitTransfer;
            }
        }
    }
    let mut edges: Vec<AttackEdge> = acc
        .into_iter()
        .map(|((src, dst), acc)| AttackEdge {
            first_seen: acc.witnesses.iter().map(|&w| events[w].timestamp).min().expect("non-empty"),
            src,
            dst,
            complete: acc.complete,
            witnesses: acc.witnesses.into_iter().collect(),
        })
        .collect();
    edges.sort_by(|a, b| {
        (a.first_seen, &a.src, &a.dst).cmp(&(b.first_seen, &b.src, &b.dst))
    });
    edges
}

/// Assigns compromise levels by breadth-first search over complete edges
/// seeded at every origin attacker, then sweeps for structural anomalies.
pub fn build_attack_chain(
    classes: &BTreeMap<HostId, HostClassification>,
    edges: &[AttackEdge],
) -> AttackChain {
    let mut edges: Vec<AttackEdge> = edges.to_vec();
    edges.sort_by(|a, b| (a.first_seen, &a.src, &a.dst).cmp(&(b.first_seen, &b.src, &b.dst)));

    let mut nodes: BTreeMap<HostId, ChainNode> = BTreeMap::new();
    for (host, class) in classes {
        let level = match class.role {
            Role::VictimAttempted => Some(ChainLevel::Leaf),
            _ => None,
        };
        nodes.insert(host.clone(), ChainNode { role: Some(class.role), level });
    }
    for edge in &edges {
        for end in [&edge.src, &edge.dst] {
            nodes.entry(end.clone()).or_insert(ChainNode { role: None, level: None });
        }
    }

    let compromised = |host: &HostId| {
        classes.get(host).is_some_and(|c| c.exploit_status == ExploitStatus::Complete)
    };

    // BFS. Seeds are the origins in ip order; neighbors expand in the fixed
    // (first_seen, src, dst) edge order, so the walk is deterministic.
    let mut queue: VecDeque<(HostId, u32)> = VecDeque::new();
    for (host, class) in classes {
        if class.role == Role::OriginAttacker {
            nodes.get_mut(host).expect("seeded above").level = Some(ChainLevel::Ranked(0));
            queue.push_back((host.clone(), 0));
        }
    }
    while let Some((host, level)) = queue.pop_front() {
        for edge in edges.iter().filter(|e| e.complete && e.src == host) {
            if !compromised(&edge.dst) {
                continue;
            }
            let node = nodes.get_mut(&edge.dst).expect("all endpoints present");
            if node.level.is_none() {
                node.level = Some(ChainLevel::Ranked(level + 1));
                queue.push_back((edge.dst.clone(), level + 1));
            }
        }
    }

    let mut diagnostics = Vec::new();

    // Orphans: hosts that should sit on the chain but are unreachable —
    // either classified as completely exploited, or pinned by a complete
    // edge — yet never got a level.
    let mut chain_members: BTreeSet<HostId> =
        classes.iter().filter(|(h, _)| compromised(h)).map(|(h, _)| h.clone()).collect();
    for edge in edges.iter().filter(|e| e.complete) {
        chain_members.insert(edge.src.clone());
        chain_members.insert(edge.dst.clone());
    }
    for host in chain_members {
        let node = &nodes[&host];
        if node.level.is_none() || node.level == Some(ChainLevel::Leaf) {
            diagnostics.push(ChainDiagnostic::Orphan { host });
        }
    }

    // Complete edges that target hosts the evidence says were never taken.
    for edge in edges.iter().filter(|e| e.complete) {
        match classes.get(&edge.dst) {
            Some(c) if c.role == Role::OriginAttacker => {
                diagnostics
                    .push(ChainDiagnostic::EdgeIntoOrigin { src: edge.src.clone(), dst: edge.dst.clone() });
            }
            Some(c) if c.exploit_status != ExploitStatus::Complete => {
                diagnostics.push(ChainDiagnostic::EdgeIntoUncompromised {
                    src: edge.src.clone(),
                    dst: edge.dst.clone(),
                });
            }
            _ => {}
        }
    }

    // A source must be infected before it attacks onward. An edge out of a
    // host that predates every complete edge into that host is suspect;
    // origins are exempt because nothing infected them.
    let mut infected_at: BTreeMap<HostId, NaiveDateTime> = BTreeMap::new();
    for edge in edges.iter().filter(|e| e.complete) {
        infected_at
            .entry(edge.dst.clone())
            .and_modify(|t| *t = (*t).min(edge.first_seen))
            .or_insert(edge.first_seen);
    }
    for edge in edges.iter().filter(|e| e.complete) {
        let origin = classes.get(&edge.src).is_some_and(|c| c.role == Role::OriginAttacker);
        if origin {
            continue;
        }
        if let Some(&infected) = infected_at.get(&edge.src) {
            if edge.first_seen < infected {
                diagnostics.push(ChainDiagnostic::TemporalAnomaly {
                    src: edge.src.clone(),
                    dst: edge.dst.clone(),
                });
            }
        }
    }

    // Cycle sweep over complete edges: iterative DFS with gray/black marks,
    // reporting each edge that lands on a gray node.
    let mut color: BTreeMap<HostId, u8> = BTreeMap::new(); // 0 white, 1 gray, 2 black
    let complete_out = |host: &HostId| -> Vec<&AttackEdge> {
        edges.iter().filter(|e| e.complete && e.src == *host).collect()
    };
    let hosts: Vec<HostId> = nodes.keys().cloned().collect();
    for start in hosts {
        if color.get(&start).copied().unwrap_or(0) != 0 {
            continue;
        }
        // Stack holds (host, next-edge cursor) so the DFS can blacken on exit.
        let mut stack: Vec<(HostId, usize)> = vec![(start.clone(), 0)];
        color.insert(start, 1);
        while let Some((host, cursor)) = stack.pop() {
            let outs = complete_out(&host);
            if cursor >= outs.len() {
                color.insert(host, 2);
                continue;
            }
            let edge = outs[cursor];
            stack.push((host.clone(), cursor + 1));
            match color.get(&edge.dst).copied().unwrap_or(0) {
                0 => {
                    color.insert(edge.dst.clone(), 1);
                    stack.push((edge.dst.clone(), 0));
                }
                1 => diagnostics
                    .push(ChainDiagnostic::BackEdge { src: edge.src.clone(), dst: edge.dst.clone() }),
                _ => {}
            }
        }
    }

    AttackChain { nodes, edges, diagnostics }
}
