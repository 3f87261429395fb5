//! Evaluates patterns over a corpus and aggregates per-host evidence.

use std::collections::BTreeMap;
use std::net::Ipv4Addr;

use crate::model::{canonical_host, Attr, HostId, NormalizedEvent};

use super::{HostBinding, PatternLevel, Perspective, RuleSet, TraceCategory, TracePattern};

/// One pattern's outcome for one host. Carries a copy of the pattern
/// descriptors so a matrix is self-describing: the classifier, the chain
/// builder and the reports never need the ruleset again.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvidenceCell {
    pub perspective: Perspective,
    pub level: PatternLevel,
    pub category: TraceCategory,
    pub source: crate::model::LogSource,
    pub binding: HostBinding,
    pub found: bool,
    /// Indices into the corpus event list, ascending. Non-empty iff `found`.
    pub witnesses: Vec<usize>,
}

/// Evidence grid for one host: one cell per ruleset pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvidenceMatrix {
    pub host: HostId,
    pub cells: BTreeMap<String, EvidenceCell>,
}

impl EvidenceMatrix {
    fn empty(host: HostId, rules: &RuleSet) -> Self {
        let cells = rules
            .patterns()
            .iter()
            .map(|p| {
                (
                    p.id.clone(),
                    EvidenceCell {
                        perspective: p.perspective,
                        level: p.level,
                        category: p.category,
                        source: p.source,
                        binding: p.binding,
                        found: false,
                        witnesses: Vec::new(),
                    },
                )
            })
            .collect();
        EvidenceMatrix { host, cells }
    }

    /// True when any pattern with this perspective and category was found.
    pub fn category_found(&self, perspective: Perspective, category: TraceCategory) -> Option<bool> {
        let mut present = false;
        let mut found = false;
        for cell in self.cells.values() {
            if cell.perspective == perspective && cell.category == category {
                present = true;
                found |= cell.found;
            }
        }
        present.then_some(found)
    }
}

/// Tests one event against one pattern. The source must agree and every
/// predicate must hold; a missing attribute never matches. On success returns
/// the host the match is credited to: the event's owner for owner-bound
/// patterns, else the canonicalized address attribute named by the binding.
pub fn match_event(pattern: &TracePattern, event: &NormalizedEvent) -> Option<HostId> {
    if event.source != pattern.source {
        return None;
    }
    for predicate in &pattern.predicates {
        if !event.attr(predicate.attr).is_some_and(|v| predicate.matches(v)) {
            return None;
        }
    }
    match pattern.binding {
        HostBinding::Owner => Some(event.host.clone()),
        HostBinding::SrcIp => canonical_host(event.attr(Attr::SrcIp)?, None).ok(),
        HostBinding::DstIp => canonical_host(event.attr(Attr::DstIp)?, None).ok(),
    }
}

/// Evaluates every pattern against every event. A host earns a matrix by
/// owning at least one event or by being bound by a network pattern match;
/// the IDS sentinel owner never does. Witness lists follow canonical corpus
/// order, so the outcome is independent of input file ordering.
pub fn build_evidence(events: &[NormalizedEvent], rules: &RuleSet) -> BTreeMap<HostId, EvidenceMatrix> {
    let mut names: BTreeMap<Ipv4Addr, String> = BTreeMap::new();
    for event in events {
        if let Some(name) = event.host.name() {
            names.entry(event.host.ip()).or_insert_with(|| name.to_string());
        }
    }
    let named = |host: &HostId| -> HostId {
        match (host.name(), names.get(&host.ip())) {
            (None, Some(name)) => HostId::new(host.ip(), Some(name.clone())),
            _ => host.clone(),
        }
    };

    let mut evidence: BTreeMap<HostId, EvidenceMatrix> = BTreeMap::new();
    for event in events {
        if !event.host.is_sentinel() && !evidence.contains_key(&event.host) {
            let host = named(&event.host);
            evidence.insert(host.clone(), EvidenceMatrix::empty(host, rules));
        }
    }
    for (idx, event) in events.iter().enumerate() {
        for pattern in rules.patterns() {
            let Some(bound) = match_event(pattern, event) else { continue };
            if bound.is_sentinel() {
                continue;
            }
            let matrix = evidence.entry(named(&bound)).or_insert_with_key(|host| {
                EvidenceMatrix::empty(host.clone(), rules)
            });
            let cell = matrix.cells.get_mut(&pattern.id).expect("cell exists for every pattern");
            cell.found = true;
            cell.witnesses.push(idx);
        }
    }
    evidence
}
