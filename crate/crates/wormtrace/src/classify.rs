//! Host classification: turns one evidence matrix into a role verdict.
//!
//! Only host-level firewall categories decide the role. Victim-side, the four
//! exploit-chain categories (scan, backdoor shell, FTP control, worm-body
//! transfer) grade how far an inbound attack got; attacker-side, scan plus
//! backdoor shell is enough to say the host initiated attacks of its own.
//! Everything else found in the matrix — process-creation events, shutdown
//! and service-crash records, IDS alerts, outbound FTP/transfer traffic — is
//! kept as corroboration, never as a requirement.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::HostId;
use crate::rules::{EvidenceMatrix, Perspective, TraceCategory};

/// How far an inbound exploit chain progressed against this host.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExploitStatus {
    None,
    Attempted,
    Complete,
}

impl ExploitStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ExploitStatus::None => "NONE",
            ExploitStatus::Attempted => "ATTEMPTED",
            ExploitStatus::Complete => "COMPLETE",
        }
    }
}

/// Verdict for one host.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    OriginAttacker,
    VictimExploited,
    VictimAttempted,
    MultiStep,
    Unclassified,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::OriginAttacker => "ORIGIN_ATTACKER",
            Role::VictimExploited => "VICTIM_EXPLOITED",
            Role::VictimAttempted => "VICTIM_ATTEMPTED",
            Role::MultiStep => "MULTI_STEP",
            Role::Unclassified => "UNCLASSIFIED",
        }
    }
}

impl serde::Serialize for Role {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HostClassification {
    pub host: HostId,
    pub role: Role,
    pub exploit_status: ExploitStatus,
    pub attacker_evidence: bool,
    /// Found pattern ids outside the six role-deciding cells, sorted.
    pub corroborations: Vec<String>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClassifyError {
    #[error("host {host}: ruleset defines no {} {} pattern", perspective.as_str(), category.as_str())]
    MissingCategory { host: String, perspective: Perspective, category: TraceCategory },
}

/// The six (perspective, category) cells whose conjunctions decide the role.
fn required_cells() -> [(Perspective, TraceCategory); 6] {
    [
        (Perspective::Victim, TraceCategory::Scan),
        (Perspective::Victim, TraceCategory::ExploitBackdoor),
        (Perspective::Victim, TraceCategory::ExploitFtp),
        (Perspective::Victim, TraceCategory::ExploitTransfer),
        (Perspective::Attacker, TraceCategory::Scan),
        (Perspective::Attacker, TraceCategory::ExploitBackdoor),
    ]
}

fn found(
    m: &EvidenceMatrix,
    perspective: Perspective,
    category: TraceCategory,
) -> Result<bool, ClassifyError> {
    m.category_found(perspective, category).ok_or_else(|| ClassifyError::MissingCategory {
        host: m.host.ip_string(),
        perspective,
        category,
    })
}

/// Grades the inbound exploit chain. COMPLETE needs all four victim chain
/// categories; ATTEMPTED needs the backdoor shell opened but no transfer.
pub fn exploit_completeness(m: &EvidenceMatrix) -> Result<ExploitStatus, ClassifyError> {
    let scan = found(m, Perspective::Victim, TraceCategory::Scan)?;
    let backdoor = found(m, Perspective::Victim, TraceCategory::ExploitBackdoor)?;
    let ftp = found(m, Perspective::Victim, TraceCategory::ExploitFtp)?;
    let transfer = found(m, Perspective::Victim, TraceCategory::ExploitTransfer)?;
    Ok(if scan && backdoor && ftp && transfer {
        ExploitStatus::Complete
    } else if scan && backdoor && !transfer {
        ExploitStatus::Attempted
    } else {
        ExploitStatus::None
    })
}

/// True iff this host initiated an outbound attack chain: it scanned another
/// host and opened its backdoor shell. Outbound FTP/transfer traffic alone is
/// corroboration, so an attacker whose transfer failed still counts.
pub fn attacker_evidence(m: &EvidenceMatrix) -> Result<bool, ClassifyError> {
    let scan = found(m, Perspective::Attacker, TraceCategory::Scan)?;
    let backdoor = found(m, Perspective::Attacker, TraceCategory::ExploitBackdoor)?;
    Ok(scan && backdoor)
}

pub fn classify_host(m: &EvidenceMatrix) -> Result<HostClassification, ClassifyError> {
    let exploit_status = exploit_completeness(m)?;
    let attacker = attacker_evidence(m)?;
    let role = match (exploit_status, attacker) {
        (ExploitStatus::Complete, true) => Role::MultiStep,
        (ExploitStatus::None, true) => Role::OriginAttacker,
        (ExploitStatus::Complete, false) => Role::VictimExploited,
        (ExploitStatus::Attempted, false) => Role::VictimAttempted,
        _ => Role::Unclassified,
    };
    let required = required_cells();
    let corroborations = m
        .cells
        .iter()
        .filter(|(_, cell)| cell.found && !required.contains(&(cell.perspective, cell.category)))
        .map(|(id, _)| id.clone())
        .collect();
    Ok(HostClassification {
        host: m.host.clone(),
        role,
        exploit_status,
        attacker_evidence: attacker,
        corroborations,
    })
}

/// Classifies every host; iteration order follows the map's ip order.
pub fn classify_all(
    evidence: &BTreeMap<HostId, EvidenceMatrix>,
) -> Result<BTreeMap<HostId, HostClassification>, ClassifyError> {
    evidence
        .iter()
        .map(|(host, m)| Ok((host.clone(), classify_host(m)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::{build_evidence, default_ruleset, RuleSet};

    /// Matrix with exactly the given (perspective, category) cells found.
    /// Every pattern cell in a listed category is marked, mirroring what a
    /// saturated corpus would produce.
    fn matrix_with(rules: &RuleSet, on: &[(Perspective, TraceCategory)]) -> EvidenceMatrix {
        let host = crate::model::canonical_host("10.0.0.1", Some("h")).unwrap();
        // An empty corpus yields no matrices, so synthesize one via a single
        // non-matching event? No event matches nothing; build by hand instead.
        let mut m = EvidenceMatrix { host, cells: Default::default() };
        for p in rules.patterns() {
            m.cells.insert(
                p.id.clone(),
                crate::rules::EvidenceCell {
                    perspective: p.perspective,
                    level: p.level,
                    category: p.category,
                    source: p.source,
                    binding: p.binding,
                    found: on.contains(&(p.perspective, p.category)),
                    witnesses: Vec::new(),
                },
            );
        }
        m
    }

    #[test]
    fn complete_needs_all_four_victim_chain_cells() {
        let rules = default_ruleset();
        let all = [
            (Perspective::Victim, TraceCategory::Scan),
            (Perspective::Victim, TraceCategory::ExploitBackdoor),
            (Perspective::Victim, TraceCategory::ExploitFtp),
            (Perspective::Victim, TraceCategory::ExploitTransfer),
        ];
        let m = matrix_with(&rules, &all);
        assert_eq!(exploit_completeness(&m).unwrap(), ExploitStatus::Complete);
        for drop in 0..4 {
            let partial: Vec<_> =
                all.iter().enumerate().filter(|(i, _)| *i != drop).map(|(_, c)| *c).collect();
            let m = matrix_with(&rules, &partial);
            assert_ne!(exploit_completeness(&m).unwrap(), ExploitStatus::Complete);
        }
    }

    #[test]
    fn backdoor_without_transfer_is_attempted() {
        let rules = default_ruleset();
        let m = matrix_with(
            &rules,
            &[
                (Perspective::Victim, TraceCategory::Scan),
                (Perspective::Victim, TraceCategory::ExploitBackdoor),
            ],
        );
        assert_eq!(exploit_completeness(&m).unwrap(), ExploitStatus::Attempted);
        // The FTP control channel does not change the grade by itself.
        let m = matrix_with(
            &rules,
            &[
                (Perspective::Victim, TraceCategory::Scan),
                (Perspective::Victim, TraceCategory::ExploitBackdoor),
                (Perspective::Victim, TraceCategory::ExploitFtp),
            ],
        );
        assert_eq!(exploit_completeness(&m).unwrap(), ExploitStatus::Attempted);
    }

    #[test]
    fn scan_alone_is_none() {
        let rules = default_ruleset();
        let m = matrix_with(&rules, &[(Perspective::Victim, TraceCategory::Scan)]);
        assert_eq!(exploit_completeness(&m).unwrap(), ExploitStatus::None);
        let m = matrix_with(&rules, &[]);
        assert_eq!(exploit_completeness(&m).unwrap(), ExploitStatus::None);
    }

    #[test]
    fn attacker_needs_scan_and_backdoor() {
        let rules = default_ruleset();
        let m = matrix_with(&rules, &[(Perspective::Attacker, TraceCategory::Scan)]);
        assert!(!attacker_evidence(&m).unwrap());
        let m = matrix_with(
            &rules,
            &[
                (Perspective::Attacker, TraceCategory::Scan),
                (Perspective::Attacker, TraceCategory::ExploitBackdoor),
            ],
        );
        assert!(attacker_evidence(&m).unwrap());
        // Victim traffic contributes nothing to the attacker side.
        let m = matrix_with(
            &rules,
            &[
                (Perspective::Victim, TraceCategory::Scan),
                (Perspective::Victim, TraceCategory::ExploitBackdoor),
            ],
        );
        assert!(!attacker_evidence(&m).unwrap());
    }

    #[test]
    fn missing_victim_chain_category_is_an_error() {
        // A both-perspectives ruleset that lacks victim exploit_transfer.
        let text = "\
pattern victim.scan
  perspective: victim
  level: host
  category: scan
  source: firewall
  match: action=OPEN-INBOUND dst_port=445

pattern victim.backdoor
  perspective: victim
  level: host
  category: exploit_backdoor
  source: firewall
  match: action=OPEN-INBOUND dst_port=9996

pattern victim.ftp
  perspective: victim
  level: host
  category: exploit_ftp
  source: firewall
  match: action=OPEN dst_port=5554

pattern attacker.scan
  perspective: attacker
  level: host
  category: scan
  source: firewall
  match: action=OPEN dst_port=445

pattern attacker.backdoor
  perspective: attacker
  level: host
  category: exploit_backdoor
  source: firewall
  match: action=OPEN dst_port=9996
";
        let rules = crate::rules::parse_ruleset(text).unwrap();
        let m = matrix_with(&rules, &[]);
        let err = classify_host(&m).unwrap_err();
        assert_eq!(
            err,
            ClassifyError::MissingCategory {
                host: "10.0.0.1".into(),
                perspective: Perspective::Victim,
                category: TraceCategory::ExploitTransfer,
            }
        );
        assert!(err.to_string().contains("victim exploit_transfer"));
    }

    #[test]
    fn corroborations_hold_every_found_id_outside_the_required_cells() {
        let rules = default_ruleset();
        let m = matrix_with(
            &rules,
            &[
                (Perspective::Victim, TraceCategory::Scan),
                (Perspective::Victim, TraceCategory::Security),
                (Perspective::Victim, TraceCategory::Activity),
                (Perspective::Attacker, TraceCategory::Impact),
            ],
        );
        let c = classify_host(&m).unwrap();
        assert!(!c.corroborations.iter().any(|id| id == "victim.scan"));
        assert!(c.corroborations.iter().any(|id| id == "victim.security"));
        let mut sorted = c.corroborations.clone();
        sorted.sort();
        assert_eq!(c.corroborations, sorted);
        // Every activity pattern and every attacker impact pattern is found.
        let expected: Vec<_> = rules
            .patterns()
            .iter()
            .filter(|p| {
                matches!(
                    (p.perspective, p.category),
                    (Perspective::Victim, TraceCategory::Security)
                        | (Perspective::Victim, TraceCategory::Activity)
                        | (Perspective::Attacker, TraceCategory::Impact)
                )
            })
            .map(|p| p.id.clone())
            .collect();
        for id in &expected {
            assert!(c.corroborations.contains(id), "{id} missing");
        }
        assert_eq!(c.corroborations.len(), expected.len());
    }

    #[test]
    fn classify_all_is_per_host_and_ip_ordered() {
        let rules = default_ruleset();
        let mk = |ip: &str| {
            let mut m = matrix_with(&rules, &[]);
            m.host = crate::model::canonical_host(ip, None).unwrap();
            (m.host.clone(), m)
        };
        let evidence: BTreeMap<_, _> = [mk("10.0.0.9"), mk("10.0.0.1")].into_iter().collect();
        let classes = classify_all(&evidence).unwrap();
        let ips: Vec<_> = classes.keys().map(|h| h.ip_string()).collect();
        assert_eq!(ips, vec!["10.0.0.1", "10.0.0.9"]);
        assert!(classes.values().all(|c| c.role == Role::Unclassified));
        assert!(classify_all(&BTreeMap::new()).unwrap().is_empty());
    }

    /// Independent oracle: evaluates the five role predicates directly from
    /// raw category booleans, bypassing ExploitStatus and the match above.
    fn oracle_role(vs: bool, vb: bool, vf: bool, vt: bool, as_: bool, ab: bool) -> &'static str {
        let complete = vs && vb && vf && vt;
        let attempted = vs && vb && !vt;
        let attacker = as_ && ab;
        if complete && attacker {
            "MULTI_STEP"
        } else if !complete && !attempted && attacker {
            "ORIGIN_ATTACKER"
        } else if complete && !attacker {
            "VICTIM_EXPLOITED"
        } else if attempted && !attacker {
            "VICTIM_ATTEMPTED"
        } else {
            "UNCLASSIFIED"
        }
    }

    #[test]
    fn oracle_agreement_over_all_category_assignments() {
        let rules = default_ruleset();
        let cats: Vec<(Perspective, TraceCategory)> = {
            let mut seen = Vec::new();
            for p in rules.patterns() {
                if !seen.contains(&(p.perspective, p.category)) {
                    seen.push((p.perspective, p.category));
                }
            }
            seen
        };
        let n = cats.len();
        assert!(n <= 20, "exhaustive enumeration stays cheap");
        let started = std::time::Instant::now();
        let mut m = matrix_with(&rules, &[]);
        let idx_per_cell: Vec<usize> = m
            .cells
            .values()
            .map(|cell| cats.iter().position(|c| *c == (cell.perspective, cell.category)).unwrap())
            .collect();
        for bits in 0u32..(1 << n) {
            for (cell, idx) in m.cells.values_mut().zip(&idx_per_cell) {
                cell.found = bits & (1 << idx) != 0;
            }
            let got = classify_host(&m).unwrap();
            let pick = |p, c| {
                let idx = cats.iter().position(|x| *x == (p, c)).unwrap();
                bits & (1 << idx) != 0
            };
            let want = oracle_role(
                pick(Perspective::Victim, TraceCategory::Scan),
                pick(Perspective::Victim, TraceCategory::ExploitBackdoor),
                pick(Perspective::Victim, TraceCategory::ExploitFtp),
                pick(Perspective::Victim, TraceCategory::ExploitTransfer),
                pick(Perspective::Attacker, TraceCategory::Scan),
                pick(Perspective::Attacker, TraceCategory::ExploitBackdoor),
            );
            assert_eq!(got.role.as_str(), want, "assignment {bits:b}");
        }
        assert!(started.elapsed().as_secs() < 1, "oracle sweep took too long");
    }

    #[test]
    fn adding_attacker_evidence_escalates_victim_to_multi_step() {
        let rules = default_ruleset();
        let victim = [
            (Perspective::Victim, TraceCategory::Scan),
            (Perspective::Victim, TraceCategory::ExploitBackdoor),
            (Perspective::Victim, TraceCategory::ExploitFtp),
            (Perspective::Victim, TraceCategory::ExploitTransfer),
        ];
        let m = matrix_with(&rules, &victim);
        assert_eq!(classify_host(&m).unwrap().role, Role::VictimExploited);
        let mut escalated = victim.to_vec();
        escalated.push((Perspective::Attacker, TraceCategory::Scan));
        escalated.push((Perspective::Attacker, TraceCategory::ExploitBackdoor));
        let m = matrix_with(&rules, &escalated);
        assert_eq!(classify_host(&m).unwrap().role, Role::MultiStep);
    }

    #[test]
    fn classification_matches_evidence_built_from_events() {
        use crate::model::{Attr, LogSource, NormalizedEvent};
        let rules = default_ruleset();
        let host = crate::model::canonical_host("10.0.0.2", Some("V")).unwrap();
        let mk = |action: &str, dst_port: &str, seq| {
            let mut e = NormalizedEvent {
                host: host.clone(),
                source: LogSource::Firewall,
                timestamp: chrono::NaiveDate::from_ymd_opt(2004, 5, 11)
                    .unwrap()
                    .and_hms_opt(10, 23, seq as u32)
                    .unwrap(),
                seq,
                attrs: Default::default(),
            };
            e.attrs.insert(Attr::Action, action.into());
            e.attrs.insert(Attr::Protocol, "TCP".into());
            e.attrs.insert(Attr::SrcIp, "10.0.0.1".into());
            e.attrs.insert(Attr::DstIp, "10.0.0.2".into());
            e.attrs.insert(Attr::SrcPort, "1055".into());
            e.attrs.insert(Attr::DstPort, dst_port.into());
            e
        };
        let events =
            vec![mk("OPEN-INBOUND", "445", 0), mk("OPEN-INBOUND", "9996", 1)];
        let evidence = build_evidence(&events, &rules);
        let classes = classify_all(&evidence).unwrap();
        let v = &classes[&host];
        assert_eq!(v.role, Role::VictimAttempted);
        assert_eq!(v.exploit_status, ExploitStatus::Attempted);
        assert!(!v.attacker_evidence);
    }
}
