//! Synthetic outbreak scenarios with known ground truth.
//!
//! A scenario scripts an ordered list of attacks over a host roster; the
//! emitter (see `emit`) turns it into a full log corpus, and
//! `expected_outcomes` derives the classification and chain level every host
//! must receive — computed from the script alone, never from the engine, so
//! generated corpora double as an end-to-end oracle.

mod emit;

pub use emit::{generate_logs, Manifest, ManifestHost};

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::str::FromStr;

use chrono::{NaiveDate, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::chain::ChainLevel;
use crate::classify::Role;
use crate::model::{canonical_host, HostId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    /// Full chain: scan, backdoor shell, FTP control, worm-body transfer.
    Complete,
    /// Backdoor opened but the transfer never happened.
    Attempted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attack {
    pub src: HostId,
    pub dst: HostId,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioHost {
    pub host: HostId,
    pub initially_infected: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioSpec {
    pub hosts: Vec<ScenarioHost>,
    /// Chronological. Every src must be infected by the time it attacks.
    pub attacks: Vec<Attack>,
    pub base_time: NaiveDateTime,
    pub seed: u64,
    /// Worm-body destination port, somewhere in the 3000-3999 class.
    pub transfer_port: u16,
    /// Emit shutdown (1074) and service-failure (1015) events on infected
    /// hosts — the impact traces only some outbreaks leave behind.
    pub emit_impact_events: bool,
    /// Infected hosts that probe onward targets whose logs were never
    /// collected: they emit outbound scan+backdoor lines toward a placeholder
    /// address, and nothing else. This is how a final victim still shows up
    /// as a compromised node that "has begun a new attack".
    pub unlogged_propagation: Vec<HostId>,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// What the engine must conclude about one host, derived from the script.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpectedHost {
    pub name: Option<String>,
    pub role: Role,
    pub level: Option<ChainLevel>,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |msg: String| Err(ScenarioError::InvalidSpec(msg));
        if self.hosts.is_empty() {
            return invalid("no hosts".into());
        }
        let mut roster = BTreeSet::new();
        for h in &self.hosts {
            if !roster.insert(h.host.clone()) {
                return invalid(format!("duplicate host {}", h.host.ip_string()));
            }
        }
        if !(3000..=3999).contains(&self.transfer_port) {
            return invalid(format!("transfer port {} outside 3000-3999", self.transfer_port));
        }
        let mut infected: BTreeSet<HostId> = self
            .hosts
            .iter()
            .filter(|h| h.initially_infected)
            .map(|h| h.host.clone())
            .collect();
        for (i, attack) in self.attacks.iter().enumerate() {
            if attack.src == attack.dst {
                return invalid(format!("attack {i} attacks itself"));
            }
            for end in [&attack.src, &attack.dst] {
                if !roster.contains(end) {
                    return invalid(format!("attack {i} uses unknown host {}", end.ip_string()));
                }
            }
            if !infected.contains(&attack.src) {
                return invalid(format!(
                    "attack {i}: source {} is not infected yet",
                    attack.src.ip_string()
                ));
            }
            if attack.outcome == Outcome::Complete {
                infected.insert(attack.dst.clone());
            }
        }
        for p in &self.unlogged_propagation {
            if !roster.contains(p) {
                return invalid(format!("propagating host {} not in roster", p.ip_string()));
            }
            if !infected.contains(p) {
                return invalid(format!(
                    "propagating host {} is never infected",
                    p.ip_string()
                ));
            }
        }
        Ok(())
    }

    /// Ground truth: the role and chain level each host must classify to.
    /// Roles follow the same algebra the classifier implements; levels are
    /// breadth-first distance over complete attacks from the origin hosts.
    pub fn expected_outcomes(&self) -> BTreeMap<HostId, ExpectedHost> {
        let mut targeted = BTreeSet::new();
        let mut taken = BTreeSet::new();
        let mut attackers: BTreeSet<HostId> = self.unlogged_propagation.iter().cloned().collect();
        for attack in &self.attacks {
            targeted.insert(attack.dst.clone());
            if attack.outcome == Outcome::Complete {
                taken.insert(attack.dst.clone());
            }
            attackers.insert(attack.src.clone());
        }

        let role_of = |host: &HostId| {
            let complete = taken.contains(host);
            let attempted = targeted.contains(host) && !complete;
            let attacker = attackers.contains(host);
            match (complete, attempted, attacker) {
                (true, _, true) => Role::MultiStep,
                (false, false, true) => Role::OriginAttacker,
                (true, _, false) => Role::VictimExploited,
                (false, true, false) => Role::VictimAttempted,
                _ => Role::Unclassified,
            }
        };

        // Multi-source BFS over complete attacks, seeded at origin roles.
        let mut dist: BTreeMap<HostId, u32> = BTreeMap::new();
        let mut queue = VecDeque::new();
        for h in &self.hosts {
            if role_of(&h.host) == Role::OriginAttacker {
                dist.insert(h.host.clone(), 0);
                queue.push_back(h.host.clone());
            }
        }
        while let Some(u) = queue.pop_front() {
            let d = dist[&u];
            for attack in self.attacks.iter().filter(|a| a.outcome == Outcome::Complete) {
                if attack.src == u && !dist.contains_key(&attack.dst) {
                    dist.insert(attack.dst.clone(), d + 1);
                    queue.push_back(attack.dst.clone());
                }
            }
        }

        self.hosts
            .iter()
            .map(|h| {
                let role = role_of(&h.host);
                let level = match role {
                    Role::OriginAttacker => Some(ChainLevel::Ranked(0)),
                    Role::VictimAttempted => Some(ChainLevel::Leaf),
                    Role::MultiStep | Role::VictimExploited => {
                        dist.get(&h.host).map(|&d| ChainLevel::Ranked(d))
                    }
                    Role::Unclassified => None,
                };
                (
                    h.host.clone(),
                    ExpectedHost { name: h.host.name().map(str::to_string), role, level },
                )
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    A,
    B,
    C,
}

impl FromStr for Builtin {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" | "a" => Ok(Builtin::A),
            "B" | "b" => Ok(Builtin::B),
            "C" | "c" => Ok(Builtin::C),
            other => Err(format!("unknown scenario {other:?} (expected A, B, C or random)")),
        }
    }
}

fn named(ip: &str, name: &str) -> HostId {
    canonical_host(ip, Some(name)).expect("builtin host addresses are well-formed")
}

fn scenario_base_time() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2004, 5, 11).unwrap().and_hms_opt(10, 23, 0).unwrap()
}

/// The three canned outbreaks. A: the origin takes one host completely and
/// fails against another. B: the first victim relays the attack to a host the
/// origin itself could not take. C: like B but with impact events switched
/// on, and the chain's end victim stays quiet instead of probing onward.
pub fn builtin_scenario(which: Builtin) -> ScenarioSpec {
    let selamat = named("192.112.111.104", "Selamat");
    let infected = |host: &HostId| ScenarioHost { host: host.clone(), initially_infected: true };
    let clean = |host: &HostId| ScenarioHost { host: host.clone(), initially_infected: false };
    let attack = |src: &HostId, dst: &HostId, outcome| Attack {
        src: src.clone(),
        dst: dst.clone(),
        outcome,
    };
    match which {
        Builtin::A => {
            let roslan = named("192.112.112.200", "Roslan");
            let yusof = named("192.112.111.102", "Yusof");
            ScenarioSpec {
                hosts: vec![infected(&selamat), clean(&roslan), clean(&yusof)],
                attacks: vec![
                    attack(&selamat, &roslan, Outcome::Complete),
                    attack(&selamat, &yusof, Outcome::Attempted),
                ],
                base_time: scenario_base_time(),
                seed: 1,
                transfer_port: 3721,
                emit_impact_events: false,
                unlogged_propagation: vec![roslan],
            }
        }
        Builtin::B => {
            let ramly = named("192.112.112.196", "Ramly");
            let roslan = named("192.112.112.200", "Roslan");
            ScenarioSpec {
                hosts: vec![infected(&selamat), clean(&ramly), clean(&roslan)],
                attacks: vec![
                    attack(&selamat, &ramly, Outcome::Complete),
                    attack(&selamat, &roslan, Outcome::Attempted),
                    attack(&ramly, &roslan, Outcome::Complete),
                ],
                base_time: scenario_base_time(),
                seed: 2,
                transfer_port: 3721,
                emit_impact_events: false,
                unlogged_propagation: vec![roslan],
            }
        }
        Builtin::C => {
            let sahib = named("192.112.110.144", "Sahib");
            let tarmizi = named("192.112.110.182", "Tarmizi");
            ScenarioSpec {
                hosts: vec![infected(&selamat), clean(&sahib), clean(&tarmizi)],
                attacks: vec![
                    attack(&selamat, &sahib, Outcome::Complete),
                    attack(&selamat, &tarmizi, Outcome::Attempted),
                    attack(&sahib, &tarmizi, Outcome::Complete),
                ],
                base_time: scenario_base_time(),
                seed: 3,
                transfer_port: 3721,
                emit_impact_events: true,
                unlogged_propagation: vec![],
            }
        }
    }
}

/// Scripts a random outbreak: one origin, then attacks whose sources are
/// drawn from the currently infected hosts and whose targets from the still
/// clean ones. Outcomes are a coin flip. If every host is infected before
/// `n_attacks` are scripted, the outbreak has nowhere left to spread and the
/// attack list ends early.
pub fn random_scenario(n_hosts: u32, n_attacks: u32, seed: u64) -> Result<ScenarioSpec, ScenarioError> {
    if !(2..=254).contains(&n_hosts) {
        return Err(ScenarioError::InvalidParams(format!("hosts must be 2-254, got {n_hosts}")));
    }
    if n_attacks == 0 {
        return Err(ScenarioError::InvalidParams("need at least one attack".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hosts: Vec<HostId> = (1..=n_hosts)
        .map(|k| canonical_host(&format!("10.77.0.{k}"), Some(&format!("h{k:02}"))).unwrap())
        .collect();

    let mut infected = vec![hosts[0].clone()];
    let mut clean: Vec<HostId> = hosts[1..].to_vec();
    let mut attacks = Vec::new();
    for _ in 0..n_attacks {
        if clean.is_empty() {
            break;
        }
        let src = infected[rng.random_range(0..infected.len())].clone();
        let dst_idx = rng.random_range(0..clean.len());
        let outcome = if rng.random_bool(0.5) { Outcome::Complete } else { Outcome::Attempted };
        let dst = if outcome == Outcome::Complete {
            let dst = clean.swap_remove(dst_idx);
            infected.push(dst.clone());
            dst
        } else {
            clean[dst_idx].clone()
        };
        attacks.push(Attack { src, dst, outcome });
    }

    let spec = ScenarioSpec {
        hosts: hosts
            .iter()
            .map(|h| ScenarioHost { host: h.clone(), initially_infected: *h == hosts[0] })
            .collect(),
        attacks,
        base_time: scenario_base_time(),
        seed,
        transfer_port: rng.random_range(3000..=3999),
        emit_impact_events: rng.random_bool(0.5),
        unlogged_propagation: Vec::new(),
    };
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn level(n: u32) -> Option<ChainLevel> {
        Some(ChainLevel::Ranked(n))
    }

    #[test]
    fn builtins_validate() {
        for which in [Builtin::A, Builtin::B, Builtin::C] {
            builtin_scenario(which).validate().unwrap();
        }
    }

    #[test]
    fn builtin_a_expectations() {
        let expected = builtin_scenario(Builtin::A).expected_outcomes();
        let by_ip = |ip: &str| &expected[&canonical_host(ip, None).unwrap()];
        let selamat = by_ip("192.112.111.104");
        assert_eq!((selamat.role, selamat.level), (Role::OriginAttacker, level(0)));
        let roslan = by_ip("192.112.112.200");
        assert_eq!((roslan.role, roslan.level), (Role::MultiStep, level(1)));
        let yusof = by_ip("192.112.111.102");
        assert_eq!((yusof.role, yusof.level), (Role::VictimAttempted, Some(ChainLevel::Leaf)));
    }

    #[test]
    fn builtin_b_expectations() {
        let expected = builtin_scenario(Builtin::B).expected_outcomes();
        let by_ip = |ip: &str| &expected[&canonical_host(ip, None).unwrap()];
        assert_eq!(by_ip("192.112.111.104").role, Role::OriginAttacker);
        let ramly = by_ip("192.112.112.196");
        assert_eq!((ramly.role, ramly.level), (Role::MultiStep, level(1)));
        let roslan = by_ip("192.112.112.200");
        assert_eq!((roslan.role, roslan.level), (Role::MultiStep, level(2)));
    }

    #[test]
    fn builtin_c_expectations() {
        let spec = builtin_scenario(Builtin::C);
        assert!(spec.emit_impact_events);
        let expected = spec.expected_outcomes();
        let by_ip = |ip: &str| &expected[&canonical_host(ip, None).unwrap()];
        let sahib = by_ip("192.112.110.144");
        assert_eq!((sahib.role, sahib.level), (Role::MultiStep, level(1)));
        let tarmizi = by_ip("192.112.110.182");
        assert_eq!((tarmizi.role, tarmizi.level), (Role::VictimExploited, level(2)));
    }

    #[test]
    fn attack_from_uninfected_source_is_rejected() {
        let mut spec = builtin_scenario(Builtin::A);
        // Yusof (never completely taken) attacks Selamat.
        let yusof = canonical_host("192.112.111.102", Some("Yusof")).unwrap();
        let selamat = canonical_host("192.112.111.104", None).unwrap();
        spec.attacks.push(Attack { src: yusof, dst: selamat, outcome: Outcome::Complete });
        let err = spec.validate().unwrap_err();
        assert!(matches!(err, ScenarioError::InvalidSpec(msg) if msg.contains("not infected")));
    }

    #[test]
    fn self_attack_and_bad_port_are_rejected() {
        let mut spec = builtin_scenario(Builtin::A);
        spec.transfer_port = 4000;
        assert!(matches!(spec.validate(), Err(ScenarioError::InvalidSpec(_))));

        let mut spec = builtin_scenario(Builtin::A);
        let selamat = canonical_host("192.112.111.104", None).unwrap();
        spec.attacks.push(Attack {
            src: selamat.clone(),
            dst: selamat,
            outcome: Outcome::Attempted,
        });
        assert!(matches!(spec.validate(), Err(ScenarioError::InvalidSpec(_))));
    }

    #[test]
    fn propagating_host_must_end_up_infected() {
        let mut spec = builtin_scenario(Builtin::A);
        let yusof = canonical_host("192.112.111.102", None).unwrap();
        spec.unlogged_propagation.push(yusof);
        let err = spec.validate().unwrap_err();
        assert!(matches!(err, ScenarioError::InvalidSpec(msg) if msg.contains("never infected")));
    }

    #[test]
    fn random_scenarios_are_deterministic_in_seed() {
        let a = random_scenario(8, 12, 42).unwrap();
        let b = random_scenario(8, 12, 42).unwrap();
        assert_eq!(a, b);
        let c = random_scenario(8, 12, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn random_scenarios_respect_infection_ordering() {
        // Independent replay: walk the attack list tracking who is infected,
        // exactly as the invariant is worded, without calling validate().
        for seed in 0..200 {
            let spec = random_scenario(2 + (seed % 9) as u32, 1 + (seed % 17) as u32, seed).unwrap();
            let mut infected: BTreeSet<HostId> = spec
                .hosts
                .iter()
                .filter(|h| h.initially_infected)
                .map(|h| h.host.clone())
                .collect();
            for attack in &spec.attacks {
                assert!(infected.contains(&attack.src), "seed {seed}: src not infected");
                assert_ne!(attack.src, attack.dst);
                if attack.outcome == Outcome::Complete {
                    assert!(
                        infected.insert(attack.dst.clone()),
                        "seed {seed}: complete attack re-took an infected host"
                    );
                }
            }
            assert!((3000..=3999).contains(&spec.transfer_port));
        }
    }

    #[test]
    fn saturated_outbreak_stops_early() {
        // Two hosts cannot absorb fifty attacks: after the single clean host
        // is taken, there is no target left.
        let spec = random_scenario(2, 50, 7).unwrap();
        assert!(spec.attacks.len() <= 50);
        let completes =
            spec.attacks.iter().filter(|a| a.outcome == Outcome::Complete).count();
        assert!(completes <= 1);
        if completes == 1 {
            assert_eq!(spec.attacks.last().unwrap().outcome, Outcome::Complete);
        }
    }

    #[test]
    fn random_expectations_cover_every_host() {
        let spec = random_scenario(10, 14, 99).unwrap();
        let expected = spec.expected_outcomes();
        assert_eq!(expected.len(), 10);
        let origin = canonical_host("10.77.0.1", None).unwrap();
        assert_eq!(expected[&origin].role, Role::OriginAttacker);
        // Every completely-taken host is leveled; levels line up with the
        // attack script's infection depth.
        for (host, exp) in &expected {
            match exp.role {
                Role::MultiStep | Role::VictimExploited => {
                    assert!(matches!(exp.level, Some(ChainLevel::Ranked(n)) if n >= 1), "{}", host.ip_string())
                }
                Role::VictimAttempted => assert_eq!(exp.level, Some(ChainLevel::Leaf)),
                Role::OriginAttacker => assert_eq!(exp.level, Some(ChainLevel::Ranked(0))),
                Role::Unclassified => assert_eq!(exp.level, None),
            }
        }
    }

    #[test]
    fn parameter_bounds_are_enforced() {
        assert!(matches!(random_scenario(1, 5, 0), Err(ScenarioError::InvalidParams(_))));
        assert!(matches!(random_scenario(255, 5, 0), Err(ScenarioError::InvalidParams(_))));
        assert!(matches!(random_scenario(5, 0, 0), Err(ScenarioError::InvalidParams(_))));
        random_scenario(2, 1, 7).unwrap();
    }
}
