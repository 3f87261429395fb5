//! Log emission: renders a scenario script into the five log formats.
//!
//! One global clock ticks one second per emitted line, so timestamps
//! strictly increase in script order across the whole corpus. All
//! randomness — ephemeral ports, the worm copy's filename prefix, alert
//! microseconds — comes from one generator seeded by the spec, making the
//! output byte-deterministic.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::{Duration, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{Outcome, ScenarioError, ScenarioSpec};
use crate::chain::ChainLevel;
use crate::classify::Role;
use crate::model::{canonical_host, HostId};

/// Ground truth for one host, as written into the manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestHost {
    pub name: Option<String>,
    pub role: Role,
    pub level: Option<ChainLevel>,
}

/// What a generation run produced and what an analysis of it must find.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub seed: u64,
    pub transfer_port: u16,
    pub base_time: String,
    pub emit_impact_events: bool,
    /// Basenames of every log file written, sorted.
    pub files: Vec<String>,
    /// Keyed by ip.
    pub expected: BTreeMap<String, ManifestHost>,
    pub notes: Vec<String>,
}

struct Emitter {
    clock: NaiveDateTime,
    rng: ChaCha8Rng,
    transfer_port: u16,
    /// Filename -> accumulated lines (headers first).
    files: BTreeMap<String, Vec<String>>,
    /// Host -> filename stem, collision-free.
    stems: BTreeMap<HostId, String>,
}

const IDS_FILE: &str = "ids.log";

fn host_stems(spec: &ScenarioSpec) -> BTreeMap<HostId, String> {
    let mut used = BTreeSet::new();
    let mut stems = BTreeMap::new();
    for h in &spec.hosts {
        let by_ip = h.host.ip_string().replace('.', "-");
        let candidate = h.host.name().map(str::to_lowercase).unwrap_or_else(|| by_ip.clone());
        let stem = if used.insert(candidate.clone()) {
            candidate
        } else {
            used.insert(by_ip.clone());
            by_ip
        };
        stems.insert(h.host.clone(), stem);
    }
    stems
}

impl Emitter {
    fn new(spec: &ScenarioSpec) -> Self {
        let stems = host_stems(spec);
        let mut files = BTreeMap::new();
        for h in &spec.hosts {
            let stem = &stems[&h.host];
            let host_header =
                format!("#Host: {} {}", h.host.name().unwrap_or(stem), h.host.ip_string());
            for kind in ["firewall", "security", "system", "application"] {
                files.insert(
                    format!("{stem}_{kind}.log"),
                    vec![format!("#Log: {kind}"), host_header.clone()],
                );
            }
        }
        files.insert(
            IDS_FILE.to_string(),
            vec!["#Log: ids".to_string(), format!("#Year: {}", spec.base_time.format("%Y"))],
        );
        Emitter {
            clock: spec.base_time,
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
            transfer_port: spec.transfer_port,
            files,
            stems,
        }
    }

    fn tick(&mut self) -> NaiveDateTime {
        let t = self.clock;
        self.clock += Duration::seconds(1);
        t
    }

    fn eph(&mut self) -> u16 {
        self.rng.random_range(1025..=5000)
    }

    fn push(&mut self, file: String, line: String) {
        self.files.get_mut(&file).expect("file created up front").push(line);
    }

    fn firewall(
        &mut self,
        owner: &HostId,
        action: &str,
        proto: &str,
        src: &HostId,
        dst: &HostId,
        src_port: u16,
        dst_port: u16,
    ) {
        let t = self.tick();
        let file = format!("{}_firewall.log", self.stems[owner]);
        let line = format!(
            "{} {action} {proto} {} {} {src_port} {dst_port}",
            t.format("%Y-%m-%d %H:%M:%S"),
            src.ip_string(),
            dst.ip_string(),
        );
        self.push(file, line);
    }

    fn win_event(&mut self, owner: &HostId, kind: &str, event_id: u32, image: &str, message: &str) {
        let t = self.tick();
        let file = format!("{}_{kind}.log", self.stems[owner]);
        // Message always quoted; inner quotes doubled per the CSV convention.
        let line = format!(
            "{},{event_id},{image},\"{}\"",
            t.format("%Y-%m-%dT%H:%M:%S"),
            message.replace('"', "\"\""),
        );
        self.push(file, line);
    }

    fn alert(
        &mut self,
        sid: u32,
        priority: u32,
        message: &str,
        proto: &str,
        src: &HostId,
        src_port: u16,
        dst: &HostId,
        dst_port: u16,
    ) {
        let t = self.tick();
        let micros: u32 = self.rng.random_range(0..1_000_000);
        let line = format!(
            "{}.{micros:06} [**] [1:{sid}:1] {message} [**] [Priority: {priority}] {{{proto}}} {}:{src_port} -> {}:{dst_port}",
            t.format("%m/%d-%H:%M:%S"),
            src.ip_string(),
            dst.ip_string(),
        );
        self.push(IDS_FILE.to_string(), line);
    }

    /// Background chatter so every host file has benign content: a web
    /// fetch, a dropped inbound probe, a routine process, two service notes.
    fn noise(&mut self, host: &HostId) {
        let web = canonical_host("203.0.113.9", None).unwrap();
        let probe = canonical_host("198.51.100.17", None).unwrap();
        let eph = self.eph();
        self.firewall(host, "OPEN", "TCP", host, &web, eph, 80);
        self.firewall(host, "DROP", "UDP", &probe, host, 137, 137);
        self.win_event(
            host,
            "security",
            592,
            r"C:\WINDOWS\system32\svchost.exe",
            "A new process has been created",
        );
        self.win_event(
            host,
            "system",
            7036,
            "",
            "The Task Scheduler service entered the running state",
        );
        self.win_event(host, "application", 1001, "", "Windows Update installed updates successfully");
    }

    /// Shutdown plus service-failure pair left on a host the worm took.
    fn impact(&mut self, host: &HostId) {
        self.win_event(
            host,
            "system",
            1074,
            "",
            "The system has been shut down and restarted after a critical process failure",
        );
        self.win_event(
            host,
            "application",
            1015,
            "",
            "Application error: lsass.exe terminated unexpectedly",
        );
    }

    /// Outbound scan+backdoor toward a target whose logs were never
    /// collected: the minimum trace of a compromised host turning attacker.
    fn placeholder_probe(&mut self, host: &HostId, target: &HostId) {
        let eph = self.eph();
        self.firewall(host, "OPEN", "TCP", host, target, eph, 445);
        let eph = self.eph();
        self.firewall(host, "OPEN", "TCP", host, target, eph, 9996);
    }

    fn attack(&mut self, src: &HostId, dst: &HostId, outcome: Outcome, emit_impact: bool) {
        // Scan and shell: share probe, inbound 445 on the victim (mirrored on
        // the attacker), the exploit alerts, then the 9996 backdoor.
        let eph = self.eph();
        self.alert(101, 1, "NETBIOS Unicode share access", "TCP", src, eph, dst, 445);
        self.firewall(dst, "OPEN-INBOUND", "TCP", src, dst, eph, 445);
        self.firewall(src, "OPEN", "TCP", src, dst, eph, 445);
        self.alert(102, 1, "NETBIOS lsass exploit attempt", "TCP", src, eph, dst, 445);
        self.alert(103, 1, "SHELLCODE detected", "TCP", src, eph, dst, 445);
        let eph = self.eph();
        self.firewall(dst, "OPEN-INBOUND", "TCP", src, dst, eph, 9996);
        self.firewall(src, "OPEN", "TCP", src, dst, eph, 9996);
        let eph = self.eph();
        self.alert(104, 2, "SCANUPnP", "UDP", src, eph, dst, 1900);

        if outcome != Outcome::Complete {
            return;
        }
        // Transfer: the victim dials back to the attacker's FTP service,
        // then the worm body arrives on the transfer port.
        let eph = self.eph();
        self.firewall(dst, "OPEN", "TCP", dst, src, eph, 5554);
        self.firewall(src, "OPEN-INBOUND", "TCP", dst, src, eph, 5554);
        let eph = self.eph();
        let transfer_port = self.transfer_port;
        self.firewall(dst, "OPEN-INBOUND", "TCP", src, dst, eph, transfer_port);
        self.firewall(src, "OPEN", "TCP", src, dst, eph, transfer_port);
        // Process trail: ftp.exe fetches, the fetched copy runs on the
        // victim, and the worm process itself shows on the attacker.
        self.win_event(
            dst,
            "security",
            592,
            r"C:\WINDOWS\system32\ftp.exe",
            "A new process has been created",
        );
        let prefix: u32 = self.rng.random_range(1000..=9999);
        self.win_event(
            dst,
            "security",
            592,
            &format!(r"C:\WINDOWS\system32\{prefix}_up.exe"),
            "A new process has been created",
        );
        self.win_event(
            src,
            "security",
            592,
            r"C:\WINDOWS\avserve.exe",
            "A new process has been created",
        );
        if emit_impact {
            self.impact(dst);
        }
    }
}

/// Placeholder addresses for unlogged onward targets: first free addresses
/// in 192.112.113.0/24, skipping anything the roster already uses.
fn placeholder_targets(spec: &ScenarioSpec) -> BTreeMap<HostId, HostId> {
    let roster: BTreeSet<HostId> = spec.hosts.iter().map(|h| h.host.clone()).collect();
    let mut next = 1u32;
    let mut out = BTreeMap::new();
    for host in &spec.unlogged_propagation {
        let target = loop {
            let candidate = canonical_host(&format!("192.112.113.{next}"), None).unwrap();
            next += 1;
            if !roster.contains(&candidate) {
                break candidate;
            }
        };
        out.insert(host.clone(), target);
    }
    out
}

/// Renders the scenario into `out_dir`: four host logs per host, one IDS
/// file, and `manifest.json` recording the files and the expected verdicts.
pub fn generate_logs(spec: &ScenarioSpec, out_dir: &Path) -> Result<Manifest, ScenarioError> {
    spec.validate()?;
    let mut emitter = Emitter::new(spec);
    let placeholders = placeholder_targets(spec);
    let mut notes = Vec::new();
    let mut probed: BTreeSet<HostId> = BTreeSet::new();

    let hosts: Vec<HostId> = spec.hosts.iter().map(|h| h.host.clone()).collect();
    for host in &hosts {
        emitter.noise(host);
    }
    for sh in &spec.hosts {
        if !sh.initially_infected {
            continue;
        }
        if spec.emit_impact_events {
            emitter.impact(&sh.host);
        }
        if let Some(target) = placeholders.get(&sh.host) {
            emitter.placeholder_probe(&sh.host, target);
            probed.insert(sh.host.clone());
        }
    }
    for attack in &spec.attacks {
        emitter.attack(&attack.src, &attack.dst, attack.outcome, spec.emit_impact_events);
        if attack.outcome == Outcome::Complete {
            if let Some(target) = placeholders.get(&attack.dst) {
                if probed.insert(attack.dst.clone()) {
                    emitter.placeholder_probe(&attack.dst, target);
                }
            }
        }
    }
    for (host, target) in &placeholders {
        notes.push(format!(
            "{} probes unlogged neighbor {} after infection; only outbound scan and backdoor traces exist for it",
            host.name().unwrap_or(&host.ip_string()).to_string(),
            target.ip_string(),
        ));
    }

    std::fs::create_dir_all(out_dir)
        .map_err(|source| ScenarioError::Io { path: out_dir.display().to_string(), source })?;
    let mut file_names = Vec::new();
    for (name, lines) in &emitter.files {
        let path = out_dir.join(name);
        let body = lines.join("\n") + "\n";
        std::fs::write(&path, body)
            .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
        file_names.push(name.clone());
    }

    let expected = spec
        .expected_outcomes()
        .into_iter()
        .map(|(host, exp)| {
            (host.ip_string(), ManifestHost { name: exp.name, role: exp.role, level: exp.level })
        })
        .collect();
    let manifest = Manifest {
        seed: spec.seed,
        transfer_port: spec.transfer_port,
        base_time: spec.base_time.format("%Y-%m-%dT%H:%M:%S").to_string(),
        emit_impact_events: spec.emit_impact_events,
        files: file_names,
        expected,
        notes,
    };
    let manifest_path = out_dir.join("manifest.json");
    let body = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    std::fs::write(&manifest_path, body)
        .map_err(|source| ScenarioError::Io { path: manifest_path.display().to_string(), source })?;
    Ok(manifest)
}
