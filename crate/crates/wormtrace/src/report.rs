//! Pipeline orchestration and report rendering.
//!
//! `run_analysis` chains parse -> evidence -> classify -> chain and keeps
//! every intermediate, so renderers can show their work. All three renderers
//! are pure functions of the report; JSON and DOT are byte-deterministic for
//! identical corpus and ruleset content regardless of input file order.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::chain::{build_attack_chain, extract_edges, AttackChain, ChainLevel};
use crate::classify::{classify_all, ClassifyError, HostClassification};
use crate::model::{HostId, NormalizedEvent};
use crate::parse::{load_corpus, Diagnostic, FileSummary, ParseError, ParseMode};
use crate::rules::{build_evidence, EvidenceMatrix, RuleSet};

/// Identifies the ruleset a report was produced with.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RulesetInfo {
    /// Short label: "default" or the path the rules were loaded from.
    pub id: String,
    /// FNV-1a hash of the ruleset source text, 16 hex digits.
    pub hash: String,
    pub patterns: usize,
}

impl RulesetInfo {
    pub fn new(id: &str, source: &str, rules: &RuleSet) -> Self {
        RulesetInfo {
            id: id.to_string(),
            hash: format!("{:016x}", fnv1a64(source.as_bytes())),
            patterns: rules.patterns().len(),
        }
    }
}

/// 64-bit FNV-1a. Stable, dependency-free content fingerprint; this is an
/// identifier for humans diffing reports, not a security boundary.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Everything one analysis run produced.
#[derive(Debug)]
pub struct AnalysisReport {
    pub ruleset: RulesetInfo,
    pub files: Vec<FileSummary>,
    pub diagnostics: Vec<Diagnostic>,
    pub events: Vec<NormalizedEvent>,
    pub evidence: BTreeMap<HostId, EvidenceMatrix>,
    pub classifications: BTreeMap<HostId, HostClassification>,
    pub chain: AttackChain,
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
}

/// Runs the whole pipeline over the given log files.
pub fn run_analysis(
    paths: &[PathBuf],
    rules: &RuleSet,
    ruleset: RulesetInfo,
    mode: ParseMode,
) -> Result<AnalysisReport, AnalysisError> {
    let corpus = load_corpus(paths, mode)?;
    let evidence = build_evidence(&corpus.events, rules);
    let classifications = classify_all(&evidence)?;
    let edges = extract_edges(&corpus.events, &evidence);
    let chain = build_attack_chain(&classifications, &edges);
    Ok(AnalysisReport {
        ruleset,
        files: corpus.files,
        diagnostics: corpus.diagnostics,
        events: corpus.events,
        evidence,
        classifications,
        chain,
    })
}

// Normalization runs at seconds precision, so reports do too.
fn render_timestamp(t: chrono::NaiveDateTime) -> String {
    t.format("%Y-%m-%dT%H:%M:%S").to_string()
}

/// A witness rendered by content, not index, so reports stay comparable
/// across corpora that differ only in file ordering.
fn witness_value(events: &[NormalizedEvent], index: usize) -> Value {
    let e = &events[index];
    json!({
        "host": if e.host.is_sentinel() { Value::Null } else { Value::String(e.host.ip_string()) },
        "source": e.source.as_str(),
        "timestamp": render_timestamp(e.timestamp),
        "seq": e.seq,
    })
}

fn level_value(level: Option<ChainLevel>) -> Value {
    match level {
        Some(ChainLevel::Ranked(n)) => json!(n),
        Some(ChainLevel::Leaf) => json!("LEAF"),
        None => Value::Null,
    }
}

fn name_value(host: &HostId) -> Value {
    host.name().map_or(Value::Null, |n| Value::String(n.to_string()))
}

/// Structured rendering. Key order is fixed by construction; host maps key by
/// ip and rely on address ordering, so two runs over the same corpus bytes
/// and ruleset bytes serialize identically.
pub fn report_json(report: &AnalysisReport) -> String {
    let mut root = Map::new();
    root.insert(
        "ruleset".into(),
        json!({
            "id": report.ruleset.id,
            "hash": report.ruleset.hash,
            "patterns": report.ruleset.patterns,
        }),
    );

    let files: Vec<Value> = report
        .files
        .iter()
        .map(|f| {
            json!({
                "name": f.name,
                "kind": f.kind.as_str(),
                "host": f.host.as_ref().map_or(Value::Null, |h| Value::String(h.ip_string())),
                "events": f.events,
            })
        })
        .collect();
    let diagnostics: Vec<Value> = report
        .diagnostics
        .iter()
        .map(|d| json!({"file": d.file, "line": d.line, "message": d.message}))
        .collect();
    root.insert(
        "corpus".into(),
        json!({
            "files": files,
            "events": report.events.len(),
            "diagnostics": diagnostics,
        }),
    );

    let mut evidence = Map::new();
    for (host, matrix) in &report.evidence {
        let mut patterns = Map::new();
        for (id, cell) in &matrix.cells {
            let witnesses: Vec<Value> =
                cell.witnesses.iter().map(|&w| witness_value(&report.events, w)).collect();
            patterns.insert(
                id.clone(),
                json!({
                    "perspective": cell.perspective.as_str(),
                    "level": cell.level.as_str(),
                    "category": cell.category.as_str(),
                    "source": cell.source.as_str(),
                    "binds": cell.binding.as_str(),
                    "found": cell.found,
                    "witnesses": witnesses,
                }),
            );
        }
        evidence.insert(
            host.ip_string(),
            json!({"name": name_value(host), "patterns": Value::Object(patterns)}),
        );
    }
    root.insert("evidence".into(), Value::Object(evidence));

    let mut classifications = Map::new();
    for (host, class) in &report.classifications {
        let level = report.chain.nodes.get(host).and_then(|n| n.level);
        classifications.insert(
            host.ip_string(),
            json!({
                "name": name_value(host),
                "role": class.role.as_str(),
                "exploit_status": class.exploit_status.as_str(),
                "attacker_evidence": class.attacker_evidence,
                "level": level_value(level),
                "corroborations": class.corroborations,
            }),
        );
    }
    root.insert("classifications".into(), Value::Object(classifications));

    let edges: Vec<Value> = report
        .chain
        .edges
        .iter()
        .map(|e| {
            let witnesses: Vec<Value> =
                e.witnesses.iter().map(|&w| witness_value(&report.events, w)).collect();
            json!({
                "src": e.src.ip_string(),
                "dst": e.dst.ip_string(),
                "complete": e.complete,
                "first_seen": render_timestamp(e.first_seen),
                "witnesses": witnesses,
            })
        })
        .collect();
    let chain_diagnostics: Vec<Value> =
        report.chain.diagnostics.iter().map(|d| Value::String(d.to_string())).collect();
    root.insert("chain".into(), json!({"edges": edges, "diagnostics": chain_diagnostics}));

    serde_json::to_string_pretty(&Value::Object(root)).expect("report serializes") + "\n"
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

const COMPLETE_EDGE_LABEL: &str = "445,9996,5554,3xxx";
const ATTEMPT_EDGE_LABEL: &str = "445,9996";

/// Graph rendering: every chain node as a box, solid edges for complete
/// exploit sequences, dashed for attempts that stopped at the backdoor.
pub fn report_dot(report: &AnalysisReport) -> String {
    let mut out = String::from("digraph attack_chain {\n  rankdir=LR;\n  node [shape=box];\n");
    for (host, node) in &report.chain.nodes {
        let role = node.role.map_or("UNKNOWN", |r| r.as_str());
        let name = host.name().map(str::to_string).unwrap_or_else(|| host.ip_string());
        out.push_str(&format!(
            "  \"{}\" [label=\"{}\\n{}\\n{}\"];\n",
            dot_escape(&host.ip_string()),
            dot_escape(&name),
            host.ip(),
            role,
        ));
    }
    for edge in &report.chain.edges {
        let (style, label) = if edge.complete {
            ("solid", COMPLETE_EDGE_LABEL)
        } else {
            ("dashed", ATTEMPT_EDGE_LABEL)
        };
        out.push_str(&format!(
            "  \"{}\" -> \"{}\" [style={style}, label=\"{label}\"];\n",
            dot_escape(&edge.src.ip_string()),
            dot_escape(&edge.dst.ip_string()),
        ));
    }
    out.push_str("}\n");
    out
}

/// Terminal rendering: corpus totals, one verdict line per host, the edge
/// list, and any structural diagnostics.
pub fn report_text(report: &AnalysisReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "ruleset {} (hash {}, {} patterns)\n",
        report.ruleset.id, report.ruleset.hash, report.ruleset.patterns
    ));
    out.push_str(&format!(
        "corpus: {} files, {} events, {} skipped lines\n",
        report.files.len(),
        report.events.len(),
        report.diagnostics.len()
    ));
    out.push_str("hosts:\n");
    if report.classifications.is_empty() {
        out.push_str("  (none)\n");
    }
    for (host, class) in &report.classifications {
        let level = match report.chain.nodes.get(host).and_then(|n| n.level) {
            Some(l) => l.to_string(),
            None => "-".to_string(),
        };
        out.push_str(&format!(
            "  {:<15} {:<10} {:<16} exploit={:<9} attacker={:<3} level={}\n",
            host.ip_string(),
            host.name().unwrap_or("-"),
            class.role.as_str(),
            class.exploit_status.as_str(),
            if class.attacker_evidence { "yes" } else { "no" },
            level,
        ));
    }
    out.push_str("edges:\n");
    if report.chain.edges.is_empty() {
        out.push_str("  (none)\n");
    }
    for edge in &report.chain.edges {
        out.push_str(&format!(
            "  {} -> {}  {}  first seen {}  ({} witnesses)\n",
            edge.src.ip_string(),
            edge.dst.ip_string(),
            if edge.complete { "complete" } else { "attempt" },
            render_timestamp(edge.first_seen),
            edge.witnesses.len(),
        ));
    }
    if report.chain.diagnostics.is_empty() {
        out.push_str("diagnostics: none\n");
    } else {
        out.push_str("diagnostics:\n");
        for d in &report.chain.diagnostics {
            out.push_str(&format!("  {d}\n"));
        }
    }
    out
}
