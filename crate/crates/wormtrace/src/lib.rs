//! Forensic log correlation engine. Parses host firewall/event logs and IDS
//! alerts into one normalized timeline, matches trace patterns against it,
//! classifies each host's infection state, and reconstructs who-infected-whom
//! attack chains. A scenario generator produces synthetic corpora with known
//! ground truth for end-to-end testing.

pub mod chain;
pub mod classify;
pub mod model;
pub mod parse;
pub mod report;
pub mod rules;
pub mod scenario;

pub use chain::{build_attack_chain, extract_edges, AttackChain, AttackEdge, ChainLevel};
pub use classify::{classify_all, classify_host, ExploitStatus, HostClassification, Role};
pub use model::{canonical_host, sort_events, Attr, HostId, LogSource, NormalizedEvent};
pub use parse::{load_corpus, Corpus, ParseError, ParseMode};
pub use report::{
    report_dot, report_json, report_text, run_analysis, AnalysisError, AnalysisReport, RulesetInfo,
};
pub use rules::{default_ruleset, parse_ruleset, RuleSet, RulesetError, TracePattern};
pub use scenario::{
    builtin_scenario, generate_logs, random_scenario, Builtin, Manifest, ScenarioError,
    ScenarioSpec,
};
