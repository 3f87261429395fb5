//! Trace patterns and the ruleset text format. A pattern is a conjunction of
//! attribute predicates against one log source; alternation is expressed by
//! giving several patterns the same category.

mod evidence;

pub use evidence::{build_evidence, match_event, EvidenceCell, EvidenceMatrix};

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::model::{Attr, LogSource};

/// Which side of an attack a pattern describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Perspective {
    Victim,
    Attacker,
}

impl Perspective {
    pub fn as_str(self) -> &'static str {
        match self {
            Perspective::Victim => "victim",
            Perspective::Attacker => "attacker",
        }
    }
}

impl fmt::Display for Perspective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Host-level patterns read a host's own logs; network-level patterns read
/// sensor output and attribute the match to an address inside the event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PatternLevel {
    Host,
    Network,
}

impl PatternLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            PatternLevel::Host => "host",
            PatternLevel::Network => "network",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TraceCategory {
    Scan,
    ExploitBackdoor,
    ExploitFtp,
    ExploitTransfer,
    Security,
    Impact,
    System,
    Application,
    Activity,
    Alarm,
}

impl TraceCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceCategory::Scan => "scan",
            TraceCategory::ExploitBackdoor => "exploit_backdoor",
            TraceCategory::ExploitFtp => "exploit_ftp",
            TraceCategory::ExploitTransfer => "exploit_transfer",
            TraceCategory::Security => "security",
            TraceCategory::Impact => "impact",
            TraceCategory::System => "system",
            TraceCategory::Application => "application",
            TraceCategory::Activity => "activity",
            TraceCategory::Alarm => "alarm",
        }
    }

    fn from_str(s: &str) -> Option<Self> {
        Some(match s {
            "scan" => TraceCategory::Scan,
            "exploit_backdoor" => TraceCategory::ExploitBackdoor,
            "exploit_ftp" => TraceCategory::ExploitFtp,
            "exploit_transfer" => TraceCategory::ExploitTransfer,
            "security" => TraceCategory::Security,
            "impact" => TraceCategory::Impact,
            "system" => TraceCategory::System,
            "application" => TraceCategory::Application,
            "activity" => TraceCategory::Activity,
            "alarm" => TraceCategory::Alarm,
            _ => return None,
        })
    }

    /// The exploit sequence categories, in protocol order.
    pub fn chain() -> [TraceCategory; 4] {
        [
            TraceCategory::Scan,
            TraceCategory::ExploitBackdoor,
            TraceCategory::ExploitFtp,
            TraceCategory::ExploitTransfer,
        ]
    }
}

impl fmt::Display for TraceCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which host a successful match is credited to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HostBinding {
    Owner,
    SrcIp,
    DstIp,
}

impl HostBinding {
    pub fn as_str(self) -> &'static str {
        match self {
            HostBinding::Owner => "owner",
            HostBinding::SrcIp => "src_ip",
            HostBinding::DstIp => "dst_ip",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredicateOp {
    Eq,
    Glob,
    PortClass,
}

/// One attribute test. A missing attribute never matches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttrPredicate {
    pub attr: Attr,
    pub op: PredicateOp,
    pub value: String,
}

impl AttrPredicate {
    pub fn matches(&self, actual: &str) -> bool {
        match self.op {
            PredicateOp::Eq => actual == self.value,
            PredicateOp::Glob => glob_match(&self.value, actual),
            PredicateOp::PortClass => match (port_class_bounds(&self.value), actual.parse::<u32>()) {
                (Some((lo, hi)), Ok(port)) => port >= lo && port <= hi,
                _ => false,
            },
        }
    }
}

impl fmt::Display for AttrPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.op {
            PredicateOp::Eq => write!(f, "{}={}", self.attr, self.value),
            PredicateOp::Glob => write!(f, "{}=~{}", self.attr, self.value),
            PredicateOp::PortClass => write!(f, "{}={}", self.attr, self.value),
        }
    }
}

/// Matches strings against a pattern where `*` spans any run of bytes.
/// No other metacharacters; comparison is case-sensitive.
pub fn glob_match(pattern: &str, value: &str) -> bool {
    let p = pattern.as_bytes();
    let v = value.as_bytes();
    let (mut pi, mut vi) = (0usize, 0usize);
    let mut star: Option<usize> = None;
    let mut mark = 0usize;
    while vi < v.len() {
        if pi < p.len() && p[pi] == b'*' {
            star = Some(pi);
            mark = vi;
            pi += 1;
        } else if pi < p.len() && p[pi] == v[vi] {
            pi += 1;
            vi += 1;
        } else if let Some(s) = star {
            pi = s + 1;
            mark += 1;
            vi = mark;
        } else {
            return false;
        }
    }
    while pi < p.len() && p[pi] == b'*' {
        pi += 1;
    }
    pi == p.len()
}

/// Bounds of a digit-class port value: `3xxx` covers 3000..=3999.
/// Returns None unless the value is decimal digits followed by `x`s and the
/// class fits in the port space.
pub fn port_class_bounds(value: &str) -> Option<(u32, u32)> {
    let digits_end = value.bytes().take_while(|b| b.is_ascii_digit()).count();
    if digits_end == 0 || digits_end == value.len() {
        return None;
    }
    if !value[digits_end..].bytes().all(|b| b == b'x') {
        return None;
    }
    let wildcards = (value.len() - digits_end) as u32;
    let prefix: u32 = value[..digits_end].parse().ok()?;
    let span = 10u32.checked_pow(wildcards)?;
    let lo = prefix.checked_mul(span)?;
    let hi = lo.checked_add(span - 1)?;
    if hi > 65535 {
        return None;
    }
    Some((lo, hi))
}

fn is_port_class_value(value: &str) -> bool {
    value.contains('x') && port_class_bounds(value).is_some()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TracePattern {
    pub id: String,
    pub perspective: Perspective,
    pub level: PatternLevel,
    pub category: TraceCategory,
    pub source: LogSource,
    pub binding: HostBinding,
    pub predicates: Vec<AttrPredicate>,
}

/// A validated pattern collection: unique ids, both perspectives present,
/// bindings coherent with pattern level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleSet {
    patterns: Vec<TracePattern>,
}

impl RuleSet {
    pub fn new(patterns: Vec<TracePattern>) -> Result<Self, RulesetError> {
        if patterns.is_empty() {
            return Err(RulesetError::Empty);
        }
        let mut seen = BTreeSet::new();
        for p in &patterns {
            if !seen.insert(p.id.clone()) {
                return Err(RulesetError::DuplicateId(p.id.clone()));
            }
            let coherent = match p.level {
                PatternLevel::Host => p.binding == HostBinding::Owner,
                PatternLevel::Network => p.binding != HostBinding::Owner,
            };
            if !coherent {
                return Err(RulesetError::BadBinding {
                    pattern: p.id.clone(),
                    level: p.level.as_str(),
                    binding: p.binding.as_str(),
                });
            }
        }
        for perspective in [Perspective::Victim, Perspective::Attacker] {
            if !patterns.iter().any(|p| p.perspective == perspective) {
                return Err(RulesetError::MissingPerspective(perspective));
            }
        }
        Ok(RuleSet { patterns })
    }

    pub fn patterns(&self) -> &[TracePattern] {
        &self.patterns
    }

    pub fn get(&self, id: &str) -> Option<&TracePattern> {
        self.patterns.iter().find(|p| p.id == id)
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RulesetError {
    #[error("ruleset defines no patterns")]
    Empty,
    #[error("duplicate pattern id {0:?}")]
    DuplicateId(String),
    #[error("pattern {pattern}: unknown key {key:?}")]
    UnknownKey { pattern: String, key: String },
    #[error("pattern {pattern}: bad predicate: {detail}")]
    BadPredicate { pattern: String, detail: String },
    #[error("pattern {pattern}: missing required key {key:?}")]
    MissingKey { pattern: String, key: &'static str },
    #[error("pattern {pattern}: bad value {value:?} for key {key:?}")]
    BadValue { pattern: String, key: &'static str, value: String },
    #[error("pattern {pattern}: {level}-level patterns cannot bind {binding}")]
    BadBinding { pattern: String, level: &'static str, binding: &'static str },
    #[error("ruleset has no {0} patterns")]
    MissingPerspective(Perspective),
    #[error("line {line}: {detail}")]
    Syntax { line: u64, detail: String },
}

/// Text shipped with the binary; `default_ruleset` parses exactly this.
pub const DEFAULT_RULESET_TEXT: &str = include_str!("../../rules/default.rules");

/// The built-in worm trace patterns.
pub fn default_ruleset() -> RuleSet {
    parse_ruleset(DEFAULT_RULESET_TEXT).expect("embedded default ruleset is valid")
}

/// Parses the block-oriented ruleset format:
///
/// ```text
/// pattern <id>
///   perspective: victim
///   level: host
///   category: scan
///   source: firewall
///   match: action=OPEN-INBOUND protocol=TCP dst_port=445
/// ```
///
/// `match:` terms are conjunctive `attr=value` tests. A `~` before the value
/// makes it a glob (`*` wildcard only); digits followed by `x`s on a port
/// attribute make it a port class; double quotes keep spaces in a value and
/// force a literal comparison. Omitting `match:` yields the always-true
/// conjunction. `binds:` defaults to `owner` for host-level patterns and is
/// required (`src_ip` or `dst_ip`) for network-level ones.
pub fn parse_ruleset(text: &str) -> Result<RuleSet, RulesetError> {
    struct Block {
        id: String,
        perspective: Option<Perspective>,
        level: Option<PatternLevel>,
        category: Option<TraceCategory>,
        source: Option<LogSource>,
        binding: Option<HostBinding>,
        predicates: Vec<AttrPredicate>,
    }

    fn flush(block: Block) -> Result<TracePattern, RulesetError> {
        let missing = |key| RulesetError::MissingKey { pattern: block.id.clone(), key };
        let perspective = block.perspective.ok_or_else(|| missing("perspective"))?;
        let level = block.level.ok_or_else(|| missing("level"))?;
        let category = block.category.ok_or_else(|| missing("category"))?;
        let source = block.source.ok_or_else(|| missing("source"))?;
        let binding = match (level, block.binding) {
            (PatternLevel::Host, None) => HostBinding::Owner,
            (PatternLevel::Network, None) => return Err(missing("binds")),
            (_, Some(b)) => b,
        };
        Ok(TracePattern {
            id: block.id,
            perspective,
            level,
            category,
            source,
            binding,
            predicates: block.predicates,
        })
    }

    let mut patterns = Vec::new();
    let mut current: Option<Block> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx as u64 + 1;
        let line = raw.trim_end_matches('\r');
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if !line.starts_with(|c: char| c.is_whitespace()) {
            if let Some(block) = current.take() {
                patterns.push(flush(block)?);
            }
            let id = trimmed
                .strip_prefix("pattern")
                .map(str::trim)
                .filter(|rest| !rest.is_empty() && !rest.contains(char::is_whitespace))
                .ok_or_else(|| RulesetError::Syntax {
                    line: line_no,
                    detail: format!("expected `pattern <id>`, got {trimmed:?}"),
                })?;
            current = Some(Block {
                id: id.to_string(),
                perspective: None,
                level: None,
                category: None,
                source: None,
                binding: None,
                predicates: Vec::new(),
            });
            continue;
        }
        let block = current.as_mut().ok_or_else(|| RulesetError::Syntax {
            line: line_no,
            detail: "indented line outside a pattern block".to_string(),
        })?;
        let (key, value) = trimmed.split_once(':').ok_or_else(|| RulesetError::Syntax {
            line: line_no,
            detail: format!("expected `key: value`, got {trimmed:?}"),
        })?;
        let key = key.trim();
        let value = value.trim();
        let bad_value = |key| RulesetError::BadValue {
            pattern: block.id.clone(),
            key,
            value: value.to_string(),
        };
        match key {
            "perspective" => {
                block.perspective = Some(match value {
                    "victim" => Perspective::Victim,
                    "attacker" => Perspective::Attacker,
                    _ => return Err(bad_value("perspective")),
                });
            }
            "level" => {
                block.level = Some(match value {
                    "host" => PatternLevel::Host,
                    "network" => PatternLevel::Network,
                    _ => return Err(bad_value("level")),
                });
            }
            "category" => {
                block.category = Some(TraceCategory::from_str(value).ok_or_else(|| bad_value("category"))?);
            }
            "source" => {
                block.source = Some(LogSource::from_str(value).ok_or_else(|| bad_value("source"))?);
            }
            "binds" => {
                block.binding = Some(match value {
                    "owner" => HostBinding::Owner,
                    "src_ip" => HostBinding::SrcIp,
                    "dst_ip" => HostBinding::DstIp,
                    _ => return Err(bad_value("binds")),
                });
            }
            "match" => {
                block.predicates = parse_match_terms(&block.id, value)?;
            }
            _ => {
                return Err(RulesetError::UnknownKey {
                    pattern: block.id.clone(),
                    key: key.to_string(),
                })
            }
        }
    }
    if let Some(block) = current.take() {
        patterns.push(flush(block)?);
    }
    RuleSet::new(patterns)
}

fn parse_match_terms(pattern: &str, text: &str) -> Result<Vec<AttrPredicate>, RulesetError> {
    let bad = |detail: String| RulesetError::BadPredicate { pattern: pattern.to_string(), detail };
    let mut terms = Vec::new();
    let mut rest = text.trim();
    while !rest.is_empty() {
        let (attr_text, after) = rest
            .split_once('=')
            .ok_or_else(|| bad(format!("term {rest:?} is not attr=value")))?;
        let attr = Attr::from_str(attr_text.trim())
            .ok_or_else(|| bad(format!("unknown attribute {:?}", attr_text.trim())))?;
        let (glob, after) = match after.strip_prefix('~') {
            Some(after) => (true, after),
            None => (false, after),
        };
        let (value, quoted, after) = if let Some(after) = after.strip_prefix('"') {
            let end = after
                .find('"')
                .ok_or_else(|| bad(format!("unterminated quote in term for {attr}")))?;
            (&after[..end], true, after[end + 1..].trim_start())
        } else {
            let end = after.find(char::is_whitespace).unwrap_or(after.len());
            (&after[..end], false, after[end..].trim_start())
        };
        if value.is_empty() {
            return Err(bad(format!("empty value for {attr}")));
        }
        let op = if glob {
            PredicateOp::Glob
        } else if attr.is_port() && !quoted && is_port_class_value(value) {
            PredicateOp::PortClass
        } else {
            PredicateOp::Eq
        };
        if attr.is_port() && !glob && op == PredicateOp::Eq && value.parse::<u16>().is_err() {
            return Err(bad(format!("port value {value:?} is not a port or port class")));
        }
        terms.push(AttrPredicate { attr, op, value: value.to_string() });
        rest = after;
    }
    Ok(terms)
}
