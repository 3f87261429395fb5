//! Log file parsers. Each file declares its own kind in a `#Log:` header;
//! host logs also name their owner in `#Host:`. Later `#` lines are comments.
//! Lenient parsing skips bad lines and records a diagnostic per skip; strict
//! parsing aborts on the first bad line.

mod event_log;
mod firewall;
mod ids;

pub use event_log::parse_event_log;
pub use firewall::parse_firewall_log;
pub use ids::parse_ids_alert_log;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::model::{canonical_host, sort_events, HostId, LogSource, NormalizedEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseMode {
    Lenient,
    Strict,
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}: {reason}")]
    MalformedLine { path: String, line: u64, reason: String },
    #[error("{path}: missing required {directive} header")]
    MissingHeader { path: String, directive: &'static str },
    #[error("{path}: {directive} header not allowed here")]
    UnexpectedHeader { path: String, directive: &'static str },
    #[error("{path}: unknown log kind {kind:?}")]
    UnknownLogKind { path: String, kind: String },
}

/// One skipped line in lenient mode.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct Diagnostic {
    pub file: String,
    pub line: u64,
    pub message: String,
}

/// Identity of a parsed file: what it declared itself to be.
#[derive(Debug, Clone)]
pub struct LogFile {
    pub path: String,
    pub declared_kind: LogSource,
    pub declared_host: Option<HostId>,
}

/// Output of one file parse.
#[derive(Debug)]
pub struct ParsedLog {
    pub file: LogFile,
    pub events: Vec<NormalizedEvent>,
    pub skipped: Vec<Diagnostic>,
}

/// Everything load_corpus learned: the merged event list in canonical order,
/// skip diagnostics, and a per-file summary for reporting.
#[derive(Debug, Default)]
pub struct Corpus {
    pub events: Vec<NormalizedEvent>,
    pub diagnostics: Vec<Diagnostic>,
    pub files: Vec<FileSummary>,
}

#[derive(Debug, Clone)]
pub struct FileSummary {
    pub name: String,
    pub kind: LogSource,
    pub host: Option<HostId>,
    pub events: usize,
}

/// The leading run of `#` lines, with recognized directives extracted.
pub(crate) struct HeaderBlock {
    pub log_kind: Option<String>,
    pub host: Option<(String, String)>,
    pub year: Option<String>,
    pub host_line: u64,
    pub lines: usize,
}

pub(crate) fn scan_header(text: &str) -> HeaderBlock {
    let mut block = HeaderBlock { log_kind: None, host: None, year: None, host_line: 0, lines: 0 };
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if !line.starts_with('#') {
            break;
        }
        block.lines = idx + 1;
        if let Some(rest) = line.strip_prefix("#Log:") {
            block.log_kind = Some(rest.trim().to_string());
        } else if let Some(rest) = line.strip_prefix("#Host:") {
            let mut tokens = rest.split_whitespace();
            if let (Some(name), Some(ip), None) = (tokens.next(), tokens.next(), tokens.next()) {
                block.host = Some((name.to_string(), ip.to_string()));
            }
            block.host_line = idx as u64 + 1;
        } else if let Some(rest) = line.strip_prefix("#Year:") {
            block.year = Some(rest.trim().to_string());
        }
    }
    block
}

pub(crate) fn declared_host(path: &str, header: &HeaderBlock) -> Result<HostId, ParseError> {
    let (name, ip) = header.host.clone().ok_or(ParseError::MissingHeader {
        path: path.to_string(),
        directive: "#Host",
    })?;
    canonical_host(&ip, Some(&name)).map_err(|e| ParseError::MalformedLine {
        path: path.to_string(),
        line: header.host_line,
        reason: e.to_string(),
    })
}

/// Iterates the data section: every line after the header block that is not
/// blank and not a `#` comment, together with its 1-based line number.
pub(crate) fn data_lines(text: &str) -> impl Iterator<Item = (u64, &str)> {
    let header_lines = scan_header(text).lines;
    text.lines().enumerate().filter_map(move |(idx, raw)| {
        if idx < header_lines {
            return None;
        }
        let line = raw.trim_end_matches('\r');
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            return None;
        }
        Some((idx as u64 + 1, line))
    })
}

/// Outcome access shared by the per-line parsers: in lenient mode a bad line
/// becomes a diagnostic, in strict mode it becomes the first error.
pub(crate) fn skip_or_abort(
    mode: ParseMode,
    out: &mut Vec<Diagnostic>,
    path: &str,
    line: u64,
    reason: String,
) -> Result<(), ParseError> {
    match mode {
        ParseMode::Lenient => {
            out.push(Diagnostic { file: path.to_string(), line, message: reason });
            Ok(())
        }
        ParseMode::Strict => Err(ParseError::MalformedLine { path: path.to_string(), line, reason }),
    }
}

fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Reads and parses one file, dispatching on its `#Log:` header.
pub fn load_file(path: &Path, mode: ParseMode) -> Result<ParsedLog, ParseError> {
    let label = file_label(path);
    let bytes = std::fs::read(path).map_err(|source| ParseError::Io { path: label.clone(), source })?;
    let text = String::from_utf8_lossy(&bytes);
    parse_any(&label, &text, mode)
}

/// Parses log text of any supported kind.
pub fn parse_any(path: &str, text: &str, mode: ParseMode) -> Result<ParsedLog, ParseError> {
    let header = scan_header(text);
    let kind = header.log_kind.clone().unwrap_or_default();
    match LogSource::from_str(&kind) {
        Some(LogSource::Firewall) => parse_firewall_log(path, text, mode),
        Some(LogSource::IdsAlert) => parse_ids_alert_log(path, text, mode),
        Some(_) => parse_event_log(path, text, mode),
        None => Err(ParseError::UnknownLogKind { path: path.to_string(), kind }),
    }
}

/// Loads a whole corpus. Events come back in canonical order and diagnostics
/// sorted by file and line, so the result does not depend on path order.
pub fn load_corpus(paths: &[PathBuf], mode: ParseMode) -> Result<Corpus, ParseError> {
    let mut corpus = Corpus::default();
    let mut by_name: BTreeMap<String, FileSummary> = BTreeMap::new();
    for path in paths {
        let parsed = load_file(path, mode)?;
        by_name.insert(
            parsed.file.path.clone(),
            FileSummary {
                name: parsed.file.path.clone(),
                kind: parsed.file.declared_kind,
                host: parsed.file.declared_host.clone(),
                events: parsed.events.len(),
            },
        );
        corpus.events.extend(parsed.events);
        corpus.diagnostics.extend(parsed.skipped);
    }
    sort_events(&mut corpus.events);
    corpus.diagnostics.sort_by(|a, b| (&a.file, a.line).cmp(&(&b.file, b.line)));
    corpus.files = by_name.into_values().collect();
    Ok(corpus)
}
