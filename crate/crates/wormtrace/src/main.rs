//! Command-line front end.
//!
//! Exit codes: 0 when the requested work ran (findings never change the
//! code — this is an analysis tool, not a gate), 1 for usage errors
//! (arguments, ruleset problems), 2 when a corpus is unreadable or fails
//! strict parsing, or an output file cannot be written.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wormtrace::rules::DEFAULT_RULESET_TEXT;
use wormtrace::scenario::Builtin;
use wormtrace::{
    builtin_scenario, generate_logs, parse_ruleset, random_scenario, report_dot, report_json,
    report_text, run_analysis, AnalysisError, ParseMode, RuleSet, RulesetInfo,
};

#[derive(Parser)]
#[command(name = "wormtrace", version, about = "Correlates host and sensor logs into worm attack chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a directory of log files and report per-host verdicts
    Analyze {
        /// Directory holding *.log files (or a single log file)
        dir: PathBuf,
        /// Ruleset file to use instead of the built-in rules
        /// (falls back to the WORMTRACE_RULESET environment variable)
        #[arg(long)]
        ruleset: Option<PathBuf>,
        /// Fail on the first malformed line instead of skipping it
        #[arg(long)]
        strict: bool,
        /// Write the full structured report to this file
        #[arg(long, value_name = "FILE")]
        json: Option<PathBuf>,
        /// Write the attack graph in DOT form to this file
        #[arg(long, value_name = "FILE")]
        dot: Option<PathBuf>,
    },
    /// Generate a synthetic outbreak corpus with a ground-truth manifest
    Generate {
        /// A, B, C (fixed outbreaks) or "random"
        scenario: String,
        /// Directory to write the log files into
        #[arg(long)]
        out: PathBuf,
        /// Generator seed (defaults: scenario-specific for A/B/C, 0 for random)
        #[arg(long)]
        seed: Option<u64>,
        /// Host count for random scenarios
        #[arg(long)]
        hosts: Option<u32>,
        /// Attack count for random scenarios
        #[arg(long)]
        attacks: Option<u32>,
    },
    /// Inspect rulesets
    Rules {
        #[command(subcommand)]
        action: RulesAction,
    },
}

#[derive(Subcommand)]
enum RulesAction {
    /// Print the built-in ruleset
    Print,
}

/// What went wrong plus which contract it breaks (usage vs corpus).
struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError { code: 1, message: message.into() }
    }

    fn corpus(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            // An incomplete ruleset is an input the user chose, not a broken
            // corpus.
            AnalysisError::Classify(inner) => CliError::usage(inner.to_string()),
            AnalysisError::Parse(inner) => CliError::corpus(inner.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Analyze { dir, ruleset, strict, json, dot } => {
            analyze(&dir, ruleset.as_deref(), strict, json.as_deref(), dot.as_deref())
        }
        Command::Generate { scenario, out, seed, hosts, attacks } => {
            generate(&scenario, &out, seed, hosts, attacks)
        }
        Command::Rules { action: RulesAction::Print } => {
            print!("{DEFAULT_RULESET_TEXT}");
            Ok(())
        }
    }
}

/// Loads --ruleset, else $WORMTRACE_RULESET, else the built-in rules.
fn load_rules(flag: Option<&Path>) -> Result<(RuleSet, RulesetInfo), CliError> {
    let env_path = std::env::var_os("WORMTRACE_RULESET").map(PathBuf::from);
    let path = flag.map(Path::to_path_buf).or(env_path);
    let (id, text) = match path {
        Some(p) => {
            let text = std::fs::read_to_string(&p)
                .map_err(|e| CliError::usage(format!("ruleset {}: {e}", p.display())))?;
            (p.display().to_string(), text)
        }
        None => ("default".to_string(), DEFAULT_RULESET_TEXT.to_string()),
    };
    let rules = parse_ruleset(&text)
        .map_err(|e| CliError::usage(format!("ruleset {id}: {e}")))?;
    let info = RulesetInfo::new(&id, &text, &rules);
    Ok((rules, info))
}

/// A directory expands to its *.log files sorted by name, so analysis order
/// never depends on readdir order.
fn corpus_paths(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    if dir.is_file() {
        return Ok(vec![dir.to_path_buf()]);
    }
    let entries = std::fs::read_dir(dir)
        .map_err(|e| CliError::corpus(format!("{}: {e}", dir.display())))?;
    let mut paths = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| CliError::corpus(format!("{}: {e}", dir.display())))?;
        let path = entry.path();
        if path.is_file() && path.extension().is_some_and(|ext| ext == "log") {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

fn analyze(
    dir: &Path,
    ruleset: Option<&Path>,
    strict: bool,
    json: Option<&Path>,
    dot: Option<&Path>,
) -> Result<(), CliError> {
    let (rules, info) = load_rules(ruleset)?;
    let paths = corpus_paths(dir)?;
    let mode = if strict { ParseMode::Strict } else { ParseMode::Lenient };
    let report = run_analysis(&paths, &rules, info, mode)?;
    if let Some(path) = json {
        std::fs::write(path, report_json(&report))
            .map_err(|e| CliError::corpus(format!("{}: {e}", path.display())))?;
    }
    if let Some(path) = dot {
        std::fs::write(path, report_dot(&report))
            .map_err(|e| CliError::corpus(format!("{}: {e}", path.display())))?;
    }
    print!("{}", report_text(&report));
    Ok(())
}

fn generate(
    scenario: &str,
    out: &Path,
    seed: Option<u64>,
    hosts: Option<u32>,
    attacks: Option<u32>,
) -> Result<(), CliError> {
    let mut spec = if scenario.eq_ignore_ascii_case("random") {
        random_scenario(hosts.unwrap_or(8), attacks.unwrap_or(12), seed.unwrap_or(0))
            .map_err(|e| CliError::usage(e.to_string()))?
    } else {
        let which: Builtin = scenario.parse().map_err(CliError::usage)?;
        if hosts.is_some() || attacks.is_some() {
            return Err(CliError::usage("--hosts and --attacks apply only to random scenarios"));
        }
        builtin_scenario(which)
    };
    // For builtins the seed shapes only emission details (ports, filenames);
    // the scripted outbreak is fixed.
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    let manifest = generate_logs(&spec, out)
        .map_err(|e| CliError::corpus(format!("generate: {e}")))?;
    println!(
        "wrote {} log files and manifest.json to {}",
        manifest.files.len(),
        out.display()
    );
    Ok(())
}
