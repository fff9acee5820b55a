//! Command-line front end for the self-tallying voting protocol.
//!
//! Exit codes: 0 success, 1 protocol/audit failure, 2 usage error.
//! The group configuration comes from `--group`, then the `ST_GROUP`
//! environment variable, then the built-in `standard` parameters. A value
//! naming neither built-in configuration is read as a JSON parameter file.

mod bench;

use std::collections::BTreeSet;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use selftally::board::audit;
use selftally::engine::{run, EngineError, Scenario};
use selftally::group::Group;

#[derive(Parser)]
#[command(
    name = "selftally",
    version,
    about = "Self-tallying yes/no elections on a simulated bulletin board"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an election scenario; write the board transcript and a report
    Run(RunArgs),
    /// Independently re-verify a transcript and recompute its tally
    Audit(AuditArgs),
    /// Time each protocol phase across voter counts, emitting CSV
    Bench(BenchArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (JSON); explicit flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of voters
    #[arg(long)]
    voters: Option<u32>,
    /// Comma-separated 0/1 votes, one per voter (e.g. 1,0,1)
    #[arg(long)]
    votes: Option<String>,
    /// Comma-separated 1-based indices that abort after committing
    #[arg(long)]
    abort: Option<String>,
    /// Root seed; runs are deterministic given the seed
    #[arg(long)]
    seed: Option<u64>,
    /// Write the board transcript (JSON Lines) here
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the report JSON here instead of stdout
    #[arg(long)]
    report: Option<PathBuf>,
    /// Group config: "standard", "test-tiny", or a JSON parameter file
    #[arg(long)]
    group: Option<String>,
    /// Seal a block after this many admitted entries (0 = phase boundaries
    /// only)
    #[arg(long, default_value_t = 4)]
    auto_seal: u32,
}

#[derive(Args)]
struct AuditArgs {
    /// Board transcript (JSON Lines) produced by `run`
    transcript: PathBuf,
    /// Emit the full audit report as JSON (default: summary line)
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 3)]
    min: u32,
    #[arg(long, default_value_t = 12)]
    max: u32,
    #[arg(long, default_value_t = 3)]
    step: u32,
    #[arg(long, default_value_t = 20)]
    reps: u32,
    /// Group config; benchmarks default to the production-sized group
    #[arg(long)]
    group: Option<String>,
    /// Write CSV here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;

fn usage_error(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_USAGE)
}

fn failure(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_FAILURE)
}

fn resolve_group(flag: Option<&str>) -> Result<Group, String> {
    let choice = flag
        .map(str::to_string)
        .or_else(|| std::env::var("ST_GROUP").ok())
        .unwrap_or_else(|| "standard".to_string());
    if let Some(group) = Group::by_name(&choice) {
        return Ok(group);
    }
    let text = fs::read_to_string(&choice)
        .map_err(|e| format!("group {choice:?} is not built in and not readable: {e}"))?;
    Group::from_json(&text).map_err(|e| format!("group file {choice:?}: {e}"))
}

fn parse_csv_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, String> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.trim()
                .parse::<T>()
                .map_err(|_| format!("bad {what} entry {t:?}"))
        })
        .collect()
}

fn cmd_run(args: &RunArgs) -> ExitCode {
    let group = match resolve_group(args.group.as_deref()) {
        Ok(g) => g,
        Err(e) => return usage_error(&e),
    };
    let mut scenario = match &args.config {
        Some(path) => {
            let text = match fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => return usage_error(&format!("config {path:?}: {e}")),
            };
            match serde_json::from_str::<Scenario>(&text) {
                Ok(s) => s,
                Err(e) => return usage_error(&format!("config {path:?}: {e}")),
            }
        }
        None => {
            let (Some(voters), Some(votes)) = (args.voters, args.votes.as_deref()) else {
                return usage_error("either --config or both --voters and --votes are required");
            };
            let votes = match parse_csv_list::<u8>(votes, "vote") {
                Ok(v) => v,
                Err(e) => return usage_error(&e),
            };
            Scenario::honest(voters, votes, 0)
        }
    };
    // flags override config fields
    if let Some(n) = args.voters {
        scenario.n = n;
    }
    if let (Some(votes), Some(_)) = (args.votes.as_deref(), args.config.as_ref()) {
        match parse_csv_list::<u8>(votes, "vote") {
            Ok(v) => scenario.votes = v,
            Err(e) => return usage_error(&e),
        }
    }
    if let Some(abort) = args.abort.as_deref() {
        match parse_csv_list::<u32>(abort, "abort index") {
            Ok(v) => scenario.abort_set = v.into_iter().collect::<BTreeSet<u32>>(),
            Err(e) => return usage_error(&e),
        }
    }
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    if scenario.auto_seal.is_none() {
        scenario.auto_seal = (args.auto_seal > 0).then_some(args.auto_seal);
    }

    let output = match run(&group, &scenario) {
        Ok(o) => o,
        Err(EngineError::ScenarioInvalid(msg)) => return usage_error(&msg),
        Err(e) => return failure(&e.to_string()),
    };
    if let Some(path) = &args.out {
        if let Err(e) = fs::write(path, output.board.to_jsonl()) {
            return failure(&format!("writing transcript {path:?}: {e}"));
        }
    }
    let report_json = serde_json::to_string_pretty(&output.report).expect("report serializes");
    match &args.report {
        Some(path) => {
            if let Err(e) = fs::write(path, report_json) {
                return failure(&format!("writing report {path:?}: {e}"));
            }
        }
        None => println!("{report_json}"),
    }
    ExitCode::SUCCESS
}

fn cmd_audit(args: &AuditArgs) -> ExitCode {
    let text = match fs::read_to_string(&args.transcript) {
        Ok(t) => t,
        Err(e) => return usage_error(&format!("transcript {:?}: {e}", args.transcript)),
    };
    let report = match audit(&text) {
        Ok(r) => r,
        Err(e) => return failure(&format!("audit: {e}")),
    };
    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&report).expect("audit report serializes")
        );
    } else {
        let count = report
            .outcome
            .as_ref()
            .map(|o| o.result.count.to_string())
            .unwrap_or_else(|| "-".to_string());
        println!(
            "entries={} blocks={} chain_ok={} ok={} count={}",
            report.n_entries, report.n_blocks, report.chain_ok, report.ok, count
        );
        for f in &report.flagged {
            println!(
                "flagged: voter {} {} at height {}: recorded {}, recomputed {}",
                f.voter, f.phase, f.height, f.recorded, f.recomputed
            );
        }
        for p in &report.problems {
            println!("problem: {p}");
        }
    }
    if report.ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAILURE)
    }
}

fn cmd_bench(args: &BenchArgs) -> ExitCode {
    if args.min < 2 {
        return usage_error("--min must be at least 2");
    }
    if args.max < args.min || args.step == 0 {
        return usage_error("--max must be >= --min and --step positive");
    }
    if args.reps < 10 {
        return usage_error("--reps must be at least 10");
    }
    let group = match resolve_group(args.group.as_deref()) {
        Ok(g) => g,
        Err(e) => return usage_error(&e),
    };
    let records = bench::run_bench(&group, args.min, args.max, args.step, args.reps);
    debug_assert!(records.iter().all(|r| r.reps >= 10 && r.mean_ms > 0.0));
    let csv = bench::to_csv(&records);
    match &args.out {
        Some(path) => {
            if let Err(e) = fs::write(path, csv) {
                return failure(&format!("writing csv {path:?}: {e}"));
            }
        }
        None => print!("{csv}"),
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Audit(args) => cmd_audit(args),
        Command::Bench(args) => cmd_bench(args),
    }
}
