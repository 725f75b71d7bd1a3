//! Command-line frontend: replays JSONL traces or named scenarios through
//! the engine and emits channel reports.
//!
//! Exit codes: 0 success (simulate: all expectations pass), 1 expectation
//! failure, 2 bad input (malformed trace, unknown profile/scenario, IO),
//! 3 input-stream exhaustion with `--on-exhaustion halt`.

use std::fs;
use std::path::Path;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use dmascope::engine::{Engine, EngineError};
use dmascope::input_source::{Exhaustion, InputProvider, StreamProvider, ZeroProvider};
use dmascope::memory_map::{builtin_profiles, profile_by_name, MemoryMapProfile};
use dmascope::scenario::{builtin_scenario, builtin_scenarios, run_scenario, Scenario, ScenarioError};
use dmascope::trace::{parse_trace, write_trace, TraceError};

#[derive(Parser)]
#[command(name = "dmascope", version, about = "DMA input channel detection over firmware memory-access traces")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Replay a JSONL trace through the engine and write a channel report.
    Replay {
        #[arg(long)]
        trace: String,
        /// Built-in profile name or path to a profile file.
        #[arg(long, default_value = "generic-armv7m-512mb")]
        profile: String,
        /// Input bytes: `zeros` or `file:PATH`.
        #[arg(long, default_value = "zeros")]
        input: String,
        #[arg(long, value_enum, default_value_t = ExhaustionArg::Zeropad)]
        on_exhaustion: ExhaustionArg,
        #[arg(long)]
        report: String,
    },
    /// Run a built-in scenario (or scenario file) and check its expectations.
    Simulate {
        /// Built-in scenario name or path to a scenario JSON file.
        name_or_path: String,
        #[arg(long, default_value = "zeros")]
        input: String,
        #[arg(long, value_enum, default_value_t = ExhaustionArg::Zeropad)]
        on_exhaustion: ExhaustionArg,
        #[arg(long)]
        report: String,
    },
    /// Write a built-in scenario's event stream as a JSONL trace.
    Export {
        name: String,
        #[arg(long)]
        trace: String,
    },
    /// Memory-map profile commands.
    Profiles {
        #[command(subcommand)]
        cmd: ListCmd,
    },
    /// Scenario commands.
    Scenarios {
        #[command(subcommand)]
        cmd: ListCmd,
    },
}

#[derive(Subcommand)]
enum ListCmd {
    List,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExhaustionArg {
    Zeropad,
    Halt,
}

impl From<ExhaustionArg> for Exhaustion {
    fn from(v: ExhaustionArg) -> Self {
        match v {
            ExhaustionArg::Zeropad => Exhaustion::ZeroPad,
            ExhaustionArg::Halt => Exhaustion::Halt,
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.cmd {
        Cmd::Replay {
            trace,
            profile,
            input,
            on_exhaustion,
            report,
        } => cmd_replay(&trace, &profile, &input, on_exhaustion.into(), &report),
        Cmd::Simulate {
            name_or_path,
            input,
            on_exhaustion,
            report,
        } => cmd_simulate(&name_or_path, &input, on_exhaustion.into(), &report),
        Cmd::Export { name, trace } => cmd_export(&name, &trace),
        Cmd::Profiles { cmd: ListCmd::List } => {
            for p in builtin_profiles() {
                let ram: Vec<String> = p.ram.iter().map(|r| r.to_string()).collect();
                let flash: Vec<String> = p.flash.iter().map(|r| r.to_string()).collect();
                println!(
                    "{}  mmio {}  ram {}  flash {}",
                    p.name,
                    p.mmio,
                    ram.join(","),
                    flash.join(",")
                );
            }
            Ok(0)
        }
        Cmd::Scenarios { cmd: ListCmd::List } => {
            for s in builtin_scenarios() {
                println!("{}  ({}, {} steps)", s.name, s.profile, s.steps.len());
            }
            Ok(0)
        }
    }
}

fn resolve_profile(name: &str) -> Result<MemoryMapProfile, Failure> {
    if let Ok(p) = profile_by_name(name) {
        return Ok(p);
    }
    if Path::new(name).exists() {
        let text = fs::read_to_string(name)
            .map_err(|e| fail(2, format!("cannot read profile {name}: {e}")))?;
        return MemoryMapProfile::load(&text).map_err(|e| fail(2, e.to_string()));
    }
    Err(fail(2, format!("unknown profile {name:?}")))
}

fn build_provider(input: &str, on_exhaustion: Exhaustion) -> Result<Box<dyn InputProvider>, Failure> {
    if input == "zeros" {
        return Ok(Box::new(ZeroProvider));
    }
    if let Some(path) = input.strip_prefix("file:") {
        let bytes =
            fs::read(path).map_err(|e| fail(2, format!("cannot read input {path}: {e}")))?;
        return Ok(Box::new(StreamProvider::new(bytes, on_exhaustion)));
    }
    Err(fail(2, format!(
        "bad --input {input:?}: expected `zeros` or `file:PATH`"
    )))
}

fn write_file(path: &str, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| fail(2, format!("cannot write {path}: {e}")))
}

fn cmd_replay(
    trace_path: &str,
    profile_name: &str,
    input: &str,
    on_exhaustion: Exhaustion,
    report_path: &str,
) -> Result<u8, Failure> {
    let profile = resolve_profile(profile_name)?;
    let provider = build_provider(input, on_exhaustion)?;
    let text = fs::read_to_string(trace_path)
        .map_err(|e| fail(2, format!("cannot read trace {trace_path}: {e}")))?;
    let events = parse_trace(&text).map_err(|e| match e {
        TraceError::Malformed { .. } => fail(2, format!("{trace_path}: {e}")),
        TraceError::Io(e) => fail(2, format!("{trace_path}: {e}")),
    })?;
    let mut engine = Engine::new(profile, provider);
    for event in events {
        engine.process_event(event).map_err(|e| match e {
            EngineError::Exhausted(_) => fail(3, format!("seq {}: {e}", event.seq)),
            other => fail(2, format!("seq {}: {other}", event.seq)),
        })?;
    }
    engine.finish();
    let report = engine.report();
    write_file(report_path, &report.to_json())?;
    let s = &report.session;
    println!(
        "{}: {} events, {} configs, {} input / {} output channels, {} injections",
        trace_path, s.events, s.configs_detected, s.input_channels, s.output_channels, s.injections
    );
    Ok(0)
}

fn resolve_scenario(name_or_path: &str) -> Result<Scenario, Failure> {
    match builtin_scenario(name_or_path) {
        Ok(s) => Ok(s),
        Err(ScenarioError::Unknown(_)) if Path::new(name_or_path).exists() => {
            let text = fs::read_to_string(name_or_path)
                .map_err(|e| fail(2, format!("cannot read scenario {name_or_path}: {e}")))?;
            Scenario::from_json(&text).map_err(|e| fail(2, e.to_string()))
        }
        Err(e) => Err(fail(2, e.to_string())),
    }
}

fn cmd_simulate(
    name_or_path: &str,
    input: &str,
    on_exhaustion: Exhaustion,
    report_path: &str,
) -> Result<u8, Failure> {
    let scenario = resolve_scenario(name_or_path)?;
    let profile = scenario
        .resolve_profile()
        .map_err(|e| fail(2, e.to_string()))?;
    let provider = build_provider(input, on_exhaustion)?;
    let mut engine = Engine::new(profile, provider);
    let report = run_scenario(&scenario, &mut engine).map_err(|e| match e {
        ScenarioError::Engine(EngineError::Exhausted(_)) => fail(3, e.to_string()),
        other => fail(2, other.to_string()),
    })?;
    let mut json = serde_json::to_string_pretty(&report).expect("scenario report serializes");
    json.push('\n');
    // The report is written even when expectations fail.
    write_file(report_path, &json)?;
    for v in &report.expectations {
        let mark = if v.pass { "pass" } else { "FAIL" };
        println!(
            "[{mark}] {}: expected {}, got {}",
            v.check, v.expected, v.actual
        );
    }
    println!(
        "{}: {}",
        report.name,
        if report.passed { "pass" } else { "FAIL" }
    );
    Ok(if report.passed { 0 } else { 1 })
}

fn cmd_export(name: &str, trace_path: &str) -> Result<u8, Failure> {
    let scenario = builtin_scenario(name).map_err(|e| fail(2, e.to_string()))?;
    let text = write_trace(&scenario.events());
    write_file(trace_path, &text)?;
    println!("{name}: {} events written to {trace_path}", scenario.events().len());
    Ok(0)
}
