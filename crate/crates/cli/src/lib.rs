//! The `comet` command: run ATM scenarios, check architecture files, and
//! watch each connector pattern at work.
//!
//! Exit codes: 0 success, 1 validation or scenario failure, 2 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use atm::system::RunConfig;
use comet::architecture::{parse_spec, validate};

pub mod demo;

use demo::DemoRegistry;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "comet",
    version,
    about = "Message-passing components, connectors and the ATM case study"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a customer scenario on one or more ATMs sharing a bank server
    Run(RunArgs),
    /// Parse and check an architecture file
    Validate { file: PathBuf },
    /// Run one connector pattern and print its connector events
    Demo {
        /// buffer, queue, reply, callback or periodic
        #[arg(long)]
        pattern: String,
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..=10_000))]
        n: u32,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub arch: PathBuf,
    #[arg(long)]
    pub accounts: PathBuf,
    #[arg(long)]
    pub scenario: PathBuf,
    /// Every ATM runs its own copy of the scenario
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..=64))]
    pub atms: u32,
    #[arg(long = "timeout-ms", default_value_t = 10_000)]
    pub timeout_ms: u64,
    /// Write the full trace here, one tab-separated event per line
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Seeds device timing jitter only; no checked property depends on it
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the ATM log here
    #[arg(long)]
    pub log: Option<PathBuf>,
}

/// Parse `args` (program name first) and execute. Returns the exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                // --help and --version
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    let outcome = match cli.command {
        Command::Run(args) => run(&args, out),
        Command::Validate { file } => check(&file, out),
        Command::Demo { pattern, n } => return show_demo(&pattern, n as usize, out, err),
    };
    match outcome {
        Ok(code) => code,
        Err(message) => {
            let _ = writeln!(err, "error: {message}");
            EXIT_FAILURE
        }
    }
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

fn write_file(path: &Path, text: &str) -> Result<(), String> {
    std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn run(args: &RunArgs, out: &mut dyn Write) -> Result<i32, String> {
    let arch = read(&args.arch)?;
    let accounts = read(&args.accounts)?;
    let scenario = read(&args.scenario)?;
    let config = RunConfig {
        timeout: Duration::from_millis(args.timeout_ms),
        seed: args.seed,
        log_path: args.log.clone(),
        ..RunConfig::default()
    };
    let report = atm::run_scenario(&arch, &accounts, &scenario, args.atms as usize, &config)
        .map_err(|e| e.to_string())?;
    if let Some(path) = &args.trace {
        write_file(path, &report.trace.export())?;
    }
    let _ = writeln!(
        out,
        "sessions: {} of {} finished on {} ATM(s)",
        report.sessions_ended, report.sessions_expected, args.atms
    );
    let _ = writeln!(out, "dispensed: {}", report.dispensed_total());
    let _ = writeln!(out, "receipts: {}", report.receipts.len());
    let _ = writeln!(out, "log lines: {}", report.log.len());
    let _ = writeln!(out, "trace events: {}", report.trace.len());
    let _ = writeln!(out, "conservation: {}", report.conservation);
    for line in report.diagnostics() {
        let _ = writeln!(out, "problem: {line}");
    }
    let _ = writeln!(out, "{}", if report.succeeded() { "ok" } else { "FAILED" });
    Ok(report.exit_code())
}

fn check(path: &Path, out: &mut dyn Write) -> Result<i32, String> {
    let text = read(path)?;
    let spec = parse_spec(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let findings = validate(&spec);
    for f in &findings {
        let _ = writeln!(out, "{f}");
    }
    let errors = findings.iter().filter(|f| f.is_error()).count();
    let _ = writeln!(
        out,
        "{} components, {} connectors: {errors} errors, {} warnings",
        spec.components.len(),
        spec.connectors.len(),
        findings.len() - errors
    );
    Ok(if errors == 0 { EXIT_OK } else { EXIT_FAILURE })
}

fn show_demo(pattern: &str, n: usize, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let registry = DemoRegistry::standard();
    let Some(demo) = registry.get(pattern) else {
        let _ = writeln!(
            err,
            "error: unknown pattern `{pattern}`; expected one of: {}",
            registry.names().join(", ")
        );
        let _ = writeln!(err, "\nUsage: comet demo --pattern <PATTERN> [--n <N>]");
        return EXIT_USAGE;
    };
    let _ = writeln!(out, "# {}: {}", demo.name(), demo.about());
    match demo.run(n) {
        Ok(run) => {
            let _ = write!(out, "{}", run.render());
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_FAILURE
        }
    }
}
