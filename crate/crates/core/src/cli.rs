//! Command-line front end: `run`, `trace`, `gas-report`, `verify`.
//!
//! Exit codes: 0 success or clean trace, 1 operational error, 2 trace found
//! violations.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::ledger::{load_chain, load_store, save_store, ChainClass, StoreManifest, STORE_SCHEMA_VERSION};
use crate::provenance::{self, ProvenanceReport};
use crate::runtime::{gas_report, GasReportRow, GasSchedule, Speed, DEFAULT_ETH_USD};
use crate::scenario::{bundled, run_scenario, Scenario, BUNDLED};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VIOLATIONS: i32 = 2;

pub const OUTPUT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    /// Pretty-printed JSON.
    #[value(alias = "json")]
    Structured,
}

#[derive(Debug, Parser)]
#[command(name = "oilchain", version, about = "Oil supply-chain ledger simulator")]
pub struct Cli {
    #[arg(long, value_enum, default_value = "text", global = true)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario file or a bundled scenario by name.
    Run {
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Persist the ledgers to this directory.
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        eth_usd: Option<f64>,
    },
    /// Print the provenance of a batch from a persisted store.
    Trace {
        batch: String,
        #[arg(long)]
        store: PathBuf,
    },
    /// Gas and fiat cost per contract function.
    GasReport {
        #[arg(long, default_value_t = DEFAULT_ETH_USD)]
        eth_usd: f64,
    },
    /// Re-verify every chain in a persisted store.
    Verify {
        #[arg(long)]
        store: PathBuf,
    },
    /// List bundled scenarios.
    Scenarios,
}

struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

/// Parses `args` and executes, writing to `out`/`err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(code) => code,
        Err(Failure(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_ERROR
        }
    }
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<i32, Failure> {
    match &cli.command {
        Command::Run { scenario, seed, store, eth_usd } => {
            cmd_run(cli.format, scenario, *seed, store.as_deref(), *eth_usd, out)
        }
        Command::Trace { batch, store } => cmd_trace(cli.format, batch, store, out),
        Command::GasReport { eth_usd } => cmd_gas_report(cli.format, *eth_usd, out),
        Command::Verify { store } => cmd_verify(cli.format, store, out),
        Command::Scenarios => {
            for (name, text) in BUNDLED {
                let s = Scenario::parse(text)?;
                writeln!(out, "{name:<22} {}", s.description)?;
            }
            Ok(EXIT_OK)
        }
    }
}

fn load_scenario_text(arg: &str) -> Result<String, Failure> {
    let path = Path::new(arg);
    if path.exists() {
        return std::fs::read_to_string(path).map_err(|e| Failure(format!("{arg}: {e}")));
    }
    bundled(arg)
        .map(str::to_owned)
        .ok_or_else(|| Failure(format!("no scenario file or bundled scenario named `{arg}`")))
}

fn cmd_run(
    format: Format,
    scenario: &str,
    seed: Option<u64>,
    store: Option<&Path>,
    eth_usd: Option<f64>,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    if eth_usd.is_some_and(|r| r.is_nan() || r < 0.0) {
        return Err(Failure("--eth-usd must be non-negative".into()));
    }
    let text = load_scenario_text(scenario)?;
    let parsed = Scenario::parse(&text)?;
    let result = run_scenario(&parsed, seed, eth_usd)?;
    if let Some(dir) = store {
        let manifest = StoreManifest {
            schema_version: STORE_SCHEMA_VERSION,
            scenario: result.report.scenario.clone(),
            seed: result.report.seed,
            chains: result.chains.iter().map(|c| c.id.clone()).collect(),
        };
        save_store(dir, &manifest, &result.chains)?;
    }
    match format {
        Format::Text => out.write_all(result.report.render_text().as_bytes())?,
        Format::Structured => out.write_all(result.report.to_json().as_bytes())?,
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct TraceOutput<'a> {
    schema_version: u32,
    seed: u64,
    scenario: &'a str,
    report: &'a ProvenanceReport,
}

fn cmd_trace(format: Format, batch: &str, store: &Path, out: &mut dyn Write) -> Result<i32, Failure> {
    let (manifest, chains) = load_store(store)?;
    let consortium = chains
        .iter()
        .find(|c| c.class == ChainClass::Consortium)
        .ok_or_else(|| Failure("store has no consortium chain".into()))?;
    let report = provenance::trace(consortium, batch)?;
    match format {
        Format::Text => {
            writeln!(out, "store {} (scenario {}, seed {})", store.display(), manifest.scenario, manifest.seed)?;
            out.write_all(report.render_text().as_bytes())?;
        }
        Format::Structured => {
            let o = TraceOutput {
                schema_version: OUTPUT_SCHEMA_VERSION,
                seed: manifest.seed,
                scenario: &manifest.scenario,
                report: &report,
            };
            writeln!(out, "{}", serde_json::to_string_pretty(&o)?)?;
        }
    }
    Ok(if report.clean { EXIT_OK } else { EXIT_VIOLATIONS })
}

#[derive(Serialize)]
struct GasOutput {
    schema_version: u32,
    seed: Option<u64>,
    eth_usd: f64,
    gwei: [(Speed, f64); 4],
    rows: Vec<GasReportRow>,
}

pub fn render_gas_table(rows: &[GasReportRow], eth_usd: f64) -> String {
    let mut s = String::new();
    let g = |sp: Speed| sp.gwei();
    let _ = writeln!(
        s,
        "eth_usd {eth_usd}  gas prices (gwei): slow {} average {} fast {} fastest {}",
        g(Speed::Slow),
        g(Speed::Average),
        g(Speed::Fast),
        g(Speed::Fastest)
    );
    let _ = writeln!(
        s,
        "{:<18} {:>10} {:>12} {:>11} {:>11} {:>11} {:>11}  source",
        "function", "execution", "transaction", "slow", "average", "fast", "fastest"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<18} {:>10} {:>12} {:>11.5} {:>11.5} {:>11.5} {:>11.5}  {}",
            r.function,
            r.execution_gas,
            r.transaction_gas,
            r.usd.slow,
            r.usd.average,
            r.usd.fast,
            r.usd.fastest,
            if r.measured { "measured" } else { "default" }
        );
    }
    s
}

fn cmd_gas_report(format: Format, eth_usd: f64, out: &mut dyn Write) -> Result<i32, Failure> {
    if eth_usd.is_nan() || eth_usd < 0.0 {
        return Err(Failure("--eth-usd must be non-negative".into()));
    }
    let rows = gas_report(&GasSchedule::standard(), eth_usd);
    match format {
        Format::Text => out.write_all(render_gas_table(&rows, eth_usd).as_bytes())?,
        Format::Structured => {
            let o = GasOutput {
                schema_version: OUTPUT_SCHEMA_VERSION,
                seed: None,
                eth_usd,
                gwei: Speed::ALL.map(|s| (s, s.gwei())),
                rows,
            };
            writeln!(out, "{}", serde_json::to_string_pretty(&o)?)?;
        }
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct ChainCheck {
    chain: String,
    valid: bool,
    height: Option<u64>,
    tip_hash: Option<String>,
    first_bad_index: Option<u64>,
    reason: Option<String>,
}

#[derive(Serialize)]
struct VerifyOutput {
    schema_version: u32,
    seed: u64,
    scenario: String,
    valid: bool,
    chains: Vec<ChainCheck>,
}

fn cmd_verify(format: Format, store: &Path, out: &mut dyn Write) -> Result<i32, Failure> {
    let manifest_path = store.join("store.json");
    let text =
        std::fs::read_to_string(&manifest_path).map_err(|e| Failure(format!("{}: {e}", manifest_path.display())))?;
    let manifest: StoreManifest = serde_json::from_str(&text)?;
    let checks: Vec<ChainCheck> = manifest
        .chains
        .iter()
        .map(|id| match load_chain(&store.join(id)) {
            Ok(c) => ChainCheck {
                chain: id.clone(),
                valid: true,
                height: Some(c.len() as u64),
                tip_hash: Some(c.tip_hash().to_string()),
                first_bad_index: None,
                reason: None,
            },
            Err(crate::ledger::LedgerError::CorruptLedger { index, reason, .. }) => ChainCheck {
                chain: id.clone(),
                valid: false,
                height: None,
                tip_hash: None,
                first_bad_index: Some(index),
                reason: Some(reason),
            },
            Err(e) => ChainCheck {
                chain: id.clone(),
                valid: false,
                height: None,
                tip_hash: None,
                first_bad_index: None,
                reason: Some(e.to_string()),
            },
        })
        .collect();
    let valid = checks.iter().all(|c| c.valid);
    match format {
        Format::Text => {
            for c in &checks {
                if c.valid {
                    writeln!(
                        out,
                        "ok       {:<16} height {:>4}  tip {}",
                        c.chain,
                        c.height.unwrap_or(0),
                        c.tip_hash.as_deref().unwrap_or("-")
                    )?;
                } else {
                    let at = c.first_bad_index.map_or_else(|| "-".into(), |i| i.to_string());
                    writeln!(
                        out,
                        "CORRUPT  {:<16} first bad block {at}: {}",
                        c.chain,
                        c.reason.as_deref().unwrap_or("")
                    )?;
                }
            }
        }
        Format::Structured => {
            let o = VerifyOutput {
                schema_version: OUTPUT_SCHEMA_VERSION,
                seed: manifest.seed,
                scenario: manifest.scenario,
                valid,
                chains: checks,
            };
            writeln!(out, "{}", serde_json::to_string_pretty(&o)?)?;
        }
    }
    Ok(if valid { EXIT_OK } else { EXIT_ERROR })
}
