//! `flatheights` command line: runs one scenario and writes its report.
//!
//! Exit codes: 0 success, 1 schema or input error, 2 numerical-tolerance
//! failure, 3 I/O error.

mod run;
mod scenario;
mod svg;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use flatheights::acceptance;
use flatheights::variational::Gauge;

use scenario::{Kind, ScenarioConfig};

#[derive(Debug)]
pub enum CliError {
    Schema(String),
    Tolerance(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Schema(_) => 1,
            CliError::Tolerance(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Schema(m) => write!(f, "input error: {m}"),
            CliError::Tolerance(m) => write!(f, "tolerance failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<flatheights::Error> for CliError {
    fn from(e: flatheights::Error) -> Self {
        if e.is_tolerance() {
            CliError::Tolerance(e.to_string())
        } else {
            CliError::Schema(e.to_string())
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "flatheights", version, about = "Extremal height ratios on flat tori and cylinder chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario config (JSON); the built-in example is used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config's `output`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also write SVG plots.
    #[arg(long, global = true)]
    plot: bool,
    /// Seed for randomized inputs; overrides the config's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Gauge for variational scenarios: fix1, fix1tau or area.
    #[arg(long, global = true, value_parser = parse_gauge)]
    gauge: Option<Gauge>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Extremal ratio of a marked torus map.
    Torus,
    /// Extremal ratio and gaps of a cylinder chain.
    Cylinder,
    /// Truncation diagnostics of a cylinder chain.
    Exhaustion,
    /// Heights and defect along a Beltrami path.
    Variational,
    /// Discrete harmonic minimizer on the torus grid.
    Dirichlet,
    /// Runs the acceptance suite and prints one line per criterion.
    Selftest,
}

fn parse_gauge(s: &str) -> Result<Gauge, String> {
    s.parse().map_err(|e: flatheights::Error| e.to_string())
}

fn kind_of(cmd: Command) -> Option<Kind> {
    match cmd {
        Command::Torus => Some(Kind::Torus),
        Command::Cylinder => Some(Kind::Cylinder),
        Command::Exhaustion => Some(Kind::Exhaustion),
        Command::Variational => Some(Kind::Variational),
        Command::Dirichlet => Some(Kind::Dirichlet),
        Command::Selftest => None,
    }
}

fn load(cli: &Cli, kind: Kind) -> Result<ScenarioConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
            ScenarioConfig::parse(&text)?
        }
        None => ScenarioConfig::example(kind),
    };
    if cfg.kind != kind {
        return Err(CliError::Schema(format!(
            "config kind {:?} does not match subcommand {:?}",
            cfg.kind.as_str(),
            kind.as_str()
        )));
    }
    if cli.out.is_some() {
        cfg.output = cli.out.clone();
    }
    cfg.plot |= cli.plot;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn write_all(dir: &Path, report: &run::Report) -> Result<(), CliError> {
    let io_err = |p: &Path, e: std::io::Error| CliError::Io(format!("writing {}: {e}", p.display()));
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let summary = serde_json::to_string_pretty(&report.summary).expect("serializable summary") + "\n";
    let path = dir.join("summary.json");
    fs::write(&path, summary).map_err(|e| io_err(&path, e))?;
    for (name, contents) in &report.files {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|e| io_err(&path, e))?;
    }
    Ok(())
}

fn selftest(seed: u64) -> Result<(), CliError> {
    let results = acceptance::run_all(seed);
    for r in &results {
        println!("{r}");
    }
    let failed: Vec<String> = results.iter().filter(|r| !r.passed).map(|r| r.id.to_string()).collect();
    if failed.is_empty() {
        println!("all {} criteria passed (seed {seed})", results.len());
        Ok(())
    } else {
        Err(CliError::Tolerance(format!("criteria {} failed", failed.join(", "))))
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let Some(kind) = kind_of(cli.command) else {
        return selftest(cli.seed.unwrap_or(acceptance::DEFAULT_SEED));
    };
    let cfg = load(cli, kind)?;
    let report = run::run(&cfg, cli.gauge)?;
    let dir = cfg.output.clone().unwrap_or_else(|| PathBuf::from("out").join(kind.as_str()));
    write_all(&dir, &report)?;
    println!("{}", serde_json::to_string_pretty(&report.summary).expect("serializable summary"));
    match report.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("flatheights: {e}");
            ExitCode::from(e.code())
        }
    }
}
