//! `toa-lab`: runs one named experiment and writes CSV tables, a JSON
//! manifest and a plain-text summary to the output directory.
//!
//! Exit status: 0 on success, 2 on a configuration error, 3 when a built-in
//! check or the numerics fail.

mod config;
mod experiments;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::Parser;
use serde_json::json;

use config::{Config, ConfigError, Entries};
use experiments::{Experiment, Outcome};

const CONFIG_ERROR: u8 = 2;
const CHECK_FAILED: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "toa-lab",
    version,
    about = "Time-of-arrival measurement experiments"
)]
struct Cli {
    /// Experiment to run.
    #[arg(value_enum)]
    experiment: Experiment,

    /// Flat `key = value` file, or a JSON object.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,

    /// Override one key; may be repeated.
    #[arg(long = "override", value_name = "KEY=VALUE", value_parser = parse_override)]
    overrides: Vec<(String, String)>,

    /// Worker threads for parallel sweeps (default: all cores).
    #[arg(long, value_name = "N")]
    threads: Option<usize>,

    /// Check the configuration and exit without computing.
    #[arg(long)]
    validate_only: bool,

    /// Print the experiment's keys with defaults and exit.
    #[arg(long)]
    list_keys: bool,
}

fn parse_override(s: &str) -> Result<(String, String), String> {
    config::split_assignment(s).ok_or_else(|| format!("expected KEY=VALUE, got `{s}`"))
}

fn config_failure(errors: &[ConfigError]) -> ExitCode {
    for e in errors {
        eprintln!("config error: {e}");
    }
    ExitCode::from(CONFIG_ERROR)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exp = cli.experiment;
    let schema = experiments::schema(exp);

    if cli.list_keys {
        for p in &schema {
            println!("{:<16} {:<28} {}", p.key, p.default, p.doc);
        }
        return ExitCode::SUCCESS;
    }

    let entries = match &cli.config {
        Some(path) => match config::read_file(path) {
            Ok(e) => e,
            Err(e) => return config_failure(&[e]),
        },
        None => Entries::new(),
    };
    let cfg = match Config::resolve(&schema, &entries, &cli.overrides) {
        Ok(c) => c,
        Err(errors) => return config_failure(&errors),
    };
    let report = experiments::validate(exp, &cfg);
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if !report.errors.is_empty() {
        return config_failure(&report.errors);
    }
    if cli.validate_only {
        println!(
            "{}: configuration valid ({} warnings)",
            exp.name(),
            report.warnings.len()
        );
        println!(
            "{}",
            serde_json::to_string_pretty(&cfg.to_json()).expect("config serializes")
        );
        return ExitCode::SUCCESS;
    }

    if let Some(n) = cli.threads {
        if n == 0 {
            return config_failure(&[ConfigError::general("--threads must be at least 1")]);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .expect("thread pool is configured once");
    }

    let start = Instant::now();
    let outcome = match experiments::run(exp, &cfg) {
        Ok(o) => o,
        Err(toa_core::ToaError::InvalidParameter { name, reason }) => {
            return config_failure(&[ConfigError::key(name, reason)]);
        }
        Err(e) => {
            eprintln!("numerical failure in {}: {e}", exp.name());
            return ExitCode::from(CHECK_FAILED);
        }
    };
    let runtime = start.elapsed().as_secs_f64();

    if let Err(e) = write_outputs(&cli, &cfg, &report.warnings, &outcome, runtime) {
        eprintln!("cannot write to {}: {e}", cli.out.display());
        return ExitCode::FAILURE;
    }
    print!("{}", summary(exp, &outcome));

    let failed: Vec<&str> = outcome
        .checks
        .iter()
        .filter(|c| c.enforced && !c.pass)
        .map(|c| c.name.as_str())
        .collect();
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("failed checks: {}", failed.join(", "));
        ExitCode::from(CHECK_FAILED)
    }
}

fn summary(exp: Experiment, o: &Outcome) -> String {
    let mut s = format!(
        "{}: {}\n",
        exp.name(),
        if o.passed() { "PASS" } else { "FAIL" }
    );
    for c in &o.checks {
        let tag = match (c.pass, c.enforced) {
            (true, _) => "pass",
            (false, true) => "FAIL",
            (false, false) => "note",
        };
        s.push_str(&format!("  [{tag}] {}: {}\n", c.name, c.detail));
    }
    for (stem, t) in &o.tables {
        s.push_str(&format!("  {stem}.csv: {} rows\n", t.rows.len()));
    }
    s
}

fn write_outputs(
    cli: &Cli,
    cfg: &Config,
    warnings: &[String],
    o: &Outcome,
    runtime: f64,
) -> std::io::Result<()> {
    std::fs::create_dir_all(&cli.out)?;
    let mut files = Vec::new();
    for (stem, table) in &o.tables {
        let name = format!("{stem}.csv");
        table.save(&cli.out.join(&name))?;
        files.push(name);
    }
    std::fs::write(cli.out.join("summary.txt"), summary(cli.experiment, o))?;

    let checks: Vec<_> = o
        .checks
        .iter()
        .map(
            |c| json!({"name": c.name, "detail": c.detail, "pass": c.pass, "enforced": c.enforced}),
        )
        .collect();
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let manifest = json!({
        "experiment": cli.experiment.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg.to_json(),
        "config_file": cli.config.as_deref().map(Path::display).map(|d| d.to_string()),
        "overrides": cli.overrides.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>(),
        "threads": cli.threads,
        "outputs": files,
        "metrics": o.metrics,
        "checks": checks,
        "pass": o.passed(),
        "warnings": warnings,
        "timestamp_unix": timestamp,
        "runtime_seconds": runtime,
    });
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(cli.out.join("manifest.json"), text + "\n")
}
