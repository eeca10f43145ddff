//! Config-driven experiment runner for the dynamic-boundary front model.

mod config;
mod experiments;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use config::ExperimentConfig;
use experiments::{Outcome, Output};

const EXIT_OK: u8 = 0;
const EXIT_ERROR: u8 = 1;
const EXIT_THRESHOLD: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "dynbc", version, about = "Front relaxation with a dynamic boundary reaction")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override a config value, e.g. `grid.nx=401`.
    #[arg(long = "override", value_name = "KEY=VAL")]
    overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Run one experiment and write its artifacts.
    Run {
        #[command(flatten)]
        common: Common,
        /// Output directory; defaults to `out` from the config, else `./out`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config without running it.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Run one experiment per value of a parameter, each in its own directory.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        /// Parameter and comma-separated values, e.g. `scheme.dt=0.1,0.05`.
        #[arg(long, value_name = "KEY=V1,V2,...")]
        param: String,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let code = match cli.command {
        Cmd::Run { common, out } => run(&common, out.as_deref()),
        Cmd::Validate { common } => validate(&common),
        Cmd::Sweep { common, out, param } => sweep(&common, &out, &param),
    };
    match code {
        Ok(c) => ExitCode::from(c),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn load_checked(common: &Common) -> Result<ExperimentConfig> {
    let cfg = config::load(&common.config, &common.overrides)?;
    let diagnostics = cfg.diagnostics();
    if !diagnostics.is_empty() {
        bail!("invalid config {}:\n  {}", common.config.display(), diagnostics.join("\n  "));
    }
    Ok(cfg)
}

fn validate(common: &Common) -> Result<u8> {
    let cfg = match config::load(&common.config, &common.overrides) {
        Ok(c) => c,
        Err(e) => {
            println!("error: {e:#}");
            return Ok(EXIT_ERROR);
        }
    };
    let diagnostics = cfg.diagnostics();
    if diagnostics.is_empty() {
        println!("ok");
        print!("{}", toml::to_string(&cfg)?);
        Ok(EXIT_OK)
    } else {
        for d in &diagnostics {
            println!("error: {d}");
        }
        Ok(EXIT_ERROR)
    }
}

fn run(common: &Common, out: Option<&Path>) -> Result<u8> {
    let cfg = load_checked(common)?;
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let mut output = Output::new(&dir)?;
    let outcome = experiments::run(&cfg, &mut output).with_context(|| format!("experiment {:?} failed", cfg.experiment))?;
    let report = json!({
        "experiment": cfg.experiment,
        "config": cfg,
        "outcome": outcome,
    });
    output.write("report.json", &serde_json::to_string_pretty(&report)?)?;
    let summary = summary(&cfg, &outcome);
    output.write("summary.txt", &summary)?;
    print!("{summary}");
    let created = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let manifest = json!({
        "tool": "dynbc",
        "version": env!("CARGO_PKG_VERSION"),
        "config": common.config,
        "overrides": common.overrides,
        "created_unix": created,
        "files": output.files,
    });
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)
        .with_context(|| format!("cannot write manifest in {}", dir.display()))?;
    Ok(match outcome.pass {
        Some(false) => EXIT_THRESHOLD,
        _ => EXIT_OK,
    })
}

fn summary(cfg: &ExperimentConfig, o: &Outcome) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "experiment: {:?}", cfg.experiment);
    let _ = writeln!(s, "claim: {}", o.claim);
    let _ = writeln!(s, "measured: {}", o.measured);
    let _ = writeln!(s, "expected: {}", o.expected);
    let verdict = match o.pass {
        Some(true) => "PASS",
        Some(false) => "FAIL",
        None => "REPORTED",
    };
    let _ = writeln!(s, "result: {verdict}");
    s
}

fn sweep(common: &Common, out: &Path, param: &str) -> Result<u8> {
    let (key, values) = param
        .split_once('=')
        .ok_or_else(|| anyhow!("--param `{param}` is not of the form KEY=V1,V2,..."))?;
    let values: Vec<&str> = values.split(',').map(str::trim).filter(|v| !v.is_empty()).collect();
    if values.is_empty() {
        bail!("--param `{param}` lists no values");
    }
    let exe = std::env::current_exe().context("cannot locate the dynbc executable")?;
    let mut worst = EXIT_OK;
    for v in values {
        let dir = out.join(format!("{key}={v}"));
        let mut cmd = Command::new(&exe);
        cmd.arg("run").arg("--config").arg(&common.config).arg("--out").arg(&dir);
        for o in &common.overrides {
            cmd.arg("--override").arg(o);
        }
        cmd.arg("--override").arg(format!("{key}={v}"));
        let status = cmd.status().with_context(|| format!("cannot launch run for {key}={v}"))?;
        let code = status.code().map(|c| c as u8).unwrap_or(EXIT_ERROR);
        println!("sweep {key}={v}: exit {code}");
        worst = match (worst, code) {
            (EXIT_ERROR, _) => EXIT_ERROR,
            (_, EXIT_OK) => worst,
            (_, EXIT_THRESHOLD) => EXIT_THRESHOLD,
            _ => EXIT_ERROR,
        };
    }
    Ok(worst)
}
