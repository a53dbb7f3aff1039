use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use tgcc_core::harness::{run, RawConfig};
use tgcc_core::Error;

const AFTER_HELP: &str = "\
Commands: trace, check, t0, sweep, counterexample, replay, wave1d, shell.

Parameters are key=value pairs; any of v, a, eps, delta, T also accepts a
start:stop:step range. Angles are in radians (pi and 2pi are accepted),
lengths in domain units.

Examples:
  tgcc t0 domain=interval v=0.5 a=0.25 delta=0
  tgcc check domain=disk v=0 a=6.2832 eps=0.2 T=1.5
  tgcc counterexample domain=disk obstruction=disk_polygon n=2 p=1 q=1
  tgcc replay file=counterexample.ini

Exit status: 0 success, 1 violated check or replay hit, 2 configuration or
runtime error.";

#[derive(Parser, Debug)]
#[command(name = "tgcc", version, about = "Control times for moving observation regions", after_help = AFTER_HELP)]
struct Cli {
    /// INI file with [domain], [command], [sampling] and [output] sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for CSV and SVG output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the jittered ray sample.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, env = "TGCC_THREADS")]
    threads: Option<usize>,
    /// Also write SVG figures.
    #[arg(long)]
    svg: bool,
    /// Record wall time per row.
    #[arg(long)]
    timing: bool,
    /// Command name, optional when the config file names one.
    command: Option<String>,
    /// key=value overrides.
    params: Vec<String>,
}

fn load(cli: &Cli) -> Result<RawConfig> {
    let mut raw = match &cli.config {
        Some(p) => RawConfig::from_file(p)?,
        None => RawConfig::default(),
    };
    let mut params = cli.params.clone();
    if let Some(c) = &cli.command {
        if c.contains('=') {
            params.insert(0, c.clone());
        } else {
            raw.set("name", c)?;
        }
    }
    raw.push_args(&params)?;
    if let Some(o) = &cli.out {
        raw.set("dir", &o.to_string_lossy())?;
    }
    if let Some(s) = cli.seed {
        raw.set("seed", &s.to_string())?;
    }
    if cli.svg {
        raw.set("svg", "true")?;
    }
    if cli.timing {
        raw.set("timing", "true")?;
    }
    Ok(raw)
}

fn execute(cli: &Cli) -> Result<i32> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("thread pool")?;
    }
    let cfg = load(cli)?.to_config()?;
    let out = run(&cfg)?;
    for m in &out.messages {
        println!("{m}");
    }
    for f in &out.files {
        println!("wrote {}", f.display());
    }
    Ok(out.exit_code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            if matches!(e.downcast_ref::<Error>(), Some(Error::Config(_))) {
                eprintln!("{e:#}");
            } else {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(2)
        }
    }
}
