//! `pataplectic`: runs the verification suites and simulations, writes JSON/CSV reports.
//!
//! Exit codes: 0 when every check passes, 1 when any check fails, 2 on usage,
//! configuration or I/O errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pataplectic::dynamics::Gauge;
use pataplectic::systems::ScalarFieldParams;
use pataplectic::verify::{self, Initial, Report, SimulateConfig, SuiteOptions, DEFAULT_SUITES};
use serde::Deserialize;

#[derive(Parser)]
#[command(name = "pataplectic", version, about = "Covariant Hamiltonian field theory: verification suites and simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run bracket-algebra and structural suites.
    Verify(Flags),
    /// Integrate a scalar field with n = 2 and check the run.
    Simulate(Flags),
    /// Legendre round trips, the singular region and envelope gradients.
    LegendreCheck(Flags),
    /// The Maxwell bracket constant, gauge brackets and manufactured solutions.
    MaxwellCheck(Flags),
    /// Print a saved report and exit with its status.
    Report {
        /// A report.json or a directory holding one.
        path: PathBuf,
    },
}

#[derive(Args, Default)]
struct Flags {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated suite names.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    suite: Option<Vec<String>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: current directory).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_enum)]
    gauge: Option<GaugeArg>,
    #[arg(long)]
    mesh: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GaugeArg {
    None,
    H0,
}

impl From<GaugeArg> for Gauge {
    fn from(g: GaugeArg) -> Gauge {
        match g {
            GaugeArg::None => Gauge::None,
            GaugeArg::H0 => Gauge::H0,
        }
    }
}

/// The JSON configuration file.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    seed: Option<u64>,
    suites: Option<Vec<String>>,
    out: Option<PathBuf>,
    n: Option<usize>,
    k: Option<usize>,
    probes: Option<usize>,
    outside: Option<bool>,
    mesh: Option<usize>,
    gauge: Option<Gauge>,
    simulation: Option<SimulationBlock>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SimulationBlock {
    system: Option<String>,
    params: Option<ScalarFieldParams>,
    length: Option<f64>,
    ratio: Option<f64>,
    t_end: Option<f64>,
    initial: Option<Initial>,
    tolerance: Option<f64>,
    checks: Option<Vec<String>>,
}

fn load(flags: &Flags) -> Result<RunConfig> {
    let mut cfg = match &flags.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => RunConfig::default(),
    };
    if flags.seed.is_some() {
        cfg.seed = flags.seed;
    }
    if flags.suite.is_some() {
        cfg.suites = flags.suite.clone();
    }
    if flags.out.is_some() {
        cfg.out = flags.out.clone();
    }
    if flags.n.is_some() {
        cfg.n = flags.n;
    }
    if flags.k.is_some() {
        cfg.k = flags.k;
    }
    if flags.mesh.is_some() {
        cfg.mesh = flags.mesh;
    }
    if let Some(g) = flags.gauge {
        cfg.gauge = Some(g.into());
    }
    Ok(cfg)
}

fn suite_options(cfg: &RunConfig) -> Result<SuiteOptions> {
    let Some(seed) = cfg.seed else {
        bail!("a seed is required for randomized suites (--seed or \"seed\" in the config)");
    };
    let d = SuiteOptions::default();
    Ok(SuiteOptions {
        seed,
        n: cfg.n,
        k: cfg.k,
        probes: cfg.probes.unwrap_or(d.probes),
        outside: cfg.outside.unwrap_or(d.outside),
        mesh: cfg.mesh.unwrap_or(d.mesh),
        gauge: cfg.gauge.unwrap_or(d.gauge),
    })
}

fn run_named(command: &str, cfg: &RunConfig, default: &[&str]) -> Result<Report> {
    let opts = suite_options(cfg)?;
    let names: Vec<String> = match &cfg.suites {
        Some(s) => s.iter().map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect(),
        None => default.iter().map(|s| s.to_string()).collect(),
    };
    let rows = verify::run_suites(&names, &opts)?;
    Ok(Report::new(command, opts.seed, rows))
}

fn simulate(cfg: &RunConfig) -> Result<(Report, Vec<u8>)> {
    let block = cfg.simulation.as_ref();
    let system = block.and_then(|b| b.system.as_deref()).unwrap_or("scalar_field");
    if system != "scalar_field" {
        bail!("simulate supports the scalar_field system only, not `{system}`");
    }
    let d = SimulateConfig::default();
    let mut params = block.and_then(|b| b.params.clone()).unwrap_or_default();
    if let Some(n) = cfg.n {
        params.n = n;
    }
    if let Some(k) = cfg.k {
        params.k = k;
    }
    let sim = SimulateConfig {
        system: params,
        mesh: cfg.mesh.unwrap_or(d.mesh),
        gauge: cfg.gauge.unwrap_or(d.gauge),
        length: block.and_then(|b| b.length).unwrap_or(d.length),
        ratio: block.and_then(|b| b.ratio).unwrap_or(d.ratio),
        t_end: block.and_then(|b| b.t_end).unwrap_or(d.t_end),
        initial: block.and_then(|b| b.initial.clone()).unwrap_or(d.initial),
        tolerance: block.and_then(|b| b.tolerance).unwrap_or(d.tolerance),
        checks: block.and_then(|b| b.checks.clone()).unwrap_or(d.checks),
    };
    let out = verify::simulate(&sim)?;
    Ok((Report::new("simulate", cfg.seed.unwrap_or(0), out.rows), out.csv))
}

fn write_outputs(dir: &Path, report: &Report, solution: Option<&[u8]>) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("report.json"), report.to_json()?)?;
    report.write_csv(fs::File::create(dir.join("report.csv"))?)?;
    if let Some(csv) = solution {
        fs::write(dir.join("solution.csv"), csv)?;
    }
    log::info!("wrote reports to {}", dir.display());
    Ok(())
}

fn read_report(path: &Path) -> Result<Report> {
    let file = if path.is_dir() { path.join("report.json") } else { path.to_path_buf() };
    let text = fs::read_to_string(&file).with_context(|| format!("cannot read {}", file.display()))?;
    Report::from_json(&text).with_context(|| format!("parsing {}", file.display()))
}

fn run(cli: Cli) -> Result<bool> {
    let (flags, name) = match &cli.command {
        Command::Report { path } => {
            let report = read_report(path)?;
            print!("{}", report.table());
            return Ok(report.all_pass());
        }
        Command::Verify(f) => (f, "verify"),
        Command::Simulate(f) => (f, "simulate"),
        Command::LegendreCheck(f) => (f, "legendre-check"),
        Command::MaxwellCheck(f) => (f, "maxwell-check"),
    };
    let cfg = load(flags)?;
    let (report, solution) = match name {
        "verify" => (run_named(name, &cfg, &DEFAULT_SUITES)?, None),
        "legendre-check" => (run_named(name, &cfg, &["legendre"])?, None),
        "maxwell-check" => (run_named(name, &cfg, &["maxwell_bracket", "maxwell_gauge", "maxwell_manufactured"])?, None),
        "simulate" => {
            if flags.suite.is_some() {
                bail!("simulate does not take --suite");
            }
            let (r, csv) = simulate(&cfg)?;
            (r, Some(csv))
        }
        _ => unreachable!(),
    };
    print!("{}", report.table());
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    write_outputs(&dir, &report, solution.as_deref())?;
    Ok(report.all_pass())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
