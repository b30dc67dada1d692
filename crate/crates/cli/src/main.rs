//! `nrmimo`: run one downlink MIMO scenario or a (distance, run) sweep and
//! write a text summary plus a results CSV.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{CommandFactory, Parser, ValueEnum};

use nrmimo_core::engine::{Scenario, ScenarioConfig, Simulation};
use nrmimo_core::phy::{RiConfig, RiMode};
use nrmimo_core::report;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RiScheme {
    Fixed,
    Adaptive,
}

#[derive(Debug, Parser)]
#[command(
    name = "nrmimo",
    version,
    about = "5G NR downlink MIMO system-level simulator (dual-polarized arrays, up to two streams)"
)]
struct CliArgs {
    /// gNB-UE horizontal distance in meters [default: 10]
    #[arg(long)]
    distance_m: Option<f64>,

    /// Rank indicator computation [default: adaptive]
    #[arg(long, value_enum)]
    ri_scheme: Option<RiScheme>,

    /// Rank used with the fixed scheme, 1 or 2 [default: 1]
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    fixed_ri: Option<u8>,

    /// SINR above which one stream switches to two, in dB [default: 7]
    #[arg(long)]
    threshold1_db: Option<f64>,

    /// SINR both streams need to stay at two streams, in dB [default: 12]
    #[arg(long)]
    threshold2_db: Option<f64>,

    /// Random run number [default: 1]
    #[arg(long)]
    rng_run: Option<u64>,

    /// Propagation scenario [default: UMi]
    #[arg(long)]
    scenario: Option<String>,

    /// MCS table (only 2, the 256QAM table, is supported) [default: 2]
    #[arg(long)]
    mcs_table: Option<u8>,

    /// Share of cross-polar leakage counted as interference, in [0, 1] [default: 0]
    #[arg(long)]
    rho: Option<f64>,

    /// Simulated time in seconds [default: 2]
    #[arg(long)]
    duration_s: Option<f64>,

    /// Output directory
    #[arg(long, env = "NRMIMO_OUT_DIR", default_value = "nrmimo-out")]
    out_dir: PathBuf,

    /// Sweep distances, comma separated (enables sweep mode)
    #[arg(long, value_delimiter = ',')]
    distances: Option<Vec<f64>>,

    /// Sweep run numbers, comma separated; `a-b` expands to a range (enables sweep mode)
    #[arg(long, value_delimiter = ',')]
    rng_runs: Option<Vec<String>>,

    /// Config file with `key = value` lines, applied before the flags above
    #[arg(long)]
    config: Option<PathBuf>,

    /// Extra `key=value` setting using config-file keys; may be repeated
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Also write PHY, MAC and channel trace CSVs (single run only)
    #[arg(long)]
    traces: bool,
}

/// A command-line problem; reported with usage text and exit code 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

enum Plan {
    Single(ScenarioConfig),
    Sweep {
        base: ScenarioConfig,
        distances: Vec<f64>,
        runs: Vec<u64>,
    },
}

fn parse_runs(items: &[String]) -> Result<Vec<u64>> {
    let mut runs = Vec::new();
    for item in items {
        let item = item.trim();
        let bad = || usage(format!("invalid value '{item}' for '--rng-runs'"));
        match item.split_once('-') {
            Some((a, b)) => {
                let a: u64 = a.trim().parse().map_err(|_| bad())?;
                let b: u64 = b.trim().parse().map_err(|_| bad())?;
                if a > b {
                    return Err(bad());
                }
                runs.extend(a..=b);
            }
            None => runs.push(item.parse().map_err(|_| bad())?),
        }
    }
    Ok(runs)
}

fn build_plan(args: &CliArgs) -> Result<Plan> {
    let mut cfg = ScenarioConfig::default();
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        cfg.apply_config_str(&text).map_err(|e| usage(e.to_string()))?;
    }
    for kv in &args.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| usage(format!("'--set {kv}' is not KEY=VALUE")))?;
        cfg.set(k, v).map_err(|e| usage(e.to_string()))?;
    }

    if let Some(d) = args.distance_m {
        cfg.distance_m = d;
    }
    match args.ri_scheme {
        Some(RiScheme::Fixed) => cfg.ri_config.mode = RiMode::Fixed,
        Some(RiScheme::Adaptive) => cfg.ri_config.mode = RiMode::Adaptive,
        None => {}
    }
    if let Some(ri) = args.fixed_ri {
        if cfg.ri_config.mode != RiMode::Fixed {
            return Err(usage(
                "'--fixed-ri' can only be used with '--ri-scheme fixed' (the RI scheme is adaptive)",
            ));
        }
        cfg.ri_config.fixed_ri = ri;
    }
    if let Some(t) = args.threshold1_db {
        cfg.ri_config.threshold1_db = t;
    }
    if let Some(t) = args.threshold2_db {
        cfg.ri_config.threshold2_db = t;
    }
    if let Some(r) = args.rng_run {
        cfg.rng_run = r;
    }
    if let Some(s) = &args.scenario {
        cfg.scenario = s.parse::<Scenario>().map_err(|e| usage(e.to_string()))?;
    }
    if let Some(m) = args.mcs_table {
        cfg.mcs_table = m;
    }
    if let Some(r) = args.rho {
        cfg.rho = r;
    }
    if let Some(d) = args.duration_s {
        cfg.sim_duration_s = d;
    }
    let ri = match cfg.ri_config.mode {
        RiMode::Fixed => RiConfig::fixed(cfg.ri_config.fixed_ri),
        RiMode::Adaptive => {
            RiConfig::adaptive(cfg.ri_config.threshold1_db, cfg.ri_config.threshold2_db)
        }
    };
    ri.map_err(|e| usage(e.to_string()))?;
    cfg.validate().map_err(|e| usage(e.to_string()))?;

    if args.distances.is_none() && args.rng_runs.is_none() {
        return Ok(Plan::Single(cfg));
    }
    if args.traces {
        return Err(usage("'--traces' is only available for single runs, not with '--distances'/'--rng-runs'"));
    }
    let distances = args.distances.clone().unwrap_or_else(|| vec![cfg.distance_m]);
    let runs = match &args.rng_runs {
        Some(items) => parse_runs(items)?,
        None => vec![cfg.rng_run],
    };
    if distances.is_empty() || runs.is_empty() {
        return Err(usage("sweep lists must not be empty"));
    }
    for &d in &distances {
        ScenarioConfig {
            distance_m: d,
            ..cfg.clone()
        }
        .validate()
        .map_err(|e| usage(e.to_string()))?;
    }
    Ok(Plan::Sweep {
        base: cfg,
        distances,
        runs,
    })
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn execute(args: &CliArgs, plan: Plan) -> Result<()> {
    let dir = &args.out_dir;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    match plan {
        Plan::Single(cfg) => {
            let sim = Simulation::new(cfg)?;
            let sim = if args.traces { sim.with_traces() } else { sim };
            let (stats, traces) = sim.run_traced()?;
            let summary = report::summary_single(&stats);
            write(dir, "summary.txt", &summary)?;
            write(dir, "results.csv", &report::results_csv_single(&stats))?;
            if args.traces {
                write(dir, "phy_trace.csv", &report::phy_trace_csv(&traces.phy))?;
                write(dir, "mac_trace.csv", &report::mac_trace_csv(&traces.mac))?;
                write(dir, "channel_trace.csv", &report::channel_trace_csv(&traces.channel))?;
            }
            print!("{summary}");
        }
        Plan::Sweep {
            base,
            distances,
            runs,
        } => {
            let table = nrmimo_core::sweep(&base, &distances, &runs)?;
            let summary = report::summary_sweep(&table);
            write(dir, "summary.txt", &summary)?;
            write(dir, "results.csv", &report::results_csv(&table))?;
            print!("{summary}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = CliArgs::parse();
    let result = build_plan(&args).and_then(|plan| execute(&args, plan));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}\n");
            eprintln!("{}", CliArgs::command().render_usage());
            eprintln!("\nFor more information, try '--help'.");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
