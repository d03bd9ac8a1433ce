//! Command-line front end: argument parsing, experiment fan-out and CSV
//! output. Every CSV has a header row and a fixed column order.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::config::{Policy, ScenarioConfig, TrafficMode};
use crate::error::{Error, Result};
use crate::scenario::{shared_link_table, Scenario, ScenarioRun, SharedLinkCase};
use crate::simkit::fmt_f64;
use crate::topology::{build_topology, NodeId};
use crate::traffic::load_trace_ingest;

pub const METRICS_CSV: &str = "metrics.csv";
pub const PROTOCOL_LOG_CSV: &str = "protocol_log.csv";
pub const ASSIGNMENT_CSV: &str = "assignment.csv";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const GAP_CSV: &str = "gap.csv";
pub const SHARED_LINK_CSV: &str = "shared_link.csv";

#[derive(Debug, Parser)]
#[command(name = "meshchan", version, about = "Channel allocation for multi-radio 802.11 mesh networks")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every subcommand; they override the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// scenario config (TOML); defaults apply when omitted
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// arachne, optimal, single, random, interference or tree
    #[arg(long, global = true)]
    pub policy: Option<Policy>,
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// backhaul channel count, 3 or 12
    #[arg(long, global = true)]
    pub channels: Option<usize>,
    /// radios per AP, control radio excluded
    #[arg(long, global = true)]
    pub radios: Option<usize>,
    /// protocol iteration cap
    #[arg(long, global = true)]
    pub max_iterations: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one policy and write metrics, protocol log and assignment.
    Run,
    /// Run several policies on the same scenario, optionally over a client sweep.
    Compare {
        /// comma-separated policies; all when omitted
        #[arg(long, value_delimiter = ',')]
        policies: Vec<Policy>,
        /// comma-separated client counts; writes a sweep table instead
        #[arg(long, value_delimiter = ',')]
        clients: Vec<usize>,
        /// seeds per sweep point, starting at the configured seed
        #[arg(long, default_value_t = 1)]
        repeats: u64,
    },
    /// Compare the protocol against the exact optimum on seeded instances.
    OptimalGap {
        /// number of seeds, starting at the configured seed
        #[arg(long, default_value_t = 1)]
        runs: u64,
    },
    /// Run a canned scenario; `shared-link` is the only one.
    PaperScenario {
        #[arg(long, default_value = "shared-link")]
        name: String,
        /// demand pairs in Mb/s, `a:b` separated by commas
        #[arg(long, value_delimiter = ',')]
        demands: Vec<String>,
    },
    /// Validate a demand trace against the configured APs.
    TraceCheck {
        /// trace file; defaults to the config's traffic.trace
        #[arg(long)]
        trace: Option<PathBuf>,
    },
}

impl Common {
    pub fn load(&self) -> Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(p) => ScenarioConfig::load(p)?,
            None => ScenarioConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(p) = self.policy {
            cfg.policy = p;
        }
        if let Some(c) = self.channels {
            cfg.channels = c;
        }
        if let Some(r) = self.radios {
            cfg.radios = r;
        }
        if let Some(m) = self.max_iterations {
            cfg.protocol.max_iterations = m;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let cfg = cli.common.load()?;
    let out = &cli.common.out_dir;
    match &cli.command {
        Command::Run => cmd_run(&cfg, out),
        Command::Compare { policies, clients, repeats } => {
            let policies = if policies.is_empty() { Policy::ALL.to_vec() } else { policies.clone() };
            if clients.is_empty() {
                cmd_compare(&cfg, &policies, out)
            } else {
                cmd_sweep(&cfg, &policies, clients, *repeats, out)
            }
        }
        Command::OptimalGap { runs } => cmd_optimal_gap(&cfg, *runs, out).map(|_| ()),
        Command::PaperScenario { name, demands } => {
            if name != "shared-link" {
                return Err(Error::Config(format!("unknown scenario {name:?}; available: shared-link")));
            }
            let demands = if demands.is_empty() { default_shared_link_demands() } else { parse_demands(demands)? };
            cmd_shared_link(&cfg, &demands, out).map(|_| ())
        }
        Command::TraceCheck { trace } => {
            let path = trace
                .clone()
                .or_else(|| cfg.traffic.trace.clone())
                .ok_or_else(|| Error::Config("no trace given (--trace or traffic.trace)".into()))?;
            let summary = cmd_trace_check(&cfg, &path)?;
            println!("{summary}");
            Ok(())
        }
    }
}

fn writer(dir: &Path, name: &str) -> Result<csv::Writer<fs::File>> {
    fs::create_dir_all(dir)?;
    Ok(csv::Writer::from_path(dir.join(name))?)
}

/// `metrics.csv`: `policy,metric,value`, one row per policy and metric.
pub fn write_metrics(dir: &Path, runs: &[&ScenarioRun]) -> Result<()> {
    let mut w = writer(dir, METRICS_CSV)?;
    w.write_record(["policy", "metric", "value"])?;
    for run in runs {
        let policy = run.outcome.policy.name();
        for (metric, value) in run.report.rows() {
            w.write_record([policy, metric.as_str(), value.as_str()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `protocol_log.csv`; header only for policies without a protocol run.
pub fn write_protocol_log(dir: &Path, run: &ScenarioRun) -> Result<()> {
    let mut w = writer(dir, PROTOCOL_LOG_CSV)?;
    w.write_record([
        "iteration",
        "time_s",
        "node",
        "action",
        "target",
        "channel_before",
        "channel_after",
        "cost_before_s",
        "cost_after_s",
    ])?;
    let ch = |c: Option<crate::topology::ChannelId>| c.map(|c| c.0.to_string()).unwrap_or_default();
    for row in run.outcome.protocol.iter().flat_map(|p| &p.log) {
        w.write_record([
            row.iteration.to_string(),
            fmt_f64(row.time_s),
            row.node.to_string(),
            row.action.clone(),
            row.target.clone(),
            ch(row.channel_before),
            ch(row.channel_after),
            fmt_f64(row.cost_before),
            fmt_f64(row.cost_after),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `assignment.csv`: `link,channel` for every link, access links through their AP.
pub fn write_assignment(dir: &Path, sc: &Scenario, run: &ScenarioRun) -> Result<()> {
    let mut w = writer(dir, ASSIGNMENT_CSV)?;
    w.write_record(["link", "channel"])?;
    for l in &sc.topology.links {
        if let Some(c) = run.outcome.assignment.link_channel(&sc.topology, l.id) {
            w.write_record([l.id.to_string(), c.0.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_run(cfg: &ScenarioConfig, out: &Path) -> Result<()> {
    let sc = Scenario::build(cfg)?;
    let run = sc.run_policy(cfg.policy)?;
    write_metrics(out, &[&run])?;
    write_protocol_log(out, &run)?;
    write_assignment(out, &sc, &run)?;
    print_summary(&run);
    Ok(())
}

fn print_summary(run: &ScenarioRun) {
    let r = &run.report;
    println!(
        "{:<13} throughput {:>8.3} Mb/s  delay {:>8.2} ms  objective {:>8.3} ms  iterations {}  drops {}",
        r.policy,
        r.total_throughput_bps / 1e6,
        r.avg_delay_s * 1e3,
        r.objective_s * 1e3,
        r.iterations,
        r.dropped_total.packets,
    );
}

/// Every policy on one scenario, in parallel; one `metrics.csv`.
pub fn cmd_compare(cfg: &ScenarioConfig, policies: &[Policy], out: &Path) -> Result<()> {
    let sc = Scenario::build(cfg)?;
    let runs: Vec<ScenarioRun> = policies.par_iter().map(|&p| sc.run_policy(p)).collect::<Result<_>>()?;
    let refs: Vec<&ScenarioRun> = runs.iter().collect();
    write_metrics(out, &refs)?;
    runs.iter().for_each(print_summary);
    Ok(())
}

/// One row of the client sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub clients: usize,
    pub seed: u64,
    pub policy: Policy,
    pub metric: String,
    pub value: String,
}

/// Runs `policies` at each client count and seed; returns rows in
/// (clients, seed, policy) order.
pub fn sweep(cfg: &ScenarioConfig, policies: &[Policy], clients: &[usize], repeats: u64) -> Result<Vec<SweepRow>> {
    let jobs: Vec<(usize, u64, Policy)> = clients
        .iter()
        .flat_map(|&c| (0..repeats.max(1)).flat_map(move |k| policies.iter().map(move |&p| (c, cfg.seed + k, p))))
        .collect();
    let results: Vec<Vec<SweepRow>> = jobs
        .par_iter()
        .map(|&(clients, seed, policy)| {
            let c = ScenarioConfig { clients, seed, ..cfg.clone() };
            let run = Scenario::build(&c)?.run_policy(policy)?;
            Ok(run
                .report
                .rows()
                .into_iter()
                .map(|(metric, value)| SweepRow { clients, seed, policy, metric, value })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(results.into_iter().flatten().collect())
}

/// `sweep.csv`: `clients,seed,policy,metric,value`.
pub fn cmd_sweep(cfg: &ScenarioConfig, policies: &[Policy], clients: &[usize], repeats: u64, out: &Path) -> Result<()> {
    let rows = sweep(cfg, policies, clients, repeats)?;
    let mut w = writer(out, SWEEP_CSV)?;
    w.write_record(["clients", "seed", "policy", "metric", "value"])?;
    for r in &rows {
        w.write_record([r.clients.to_string(), r.seed.to_string(), r.policy.name().into(), r.metric.clone(), r.value.clone()])?;
        if r.metric == "total_throughput_bps" {
            println!("clients {:>3}  seed {:>3}  {:<13} {:>8.3} Mb/s", r.clients, r.seed, r.policy.name(), r.value.parse::<f64>().unwrap_or(0.0) / 1e6);
        }
    }
    w.flush()?;
    Ok(())
}

/// Protocol against the exact optimum on one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct GapRow {
    pub seed: u64,
    pub arachne_objective_s: f64,
    pub optimal_objective_s: f64,
    pub arachne_throughput_bps: f64,
    pub optimal_throughput_bps: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl GapRow {
    /// Protocol objective over optimal objective; 1 is optimal.
    pub fn objective_ratio(&self) -> f64 {
        ratio(self.arachne_objective_s, self.optimal_objective_s)
    }

    /// Protocol throughput over optimal throughput.
    pub fn throughput_ratio(&self) -> f64 {
        ratio(self.arachne_throughput_bps, self.optimal_throughput_bps)
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    if a == b {
        1.0
    } else {
        a / b
    }
}

pub fn optimal_gap(cfg: &ScenarioConfig) -> Result<GapRow> {
    let sc = Scenario::build(cfg)?;
    let a = sc.run_policy(Policy::Arachne)?;
    let o = sc.run_policy(Policy::Optimal)?;
    Ok(GapRow {
        seed: cfg.seed,
        arachne_objective_s: a.report.objective_s,
        optimal_objective_s: o.report.objective_s,
        arachne_throughput_bps: a.report.total_throughput_bps,
        optimal_throughput_bps: o.report.total_throughput_bps,
        iterations: a.report.iterations,
        converged: a.report.converged,
    })
}

/// `gap.csv`: one row per seed.
pub fn cmd_optimal_gap(cfg: &ScenarioConfig, runs: u64, out: &Path) -> Result<Vec<GapRow>> {
    let rows: Vec<GapRow> = (0..runs.max(1))
        .into_par_iter()
        .map(|k| optimal_gap(&ScenarioConfig { seed: cfg.seed + k, ..cfg.clone() }))
        .collect::<Result<_>>()?;
    let mut w = writer(out, GAP_CSV)?;
    w.write_record([
        "seed",
        "arachne_objective_s",
        "optimal_objective_s",
        "objective_ratio",
        "arachne_throughput_bps",
        "optimal_throughput_bps",
        "throughput_ratio",
        "iterations",
        "converged",
    ])?;
    for r in &rows {
        w.write_record([
            r.seed.to_string(),
            fmt_f64(r.arachne_objective_s),
            fmt_f64(r.optimal_objective_s),
            fmt_f64(r.objective_ratio()),
            fmt_f64(r.arachne_throughput_bps),
            fmt_f64(r.optimal_throughput_bps),
            fmt_f64(r.throughput_ratio()),
            r.iterations.to_string(),
            r.converged.to_string(),
        ])?;
        println!(
            "seed {:>3}  objective ratio {:.4}  throughput ratio {:.4}  iterations {}",
            r.seed,
            r.objective_ratio(),
            r.throughput_ratio(),
            r.iterations
        );
    }
    w.flush()?;
    Ok(rows)
}

/// Equal demands from 0 to 4 Mb/s, then one route at a tenth of the other.
pub fn default_shared_link_demands() -> Vec<(f64, f64)> {
    let mut d: Vec<(f64, f64)> = [0.0, 0.5, 1.0, 2.0, 3.0, 4.0].iter().map(|&x| (x * 1e6, x * 1e6)).collect();
    d.extend([(2e5, 2e6), (2e6, 2e5), (4e5, 4e6)]);
    d
}

fn parse_demands(items: &[String]) -> Result<Vec<(f64, f64)>> {
    items
        .iter()
        .map(|s| {
            let bad = || Error::Config(format!("demand pair {s:?} is not `a:b` in Mb/s"));
            let (a, b) = s.split_once(':').ok_or_else(bad)?;
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            if !(a >= 0.0 && b >= 0.0 && a.is_finite() && b.is_finite()) {
                return Err(bad());
            }
            Ok((a * 1e6, b * 1e6))
        })
        .collect()
}

/// `shared_link.csv`: `demand_a_bps,demand_b_bps,interference_only_bps,load_aware_bps`.
pub fn cmd_shared_link(cfg: &ScenarioConfig, demands: &[(f64, f64)], out: &Path) -> Result<Vec<SharedLinkCase>> {
    let rows: Vec<SharedLinkCase> = demands
        .par_iter()
        .map(|&d| shared_link_table(&[d], cfg))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let mut w = writer(out, SHARED_LINK_CSV)?;
    w.write_record(["demand_a_bps", "demand_b_bps", "interference_only_bps", "load_aware_bps"])?;
    for r in &rows {
        w.write_record([
            fmt_f64(r.demand_a_bps),
            fmt_f64(r.demand_b_bps),
            fmt_f64(r.interference_only_bps),
            fmt_f64(r.load_aware_bps),
        ])?;
        println!(
            "demands {:>5.2} / {:>5.2} Mb/s  interference-only {:>6.3}  load-aware {:>6.3} Mb/s",
            r.demand_a_bps / 1e6,
            r.demand_b_bps / 1e6,
            r.interference_only_bps / 1e6,
            r.load_aware_bps / 1e6
        );
    }
    w.flush()?;
    Ok(rows)
}

/// Parses the trace against the configured topology's APs; returns a one-line summary.
pub fn cmd_trace_check(cfg: &ScenarioConfig, path: &Path) -> Result<String> {
    let topo_cfg = ScenarioConfig {
        traffic: crate::config::TrafficConfig { mode: TrafficMode::Saturated, trace: None, ..cfg.traffic.clone() },
        ..cfg.clone()
    };
    let t = build_topology(&topo_cfg)?;
    let aps: std::collections::BTreeSet<NodeId> = t.ap_ids().into_iter().collect();
    let series = load_trace_ingest(path, &aps)?;
    let rows: usize = series.values().map(|s| s.steps.len()).sum();
    let end = series
        .values()
        .filter_map(|s| s.steps.last())
        .map(|&(start, _)| start + crate::traffic::TRACE_INTERVAL_S)
        .fold(0.0, f64::max);
    Ok(format!("{}: {rows} rows, {} APs, covers {end} s", path.display(), series.len()))
}
