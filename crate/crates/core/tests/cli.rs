use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use meshchan::cli::{optimal_gap, sweep};
use meshchan::config::{Placement, Policy, ScenarioConfig, TrafficConfig, TrafficMode};
use proptest::prelude::*;
use tempfile::TempDir;

fn bin(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_meshchan"))
        .args(args)
        .arg("--out-dir")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, cfg: &ScenarioConfig) -> String {
    let p = dir.join("scenario.toml");
    fs::write(&p, cfg.to_toml()).unwrap();
    p.to_string_lossy().into_owned()
}

fn short() -> ScenarioConfig {
    ScenarioConfig { horizon_s: 5.0, warmup_s: 5.0, ..Default::default() }
}

fn metric(csv: &str, policy: &str, name: &str) -> f64 {
    csv.lines()
        .map(|l| l.split(',').collect::<Vec<_>>())
        .find(|f| f[0] == policy && f[1] == name)
        .unwrap_or_else(|| panic!("{policy}/{name} missing"))[2]
        .parse()
        .unwrap()
}

#[test]
fn minimal_config_writes_three_files() {
    let dir = TempDir::new().unwrap();
    let cfg = ScenarioConfig {
        placement: Placement::Explicit { aps: vec![[0.0, 0.0]], clients: vec![[10.0, 0.0]] },
        ..short()
    };
    let c = write_config(dir.path(), &cfg);
    let out = bin(dir.path(), &["run", "--config", &c]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let metrics = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("policy,metric,value\n"));
    assert_eq!(metric(&metrics, "arachne", "total_throughput_bps"), 0.0);
    let log = fs::read_to_string(dir.path().join("protocol_log.csv")).unwrap();
    assert!(log.starts_with("iteration,time_s,node,action,target,channel_before,channel_after,cost_before_s,cost_after_s"));
    let asg = fs::read_to_string(dir.path().join("assignment.csv")).unwrap();
    assert!(asg.starts_with("link,channel\n"));
    // one AP, one client: a single access link
    assert_eq!(asg.lines().count(), 2);
}

#[test]
fn same_seed_byte_identical_outputs() {
    let dir = TempDir::new().unwrap();
    let c = write_config(dir.path(), &short());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        assert!(bin(d, &["run", "--config", &c, "--seed", "11"]).status.success());
    }
    for f in ["metrics.csv", "protocol_log.csv", "assignment.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn arachne_beats_single_channel() {
    let dir = TempDir::new().unwrap();
    let c = write_config(dir.path(), &short());
    let out = bin(dir.path(), &["compare", "--config", &c, "--policies", "arachne,single"]);
    assert!(out.status.success());
    let m = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert!(metric(&m, "arachne", "total_throughput_bps") > metric(&m, "single", "total_throughput_bps"));
}

#[test]
fn compare_single_policy_one_row_per_metric() {
    let dir = TempDir::new().unwrap();
    let c = write_config(dir.path(), &short());
    assert!(bin(dir.path(), &["compare", "--config", &c, "--policies", "single"]).status.success());
    let m = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    let rows: Vec<&str> = m.lines().skip(1).collect();
    assert!(rows.iter().all(|r| r.starts_with("single,")));
    let mut names: Vec<&str> = rows.iter().map(|r| r.split(',').nth(1).unwrap()).collect();
    let n = names.len();
    names.dedup();
    assert_eq!(names.len(), n);
}

#[test]
fn sweep_rows_cover_every_point() {
    let rows = sweep(&short(), &[Policy::Single, Policy::Random], &[5, 20], 2).unwrap();
    let mut points: Vec<(usize, u64, Policy)> = rows
        .iter()
        .filter(|r| r.metric == "total_throughput_bps")
        .map(|r| (r.clients, r.seed, r.policy))
        .collect();
    points.dedup();
    assert_eq!(points.len(), 2 * 2 * 2);
    assert_eq!(points[0], (5, 1, Policy::Single));
}

#[test]
fn gap_on_a_single_ap_pair_is_one() {
    let cfg = ScenarioConfig {
        placement: Placement::Explicit { aps: vec![[100.0, 100.0], [200.0, 100.0]], clients: vec![[90.0, 100.0], [210.0, 100.0]] },
        traffic: TrafficConfig { sessions: 1, ..Default::default() },
        ..short()
    };
    let g = optimal_gap(&cfg).unwrap();
    assert_eq!(g.objective_ratio(), 1.0);
    assert!((g.throughput_ratio() - 1.0).abs() < 0.05, "{g:?}");
}

#[test]
fn config_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    assert_eq!(bin(dir.path(), &["run", "--channels", "5"]).status.code(), Some(1));
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "bogus = 1\n").unwrap();
    assert_eq!(bin(dir.path(), &["run", "--config", bad.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(bin(dir.path(), &["run", "--config", "/nonexistent.toml"]).status.code(), Some(1));
}

#[test]
fn solver_limit_exits_two() {
    let dir = TempDir::new().unwrap();
    let mut cfg = short();
    cfg.solver.node_limit = 1;
    cfg.solver.enumeration_limit = 1.0;
    let c = write_config(dir.path(), &cfg);
    assert_eq!(bin(dir.path(), &["run", "--config", &c, "--policy", "optimal"]).status.code(), Some(2));
}

#[test]
fn trace_check_accepts_and_rejects() {
    let dir = TempDir::new().unwrap();
    let good = dir.path().join("good.csv");
    fs::write(&good, "interval_start_s,ap_id,demand_bps\n0,ap0,1000000\n180,3,500000\n").unwrap();
    let out = bin(dir.path(), &["trace-check", "--trace", good.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("2 rows"));
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "interval_start_s,ap_id,demand_bps\n0,ap99,1\n").unwrap();
    assert_eq!(bin(dir.path(), &["trace-check", "--trace", bad.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn paper_scenario_writes_table() {
    let dir = TempDir::new().unwrap();
    let c = write_config(dir.path(), &short());
    let out = bin(dir.path(), &["paper-scenario", "--config", &c, "--demands", "0:0,2:2"]);
    assert!(out.status.success());
    let t = fs::read_to_string(dir.path().join("shared_link.csv")).unwrap();
    let lines: Vec<&str> = t.lines().collect();
    assert_eq!(lines[0], "demand_a_bps,demand_b_bps,interference_only_bps,load_aware_bps");
    assert_eq!(lines[1], "0,0,0,0");
    assert_eq!(lines.len(), 3);
    assert_eq!(bin(dir.path(), &["paper-scenario", "--name", "nope"]).status.code(), Some(1));
}

fn arb_config() -> impl Strategy<Value = ScenarioConfig> {
    (
        1usize..30,
        0usize..80,
        2usize..6,
        prop::bool::ANY,
        prop::sample::select(Policy::ALL.to_vec()),
        0..=i64::MAX as u64,
        1.0f64..100.0,
        prop::option::of(prop::collection::vec((0.0f64..1000.0, 0.0f64..1000.0), 1..4)),
        prop::sample::select(vec![TrafficMode::Saturated, TrafficMode::Voip, TrafficMode::Trace]),
    )
        .prop_map(|(aps, clients, radios, three, policy, seed, horizon_s, explicit, mode)| {
            let mut cfg = ScenarioConfig {
                aps,
                clients,
                radios,
                channels: if three { 3 } else { 12 },
                policy,
                seed,
                horizon_s,
                ..Default::default()
            };
            if let Some(pts) = explicit {
                let v: Vec<[f64; 2]> = pts.iter().map(|&(x, y)| [x, y]).collect();
                cfg.placement = Placement::Explicit { aps: v.clone(), clients: v };
            }
            cfg.traffic.mode = mode;
            if mode == TrafficMode::Trace {
                cfg.traffic.trace = Some("demand.csv".into());
            }
            cfg
        })
}

proptest! {
    #[test]
    fn config_round_trip(cfg in arb_config()) {
        let once = ScenarioConfig::from_toml(&cfg.to_toml()).unwrap();
        prop_assert_eq!(&once, &cfg);
        prop_assert_eq!(ScenarioConfig::from_toml(&once.to_toml()).unwrap(), once);
    }
}
