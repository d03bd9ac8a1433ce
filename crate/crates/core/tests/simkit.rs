use meshchan::airtime::{solve, AirtimeConfig, SaturationParams};
use meshchan::arachne::Epoch;
use meshchan::assignment::{ChannelAssignment, CostModel};
use meshchan::config::{Policy, ScenarioConfig};
use meshchan::routing::{Route, RouteTable};
use meshchan::scenario::Scenario;
use meshchan::simkit::{service_time, simulate, MetricsReport, RunInfo, SimConfig};
use meshchan::topology::{ChannelId, FlowId, MeshTopology, NodeId, TopologyBuilder};
use meshchan::traffic::{DemandModel, Flow};

const L: f64 = 12000.0;

fn sim_cfg() -> SimConfig {
    SimConfig { warmup_s: 2.0, horizon_s: 20.0, queue_packets: 100, seed: 3 }
}

/// APs in pairs `(2i, 2i+1)`, 40 m apart, pairs 100 m apart vertically.
fn pairs(n: usize) -> MeshTopology {
    let mut b = TopologyBuilder::new((1000.0, 1000.0));
    for i in 0..n {
        let y = 100.0 + 100.0 * i as f64;
        b = b.ap(format!("a{i}"), 100.0, y).ap(format!("b{i}"), 140.0, y);
    }
    b.build().unwrap()
}

/// One saturated flow per pair, pair `i` on `channels[i]`.
fn run_pairs(channels: &[u16]) -> (MeshTopology, CostModel, MetricsReport) {
    let t = pairs(channels.len());
    let model = CostModel::new(&t, AirtimeConfig::default());
    let mut asg = ChannelAssignment::default();
    let mut routes = RouteTable::default();
    let mut flows = Vec::new();
    for (i, &c) in channels.iter().enumerate() {
        let (a, b) = (NodeId(2 * i as u32), NodeId(2 * i as u32 + 1));
        let l = t.backhaul_link(a, b).unwrap();
        asg.set(l, ChannelId(c));
        let id = FlowId(i as u32);
        flows.push(Flow::new(id, a, b, DemandModel::Saturated, L).unwrap());
        routes.routes.insert(id, Route { flow: id, nodes: vec![a, b], links: vec![l], total_cost: 0.0 });
    }
    let timeline = vec![Epoch { time_s: 0.0, assignment: asg, routes }];
    let m = simulate(&t, &model, &flows, &timeline, &RunInfo::default(), &sim_cfg());
    (t, model, m)
}

/// Closed-form aggregate goodput of `n` identical saturated contenders.
fn theta(n: usize, rate: f64, frame_error: f64) -> f64 {
    solve(&SaturationParams::reference(n, L, rate)).throughput_bps * (1.0 - frame_error)
}

fn link_phy(t: &MeshTopology, model: &CostModel, i: u32, c: u16) -> (f64, f64) {
    let l = t.backhaul_link(NodeId(2 * i), NodeId(2 * i + 1)).unwrap();
    let s = model.direction_state(l, ChannelId(c), false, &[l]);
    (s.rate_bps.unwrap(), s.frame_error)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b
}

#[test]
fn single_pair_matches_saturation_throughput() {
    let (t, model, m) = run_pairs(&[36]);
    let (r, e) = link_phy(&t, &model, 0, 36);
    let expect = theta(1, r, e);
    assert!(rel(m.total_throughput_bps, expect) < 0.05, "{} vs {expect}", m.total_throughput_bps);
    assert!(m.conserved());
}

#[test]
fn co_channel_pairs_share_saturation_throughput() {
    let (t, model, m) = run_pairs(&[36, 36]);
    let (r, e) = link_phy(&t, &model, 0, 36);
    assert_eq!(link_phy(&t, &model, 1, 36), (r, e));
    let expect = theta(2, r, e);
    assert!(rel(m.total_throughput_bps, expect) < 0.10, "{} vs {expect}", m.total_throughput_bps);
    let f: Vec<f64> = m.per_flow_throughput_bps.values().copied().collect();
    assert!(rel(f[0], f[1]) < 0.10, "{f:?}");
}

#[test]
fn orthogonal_pairs_double_throughput() {
    let (t, model, m) = run_pairs(&[36, 40]);
    let (r, e) = link_phy(&t, &model, 0, 36);
    let expect = 2.0 * theta(1, r, e);
    assert!(rel(m.total_throughput_bps, expect) < 0.05, "{} vs {expect}", m.total_throughput_bps);
}

#[test]
fn no_flows_no_traffic() {
    let t = TopologyBuilder::new((100.0, 100.0)).ap("a", 10.0, 10.0).build().unwrap();
    let model = CostModel::new(&t, AirtimeConfig::default());
    let timeline = vec![Epoch { time_s: 0.0, assignment: ChannelAssignment::default(), routes: RouteTable::default() }];
    let m = simulate(&t, &model, &[], &timeline, &RunInfo::default(), &sim_cfg());
    assert_eq!(m.total_throughput_bps, 0.0);
    assert!(m.total_throughput_bps.is_sign_positive());
    assert_eq!(m.delivered.packets, 0);
    assert_eq!(m.offered_total.bits, 0);
    assert!(m.conserved());
}

#[test]
fn service_time_examples() {
    // one contender at 54 Mb/s: per-packet delay of the saturation model
    let p = SaturationParams::reference(1, L, 54e6);
    let rho = solve(&p).delay_s;
    assert!((service_time(0.0, &[54e6], L) - rho).abs() < 1e-15);
    // frame errors stretch it by 1 / (1 - e)
    assert!((service_time(0.2, &[54e6], L) - rho / 0.8).abs() < 1e-12);
    // the group delivers faster with two contenders, each radio slower
    let two = service_time(0.0, &[54e6, 54e6], L);
    assert!(two < rho && 2.0 * two > rho);
    // a slower peer costs more than a fast one
    assert!(service_time(0.0, &[54e6, 6e6], L) > service_time(0.0, &[54e6, 54e6], L));
}

fn scenario_run(policy: Policy, seed: u64) -> MetricsReport {
    let cfg = ScenarioConfig { seed, horizon_s: 10.0, ..Default::default() };
    Scenario::build(&cfg).unwrap().run_policy(policy).unwrap().report
}

#[test]
fn bits_are_conserved_on_a_mesh() {
    for policy in [Policy::Arachne, Policy::Single] {
        let m = scenario_run(policy, 4);
        assert!(m.conserved(), "{policy:?}");
        assert_eq!(
            m.offered_total.bits,
            m.delivered_total.bits + m.dropped_total.bits + m.in_flight_total.bits
        );
        let by_cause: u64 = m.drops_by_cause.values().map(|t| t.bits).sum();
        assert_eq!(by_cause, m.dropped.bits);
        assert!(m.delivered.packets > 0);
    }
}

#[test]
fn same_seed_same_report() {
    let a = scenario_run(Policy::Arachne, 9);
    let b = scenario_run(Policy::Arachne, 9);
    assert_eq!(a.rows(), b.rows());
    assert_eq!(a.per_flow_throughput_bps, b.per_flow_throughput_bps);
}
