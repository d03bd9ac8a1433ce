//! Builds a scenario from its config and applies a channel policy to it.

use std::collections::{BTreeMap, BTreeSet};

use crate::airtime::{Airtime, AirtimeConfig};
use crate::arachne::{p1_access_select, run_protocol, Context, Epoch, ProtocolRun};
use crate::assignment::{max_path_cost, repair_radio_limits, ChannelAssignment, CostModel};
use crate::baselines::{
    assign_interference_only, assign_random, assign_single_channel, assign_tree_based, default_gateway,
};
use crate::config::{Policy, ScenarioConfig, TrafficMode};
use crate::error::{Error, Result};
use crate::optimal::{solve_exact, Allocation, AllocationProblem, CostMode};
use crate::simkit::{simulate, MetricsReport, RunInfo, SimConfig};
use crate::routing::{flow_rate_estimates, link_loads, route_flows, Route, RouteTable};
use crate::topology::{build_topology, ChannelId, FlowId, LinkId, MeshTopology, NodeId, TopologyBuilder};
use crate::traffic::{generate_flows, load_trace_ingest, DemandModel, DemandSeries, Flow};

use serde::{Deserialize, Serialize};

const OPTIMAL_ROUTE_ROUNDS: usize = 4;

pub struct Scenario {
    pub cfg: ScenarioConfig,
    pub topology: MeshTopology,
    pub model: CostModel,
    pub flows: Vec<Flow>,
    pub trace: Option<BTreeMap<NodeId, DemandSeries>>,
}

impl Scenario {
    pub fn build(cfg: &ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let topology = build_topology(cfg)?;
        let trace = match (&cfg.traffic.mode, &cfg.traffic.trace) {
            (TrafficMode::Trace, Some(path)) => {
                let aps: BTreeSet<NodeId> = topology.ap_ids().into_iter().collect();
                Some(load_trace_ingest(path, &aps)?)
            }
            _ => None,
        };
        let flows = generate_flows(cfg, &topology, trace.as_ref())?;
        Ok(Self::from_parts(cfg.clone(), topology, flows, trace))
    }

    pub fn from_parts(
        cfg: ScenarioConfig,
        topology: MeshTopology,
        flows: Vec<Flow>,
        trace: Option<BTreeMap<NodeId, DemandSeries>>,
    ) -> Self {
        let model = CostModel::new(&topology, AirtimeConfig::default());
        Self { cfg, topology, model, flows, trace }
    }

    /// Worst backhaul path cost of `routes` under `asg`.
    pub fn objective(&self, asg: &ChannelAssignment, routes: &RouteTable) -> Airtime {
        let costs = self.model.evaluate(&self.topology, asg, &routes.active_links());
        max_path_cost(&routes.backhaul_paths(&self.topology), &costs)
    }

    /// Routes on `asg` twice (cold, then with the first routes active) and
    /// repairs radio limits on the result.
    pub fn settle(&self, asg: &mut ChannelAssignment) -> RouteTable {
        let t = &self.topology;
        let cold = route_flows(t, &self.model, asg, &self.flows, &BTreeSet::new());
        let routes = route_flows(t, &self.model, asg, &self.flows, &cold.active_links());
        self.repair(asg, &routes);
        routes
    }

    pub fn repair(&self, asg: &mut ChannelAssignment, routes: &RouteTable) -> usize {
        let rates = flow_rate_estimates(&self.topology, &self.model, asg, routes, &self.flows, 0.0);
        let loads = link_loads(&self.topology, routes, &rates);
        repair_radio_limits(&self.topology, asg, &routes.backhaul_links(&self.topology), &loads)
    }

    /// Applies the access-channel rule at every AP until nothing moves.
    pub fn settle_access(&self, asg: &mut ChannelAssignment, active: &BTreeSet<LinkId>) {
        let threshold = self.cfg.protocol.threshold(&self.model);
        for _ in 0..16 {
            let mut moved = false;
            for ap in self.topology.ap_ids() {
                let d = p1_access_select(&self.topology, &self.model, asg, active, ap, threshold);
                if asg.access_channel(ap) != Some(d.channel) {
                    asg.set_access(ap, d.channel);
                    moved = true;
                }
            }
            if !moved {
                break;
            }
        }
    }

    /// Exact coupled optimum over the backhaul paths of `routes`.
    pub fn optimal_allocation(&self, routes: &RouteTable) -> Result<(AllocationProblem, Allocation)> {
        let t = &self.topology;
        let paths = routes.backhaul_paths(t);
        let channels: Vec<ChannelId> = t.backhaul_channels.iter().map(|c| c.id).collect();
        let p = match self.cfg.solver.mode {
            CostMode::Coupled => {
                AllocationProblem::coupled(t, self.model.clone(), &paths, channels, Some(t.radio_limits))?
            }
            CostMode::Fixed => {
                let links: Vec<LinkId> = paths.iter().flatten().copied().collect::<BTreeSet<_>>().into_iter().collect();
                let index: BTreeMap<LinkId, usize> = links.iter().enumerate().map(|(i, &l)| (l, i)).collect();
                let table = links
                    .iter()
                    .map(|&l| channels.iter().map(|&f| self.model.base_cost(l, f, &[l])).collect())
                    .collect();
                let idx = paths.iter().map(|p| p.iter().map(|l| index[l]).collect()).collect();
                let mut p = AllocationProblem::fixed(idx, table, channels)?;
                p.links = links;
                p
            }
        };
        let a = solve_exact(&p, &self.cfg.solver)?;
        Ok((p, a))
    }

    /// Solves on each starting route set, then alternates rerouting on the
    /// solution and re-solving; keeps the best (assignment, routes) seen.
    pub fn optimal_with_rerouting(&self, starts: &[RouteTable]) -> Result<(ChannelAssignment, RouteTable)> {
        let t = &self.topology;
        let mut best: Option<(Airtime, ChannelAssignment, RouteTable)> = None;
        for start in starts {
            let mut asg = assign_single_channel(t);
            let mut routes = start.clone();
            for _ in 0..OPTIMAL_ROUTE_ROUNDS {
                let (p, a) = self.optimal_allocation(&routes)?;
                p.apply(&a.choice, &mut asg);
                if best.as_ref().map_or(true, |b| a.objective < b.0 - 1e-12) {
                    best = Some((a.objective, asg.clone(), routes.clone()));
                }
                let next = route_flows(t, &self.model, &asg, &self.flows, &routes.active_links());
                if next.routes == routes.routes {
                    break;
                }
                routes = next;
            }
        }
        let (_, asg, routes) = best.ok_or_else(|| Error::Config("no starting routes".into()))?;
        Ok((asg, routes))
    }

    /// Cold routes plus the routes ARACHNE settles on.
    pub fn optimal_starts(&self) -> Vec<RouteTable> {
        let t = &self.topology;
        let cold = route_flows(t, &self.model, &assign_single_channel(t), &self.flows, &BTreeSet::new());
        let (_, arachne_routes, _) = self.run_arachne();
        vec![cold, arachne_routes]
    }

    fn run_arachne(&self) -> (ChannelAssignment, RouteTable, ProtocolRun) {
        let t = &self.topology;
        let mut asg = assign_random(t, self.cfg.seed);
        let routes = self.settle(&mut asg);
        let ctx = Context { t, model: &self.model, flows: &self.flows, cfg: &self.cfg.protocol, fixed_routes: false };
        let run = run_protocol(ctx, asg, routes, BTreeSet::new());
        (run.assignment.clone(), run.routes.clone(), run)
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            warmup_s: self.cfg.warmup_s,
            horizon_s: self.cfg.horizon_s,
            queue_packets: self.cfg.queue_packets,
            seed: self.cfg.seed,
        }
    }

    /// Applies `policy` and simulates the traffic over its timeline.
    pub fn run_policy(&self, policy: Policy) -> Result<ScenarioRun> {
        let outcome = self.apply_policy(policy)?;
        let info = match &outcome.protocol {
            Some(run) => RunInfo {
                policy: policy.name().into(),
                iterations: run.iterations,
                converged: run.converged,
                convergence_time_s: run.convergence_time_s,
                objective_s: outcome.objective,
                objective_trace: run.objective_trace.clone(),
            },
            None => RunInfo {
                policy: policy.name().into(),
                converged: true,
                objective_s: outcome.objective,
                ..Default::default()
            },
        };
        let report = simulate(&self.topology, &self.model, &self.flows, &outcome.timeline, &info, &self.sim_config());
        Ok(ScenarioRun { outcome, report })
    }

    pub fn apply_policy(&self, policy: Policy) -> Result<PolicyOutcome> {
        let t = &self.topology;
        let seed = self.cfg.seed;
        let baseline = |mut asg: ChannelAssignment| {
            let routes = self.settle(&mut asg);
            self.settle_access(&mut asg, &routes.active_links());
            (asg, routes)
        };
        let (assignment, routes, protocol) = match policy {
            Policy::Single => {
                let (a, r) = baseline(assign_single_channel(t));
                (a, r, None)
            }
            Policy::Random => {
                let (a, r) = baseline(assign_random(t, seed));
                (a, r, None)
            }
            Policy::Interference => {
                let (a, r) = baseline(assign_interference_only(t));
                (a, r, None)
            }
            Policy::Tree => {
                let (a, r) = baseline(assign_tree_based(t, default_gateway(t))?);
                (a, r, None)
            }
            Policy::Optimal => {
                let (mut asg, routes) = self.optimal_with_rerouting(&self.optimal_starts())?;
                self.settle_access(&mut asg, &routes.active_links());
                (asg, routes, None)
            }
            Policy::Arachne => {
                let (a, r, run) = self.run_arachne();
                (a, r, Some(run))
            }
        };
        let objective = self.objective(&assignment, &routes);
        let (timeline, convergence_time_s) = match &protocol {
            Some(run) => (run.timeline.clone(), run.convergence_time_s),
            None => (vec![Epoch { time_s: 0.0, assignment: assignment.clone(), routes: routes.clone() }], 0.0),
        };
        Ok(PolicyOutcome { policy, assignment, routes, objective, timeline, convergence_time_s, protocol })
    }
}

/// A policy's final state, plus the protocol run when there was one.
#[derive(Debug, Clone)]
pub struct PolicyOutcome {
    pub policy: Policy,
    pub assignment: ChannelAssignment,
    pub routes: RouteTable,
    pub objective: Airtime,
    /// assignments in force over time, first epoch at 0
    pub timeline: Vec<Epoch>,
    pub convergence_time_s: f64,
    pub protocol: Option<ProtocolRun>,
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub outcome: PolicyOutcome,
    pub report: MetricsReport,
}

/// Builds the scenario and runs its configured policy.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioRun> {
    Scenario::build(cfg)?.run_policy(cfg.policy)
}

/// Labels of the two-route shared-link topology, in AP id order.
pub const SHARED_LINK_LABELS: [&str; 8] = ["13", "14", "15", "16", "17", "18", "19", "20"];

/// One row of the shared-link demand table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharedLinkCase {
    pub demand_a_bps: f64,
    pub demand_b_bps: f64,
    pub interference_only_bps: f64,
    pub load_aware_bps: f64,
}

/// Eight APs; route (a) 16→15→20→19 and route (b) 13→15→20→14 share
/// 15→20, and a background pair 17→18 runs beside the shared link.
pub fn shared_link_topology() -> Result<MeshTopology> {
    let pos: [(f64, f64); 8] = [
        (100.0, 550.0), // 13
        (800.0, 550.0), // 14
        (300.0, 400.0), // 15
        (100.0, 250.0), // 16
        (300.0, 700.0), // 17
        (550.0, 700.0), // 18
        (800.0, 250.0), // 19
        (550.0, 400.0), // 20
    ];
    let mut b = TopologyBuilder::new((1000.0, 1000.0));
    b.backhaul_channel_count = 3;
    for (label, (x, y)) in SHARED_LINK_LABELS.iter().zip(pos) {
        b = b.ap(*label, x, y);
    }
    b.build()
}

fn label_id(t: &MeshTopology, label: &str) -> NodeId {
    t.aps().find(|n| n.label == label).expect("known label").id
}

fn fixed_route(t: &MeshTopology, flow: FlowId, labels: &[&str]) -> Route {
    let nodes: Vec<NodeId> = labels.iter().map(|l| label_id(t, l)).collect();
    let links = nodes.windows(2).map(|w| t.backhaul_link(w[0], w[1]).expect("neighbouring APs")).collect();
    Route { flow, nodes, links, total_cost: 0.0 }
}

/// Background demand on 17→18.
pub const SHARED_LINK_BACKGROUND_BPS: f64 = 2e6;

/// Total delivered throughput of both routes, per policy, for each
/// `(demand a, demand b)` pair. Routes are fixed.
pub fn shared_link_table(demands: &[(f64, f64)], cfg: &ScenarioConfig) -> Result<Vec<SharedLinkCase>> {
    let t = shared_link_topology()?;
    let mut rows = Vec::with_capacity(demands.len());
    for &(da, db) in demands {
        let mut flows = Vec::new();
        let mut routes = RouteTable::default();
        let specs: [(&[&str], f64); 3] = [
            (&["16", "15", "20", "19"], da),
            (&["13", "15", "20", "14"], db),
            (&["17", "18"], SHARED_LINK_BACKGROUND_BPS),
        ];
        for (i, (path, demand)) in specs.into_iter().enumerate() {
            if demand <= 0.0 {
                continue;
            }
            let id = FlowId(i as u32);
            let r = fixed_route(&t, id, path);
            flows.push(Flow::new(id, r.nodes[0], *r.nodes.last().unwrap(), DemandModel::Cbr { rate_bps: demand }, cfg.traffic.packet_bits)?);
            routes.routes.insert(id, r);
        }
        let sc = Scenario::from_parts(cfg.clone(), t.clone(), flows, None);
        let measured = |timeline: &[Epoch], convergence_time_s: f64| {
            let info = RunInfo { convergence_time_s, ..Default::default() };
            let m = simulate(&sc.topology, &sc.model, &sc.flows, timeline, &info, &sc.sim_config());
            // the background pair is not part of the comparison
            m.per_flow_throughput_bps.iter().filter(|(f, _)| f.0 < 2).fold(0.0, |acc, (_, v)| acc + v)
        };

        let mut a1 = assign_interference_only(&t);
        sc.repair(&mut a1, &routes);
        let a1_bps = measured(&[Epoch { time_s: 0.0, assignment: a1, routes: routes.clone() }], 0.0);

        let mut start = assign_interference_only(&t);
        sc.repair(&mut start, &routes);
        let ctx = Context { t: &t, model: &sc.model, flows: &sc.flows, cfg: &cfg.protocol, fixed_routes: true };
        let run = run_protocol(ctx, start, routes.clone(), BTreeSet::new());
        let a2_bps = measured(&run.timeline, run.convergence_time_s);

        rows.push(SharedLinkCase { demand_a_bps: da, demand_b_bps: db, interference_only_bps: a1_bps, load_aware_bps: a2_bps });
    }
    Ok(rows)
}
