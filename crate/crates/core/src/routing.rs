//! Minimum-airtime routing.
//!
//! A centralized shortest-path computation stands in for on-demand route
//! discovery: the protocol only depends on which routes discovery converges
//! to. Link weights are coupled airtime costs under the current assignment,
//! with the previously routed links as the active set.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::airtime::Airtime;
use crate::assignment::{ChannelAssignment, CostModel};
use crate::topology::{FlowId, LinkId, LinkLevel, MeshTopology, NodeId};
use crate::traffic::Flow;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub flow: FlowId,
    /// node sequence from source to destination
    pub nodes: Vec<NodeId>,
    /// access ingress (if any), backhaul hops, access egress (if any)
    pub links: Vec<LinkId>,
    pub total_cost: Airtime,
}

impl Route {
    pub fn backhaul_links<'a>(&'a self, t: &'a MeshTopology) -> impl Iterator<Item = LinkId> + 'a {
        self.links.iter().copied().filter(|&l| t.link(l).level == LinkLevel::Backhaul)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RouteTable {
    pub routes: BTreeMap<FlowId, Route>,
    pub unroutable: BTreeSet<FlowId>,
}

impl RouteTable {
    /// Every link carrying at least one route.
    pub fn active_links(&self) -> BTreeSet<LinkId> {
        self.routes.values().flat_map(|r| r.links.iter().copied()).collect()
    }

    pub fn backhaul_links(&self, t: &MeshTopology) -> BTreeSet<LinkId> {
        self.routes.values().flat_map(|r| r.backhaul_links(t)).collect()
    }

    /// Backhaul part of every route that has one, in flow order.
    pub fn backhaul_paths(&self, t: &MeshTopology) -> Vec<Vec<LinkId>> {
        self.routes
            .values()
            .map(|r| r.backhaul_links(t).collect::<Vec<_>>())
            .filter(|p| !p.is_empty())
            .collect()
    }

    /// Recomputes each stored total from `costs`.
    pub fn recost(&mut self, costs: &BTreeMap<LinkId, Airtime>) {
        for r in self.routes.values_mut() {
            r.total_cost = path_cost(&r.links, costs);
        }
    }
}

pub fn path_cost(links: &[LinkId], costs: &BTreeMap<LinkId, Airtime>) -> Airtime {
    links.iter().map(|l| costs.get(l).copied().unwrap_or(f64::INFINITY)).sum()
}

/// Cost each link would see if it carried traffic alongside `active`.
pub fn link_weights(
    t: &MeshTopology,
    model: &CostModel,
    asg: &ChannelAssignment,
    active: &BTreeSet<LinkId>,
) -> BTreeMap<LinkId, Airtime> {
    let mut w = model.evaluate(t, asg, active);
    for link in &t.links {
        if w.contains_key(&link.id) {
            continue;
        }
        let c = match asg.link_channel(t, link.id) {
            Some(f) => model.what_if(t, asg, active, &[link.id], f)[0],
            None => f64::INFINITY,
        };
        w.insert(link.id, c);
    }
    w
}

#[derive(Debug, Clone, PartialEq)]
struct Label {
    cost: f64,
    path: Vec<NodeId>,
}

impl Eq for Label {}

impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: BinaryHeap is a max-heap
        other.cost.total_cmp(&self.cost).then_with(|| other.path.cmp(&self.path))
    }
}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Cheapest backhaul path between two APs, ties broken by the smaller node
/// sequence. Returns the node sequence and its cost.
pub fn shortest_backhaul_path(
    t: &MeshTopology,
    weights: &BTreeMap<LinkId, Airtime>,
    src: NodeId,
    dst: NodeId,
) -> Option<(Vec<NodeId>, Airtime)> {
    let mut best: BTreeMap<NodeId, Label> = BTreeMap::new();
    let mut heap = BinaryHeap::new();
    let start = Label { cost: 0.0, path: vec![src] };
    best.insert(src, start.clone());
    heap.push(start);
    let mut done = BTreeSet::new();
    while let Some(label) = heap.pop() {
        let u = *label.path.last().unwrap();
        if !done.insert(u) {
            continue;
        }
        if u == dst {
            return Some((label.path, label.cost));
        }
        for link in t.out_links(u) {
            let w = weights.get(&link.id).copied().unwrap_or(f64::INFINITY);
            if !w.is_finite() || done.contains(&link.rx) {
                continue;
            }
            let mut path = label.path.clone();
            path.push(link.rx);
            let cand = Label { cost: label.cost + w, path };
            let better = match best.get(&link.rx) {
                None => true,
                // `Ord` is reversed, so "greater" means cheaper
                Some(old) => cand > *old,
            };
            if better {
                best.insert(link.rx, cand.clone());
                heap.push(cand);
            }
        }
    }
    None
}

/// Routes every flow with link weights seen alongside `prev_active`.
pub fn route_flows(
    t: &MeshTopology,
    model: &CostModel,
    asg: &ChannelAssignment,
    flows: &[Flow],
    prev_active: &BTreeSet<LinkId>,
) -> RouteTable {
    compute_routes(t, &link_weights(t, model, asg, prev_active), flows)
}

/// Routes every flow on its minimum-total-cost path.
pub fn compute_routes(t: &MeshTopology, weights: &BTreeMap<LinkId, Airtime>, flows: &[Flow]) -> RouteTable {
    let mut table = RouteTable::default();
    for flow in flows {
        match route_flow(t, weights, flow) {
            Some(r) => {
                table.routes.insert(flow.id, r);
            }
            None => {
                table.unroutable.insert(flow.id);
            }
        }
    }
    table
}

fn route_flow(t: &MeshTopology, weights: &BTreeMap<LinkId, Airtime>, flow: &Flow) -> Option<Route> {
    let src_ap = t.serving_ap(flow.src)?;
    let dst_ap = t.serving_ap(flow.dst)?;
    let (mid, _) = shortest_backhaul_path(t, weights, src_ap, dst_ap)?;
    let mut nodes = Vec::with_capacity(mid.len() + 2);
    let mut links = Vec::with_capacity(mid.len() + 1);
    if flow.src != src_ap {
        nodes.push(flow.src);
        links.push(t.access_link(flow.src)?);
    }
    for w in mid.windows(2) {
        links.push(t.backhaul_link(w[0], w[1])?);
    }
    nodes.extend_from_slice(&mid);
    if flow.dst != dst_ap {
        nodes.push(flow.dst);
        links.push(t.access_link(flow.dst)?);
    }
    let total_cost = path_cost(&links, weights);
    total_cost.is_finite().then_some(Route { flow: flow.id, nodes, links, total_cost })
}

/// Flows forwarded by `node` over one of its outgoing backhaul links, with
/// their load and the link used.
pub fn routes_through(
    t: &MeshTopology,
    routes: &RouteTable,
    node: NodeId,
    loads: &BTreeMap<FlowId, f64>,
) -> Vec<(FlowId, f64, LinkId)> {
    let mut out = Vec::new();
    for (fid, r) in &routes.routes {
        for l in r.backhaul_links(t) {
            if t.link(l).tx == node {
                out.push((*fid, loads.get(fid).copied().unwrap_or(0.0), l));
            }
        }
    }
    out
}

/// Rate each routed flow can sustain: one packet per airtime of its worst
/// link, capped by its demand at `time_s`.
pub fn flow_rate_estimates(
    t: &MeshTopology,
    model: &CostModel,
    asg: &ChannelAssignment,
    routes: &RouteTable,
    flows: &[Flow],
    time_s: f64,
) -> BTreeMap<FlowId, f64> {
    let costs = model.evaluate(t, asg, &routes.active_links());
    let mut out = BTreeMap::new();
    for flow in flows {
        let Some(r) = routes.routes.get(&flow.id) else { continue };
        let worst = r.links.iter().map(|l| costs.get(l).copied().unwrap_or(f64::INFINITY)).fold(0.0, f64::max);
        let mut rate = if worst > 0.0 { flow.packet_bits / worst } else { 0.0 };
        if let Some(d) = flow.demand_at(time_s) {
            rate = rate.min(d);
        }
        out.insert(flow.id, rate);
    }
    out
}

/// Sum of flow rates over each routed backhaul link.
pub fn link_loads(t: &MeshTopology, routes: &RouteTable, flow_rates: &BTreeMap<FlowId, f64>) -> BTreeMap<LinkId, f64> {
    let mut out: BTreeMap<LinkId, f64> = BTreeMap::new();
    for (fid, r) in &routes.routes {
        for l in r.backhaul_links(t) {
            *out.entry(l).or_default() += flow_rates.get(fid).copied().unwrap_or(0.0);
        }
    }
    out
}
