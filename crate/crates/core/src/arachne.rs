//! The distributed channel-selection protocol.
//!
//! Access level (P1): each AP keeps its 2.4 GHz channel while the average
//! client airtime stays under a threshold, and otherwise dwells on every
//! access channel and takes the cheapest.
//!
//! Backhaul (P2): APs are ranked by current and estimated load. A token
//! walks down that list; the holder packs its outgoing route sessions into
//! its OUT radios, scans every backhaul channel for each radio and asks the
//! receivers to follow with RTC. A receiver answers CTC and retunes an IN
//! radio, or XTC with its IN channels when the radio it would need was
//! already claimed this iteration. Retuning a radio moves every link on it,
//! so a change can drag neighbours' links along. A node's turn is undone if
//! it does not lower its own cumulative cost or raises the network's worst
//! path. After every node has had the token, routes are recomputed and the
//! loop repeats until a full iteration changes nothing.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::airtime::{airtime_from, Airtime};
use crate::assignment::{max_path_cost, radio_violations, repair_radio_limits, ChannelAssignment, CostModel, RadioSide};
use crate::error::{Error, Result};
use crate::phy::RATE_TABLE;
use crate::routing::{flow_rate_estimates, link_loads, route_flows, RouteTable};
use crate::topology::{ChannelId, FlowId, LinkId, MeshTopology, NodeId, CONTROL_CHANNEL};
use crate::traffic::{estimate_load, Flow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub w1: f64,
    pub w2: f64,
    /// access scan trigger, seconds of average client airtime; default 3× idle top-rate cost
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold_s: Option<f64>,
    pub dwell_s: f64,
    /// RTC retransmission timeout
    pub timeout_s: f64,
    pub rtc_retries: u32,
    pub control_latency_s: f64,
    pub max_iterations: usize,
    pub control_channel: ChannelId,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            w1: 0.6,
            w2: 0.4,
            threshold_s: None,
            dwell_s: 0.1,
            timeout_s: 0.05,
            rtc_retries: 3,
            control_latency_s: 0.002,
            max_iterations: 20,
            control_channel: ChannelId(CONTROL_CHANNEL),
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(0.0..=1.0).contains(&self.w1) || !(0.0..=1.0).contains(&self.w2) || (self.w1 + self.w2 - 1.0).abs() > 1e-9 {
            return bad("protocol weights must lie in [0, 1] and sum to 1");
        }
        if !(self.dwell_s > 0.0) || !(self.timeout_s > 0.0) || !(self.control_latency_s >= 0.0) {
            return bad("dwell_s and timeout_s must be positive");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be at least 1");
        }
        if matches!(self.threshold_s, Some(t) if !(t > 0.0)) {
            return bad("threshold_s must be positive");
        }
        Ok(())
    }

    /// Access trigger threshold in seconds.
    pub fn threshold(&self, model: &CostModel) -> Airtime {
        self.threshold_s.unwrap_or_else(|| 3.0 * 2.0 * airtime_from(&model.airtime, RATE_TABLE[7].0, 0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorityRank {
    pub node: NodeId,
    pub rank: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterfaceBudget {
    pub node: NodeId,
    pub n_out: usize,
    /// per-radio load cap, bit/s
    pub l_sh: f64,
    /// sessions per OUT radio, with their loads
    pub radios: Vec<Vec<(LinkId, f64)>>,
    /// some radio exceeds `l_sh` because sessions are indivisible
    pub over_budget: bool,
}

impl InterfaceBudget {
    pub fn radio_loads(&self) -> Vec<f64> {
        self.radios.iter().map(|r| r.iter().map(|s| s.1).sum()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ControlMessage {
    Laba { ap: NodeId, clients: Vec<NodeId>, rank: f64 },
    Rtc { from: NodeId, to: NodeId, link: LinkId, proposed: ChannelId },
    Ctc { from: NodeId, to: NodeId, link: LinkId },
    Xtc { from: NodeId, to: NodeId, link: LinkId, channels: Vec<ChannelId> },
    GoodToGo { from: NodeId, next: NodeId },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HandshakeOutcome {
    Switched(ChannelId),
    Constrained(ChannelId),
    TimedOut,
}

/// Serializable protocol state between events.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProtocolState {
    pub iteration: usize,
    pub priority: Vec<PriorityRank>,
    pub token: Option<NodeId>,
    /// radios claimed through a handshake in the current iteration
    pub locks: BTreeSet<(NodeId, RadioSide, ChannelId)>,
    /// per-node L_crnt history, one value per iteration
    pub load_history: BTreeMap<NodeId, Vec<f64>>,
    /// receivers that never answer (fault injection)
    pub silenced: BTreeSet<NodeId>,
    pub elapsed_s: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub iteration: usize,
    pub time_s: f64,
    pub node: NodeId,
    pub action: String,
    pub target: String,
    pub channel_before: Option<ChannelId>,
    pub channel_after: Option<ChannelId>,
    pub cost_before: f64,
    pub cost_after: f64,
}

/// Violation counters for the protocol invariants.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Audit {
    pub token_violations: usize,
    pub connectivity_violations: usize,
    pub xtc_violations: usize,
    pub local_improvement_violations: usize,
    pub objective_increases: usize,
    pub handshakes: usize,
    pub turns: usize,
}

impl Audit {
    pub fn total_violations(&self) -> usize {
        self.token_violations
            + self.connectivity_violations
            + self.xtc_violations
            + self.local_improvement_violations
            + self.objective_increases
    }
}

/// State of the network from a point in time on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Epoch {
    pub time_s: f64,
    pub assignment: ChannelAssignment,
    pub routes: RouteTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolRun {
    pub assignment: ChannelAssignment,
    pub routes: RouteTable,
    pub iterations: usize,
    pub converged: bool,
    pub convergence_time_s: f64,
    /// worst backhaul path cost at the end of each iteration, after rerouting
    pub objective_trace: Vec<f64>,
    pub log: Vec<LogRow>,
    pub messages: usize,
    pub audit: Audit,
    pub timeline: Vec<Epoch>,
    pub state: ProtocolState,
}

/// Average bidirectional airtime of an AP's clients, if it has any.
fn access_cost(
    t: &MeshTopology,
    model: &CostModel,
    asg: &ChannelAssignment,
    active: &BTreeSet<LinkId>,
    links: &[LinkId],
    f: ChannelId,
) -> f64 {
    let costs = model.what_if(t, asg, active, links, f);
    costs.iter().sum::<f64>() / costs.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccessDecision {
    pub channel: ChannelId,
    pub current_cost: f64,
    /// per-channel average cost; empty when no scan ran
    pub scan: Vec<(ChannelId, f64)>,
}

/// P1: keep the access channel under the threshold, else take the cheapest.
pub fn p1_access_select(
    t: &MeshTopology,
    model: &CostModel,
    asg: &ChannelAssignment,
    active: &BTreeSet<LinkId>,
    ap: NodeId,
    threshold: Airtime,
) -> AccessDecision {
    let current = asg.access_channel(ap).unwrap_or(t.access_channels[0].id);
    let links: Vec<LinkId> = t.clients_of(ap).iter().filter_map(|&c| t.access_link(c)).collect();
    if links.is_empty() {
        return AccessDecision { channel: current, current_cost: 0.0, scan: Vec::new() };
    }
    let current_cost = access_cost(t, model, asg, active, &links, current);
    if current_cost <= threshold {
        return AccessDecision { channel: current, current_cost, scan: Vec::new() };
    }
    let scan: Vec<(ChannelId, f64)> =
        t.access_channels.iter().map(|c| (c.id, access_cost(t, model, asg, active, &links, c.id))).collect();
    let best = pick_min(&scan);
    // switching needs a strict gain
    let channel = if best.1 < current_cost { best.0 } else { current };
    AccessDecision { channel, current_cost, scan }
}

fn pick_min(list: &[(ChannelId, f64)]) -> (ChannelId, f64) {
    *list
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .expect("non-empty channel list")
}

/// P2a: descending rank, ties by ascending node id.
pub fn p2a_build_priority_list(loads: &BTreeMap<NodeId, (f64, f64)>, cfg: &ProtocolConfig) -> Vec<PriorityRank> {
    let mut list: Vec<PriorityRank> = loads
        .iter()
        .map(|(&node, &(cur, est))| PriorityRank { node, rank: cfg.w1 * cur + cfg.w2 * est })
        .collect();
    list.sort_by(|a, b| b.rank.total_cmp(&a.rank).then(a.node.cmp(&b.node)));
    list
}

/// P2b: cumulative cost of `links` moved together onto each channel, ascending.
pub fn p2b_scan_channels(
    t: &MeshTopology,
    model: &CostModel,
    asg: &ChannelAssignment,
    active: &BTreeSet<LinkId>,
    links: &[LinkId],
) -> Vec<(ChannelId, f64)> {
    let mut list: Vec<(ChannelId, f64)> = t
        .backhaul_channels
        .iter()
        .map(|c| {
            let cost = if links.is_empty() { 0.0 } else { model.what_if(t, asg, active, links, c.id).iter().sum() };
            (c.id, cost)
        })
        .collect();
    list.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    list
}

/// P2c: one session per radio when they fit, else first-fit-decreasing
/// under `L_sh = total / n_out`, overflow going to the least-loaded radio.
pub fn p2c_assign_flows_to_radios(node: NodeId, sessions: &[(LinkId, f64)], n_out: usize) -> InterfaceBudget {
    assert!(n_out >= 1);
    let total: f64 = sessions.iter().map(|s| s.1).sum();
    let l_sh = total / n_out as f64;
    let mut sorted = sessions.to_vec();
    sorted.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut radios: Vec<Vec<(LinkId, f64)>> = vec![Vec::new(); n_out];
    let mut load = vec![0.0; n_out];
    let mut over_budget = false;
    if sorted.len() <= n_out {
        for (i, s) in sorted.into_iter().enumerate() {
            load[i] = s.1;
            radios[i].push(s);
        }
    } else {
        let slack = 1e-9 * total.max(1.0);
        for s in sorted {
            let slot = (0..n_out).find(|&r| load[r] + s.1 <= l_sh + slack).unwrap_or_else(|| {
                over_budget = true;
                (0..n_out).min_by(|&a, &b| load[a].total_cmp(&load[b]).then(a.cmp(&b))).unwrap()
            });
            load[slot] += s.1;
            radios[slot].push(s);
        }
    }
    InterfaceBudget { node, n_out, l_sh, radios, over_budget }
}

/// Why a radio retune could not go ahead.
#[derive(Debug, Clone, PartialEq)]
enum Block {
    /// a radio that would have to move was claimed this iteration;
    /// `origin` is the link of the moving group whose receiver answers XTC
    Locked { origin: LinkId },
    Silent { origin: LinkId },
}

/// Links that move when `group` is retuned to `f`: a side whose distinct
/// channel count would exceed its radios retunes the radio that carried the
/// moving link, and everything on that radio follows.
fn plan_move(
    t: &MeshTopology,
    asg: &ChannelAssignment,
    routed: &BTreeSet<LinkId>,
    group: &[LinkId],
    f: ChannelId,
    state: &ProtocolState,
) -> std::result::Result<BTreeMap<LinkId, LinkId>, Block> {
    let lim = t.radio_limits;
    // moving link → group link it was dragged by
    let mut moving: BTreeMap<LinkId, LinkId> = group.iter().map(|&l| (l, l)).collect();
    let mut queue: Vec<LinkId> = group.to_vec();
    while let Some(l) = queue.pop() {
        let origin = moving[&l];
        let link = t.link(l);
        if state.silenced.contains(&link.rx) {
            return Err(Block::Silent { origin });
        }
        let Some(old) = asg.channel(l) else { continue };
        if old == f {
            continue;
        }
        for (node, side, cap) in [(link.tx, RadioSide::Out, lim.n_out), (link.rx, RadioSide::In, lim.n_in)] {
            let side_links: Vec<LinkId> = routed
                .iter()
                .copied()
                .filter(|&k| {
                    let kl = t.link(k);
                    match side {
                        RadioSide::Out => kl.tx == node,
                        RadioSide::In => kl.rx == node,
                    }
                })
                .collect();
            let mut after: BTreeSet<ChannelId> = side_links
                .iter()
                .filter(|k| !moving.contains_key(k))
                .filter_map(|&k| asg.channel(k))
                .collect();
            after.insert(f);
            if after.len() <= cap {
                continue;
            }
            if state.locks.contains(&(node, side, old)) {
                return Err(Block::Locked { origin });
            }
            for k in side_links {
                if asg.channel(k) == Some(old) && !moving.contains_key(&k) {
                    moving.insert(k, origin);
                    queue.push(k);
                }
            }
        }
    }
    Ok(moving)
}

/// Everything the protocol reads from the world.
pub struct Context<'a> {
    pub t: &'a MeshTopology,
    pub model: &'a CostModel,
    pub flows: &'a [Flow],
    pub cfg: &'a ProtocolConfig,
    /// keep the initial routes instead of rerouting after each iteration
    pub fixed_routes: bool,
}

struct Run<'a> {
    ctx: Context<'a>,
    asg: ChannelAssignment,
    routes: RouteTable,
    state: ProtocolState,
    log: Vec<LogRow>,
    audit: Audit,
    messages: usize,
}

impl<'a> Run<'a> {
    fn routed(&self) -> BTreeSet<LinkId> {
        self.routes.backhaul_links(self.ctx.t)
    }

    fn active(&self) -> BTreeSet<LinkId> {
        self.routes.active_links()
    }

    fn objective(&self) -> f64 {
        let costs = self.ctx.model.evaluate(self.ctx.t, &self.asg, &self.active());
        max_path_cost(&self.routes.backhaul_paths(self.ctx.t), &costs)
    }

    fn send(&mut self, _msg: ControlMessage) {
        self.messages += 1;
        self.state.elapsed_s += self.ctx.cfg.control_latency_s;
    }

    #[allow(clippy::too_many_arguments)]
    fn log(&mut self, node: NodeId, action: &str, target: String, before: Option<ChannelId>, after: Option<ChannelId>, cb: f64, ca: f64) {
        self.log.push(LogRow {
            iteration: self.state.iteration,
            time_s: self.state.elapsed_s,
            node,
            action: action.into(),
            target,
            channel_before: before,
            channel_after: after,
            cost_before: cb,
            cost_after: ca,
        });
    }

    fn check_connectivity(&mut self) {
        if !radio_violations(self.ctx.t, &self.asg, &self.routed()).is_empty() {
            self.audit.connectivity_violations += 1;
        }
    }

    /// Per-flow load: bottleneck service rate of its route, capped by demand.
    fn flow_loads(&self) -> BTreeMap<FlowId, f64> {
        flow_rate_estimates(self.ctx.t, self.ctx.model, &self.asg, &self.routes, self.ctx.flows, self.state.elapsed_s)
    }

    fn link_loads(&self, flow_loads: &BTreeMap<FlowId, f64>) -> BTreeMap<LinkId, f64> {
        link_loads(self.ctx.t, &self.routes, flow_loads)
    }

    fn access_phase(&mut self) -> usize {
        let t = self.ctx.t;
        let threshold = self.ctx.cfg.threshold(self.ctx.model);
        let mut changes = 0;
        let mut scanned = false;
        for ap in t.ap_ids() {
            let active = self.active();
            let d = p1_access_select(t, self.ctx.model, &self.asg, &active, ap, threshold);
            if d.scan.is_empty() {
                continue;
            }
            scanned = true;
            let before = self.asg.access_channel(ap);
            let after_cost = d.scan.iter().find(|s| s.0 == d.channel).map_or(d.current_cost, |s| s.1);
            if Some(d.channel) != before {
                self.asg.set_access(ap, d.channel);
                changes += 1;
                self.log(ap, "access_switch", "access".into(), before, Some(d.channel), d.current_cost, after_cost);
            } else {
                self.log(ap, "access_keep", "access".into(), before, before, d.current_cost, d.current_cost);
            }
        }
        if scanned {
            // access scans run in parallel at every triggered AP
            self.state.elapsed_s += self.ctx.cfg.dwell_s * t.access_channels.len() as f64;
        }
        changes
    }

    fn node_loads(&mut self, flow_loads: &BTreeMap<FlowId, f64>) -> BTreeMap<NodeId, (f64, f64)> {
        let link_loads = self.link_loads(flow_loads);
        let mut out = BTreeMap::new();
        for ap in self.ctx.t.ap_ids() {
            let cur: f64 = link_loads.iter().filter(|(l, _)| self.ctx.t.link(**l).tx == ap).map(|(_, v)| v).sum();
            let hist = self.state.load_history.entry(ap).or_default();
            hist.push(cur);
            out.insert(ap, (cur, estimate_load(hist)));
        }
        out
    }

    /// Local cumulative cost of `node`'s routed OUT links.
    fn local_cost(&self, node: NodeId) -> f64 {
        let active = self.active();
        let costs = self.ctx.model.evaluate(self.ctx.t, &self.asg, &active);
        self.routed().iter().filter(|&&l| self.ctx.t.link(l).tx == node).map(|l| costs[l]).sum()
    }

    fn apply(&mut self, moving: &BTreeMap<LinkId, LinkId>, f: ChannelId) {
        for &l in moving.keys() {
            self.asg.set(l, f);
        }
    }

    /// One radio group's scan and handshakes. Returns true if links moved.
    fn radio_turn(&mut self, node: NodeId, group: &[LinkId]) -> bool {
        let t = self.ctx.t;
        let active = self.active();
        let routed = self.routed();
        let scan = p2b_scan_channels(t, self.ctx.model, &self.asg, &active, group);
        self.state.elapsed_s += self.ctx.cfg.dwell_s * scan.len() as f64;
        let (proposed, best_cost) = scan[0];
        let current_cost: f64 = group
            .iter()
            .map(|&l| self.ctx.model.what_if(t, &self.asg, &active, &[l], self.asg.channel(l).unwrap())[0])
            .sum();
        let group_label = group.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(" ");
        let before = self.asg.channel(group[0]);
        self.log(node, "scan", group_label.clone(), before, Some(proposed), current_cost, best_cost);
        if group.iter().all(|&l| self.asg.channel(l) == Some(proposed)) {
            return false;
        }
        let mut target = proposed;
        let mut tried_xtc = false;
        loop {
            for &l in group {
                let rx = t.link(l).rx;
                self.send(ControlMessage::Rtc { from: node, to: rx, link: l, proposed: target });
            }
            match plan_move(t, &self.asg, &routed, group, target, &self.state) {
                Ok(moving) => {
                    for &l in group {
                        let rx = t.link(l).rx;
                        self.send(ControlMessage::Ctc { from: rx, to: node, link: l });
                        self.audit.handshakes += 1;
                        let outcome =
                            if tried_xtc { HandshakeOutcome::Constrained(target) } else { HandshakeOutcome::Switched(target) };
                        self.log(node, outcome_name(outcome), l.to_string(), self.asg.channel(l), Some(target), 0.0, 0.0);
                    }
                    let dragged = moving.keys().filter(|k| !group.contains(k)).count();
                    self.apply(&moving, target);
                    if dragged > 0 {
                        self.log(node, "follow", format!("{dragged} links"), before, Some(target), 0.0, 0.0);
                    }
                    for &l in group {
                        self.state.locks.insert((t.link(l).rx, RadioSide::In, target));
                    }
                    self.state.locks.insert((node, RadioSide::Out, target));
                    self.check_connectivity();
                    return true;
                }
                Err(Block::Silent { origin }) => {
                    let rx = t.link(origin).rx;
                    for _ in 0..=self.ctx.cfg.rtc_retries {
                        self.state.elapsed_s += self.ctx.cfg.timeout_s;
                        self.send(ControlMessage::Rtc { from: node, to: rx, link: origin, proposed: target });
                    }
                    self.audit.handshakes += 1;
                    self.log(node, outcome_name(HandshakeOutcome::TimedOut), origin.to_string(), self.asg.channel(origin), self.asg.channel(origin), 0.0, 0.0);
                    self.check_connectivity();
                    return false;
                }
                Err(Block::Locked { origin }) => {
                    let rx = t.link(origin).rx;
                    let list: Vec<ChannelId> = routed
                        .iter()
                        .filter(|&&k| t.link(k).rx == rx)
                        .filter_map(|&k| self.asg.channel(k))
                        .collect::<BTreeSet<_>>()
                        .into_iter()
                        .collect();
                    self.send(ControlMessage::Xtc { from: rx, to: node, link: origin, channels: list.clone() });
                    if tried_xtc || list.is_empty() {
                        self.audit.handshakes += 1;
                        self.log(node, "xtc_conflict", origin.to_string(), self.asg.channel(origin), self.asg.channel(origin), 0.0, 0.0);
                        self.check_connectivity();
                        return false;
                    }
                    let costs: Vec<(ChannelId, f64)> = list
                        .iter()
                        .map(|&c| (c, self.ctx.model.what_if(t, &self.asg, &active, &[origin], c)[0]))
                        .collect();
                    let chosen = pick_min(&costs).0;
                    if !list.contains(&chosen) {
                        self.audit.xtc_violations += 1;
                    }
                    tried_xtc = true;
                    target = chosen;
                    if group.iter().all(|&l| self.asg.channel(l) == Some(target)) {
                        self.log(node, "constrained", origin.to_string(), Some(target), Some(target), 0.0, 0.0);
                        return false;
                    }
                }
            }
        }
    }

    fn node_turn(&mut self, node: NodeId, flow_loads: &BTreeMap<FlowId, f64>) -> usize {
        let t = self.ctx.t;
        self.audit.turns += 1;
        let mut sessions: BTreeMap<LinkId, f64> = BTreeMap::new();
        for (fid, r) in &self.routes.routes {
            for l in r.backhaul_links(t) {
                if t.link(l).tx == node {
                    *sessions.entry(l).or_default() += flow_loads.get(fid).copied().unwrap_or(0.0);
                }
            }
        }
        if sessions.is_empty() {
            self.log(node, "skip", String::new(), None, None, 0.0, 0.0);
            return 0;
        }
        let sessions: Vec<(LinkId, f64)> = sessions.into_iter().collect();
        let budget = p2c_assign_flows_to_radios(node, &sessions, t.radio_limits.n_out);
        if budget.over_budget {
            self.log(node, "over_budget", format!("{:.0}", budget.l_sh), None, None, 0.0, 0.0);
        }
        let snapshot = (self.asg.clone(), self.state.locks.clone());
        let local_before = self.local_cost(node);
        let objective_before = self.objective();
        let mut moved = false;
        for radio in &budget.radios {
            let group: Vec<LinkId> = radio.iter().map(|s| s.0).collect::<BTreeSet<_>>().into_iter().collect();
            if !group.is_empty() {
                moved |= self.radio_turn(node, &group);
            }
        }
        if !moved {
            return 0;
        }
        let local_after = self.local_cost(node);
        let objective_after = self.objective();
        let improves = local_after < local_before * (1.0 - 1e-9);
        let keeps_objective = objective_after <= objective_before * (1.0 + 1e-12);
        if !(improves && keeps_objective) {
            let changed = self.asg.changes_from(&snapshot.0);
            self.asg = snapshot.0;
            self.state.locks = snapshot.1;
            self.log(node, "revert", format!("{changed} links"), None, None, local_before, local_after);
            self.check_connectivity();
            return 0;
        }
        let changed = self.asg.changes_from(&snapshot.0);
        self.log(node, "accept", format!("{changed} links"), None, None, local_before, local_after);
        if local_after > local_before {
            self.audit.local_improvement_violations += 1;
        }
        if objective_after > objective_before * (1.0 + 1e-12) {
            self.audit.objective_increases += 1;
        }
        changed
    }

    fn reroute(&mut self) -> usize {
        let before = self.asg.clone();
        if !self.ctx.fixed_routes {
            let prev = self.active();
            self.routes = route_flows(self.ctx.t, self.ctx.model, &self.asg, self.ctx.flows, &prev);
        }
        let loads = self.link_loads(&self.flow_loads());
        let routed = self.routed();
        repair_radio_limits(self.ctx.t, &mut self.asg, &routed, &loads);
        self.asg.changes_from(&before)
    }

    fn iterate(&mut self) -> usize {
        self.state.locks.clear();
        let t = self.ctx.t;
        let mut changes = self.access_phase();

        let flow_loads = self.flow_loads();
        let loads = self.node_loads(&flow_loads);
        self.state.priority = p2a_build_priority_list(&loads, self.ctx.cfg);
        for ap in t.ap_ids() {
            let rank = self.state.priority.iter().find(|p| p.node == ap).map_or(0.0, |p| p.rank);
            self.send(ControlMessage::Laba { ap, clients: t.clients_of(ap), rank });
        }
        let order: Vec<NodeId> = self.state.priority.iter().map(|p| p.node).collect();
        let mut scanned = Vec::with_capacity(order.len());
        let objective_start = self.objective();
        for (i, &node) in order.iter().enumerate() {
            if self.state.token.is_some() {
                self.audit.token_violations += 1;
            }
            self.state.token = Some(node);
            scanned.push(node);
            changes += self.node_turn(node, &flow_loads);
            self.state.token = None;
            if let Some(&next) = order.get(i + 1) {
                self.send(ControlMessage::GoodToGo { from: node, next });
            }
        }
        if scanned != order {
            self.audit.token_violations += 1;
        }
        let objective_end = self.objective();
        if objective_end > objective_start * (1.0 + 1e-12) {
            self.audit.objective_increases += 1;
        }
        let repaired = self.reroute();
        if repaired > 0 {
            self.log(NodeId(u32::MAX), "repair", format!("{repaired} links"), None, None, 0.0, 0.0);
        }
        changes + repaired
    }
}

fn outcome_name(o: HandshakeOutcome) -> &'static str {
    match o {
        HandshakeOutcome::Switched(_) => "ctc",
        HandshakeOutcome::Constrained(_) => "xtc",
        HandshakeOutcome::TimedOut => "timeout",
    }
}

/// Runs P1 and P2 from `initial` until convergence or the iteration cap.
pub fn run_protocol(ctx: Context<'_>, initial: ChannelAssignment, routes: RouteTable, silenced: BTreeSet<NodeId>) -> ProtocolRun {
    let state = ProtocolState { silenced, ..Default::default() };
    let mut run = Run { ctx, asg: initial, routes, state, log: Vec::new(), audit: Audit::default(), messages: 0 };
    let mut timeline = vec![Epoch { time_s: 0.0, assignment: run.asg.clone(), routes: run.routes.clone() }];
    let mut objective_trace = Vec::new();
    let max_it = run.ctx.cfg.max_iterations;
    while run.state.iteration < max_it {
        run.state.iteration += 1;
        let changes = run.iterate();
        objective_trace.push(run.objective());
        timeline.push(Epoch { time_s: run.state.elapsed_s, assignment: run.asg.clone(), routes: run.routes.clone() });
        if changes == 0 {
            run.state.converged = true;
            break;
        }
    }
    log::debug!("protocol: {} iterations, converged {}", run.state.iteration, run.state.converged);
    ProtocolRun {
        assignment: run.asg,
        routes: run.routes,
        iterations: run.state.iteration,
        converged: run.state.converged,
        convergence_time_s: run.state.elapsed_s,
        objective_trace,
        log: run.log,
        messages: run.messages,
        audit: run.audit,
        timeline,
        state: run.state,
    }
}
