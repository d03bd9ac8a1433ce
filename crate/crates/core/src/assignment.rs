//! Channel assignments and the coupled airtime cost they induce.
//!
//! A link's *base* cost is its bidirectional airtime (uplink + downlink)
//! given the SINR it sees on its channel. Co-channel links that contend with
//! it (shared node or carrier-sense range) take turns on the medium, so the
//! *coupled* cost a link experiences is its own base cost plus the base costs
//! of every active co-channel link it contends with. Non-contending
//! co-channel links only lower its SINR. A direction that cannot decode at
//! any rate is charged as a lowest-rate exchange at the frame-error ceiling,
//! so costs stay finite and still rank a dead link far behind any live one.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::airtime::{airtime_cost, airtime_from, bidirectional_cost, Airtime, AirtimeConfig};
use crate::phy::{dbm_to_mw, LinkChannelState, FER_CEIL, RATE_TABLE};
use crate::topology::{Band, ChannelId, LinkId, LinkLevel, MeshTopology, NodeId};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelAssignment {
    /// backhaul link → channel
    pub backhaul: BTreeMap<LinkId, ChannelId>,
    /// mesh AP → access channel (its clients follow it)
    pub access: BTreeMap<NodeId, ChannelId>,
}

impl ChannelAssignment {
    pub fn channel(&self, l: LinkId) -> Option<ChannelId> {
        self.backhaul.get(&l).copied()
    }

    pub fn set(&mut self, l: LinkId, f: ChannelId) {
        self.backhaul.insert(l, f);
    }

    pub fn access_channel(&self, ap: NodeId) -> Option<ChannelId> {
        self.access.get(&ap).copied()
    }

    pub fn set_access(&mut self, ap: NodeId, f: ChannelId) {
        self.access.insert(ap, f);
    }

    /// Channel of any link, access links resolving through their AP.
    pub fn link_channel(&self, t: &MeshTopology, l: LinkId) -> Option<ChannelId> {
        let link = t.link(l);
        match link.level {
            LinkLevel::Backhaul => self.channel(l),
            LinkLevel::Access => self.access_channel(link.rx),
        }
    }

    /// Number of links whose channel differs between the two assignments.
    pub fn changes_from(&self, other: &ChannelAssignment) -> usize {
        fn diff<K: Ord>(a: &BTreeMap<K, ChannelId>, b: &BTreeMap<K, ChannelId>) -> usize {
            a.iter().filter(|(k, v)| b.get(*k) != Some(*v)).count()
                + b.keys().filter(|k| !a.contains_key(*k)).count()
        }
        diff(&self.backhaul, &other.backhaul) + diff(&self.access, &other.access)
    }
}

/// Precomputed pairwise geometry plus the airtime constants.
#[derive(Debug, Clone)]
pub struct CostModel {
    n_nodes: usize,
    /// received power in mW, `[band][tx * n + rx]`
    power_mw: [Vec<f64>; 2],
    signal_dbm: [Vec<f64>; 2],
    noise_dbm: f64,
    contend: Vec<Vec<bool>>,
    endpoints: Vec<[NodeId; 2]>,
    bands: Vec<Band>,
    /// per-direction airtime of a lowest-rate exchange at the FER ceiling
    dead_airtime: Airtime,
    pub airtime: AirtimeConfig,
}

fn band_idx(b: Band) -> usize {
    match b {
        Band::Access24GHz => 0,
        Band::Backhaul5GHz => 1,
    }
}

impl CostModel {
    pub fn new(t: &MeshTopology, airtime: AirtimeConfig) -> Self {
        let n = t.nodes.len();
        let mut power_mw = [vec![0.0; n * n], vec![0.0; n * n]];
        let mut signal_dbm = [vec![f64::NEG_INFINITY; n * n], vec![f64::NEG_INFINITY; n * n]];
        let mut cs = [vec![false; n * n], vec![false; n * n]];
        for band in [Band::Access24GHz, Band::Backhaul5GHz] {
            let b = band_idx(band);
            for u in &t.nodes {
                for v in &t.nodes {
                    let i = u.id.0 as usize * n + v.id.0 as usize;
                    if u.id == v.id {
                        cs[b][i] = true;
                        continue;
                    }
                    let p = t.propagation.received_power_dbm(u, v, band).expect("distinct positions");
                    signal_dbm[b][i] = p;
                    power_mw[b][i] = dbm_to_mw(p);
                    cs[b][i] = p >= t.propagation.cs_threshold_dbm;
                }
            }
        }
        let endpoints: Vec<[NodeId; 2]> = t.links.iter().map(|l| l.endpoints()).collect();
        let bands: Vec<Band> = t.links.iter().map(|l| l.band()).collect();
        let m = t.links.len();
        let mut contend = vec![vec![false; m]; m];
        for a in 0..m {
            for c in 0..m {
                if bands[a] != bands[c] {
                    continue;
                }
                let b = band_idx(bands[a]);
                contend[a][c] = endpoints[a].iter().any(|&u| {
                    endpoints[c].iter().any(|&v| cs[b][v.0 as usize * n + u.0 as usize])
                });
            }
        }
        Self {
            n_nodes: n,
            power_mw,
            signal_dbm,
            noise_dbm: t.propagation.noise_floor_dbm,
            contend,
            endpoints,
            bands,
            dead_airtime: airtime_from(&airtime, RATE_TABLE[0].0, FER_CEIL),
            airtime,
        }
    }

    pub fn contend(&self, a: LinkId, b: LinkId) -> bool {
        self.contend[a.0 as usize][b.0 as usize]
    }

    pub fn band(&self, l: LinkId) -> Band {
        self.bands[l.0 as usize]
    }

    /// Direction state of `l` given the full co-channel membership `group`
    /// (which may or may not include `l`).
    pub fn direction_state(&self, l: LinkId, f: ChannelId, reverse: bool, group: &[LinkId]) -> LinkChannelState {
        let [a, b] = self.endpoints[l.0 as usize];
        let (tx, rx) = if reverse { (b, a) } else { (a, b) };
        let bi = band_idx(self.band(l));
        let n = self.n_nodes;
        let mut interferers: Vec<NodeId> = Vec::new();
        for &k in group {
            if k == l || self.contend(l, k) {
                continue;
            }
            interferers.extend(self.endpoints[k.0 as usize]);
        }
        interferers.sort_unstable();
        interferers.dedup();
        let interference: f64 =
            interferers.iter().map(|&u| self.power_mw[bi][u.0 as usize * n + rx.0 as usize]).sum();
        let signal = self.signal_dbm[bi][tx.0 as usize * n + rx.0 as usize];
        LinkChannelState::from_powers(l, f, signal, interference, self.noise_dbm)
    }

    /// Bidirectional airtime of `l` on `f` with `group` sharing the channel.
    /// An unusable direction is charged as a failing lowest-rate exchange.
    pub fn base_cost(&self, l: LinkId, f: ChannelId, group: &[LinkId]) -> Airtime {
        let up = airtime_cost(&self.airtime, &self.direction_state(l, f, false, group));
        let down = airtime_cost(&self.airtime, &self.direction_state(l, f, true, group));
        bidirectional_cost(up.min(self.dead_airtime), down.min(self.dead_airtime))
    }

    /// Airtime charged per direction when a link cannot decode at any rate.
    pub fn dead_airtime(&self) -> Airtime {
        self.dead_airtime
    }

    /// Coupled cost of every member of a co-channel group, in `group` order.
    pub fn group_costs(&self, f: ChannelId, group: &[LinkId]) -> Vec<Airtime> {
        let base: Vec<Airtime> = group.iter().map(|&l| self.base_cost(l, f, group)).collect();
        group
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                let mut c = base[i];
                for (j, &k) in group.iter().enumerate() {
                    if j != i && self.contend(l, k) {
                        c += base[j];
                    }
                }
                c
            })
            .collect()
    }

    /// Coupled costs of all `active` links under `asg`.
    pub fn evaluate(&self, t: &MeshTopology, asg: &ChannelAssignment, active: &BTreeSet<LinkId>) -> BTreeMap<LinkId, Airtime> {
        let mut groups: BTreeMap<(Band, ChannelId), Vec<LinkId>> = BTreeMap::new();
        let mut out = BTreeMap::new();
        for &l in active {
            match asg.link_channel(t, l) {
                Some(f) => groups.entry((self.band(l), f)).or_default().push(l),
                None => {
                    out.insert(l, f64::INFINITY);
                }
            }
        }
        for ((_, f), members) in groups {
            for (l, c) in members.iter().zip(self.group_costs(f, &members)) {
                out.insert(*l, c);
            }
        }
        out
    }

    /// Co-channel members on `f` among `active`, with `extra` forced onto `f`
    /// and `extra` removed from wherever else they were.
    pub fn members_with(
        &self,
        t: &MeshTopology,
        asg: &ChannelAssignment,
        active: &BTreeSet<LinkId>,
        f: ChannelId,
        extra: &[LinkId],
    ) -> Vec<LinkId> {
        let band = extra.first().map(|&l| self.band(l));
        let mut m: Vec<LinkId> = active
            .iter()
            .copied()
            .filter(|l| !extra.contains(l))
            .filter(|&l| Some(self.band(l)) == band || band.is_none())
            .filter(|&l| asg.link_channel(t, l) == Some(f))
            .collect();
        m.extend_from_slice(extra);
        m
    }

    /// Coupled cost `links` would see if moved together onto `f`.
    pub fn what_if(
        &self,
        t: &MeshTopology,
        asg: &ChannelAssignment,
        active: &BTreeSet<LinkId>,
        links: &[LinkId],
        f: ChannelId,
    ) -> Vec<Airtime> {
        let members = self.members_with(t, asg, active, f, links);
        let costs = self.group_costs(f, &members);
        let offset = members.len() - links.len();
        costs[offset..].to_vec()
    }
}

/// max over paths of the summed link costs.
pub fn max_path_cost(paths: &[Vec<LinkId>], costs: &BTreeMap<LinkId, Airtime>) -> Airtime {
    paths
        .iter()
        .map(|p| p.iter().map(|l| costs.get(l).copied().unwrap_or(f64::INFINITY)).sum::<f64>())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RadioSide {
    In,
    Out,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RadioViolation {
    pub node: NodeId,
    pub side: RadioSide,
    pub channels: BTreeSet<ChannelId>,
}

fn side_channels(
    t: &MeshTopology,
    asg: &ChannelAssignment,
    routed: &BTreeSet<LinkId>,
) -> BTreeMap<(NodeId, RadioSide), BTreeSet<ChannelId>> {
    let mut m: BTreeMap<(NodeId, RadioSide), BTreeSet<ChannelId>> = BTreeMap::new();
    for &l in routed {
        let link = t.link(l);
        if link.level != LinkLevel::Backhaul {
            continue;
        }
        if let Some(f) = asg.channel(l) {
            m.entry((link.tx, RadioSide::Out)).or_default().insert(f);
            m.entry((link.rx, RadioSide::In)).or_default().insert(f);
        }
    }
    m
}

/// Nodes whose routed links need more distinct channels than they have
/// OUT (or IN) radios. An empty result means every routed backhaul link has
/// an OUT radio at its transmitter and an IN radio at its receiver on the
/// same channel.
pub fn radio_violations(t: &MeshTopology, asg: &ChannelAssignment, routed: &BTreeSet<LinkId>) -> Vec<RadioViolation> {
    let lim = t.radio_limits;
    let mut v = Vec::new();
    for ((node, side), chans) in side_channels(t, asg, routed) {
        let cap = match side {
            RadioSide::In => lim.n_in,
            RadioSide::Out => lim.n_out,
        };
        if chans.len() > cap {
            v.push(RadioViolation { node, side, channels: chans });
        }
    }
    for &l in routed {
        if t.link(l).level == LinkLevel::Backhaul && asg.channel(l).is_none() {
            let link = t.link(l);
            v.push(RadioViolation { node: link.tx, side: RadioSide::Out, channels: BTreeSet::new() });
        }
    }
    v
}

/// Restores radio feasibility of the routed links by folding the least-loaded
/// channels at each over-subscribed side onto its most-loaded one, visiting
/// nodes in id order. Returns the number of link channel changes.
pub fn repair_radio_limits(
    t: &MeshTopology,
    asg: &mut ChannelAssignment,
    routed: &BTreeSet<LinkId>,
    load: &BTreeMap<LinkId, f64>,
) -> usize {
    let before = asg.clone();
    let backhaul: Vec<LinkId> =
        routed.iter().copied().filter(|&l| t.link(l).level == LinkLevel::Backhaul).collect();
    let default = t.backhaul_channels[0].id;
    for &l in &backhaul {
        asg.backhaul.entry(l).or_insert(default);
    }
    let lim = t.radio_limits;
    for _pass in 0..64 {
        let mut changed = false;
        for node in t.ap_ids() {
            for (side, cap) in [(RadioSide::Out, lim.n_out), (RadioSide::In, lim.n_in)] {
                let links: Vec<LinkId> = backhaul
                    .iter()
                    .copied()
                    .filter(|&l| match side {
                        RadioSide::Out => t.link(l).tx == node,
                        RadioSide::In => t.link(l).rx == node,
                    })
                    .collect();
                let mut per_ch: BTreeMap<ChannelId, (f64, usize)> = BTreeMap::new();
                for &l in &links {
                    let e = per_ch.entry(asg.channel(l).unwrap()).or_default();
                    e.0 += load.get(&l).copied().unwrap_or(0.0);
                    e.1 += 1;
                }
                if per_ch.len() <= cap {
                    continue;
                }
                let mut ranked: Vec<(ChannelId, (f64, usize))> = per_ch.into_iter().collect();
                ranked.sort_by(|a, b| {
                    b.1 .0.total_cmp(&a.1 .0).then(b.1 .1.cmp(&a.1 .1)).then(a.0.cmp(&b.0))
                });
                let keep: BTreeSet<ChannelId> = ranked[..cap].iter().map(|r| r.0).collect();
                let target = ranked[0].0;
                for &l in &links {
                    if !keep.contains(&asg.channel(l).unwrap()) {
                        asg.set(l, target);
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    if !radio_violations(t, asg, routed).is_empty() {
        // Collapse to the busiest channel, which is always feasible.
        let mut per_ch: BTreeMap<ChannelId, f64> = BTreeMap::new();
        for &l in &backhaul {
            *per_ch.entry(asg.channel(l).unwrap()).or_default() += load.get(&l).copied().unwrap_or(0.0);
        }
        let target = per_ch
            .iter()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(c, _)| *c)
            .unwrap_or(default);
        for &l in &backhaul {
            asg.set(l, target);
        }
    }
    asg.changes_from(&before)
}
