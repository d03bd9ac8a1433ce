//! Static mesh world: nodes, radios, channel plan and the link graph.
//!
//! Node ids are dense: mesh APs come first, clients after them. Link ids are
//! dense as well: directed backhaul links first (ordered by `(tx, rx)`), then
//! one access link per client (client → serving AP, used in both directions).

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assignment::ChannelAssignment;
use crate::config::{Placement, ScenarioConfig};
use crate::error::{Error, Result};
use crate::phy::PropagationModel;

macro_rules! id_type {
    ($name:ident, $inner:ty, $prefix:literal) => {
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        pub struct $name(pub $inner);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

id_type!(NodeId, u32, "n");
id_type!(LinkId, u32, "l");
id_type!(RadioId, u32, "r");
id_type!(FlowId, u32, "f");

/// Channel number. The numbering follows the usual 802.11 channel numbers,
/// which keeps the 2.4 GHz and 5 GHz sets disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ChannelId(pub u16);

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ch{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Band {
    Access24GHz,
    Backhaul5GHz,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Channel {
    pub id: ChannelId,
    pub band: Band,
}

pub const ACCESS_CHANNELS: [u16; 3] = [1, 6, 11];
pub const BACKHAUL_CHANNELS_12: [u16; 12] = [36, 40, 44, 48, 52, 56, 60, 64, 149, 153, 157, 161];
pub const CONTROL_CHANNEL: u16 = 165;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RadioDirection {
    In,
    Out,
    Control,
    Access,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadioInterface {
    pub id: RadioId,
    pub band: Band,
    pub direction: RadioDirection,
    pub current_channel: ChannelId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    MeshAp,
    Client,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeshNode {
    pub id: NodeId,
    pub kind: NodeKind,
    pub label: String,
    pub position: (f64, f64),
    pub tx_power_dbm: f64,
    pub radios: Vec<RadioInterface>,
}

impl MeshNode {
    pub fn is_ap(&self) -> bool {
        self.kind == NodeKind::MeshAp
    }

    pub fn distance_to(&self, other: &MeshNode) -> f64 {
        let dx = self.position.0 - other.position.0;
        let dy = self.position.1 - other.position.1;
        dx.hypot(dy)
    }

    fn radios_of(&self, dir: RadioDirection) -> impl Iterator<Item = &RadioInterface> {
        self.radios.iter().filter(move |r| r.direction == dir)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinkLevel {
    Access,
    Backhaul,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub id: LinkId,
    pub tx: NodeId,
    pub rx: NodeId,
    pub level: LinkLevel,
}

impl Link {
    pub fn endpoints(&self) -> [NodeId; 2] {
        [self.tx, self.rx]
    }

    pub fn band(&self) -> Band {
        match self.level {
            LinkLevel::Access => Band::Access24GHz,
            LinkLevel::Backhaul => Band::Backhaul5GHz,
        }
    }
}

/// Number of backhaul data radios reserved for reception and forwarding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RadioLimits {
    pub n_in: usize,
    pub n_out: usize,
}

impl RadioLimits {
    pub fn from_data_radios(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config(format!(
                "need at least 2 backhaul data radios (one IN, one OUT), got {n}"
            )));
        }
        let n_in = n / 2;
        Ok(Self { n_in, n_out: n - n_in })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeshTopology {
    pub nodes: Vec<MeshNode>,
    pub links: Vec<Link>,
    pub access_channels: Vec<Channel>,
    pub backhaul_channels: Vec<Channel>,
    pub control_channel: Channel,
    pub arena: (f64, f64),
    pub radio_limits: RadioLimits,
    pub propagation: PropagationModel,
    /// client → serving AP
    pub association: BTreeMap<NodeId, NodeId>,
    access_link_of: BTreeMap<NodeId, LinkId>,
    backhaul_link_of: BTreeMap<(NodeId, NodeId), LinkId>,
}

/// A node to place explicitly.
#[derive(Debug, Clone)]
pub struct NodeSpec {
    pub kind: NodeKind,
    pub label: String,
    pub position: (f64, f64),
}

/// Lower-level constructor used by the config path, canned scenarios and tests.
#[derive(Debug, Clone)]
pub struct TopologyBuilder {
    pub arena: (f64, f64),
    pub tx_power_dbm: f64,
    pub backhaul_range_m: f64,
    pub backhaul_channel_count: usize,
    pub data_radios: usize,
    pub propagation: PropagationModel,
    pub nodes: Vec<NodeSpec>,
}

impl TopologyBuilder {
    pub fn new(arena: (f64, f64)) -> Self {
        Self {
            arena,
            tx_power_dbm: 20.0,
            backhaul_range_m: 300.0,
            backhaul_channel_count: 12,
            data_radios: 2,
            propagation: PropagationModel::default(),
            nodes: Vec::new(),
        }
    }

    pub fn ap(mut self, label: impl Into<String>, x: f64, y: f64) -> Self {
        self.nodes.push(NodeSpec { kind: NodeKind::MeshAp, label: label.into(), position: (x, y) });
        self
    }

    pub fn client(mut self, label: impl Into<String>, x: f64, y: f64) -> Self {
        self.nodes.push(NodeSpec { kind: NodeKind::Client, label: label.into(), position: (x, y) });
        self
    }

    pub fn build(self) -> Result<MeshTopology> {
        let limits = RadioLimits::from_data_radios(self.data_radios)?;
        if !(self.arena.0 > 0.0 && self.arena.1 > 0.0) {
            return Err(Error::Config("arena dimensions must be positive".into()));
        }
        let backhaul_channels: Vec<Channel> = match self.backhaul_channel_count {
            3 | 12 => BACKHAUL_CHANNELS_12[..self.backhaul_channel_count]
                .iter()
                .map(|&c| Channel { id: ChannelId(c), band: Band::Backhaul5GHz })
                .collect(),
            n => return Err(Error::Config(format!("backhaul channel count must be 3 or 12, got {n}"))),
        };
        let access_channels: Vec<Channel> = ACCESS_CHANNELS
            .iter()
            .map(|&c| Channel { id: ChannelId(c), band: Band::Access24GHz })
            .collect();
        let control_channel = Channel { id: ChannelId(CONTROL_CHANNEL), band: Band::Backhaul5GHz };

        // APs first, clients after, each group in insertion order.
        let mut specs: Vec<&NodeSpec> = self.nodes.iter().filter(|n| n.kind == NodeKind::MeshAp).collect();
        if specs.is_empty() {
            return Err(Error::Config("at least one mesh AP is required".into()));
        }
        specs.extend(self.nodes.iter().filter(|n| n.kind == NodeKind::Client));

        let mut nodes = Vec::with_capacity(specs.len());
        let mut next_radio = 0u32;
        let mut radio = |band, direction, ch| {
            let r = RadioInterface { id: RadioId(next_radio), band, direction, current_channel: ch };
            next_radio += 1;
            r
        };
        for (i, spec) in specs.iter().enumerate() {
            let (x, y) = spec.position;
            if !(0.0..=self.arena.0).contains(&x) || !(0.0..=self.arena.1).contains(&y) {
                return Err(Error::Config(format!("node {} at ({x}, {y}) lies outside the arena", spec.label)));
            }
            let mut radios = vec![radio(Band::Access24GHz, RadioDirection::Access, access_channels[0].id)];
            if spec.kind == NodeKind::MeshAp {
                radios.push(radio(Band::Backhaul5GHz, RadioDirection::Control, control_channel.id));
                for _ in 0..limits.n_in {
                    radios.push(radio(Band::Backhaul5GHz, RadioDirection::In, backhaul_channels[0].id));
                }
                for _ in 0..limits.n_out {
                    radios.push(radio(Band::Backhaul5GHz, RadioDirection::Out, backhaul_channels[0].id));
                }
            }
            nodes.push(MeshNode {
                id: NodeId(i as u32),
                kind: spec.kind,
                label: spec.label.clone(),
                position: spec.position,
                tx_power_dbm: self.tx_power_dbm,
                radios,
            });
        }
        for (i, a) in nodes.iter().enumerate() {
            for b in &nodes[i + 1..] {
                if a.distance_to(b) == 0.0 {
                    return Err(Error::CoincidentNodes(a.id, b.id));
                }
            }
        }

        let prop = self.propagation;
        let aps: Vec<&MeshNode> = nodes.iter().filter(|n| n.is_ap()).collect();

        let mut links = Vec::new();
        let mut backhaul_link_of = BTreeMap::new();
        let mut adjacency: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for a in &aps {
            for b in &aps {
                if a.id == b.id || a.distance_to(b) > self.backhaul_range_m {
                    continue;
                }
                if prop.received_power_dbm(a, b, Band::Backhaul5GHz)? < prop.decode_threshold_dbm() {
                    continue;
                }
                let id = LinkId(links.len() as u32);
                links.push(Link { id, tx: a.id, rx: b.id, level: LinkLevel::Backhaul });
                backhaul_link_of.insert((a.id, b.id), id);
                adjacency.entry(a.id).or_default().push(b.id);
            }
        }
        if !connected(aps.iter().map(|a| a.id), &adjacency) {
            return Err(Error::DisconnectedBackhaul);
        }

        let mut association = BTreeMap::new();
        let mut access_link_of = BTreeMap::new();
        for c in nodes.iter().filter(|n| !n.is_ap()) {
            let mut best: Option<(f64, NodeId)> = None;
            for a in &aps {
                let p = prop.received_power_dbm(a, c, Band::Access24GHz)?;
                if best.map_or(true, |(bp, _)| p > bp) {
                    best = Some((p, a.id));
                }
            }
            let (p, ap) = best.expect("at least one AP");
            if p < prop.decode_threshold_dbm() {
                return Err(Error::OrphanClient { client: c.id });
            }
            association.insert(c.id, ap);
            let id = LinkId(links.len() as u32);
            links.push(Link { id, tx: c.id, rx: ap, level: LinkLevel::Access });
            access_link_of.insert(c.id, id);
        }

        Ok(MeshTopology {
            nodes,
            links,
            access_channels,
            backhaul_channels,
            control_channel,
            arena: self.arena,
            radio_limits: limits,
            propagation: prop,
            association,
            access_link_of,
            backhaul_link_of,
        })
    }
}

fn connected(ids: impl Iterator<Item = NodeId>, adj: &BTreeMap<NodeId, Vec<NodeId>>) -> bool {
    let all: BTreeSet<NodeId> = ids.collect();
    let Some(&start) = all.iter().next() else { return true };
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(n) = queue.pop_front() {
        for &m in adj.get(&n).into_iter().flatten() {
            if seen.insert(m) {
                queue.push_back(m);
            }
        }
    }
    seen == all
}

/// Builds the scenario's topology. Deterministic in `cfg.seed`.
pub fn build_topology(cfg: &ScenarioConfig) -> Result<MeshTopology> {
    cfg.validate()?;
    let (w, h) = (cfg.arena_m, cfg.arena_m);
    let mut builder = TopologyBuilder::new((w, h));
    builder.backhaul_range_m = cfg.backhaul_range_m;
    builder.backhaul_channel_count = cfg.channels;
    builder.data_radios = cfg.radios;
    builder.tx_power_dbm = cfg.tx_power_dbm;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7090_1091);
    match &cfg.placement {
        Placement::Grid => {
            for (i, (x, y)) in grid_positions(cfg.aps, w, h).into_iter().enumerate() {
                builder = builder.ap(format!("ap{i}"), x, y);
            }
        }
        Placement::Random => {
            for i in 0..cfg.aps {
                builder = builder.ap(format!("ap{i}"), rng.gen_range(0.0..=w), rng.gen_range(0.0..=h));
            }
        }
        Placement::Explicit { aps, clients } => {
            for (i, &[x, y]) in aps.iter().enumerate() {
                builder = builder.ap(format!("ap{i}"), x, y);
            }
            for (i, &[x, y]) in clients.iter().enumerate() {
                builder = builder.client(format!("c{i}"), x, y);
            }
            return builder.build();
        }
    }
    for i in 0..cfg.clients {
        builder = builder.client(format!("c{i}"), rng.gen_range(0.0..=w), rng.gen_range(0.0..=h));
    }
    builder.build()
}

/// Square grid centred in the arena, filled row-major.
pub fn grid_positions(n: usize, w: f64, h: f64) -> Vec<(f64, f64)> {
    if n == 0 {
        return Vec::new();
    }
    let cols = (n as f64).sqrt().ceil() as usize;
    let rows = n.div_ceil(cols);
    let step = (w / cols as f64).min(h / rows as f64);
    let x0 = (w - step * cols as f64) / 2.0 + step / 2.0;
    let y0 = (h - step * rows as f64) / 2.0 + step / 2.0;
    (0..n)
        .map(|i| (x0 + step * (i % cols) as f64, y0 + step * (i / cols) as f64))
        .collect()
}

impl MeshTopology {
    pub fn node(&self, id: NodeId) -> &MeshNode {
        &self.nodes[id.0 as usize]
    }

    pub fn try_node(&self, id: NodeId) -> Result<&MeshNode> {
        self.nodes.get(id.0 as usize).ok_or(Error::UnknownNode(id))
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id.0 as usize]
    }

    pub fn aps(&self) -> impl Iterator<Item = &MeshNode> {
        self.nodes.iter().filter(|n| n.is_ap())
    }

    pub fn ap_ids(&self) -> Vec<NodeId> {
        self.aps().map(|n| n.id).collect()
    }

    pub fn clients(&self) -> impl Iterator<Item = &MeshNode> {
        self.nodes.iter().filter(|n| !n.is_ap())
    }

    pub fn backhaul_links(&self) -> impl Iterator<Item = &Link> {
        self.links.iter().filter(|l| l.level == LinkLevel::Backhaul)
    }

    pub fn access_link(&self, client: NodeId) -> Option<LinkId> {
        self.access_link_of.get(&client).copied()
    }

    pub fn backhaul_link(&self, tx: NodeId, rx: NodeId) -> Option<LinkId> {
        self.backhaul_link_of.get(&(tx, rx)).copied()
    }

    pub fn serving_ap(&self, node: NodeId) -> Option<NodeId> {
        if self.node(node).is_ap() {
            Some(node)
        } else {
            self.association.get(&node).copied()
        }
    }

    pub fn clients_of(&self, ap: NodeId) -> Vec<NodeId> {
        self.association.iter().filter(|(_, &a)| a == ap).map(|(&c, _)| c).collect()
    }

    pub fn out_links(&self, node: NodeId) -> impl Iterator<Item = &Link> {
        self.backhaul_links().filter(move |l| l.tx == node)
    }

    pub fn channels(&self, band: Band) -> &[Channel] {
        match band {
            Band::Access24GHz => &self.access_channels,
            Band::Backhaul5GHz => &self.backhaul_channels,
        }
    }

    /// Whether `n` has a radio tuned to `f` under `assignment`.
    pub fn has_radio_on(&self, assignment: &ChannelAssignment, n: NodeId, f: ChannelId) -> bool {
        if f == self.control_channel.id {
            return self.node(n).is_ap();
        }
        if let Some(ap) = self.serving_ap(n) {
            if assignment.access_channel(ap) == Some(f) {
                return true;
            }
        }
        self.backhaul_links()
            .filter(|l| l.tx == n || l.rx == n)
            .any(|l| assignment.channel(l.id) == Some(f))
    }

    /// Nodes with a radio on `f` whose signal at `n` reaches the carrier-sense threshold.
    pub fn neighbors_on_channel(
        &self,
        assignment: &ChannelAssignment,
        n: NodeId,
        f: ChannelId,
    ) -> BTreeSet<NodeId> {
        let band = if self.access_channels.iter().any(|c| c.id == f) {
            Band::Access24GHz
        } else {
            Band::Backhaul5GHz
        };
        let me = self.node(n);
        self.nodes
            .iter()
            .filter(|m| m.id != n && self.has_radio_on(assignment, m.id, f))
            .filter(|m| {
                self.propagation
                    .received_power_dbm(m, me, band)
                    .map_or(false, |p| p >= self.propagation.cs_threshold_dbm)
            })
            .map(|m| m.id)
            .collect()
    }

    /// Tunes the radio records to `assignment`: OUT/IN radios take the distinct
    /// channels of the routed links they serve, access radios follow the AP.
    /// Control radios are left alone.
    pub fn sync_radios(&mut self, assignment: &ChannelAssignment, routed: &BTreeSet<LinkId>) {
        let mut outs: BTreeMap<NodeId, Vec<ChannelId>> = BTreeMap::new();
        let mut ins: BTreeMap<NodeId, Vec<ChannelId>> = BTreeMap::new();
        for l in self.backhaul_links().filter(|l| routed.contains(&l.id)) {
            if let Some(ch) = assignment.channel(l.id) {
                let o = outs.entry(l.tx).or_default();
                if !o.contains(&ch) {
                    o.push(ch);
                }
                let i = ins.entry(l.rx).or_default();
                if !i.contains(&ch) {
                    i.push(ch);
                }
            }
        }
        let assoc = self.association.clone();
        for node in &mut self.nodes {
            let ap = if node.is_ap() { Some(node.id) } else { assoc.get(&node.id).copied() };
            let access = ap.and_then(|a| assignment.access_channel(a));
            let mut o = outs.remove(&node.id).unwrap_or_default().into_iter();
            let mut i = ins.remove(&node.id).unwrap_or_default().into_iter();
            for r in &mut node.radios {
                match r.direction {
                    RadioDirection::Access => {
                        if let Some(ch) = access {
                            r.current_channel = ch;
                        }
                    }
                    RadioDirection::Out => {
                        if let Some(ch) = o.next() {
                            r.current_channel = ch;
                        }
                    }
                    RadioDirection::In => {
                        if let Some(ch) = i.next() {
                            r.current_channel = ch;
                        }
                    }
                    RadioDirection::Control => {}
                }
            }
        }
    }

    pub fn control_radio_channels(&self) -> Vec<ChannelId> {
        self.aps()
            .flat_map(|n| n.radios_of(RadioDirection::Control).map(|r| r.current_channel))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(positions: &[f64]) -> MeshTopology {
        let mut b = TopologyBuilder::new((2000.0, 2000.0));
        for (i, &x) in positions.iter().enumerate() {
            b = b.ap(format!("a{i}"), x, 100.0);
        }
        b.build().unwrap()
    }

    #[test]
    fn degenerate_single_pair() {
        let t = TopologyBuilder::new((100.0, 100.0)).ap("a", 0.0, 0.0).client("c", 10.0, 0.0).build().unwrap();
        assert_eq!(t.links.len(), 1);
        assert_eq!(t.backhaul_links().count(), 0);
        assert_eq!(t.association[&NodeId(1)], NodeId(0));
    }

    #[test]
    fn grid_backhaul_matches_pairwise_enumeration() {
        let pos = grid_positions(10, 1000.0, 1000.0);
        let mut b = TopologyBuilder::new((1000.0, 1000.0));
        for (i, &(x, y)) in pos.iter().enumerate() {
            b = b.ap(format!("a{i}"), x, y);
        }
        let t = b.build().unwrap();
        let mut pairs = 0;
        for i in 0..pos.len() {
            for j in 0..pos.len() {
                let d = ((pos[i].0 - pos[j].0).powi(2) + (pos[i].1 - pos[j].1).powi(2)).sqrt();
                if i != j && d <= 300.0 {
                    pairs += 1;
                }
            }
        }
        // ordered pairs == directed links
        assert_eq!(t.backhaul_links().count(), pairs);
        assert_eq!(pairs, 2 * 13);
    }

    #[test]
    fn disconnected_backhaul_rejected() {
        let err = TopologyBuilder::new((2000.0, 2000.0)).ap("a", 0.0, 0.0).ap("b", 1500.0, 0.0).build();
        assert!(matches!(err, Err(Error::DisconnectedBackhaul)));
    }

    #[test]
    fn orphan_client_rejected() {
        let err = TopologyBuilder::new((3000.0, 3000.0)).ap("a", 0.0, 0.0).client("c", 2500.0, 2500.0).build();
        assert!(matches!(err, Err(Error::OrphanClient { .. })));
    }

    #[test]
    fn coincident_nodes_rejected() {
        let err = TopologyBuilder::new((100.0, 100.0)).ap("a", 5.0, 5.0).client("c", 5.0, 5.0).build();
        assert!(matches!(err, Err(Error::CoincidentNodes(..))));
    }

    #[test]
    fn clients_join_strongest_ap() {
        let t = TopologyBuilder::new((1000.0, 1000.0))
            .ap("a", 100.0, 100.0)
            .ap("b", 300.0, 100.0)
            .client("c", 250.0, 120.0)
            .build()
            .unwrap();
        assert_eq!(t.association[&NodeId(2)], NodeId(1));
    }

    #[test]
    fn radio_layout_per_ap() {
        let t = line(&[0.0, 200.0]);
        let ap = t.node(NodeId(0));
        let count = |d| ap.radios.iter().filter(|r| r.direction == d).count();
        assert_eq!(count(RadioDirection::Control), 1);
        assert_eq!(count(RadioDirection::In), 1);
        assert_eq!(count(RadioDirection::Out), 1);
        assert_eq!(count(RadioDirection::Access), 1);
    }

    #[test]
    fn neighbours_isolated_and_close() {
        let t = TopologyBuilder::new((5000.0, 5000.0))
            .ap("a", 100.0, 100.0)
            .ap("b", 110.0, 100.0)
            .build()
            .unwrap();
        let mut asg = ChannelAssignment::default();
        asg.set_access(NodeId(0), ChannelId(1));
        asg.set_access(NodeId(1), ChannelId(1));
        assert_eq!(t.neighbors_on_channel(&asg, NodeId(0), ChannelId(1)), BTreeSet::from([NodeId(1)]));
        assert_eq!(t.neighbors_on_channel(&asg, NodeId(1), ChannelId(1)), BTreeSet::from([NodeId(0)]));
        assert!(t.neighbors_on_channel(&asg, NodeId(0), ChannelId(6)).is_empty());
    }

    #[test]
    fn neighbours_collinear_cs_range() {
        // Access band: PL(1m)=40, exponent 2.5 → -82 dBm at 10^(62/25) ≈ 302 m.
        // Backhaul range is shrunk so the three APs form a chain 0-1-2.
        let mut b = TopologyBuilder::new((2000.0, 2000.0));
        b.backhaul_range_m = 300.0;
        let mut t = b.ap("a", 0.0, 0.0).ap("b", 300.0, 0.0).ap("c", 600.0, 0.0).build().unwrap();
        t.propagation.exponent = 2.5;
        let p300 = 20.0 - 40.0 - 25.0 * 300f64.log10();
        let p600 = 20.0 - 40.0 - 25.0 * 600f64.log10();
        assert!(p300 >= -82.0 && p600 < -82.0);
        let mut asg = ChannelAssignment::default();
        for n in 0..3 {
            asg.set_access(NodeId(n), ChannelId(1));
        }
        let n = |i| t.neighbors_on_channel(&asg, NodeId(i), ChannelId(1));
        assert_eq!(n(1), BTreeSet::from([NodeId(0), NodeId(2)]));
        assert_eq!(n(0), BTreeSet::from([NodeId(1)]));
        assert_eq!(n(2), BTreeSet::from([NodeId(1)]));
    }
}
