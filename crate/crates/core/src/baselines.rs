//! Comparison policies. Each returns a backhaul assignment; access channels
//! and radio repair are applied by the common scenario driver.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assignment::ChannelAssignment;
use crate::error::{Error, Result};
use crate::phy::dbm_to_mw;
use crate::topology::{Band, ChannelId, MeshTopology, NodeId};

/// Every backhaul link on the first backhaul channel.
pub fn assign_single_channel(t: &MeshTopology) -> ChannelAssignment {
    let f = t.backhaul_channels[0].id;
    let mut asg = ChannelAssignment::default();
    for l in t.backhaul_links() {
        asg.set(l.id, f);
    }
    for ap in t.ap_ids() {
        asg.set_access(ap, t.access_channels[0].id);
    }
    asg
}

/// Independent uniform channel per backhaul link and per access radio.
pub fn assign_random(t: &MeshTopology, seed: u64) -> ChannelAssignment {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5A17_C0DE);
    let mut asg = ChannelAssignment::default();
    for l in t.backhaul_links() {
        let f = t.backhaul_channels[rng.gen_range(0..t.backhaul_channels.len())].id;
        asg.set(l.id, f);
    }
    for ap in t.ap_ids() {
        let f = t.access_channels[rng.gen_range(0..t.access_channels.len())].id;
        asg.set_access(ap, f);
    }
    asg
}

/// Greedy in link-id order: each backhaul link takes the channel with the
/// least received power from the endpoints of links already placed there.
pub fn assign_interference_only(t: &MeshTopology) -> ChannelAssignment {
    let mut asg = ChannelAssignment::default();
    let mut on: BTreeMap<ChannelId, BTreeSet<NodeId>> = BTreeMap::new();
    for l in t.backhaul_links() {
        let mut best: Option<(f64, ChannelId)> = None;
        for c in &t.backhaul_channels {
            let power: f64 = on
                .get(&c.id)
                .into_iter()
                .flatten()
                .filter(|&&u| u != l.tx && u != l.rx)
                .flat_map(|&u| [l.tx, l.rx].map(|v| (u, v)))
                .map(|(u, v)| {
                    let p = t.propagation.received_power_dbm(t.node(u), t.node(v), Band::Backhaul5GHz);
                    dbm_to_mw(p.expect("distinct nodes"))
                })
                .sum();
            if best.map_or(true, |(bp, _)| power < bp) {
                best = Some((power, c.id));
            }
        }
        let f = best.expect("at least one channel").1;
        asg.set(l.id, f);
        on.entry(f).or_default().extend([l.tx, l.rx]);
    }
    for ap in t.ap_ids() {
        asg.set_access(ap, t.access_channels[0].id);
    }
    asg
}

/// AP nearest the arena centre, lowest id on ties.
pub fn default_gateway(t: &MeshTopology) -> NodeId {
    let (cx, cy) = (t.arena.0 / 2.0, t.arena.1 / 2.0);
    t.aps()
        .map(|n| (((n.position.0 - cx).powi(2) + (n.position.1 - cy).powi(2)), n.id))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .expect("at least one AP")
        .1
}

/// BFS tree from `gateway`; each tree edge, top-down, takes the channel used
/// least within two hops in the tree. Non-tree links use the channel of
/// their transmitter's edge towards the root.
pub fn assign_tree_based(t: &MeshTopology, gateway: NodeId) -> Result<ChannelAssignment> {
    if !t.node(gateway).is_ap() {
        return Err(Error::Config(format!("gateway {gateway} is not an AP")));
    }
    let mut adj: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
    for l in t.backhaul_links() {
        adj.entry(l.tx).or_default().insert(l.rx);
    }
    let mut parent: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    let mut order: Vec<(NodeId, NodeId)> = Vec::new();
    let mut seen = BTreeSet::from([gateway]);
    let mut queue = VecDeque::from([gateway]);
    while let Some(u) = queue.pop_front() {
        for &v in adj.get(&u).into_iter().flatten() {
            if seen.insert(v) {
                parent.insert(v, u);
                order.push((u, v));
                queue.push_back(v);
            }
        }
    }
    if seen.len() != t.aps().count() {
        return Err(Error::DisconnectedBackhaul);
    }
    let key = |a: NodeId, b: NodeId| if a < b { (a, b) } else { (b, a) };
    let mut tree_adj: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for &(u, v) in &order {
        tree_adj.entry(u).or_default().push(v);
        tree_adj.entry(v).or_default().push(u);
    }
    let mut edge_ch: BTreeMap<(NodeId, NodeId), ChannelId> = BTreeMap::new();
    for &(u, v) in &order {
        // nodes within one hop of the edge; edges touching them are within two hops
        let mut near: BTreeSet<NodeId> = BTreeSet::from([u, v]);
        for n in [u, v] {
            near.extend(tree_adj.get(&n).into_iter().flatten().copied());
        }
        let mut used: BTreeMap<ChannelId, usize> = t.backhaul_channels.iter().map(|c| (c.id, 0)).collect();
        for (&(a, b), &c) in &edge_ch {
            if near.contains(&a) || near.contains(&b) {
                *used.get_mut(&c).unwrap() += 1;
            }
        }
        let f = t
            .backhaul_channels
            .iter()
            .map(|c| c.id)
            .min_by_key(|c| (used[c], *c))
            .expect("at least one channel");
        edge_ch.insert(key(u, v), f);
    }
    let mut asg = ChannelAssignment::default();
    for l in t.backhaul_links() {
        let f = edge_ch.get(&key(l.tx, l.rx)).copied().unwrap_or_else(|| {
            let up = match parent.get(&l.tx) {
                Some(&p) => key(l.tx, p),
                None => key(gateway, order[0].1),
            };
            edge_ch[&up]
        });
        asg.set(l.id, f);
    }
    for ap in t.ap_ids() {
        asg.set_access(ap, t.access_channels[0].id);
    }
    Ok(asg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::TopologyBuilder;

    fn path(n: usize, channels: usize) -> MeshTopology {
        let mut b = TopologyBuilder::new((3000.0, 1000.0));
        b.backhaul_channel_count = channels;
        for i in 0..n {
            b = b.ap(format!("p{i}"), 100.0 + 250.0 * i as f64, 500.0);
        }
        b.build().unwrap()
    }

    #[test]
    fn single_channel_everywhere() {
        let t = path(4, 12);
        let asg = assign_single_channel(&t);
        assert!(asg.backhaul.values().all(|&c| c == ChannelId(36)));
        assert_eq!(asg.backhaul.len(), 6);
    }

    #[test]
    fn random_is_reproducible_and_uniform() {
        let t = path(4, 3);
        assert_eq!(assign_random(&t, 5), assign_random(&t, 5));
        let mut counts: BTreeMap<ChannelId, usize> = BTreeMap::new();
        let draws = 10_000;
        for s in 0..draws as u64 {
            let a = assign_random(&t, s);
            *counts.entry(a.backhaul[&t.links[0].id]).or_default() += 1;
        }
        let expect = draws as f64 / 3.0;
        let chi2: f64 = counts.values().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
        // 2 degrees of freedom, 99.9th percentile
        assert!(chi2 < 13.82, "chi2 {chi2}");
        assert_eq!(counts.len(), 3);
    }

    #[test]
    fn interference_only_first_channel_without_interferers() {
        let t = path(2, 12);
        let asg = assign_interference_only(&t);
        assert!(asg.backhaul.values().all(|&c| c == ChannelId(36)));
    }

    #[test]
    fn interference_only_avoids_interferer() {
        // link 0 (a→b) lands on 36; c→d nearby must avoid it
        let t = TopologyBuilder::new((1000.0, 1000.0))
            .ap("a", 100.0, 100.0)
            .ap("b", 300.0, 100.0)
            .ap("c", 100.0, 250.0)
            .ap("d", 300.0, 250.0)
            .build()
            .unwrap();
        let asg = assign_interference_only(&t);
        let ab = t.backhaul_link(NodeId(0), NodeId(1)).unwrap();
        let cd = t.backhaul_link(NodeId(2), NodeId(3)).unwrap();
        assert_eq!(asg.backhaul[&ab], ChannelId(36));
        assert_ne!(asg.backhaul[&cd], ChannelId(36));
    }

    #[test]
    fn tree_on_path_alternates() {
        let t = path(5, 3);
        let asg = assign_tree_based(&t, NodeId(0)).unwrap();
        let ch: Vec<ChannelId> =
            (0..4).map(|i| asg.backhaul[&t.backhaul_link(NodeId(i), NodeId(i + 1)).unwrap()]).collect();
        assert_eq!(ch, vec![ChannelId(36), ChannelId(40), ChannelId(44), ChannelId(36)]);
        for i in 0..4 {
            let back = t.backhaul_link(NodeId(i + 1), NodeId(i)).unwrap();
            assert_eq!(asg.backhaul[&back], ch[i as usize]);
        }
    }

    #[test]
    fn tree_on_star_distinct() {
        let mut b = TopologyBuilder::new((1000.0, 1000.0)).ap("hub", 500.0, 500.0);
        for (i, (x, y)) in [(700.0, 500.0), (300.0, 500.0), (500.0, 700.0), (500.0, 300.0)].into_iter().enumerate() {
            b = b.ap(format!("s{i}"), x, y);
        }
        let t = b.build().unwrap();
        let asg = assign_tree_based(&t, NodeId(0)).unwrap();
        let spokes: BTreeSet<ChannelId> =
            (1..5).map(|i| asg.backhaul[&t.backhaul_link(NodeId(0), NodeId(i)).unwrap()]).collect();
        assert_eq!(spokes.len(), 4);
        assert_eq!(assign_tree_based(&t, NodeId(0)).unwrap(), asg);
    }

    #[test]
    fn gateway_nearest_centre() {
        let t = path(5, 12);
        // arena 3000 wide: x = 100..1100, centre 1500 → last AP
        assert_eq!(default_gateway(&t), NodeId(4));
    }
}
