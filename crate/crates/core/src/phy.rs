//! Log-distance propagation, SINR, rate adaptation and frame-error model.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::assignment::ChannelAssignment;
use crate::error::{Error, Result};
use crate::topology::{Band, ChannelId, LinkId, MeshNode, MeshTopology, NodeId};

/// 802.11a/g OFDM rates (bit/s) and their minimum SINR (dB).
pub const RATE_TABLE: [(f64, f64); 8] = [
    (6e6, 6.0),
    (9e6, 8.0),
    (12e6, 10.0),
    (18e6, 13.0),
    (24e6, 16.0),
    (36e6, 19.0),
    (48e6, 22.0),
    (54e6, 25.0),
];

pub const FER_FLOOR: f64 = 0.01;
pub const FER_CEIL: f64 = 0.95;
const FER_OFFSET_DB: f64 = 3.0;
const FER_SCALE_DB: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationModel {
    pub exponent: f64,
    pub ref_loss_access_db: f64,
    pub ref_loss_backhaul_db: f64,
    pub noise_floor_dbm: f64,
    pub cs_threshold_dbm: f64,
}

impl Default for PropagationModel {
    fn default() -> Self {
        Self {
            exponent: 2.0,
            ref_loss_access_db: 40.0,
            ref_loss_backhaul_db: 47.0,
            noise_floor_dbm: -95.0,
            cs_threshold_dbm: -82.0,
        }
    }
}

impl PropagationModel {
    pub fn ref_loss_db(&self, band: Band) -> f64 {
        match band {
            Band::Access24GHz => self.ref_loss_access_db,
            Band::Backhaul5GHz => self.ref_loss_backhaul_db,
        }
    }

    /// tx_power − PL(1 m) − 10·exponent·log10(d)
    pub fn power_at_distance_dbm(&self, tx_power_dbm: f64, distance_m: f64, band: Band) -> f64 {
        tx_power_dbm - self.ref_loss_db(band) - 10.0 * self.exponent * distance_m.log10()
    }

    pub fn received_power_dbm(&self, tx: &MeshNode, rx: &MeshNode, band: Band) -> Result<f64> {
        let d = tx.distance_to(rx);
        if d <= 0.0 {
            return Err(Error::CoincidentNodes(tx.id, rx.id));
        }
        Ok(self.power_at_distance_dbm(tx.tx_power_dbm, d, band))
    }

    /// Weakest signal that still decodes at the lowest rate with no interference.
    pub fn decode_threshold_dbm(&self) -> f64 {
        self.noise_floor_dbm + RATE_TABLE[0].1
    }
}

pub fn received_power(tx: &MeshNode, rx: &MeshNode, band: Band, model: &PropagationModel) -> Result<f64> {
    model.received_power_dbm(tx, rx, band)
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// Index into [`RATE_TABLE`] of the fastest rate whose threshold `sinr_db` meets.
pub fn select_rate(sinr_db: f64) -> Option<usize> {
    RATE_TABLE.iter().rposition(|&(_, thr)| sinr_db >= thr)
}

fn raw_fer(sinr_db: f64, threshold_db: f64) -> f64 {
    let x = (sinr_db - threshold_db + FER_OFFSET_DB) / FER_SCALE_DB;
    let sigmoid = 1.0 / (1.0 + (-x).exp());
    (1.0 - sigmoid).clamp(FER_FLOOR, FER_CEIL)
}

/// Frame-error rate at the adapted rate.
///
/// The per-rate logistic curve is sawtooth-shaped across rate steps, so the
/// value is taken as its upper envelope over higher SINRs: a rate step never
/// lowers the error rate that a weaker signal would see.
pub fn frame_error_rate(sinr_db: f64) -> Option<f64> {
    let idx = select_rate(sinr_db)?;
    let mut e = raw_fer(sinr_db, RATE_TABLE[idx].1);
    for &(_, thr) in &RATE_TABLE[idx + 1..] {
        e = e.max(raw_fer(thr, thr));
    }
    Some(e)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkChannelState {
    pub link: LinkId,
    pub channel: ChannelId,
    /// `None` marks a link that cannot decode even the lowest rate.
    pub rate_bps: Option<f64>,
    pub frame_error: f64,
    pub sinr_db: f64,
    pub interference_mw: f64,
}

impl LinkChannelState {
    pub fn from_powers(link: LinkId, channel: ChannelId, signal_dbm: f64, interference_mw: f64, noise_dbm: f64) -> Self {
        let sinr_db = signal_dbm - mw_to_dbm(dbm_to_mw(noise_dbm) + interference_mw);
        let (rate_bps, frame_error) = match (select_rate(sinr_db), frame_error_rate(sinr_db)) {
            (Some(i), Some(e)) => (Some(RATE_TABLE[i].0), e),
            _ => (None, 1.0),
        };
        Self { link, channel, rate_bps, frame_error, sinr_db, interference_mw }
    }

    pub fn usable(&self) -> bool {
        self.rate_bps.is_some()
    }
}

/// Channel a link would occupy under `assignment`.
pub fn link_channel(t: &MeshTopology, assignment: &ChannelAssignment, l: LinkId) -> Option<ChannelId> {
    let link = t.link(l);
    match link.level {
        crate::topology::LinkLevel::Backhaul => assignment.channel(l),
        crate::topology::LinkLevel::Access => assignment.access_channel(link.rx),
    }
}

/// Whether two links compete for the medium: they share a node, or some
/// endpoint of one is within carrier-sense range of some endpoint of the other.
pub fn links_contend(t: &MeshTopology, a: LinkId, b: LinkId) -> bool {
    let (la, lb) = (t.link(a), t.link(b));
    if la.band() != lb.band() {
        return false;
    }
    let band = la.band();
    la.endpoints().iter().any(|&u| {
        lb.endpoints().iter().any(|&v| {
            u == v
                || t.propagation
                    .received_power_dbm(t.node(v), t.node(u), band)
                    .map_or(true, |p| p >= t.propagation.cs_threshold_dbm)
        })
    })
}

/// SINR-level view of link `l` on channel `f` in direction `tx → rx`
/// (`reverse` flips it). Co-channel links in `active` that contend with `l`
/// share airtime with it; the rest add their endpoints' power as interference.
pub fn link_channel_state_dir(
    t: &MeshTopology,
    assignment: &ChannelAssignment,
    active: &BTreeSet<LinkId>,
    l: LinkId,
    f: ChannelId,
    reverse: bool,
) -> Result<LinkChannelState> {
    let link = t.link(l);
    let band = link.band();
    let (tx, rx) = if reverse { (link.rx, link.tx) } else { (link.tx, link.rx) };
    let signal = t.propagation.received_power_dbm(t.node(tx), t.node(rx), band)?;
    let mut interferers: BTreeSet<NodeId> = BTreeSet::new();
    for &k in active {
        if k == l || t.link(k).band() != band || link_channel(t, assignment, k) != Some(f) {
            continue;
        }
        if links_contend(t, l, k) {
            continue;
        }
        interferers.extend(t.link(k).endpoints());
    }
    let mut interference_mw = 0.0;
    for n in interferers {
        interference_mw += dbm_to_mw(t.propagation.received_power_dbm(t.node(n), t.node(rx), band)?);
    }
    Ok(LinkChannelState::from_powers(l, f, signal, interference_mw, t.propagation.noise_floor_dbm))
}

pub fn link_channel_state(
    t: &MeshTopology,
    assignment: &ChannelAssignment,
    active: &BTreeSet<LinkId>,
    l: LinkId,
    f: ChannelId,
) -> Result<LinkChannelState> {
    link_channel_state_dir(t, assignment, active, l, f, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{NodeKind, TopologyBuilder};

    fn node_at(x: f64) -> MeshNode {
        MeshNode {
            id: NodeId(0),
            kind: NodeKind::MeshAp,
            label: String::new(),
            position: (x, 0.0),
            tx_power_dbm: 20.0,
            radios: vec![],
        }
    }

    fn model_pl40_exp3() -> PropagationModel {
        PropagationModel { exponent: 3.0, ref_loss_access_db: 40.0, ..Default::default() }
    }

    #[test]
    fn received_power_log_distance() {
        let m = model_pl40_exp3();
        let tx = node_at(0.0);
        for (d, want) in [(1.0, -20.0), (10.0, -50.0), (100.0, -80.0)] {
            let p = received_power(&tx, &node_at(d), Band::Access24GHz, &m).unwrap();
            assert!((p - want).abs() < 1e-9, "d={d}: {p}");
        }
        assert!(received_power(&tx, &node_at(0.0), Band::Access24GHz, &m).is_err());
    }

    #[test]
    fn interference_free_ceiling() {
        let s = LinkChannelState::from_powers(LinkId(0), ChannelId(1), -65.0, 0.0, -95.0);
        assert!((s.sinr_db - 30.0).abs() < 1e-9);
        assert_eq!(s.rate_bps, Some(54e6));
        assert_eq!(s.frame_error, FER_FLOOR);
    }

    #[test]
    fn equal_power_interferer_is_unusable() {
        let s = LinkChannelState::from_powers(LinkId(0), ChannelId(1), -60.0, dbm_to_mw(-60.0), -95.0);
        assert!(s.sinr_db.abs() < 0.01);
        assert!(!s.usable());
    }

    #[test]
    fn two_interferers_hand_computed() {
        // 2 × 1e-7 mW + 10^-9.5 mW ≈ 2.0032e-7 mW → -66.98 dBm; -50 − (−66.98) = 16.98 dB.
        let i = 2.0 * dbm_to_mw(-70.0);
        let s = LinkChannelState::from_powers(LinkId(0), ChannelId(1), -50.0, i, -95.0);
        let expected_sinr = -50.0 - 10.0 * (2e-7f64 + 10f64.powf(-9.5)).log10();
        assert!((s.sinr_db - expected_sinr).abs() < 1e-9);
        assert!((s.sinr_db - 16.99).abs() < 0.01);
        assert_eq!(s.rate_bps, Some(24e6));
        // envelope: the 36 Mb/s step entry value dominates
        assert!((s.frame_error - raw_fer(19.0, 19.0)).abs() < 1e-12);
    }

    #[test]
    fn fer_monotone_in_sinr() {
        let mut prev_rate = 0.0;
        let mut prev_e = 1.0;
        let mut s = 5.0;
        while s < 40.0 {
            if let (Some(i), Some(e)) = (select_rate(s), frame_error_rate(s)) {
                assert!(RATE_TABLE[i].0 >= prev_rate);
                assert!(e <= prev_e + 1e-15, "sinr {s}: {e} > {prev_e}");
                assert!(e < 1.0);
                prev_rate = RATE_TABLE[i].0;
                prev_e = e;
            }
            s += 0.01;
        }
    }

    fn pair_topology() -> MeshTopology {
        TopologyBuilder::new((2000.0, 2000.0))
            .ap("a", 100.0, 100.0)
            .ap("b", 300.0, 100.0)
            .ap("c", 100.0, 1100.0)
            .ap("d", 300.0, 1100.0)
            .ap("e", 100.0, 350.0)
            .ap("f", 100.0, 600.0)
            .ap("g", 100.0, 850.0)
            .build()
            .unwrap()
    }

    #[test]
    fn orthogonal_channels_do_not_interact() {
        let t = pair_topology();
        let ab = t.backhaul_link(NodeId(0), NodeId(1)).unwrap();
        let cd = t.backhaul_link(NodeId(2), NodeId(3)).unwrap();
        let active = BTreeSet::from([ab, cd]);
        let mut asg = ChannelAssignment::default();
        asg.set(ab, ChannelId(36));
        asg.set(cd, ChannelId(40));
        let base = link_channel_state(&t, &asg, &active, ab, ChannelId(36)).unwrap();
        asg.set(cd, ChannelId(44));
        let moved = link_channel_state(&t, &asg, &active, ab, ChannelId(36)).unwrap();
        assert_eq!(base, moved);
        assert_eq!(base.interference_mw, 0.0);
        asg.set(cd, ChannelId(36));
        let shared = link_channel_state(&t, &asg, &active, ab, ChannelId(36)).unwrap();
        assert!(shared.interference_mw > 0.0);
        assert!(shared.sinr_db < base.sinr_db);
        assert!(shared.rate_bps <= base.rate_bps);
        assert!(shared.frame_error >= base.frame_error);
    }

    #[test]
    fn symmetric_geometry_symmetric_sinr() {
        let t = pair_topology();
        let ab = t.backhaul_link(NodeId(0), NodeId(1)).unwrap();
        let asg = ChannelAssignment::default();
        let active = BTreeSet::new();
        let fwd = link_channel_state_dir(&t, &asg, &active, ab, ChannelId(36), false).unwrap();
        let rev = link_channel_state_dir(&t, &asg, &active, ab, ChannelId(36), true).unwrap();
        assert_eq!(fwd.sinr_db, rev.sinr_db);
    }
}
