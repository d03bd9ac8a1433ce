//! Discrete-event packet simulator with mean-value MAC service.
//!
//! Every transmitting radio, identified by (node, band, channel), owns a FIFO
//! queue. A radio serving a packet on link `l` shares the medium with every
//! other busy radio on the same channel whose link contends with `l`; with
//! `n` such radios in total the packet takes `n · ρ(n) / (1 − e)`, so the `n`
//! radios together deliver one packet per `ρ(n)` as in the saturation model.
//! Assignments and routes change at the epochs of a protocol timeline.

use std::cell::RefCell;
use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};
use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::airtime::{solve, SaturationParams};
use crate::arachne::Epoch;
use crate::assignment::{ChannelAssignment, CostModel};
use crate::phy::{LinkChannelState, FER_CEIL, RATE_TABLE};
use crate::routing::RouteTable;
use crate::topology::{Band, ChannelId, FlowId, LinkId, MeshTopology, NodeId};
use crate::traffic::{DemandModel, Flow, TRACE_INTERVAL_S};

/// Time per delivered packet, `ρ(n) / (1 − e)`, of a group of
/// `rates.len()` saturated contenders. Each member gets one packet in `n`.
pub fn service_time(frame_error: f64, rates_bps: &[f64], packet_bits: f64) -> f64 {
    assert!(!rates_bps.is_empty(), "contender set includes the serving radio");
    let mut p = SaturationParams::reference(rates_bps.len(), packet_bits, rates_bps[0]);
    p.rates_bps = rates_bps.to_vec();
    solve(&p).delay_s / (1.0 - frame_error)
}

/// Shortest round-trip text of `v`; zero is always `0`.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else {
        v.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub warmup_s: f64,
    pub horizon_s: f64,
    pub queue_packets: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { warmup_s: 10.0, horizon_s: 20.0, queue_packets: 100, seed: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropCause {
    /// radio queue full on arrival
    QueueOverflow,
    /// no route when the packet was generated
    Unroutable,
    /// queue full when a retuned radio's packets were moved over
    Retune,
}

impl DropCause {
    pub fn name(&self) -> &'static str {
        match self {
            DropCause::QueueOverflow => "queue_overflow",
            DropCause::Unroutable => "unroutable",
            DropCause::Retune => "retune",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub packets: u64,
    pub bits: u64,
}

impl Tally {
    fn add(&mut self, bits: u64) {
        self.packets += 1;
        self.bits += bits;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub policy: String,
    pub seed: u64,
    pub measure_start_s: f64,
    pub measure_end_s: f64,
    /// sum of `per_flow_throughput_bps` in flow order
    pub total_throughput_bps: f64,
    pub per_flow_throughput_bps: BTreeMap<FlowId, f64>,
    /// mean end-to-end delay of packets delivered in the window; 0 if none
    pub avg_delay_s: f64,
    pub delivered: Tally,
    pub dropped: Tally,
    pub drops_by_cause: BTreeMap<DropCause, Tally>,
    /// whole run: offered = delivered + dropped + in flight at the end
    pub offered_total: Tally,
    pub delivered_total: Tally,
    pub dropped_total: Tally,
    pub in_flight_total: Tally,
    pub unroutable_flows: Vec<FlowId>,
    pub iterations: usize,
    pub converged: bool,
    pub convergence_time_s: f64,
    pub objective_s: f64,
    pub objective_trace: Vec<f64>,
    pub events: u64,
}

impl MetricsReport {
    pub fn conserved(&self) -> bool {
        self.offered_total.bits
            == self.delivered_total.bits + self.dropped_total.bits + self.in_flight_total.bits
            && self.offered_total.packets
                == self.delivered_total.packets + self.dropped_total.packets + self.in_flight_total.packets
    }

    /// `(metric, value)` rows in a fixed order.
    pub fn rows(&self) -> Vec<(String, String)> {
        let mut rows: Vec<(String, String)> = vec![
            ("total_throughput_bps".into(), fmt_f64(self.total_throughput_bps)),
            ("avg_delay_s".into(), fmt_f64(self.avg_delay_s)),
            ("delivered_packets".into(), self.delivered.packets.to_string()),
            ("delivered_bits".into(), self.delivered.bits.to_string()),
            ("dropped_packets".into(), self.dropped.packets.to_string()),
            ("dropped_bits".into(), self.dropped.bits.to_string()),
        ];
        for cause in [DropCause::QueueOverflow, DropCause::Unroutable, DropCause::Retune] {
            let t = self.drops_by_cause.get(&cause).copied().unwrap_or_default();
            rows.push((format!("dropped_bits_{}", cause.name()), t.bits.to_string()));
        }
        rows.extend([
            ("offered_bits_total".into(), self.offered_total.bits.to_string()),
            ("delivered_bits_total".into(), self.delivered_total.bits.to_string()),
            ("dropped_bits_total".into(), self.dropped_total.bits.to_string()),
            ("in_flight_bits_total".into(), self.in_flight_total.bits.to_string()),
            ("unroutable_flows".into(), self.unroutable_flows.len().to_string()),
            ("iterations".into(), self.iterations.to_string()),
            ("converged".into(), self.converged.to_string()),
            ("convergence_time_s".into(), fmt_f64(self.convergence_time_s)),
            ("objective_s".into(), fmt_f64(self.objective_s)),
            ("measure_start_s".into(), fmt_f64(self.measure_start_s)),
            ("measure_end_s".into(), fmt_f64(self.measure_end_s)),
        ]);
        for (i, v) in self.objective_trace.iter().enumerate() {
            rows.push((format!("objective_iter_{}", i + 1), fmt_f64(*v)));
        }
        for (f, v) in &self.per_flow_throughput_bps {
            rows.push((format!("flow_throughput_bps_{f}"), fmt_f64(*v)));
        }
        rows
    }
}

/// Protocol facts copied into the report; zero for static policies.
#[derive(Debug, Clone, Default)]
pub struct RunInfo {
    pub policy: String,
    pub iterations: usize,
    pub converged: bool,
    pub convergence_time_s: f64,
    pub objective_s: f64,
    pub objective_trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct RadioKey {
    node: NodeId,
    band: Band,
    channel: ChannelId,
}

#[derive(Debug, Clone, Copy)]
struct Hop {
    link: LinkId,
    reverse: bool,
    tx: NodeId,
}

struct Packet {
    flow: usize,
    bits: u64,
    created: f64,
    path: Rc<[Hop]>,
    hop: usize,
}

/// A packet on the air. Progress is a fraction of the packet, advanced at
/// `speed` per second since `since`.
#[derive(Debug, Clone, Copy)]
struct Serving {
    packet: usize,
    link: LinkId,
    band: Band,
    channel: ChannelId,
    bits: f64,
    frame_error: f64,
    /// 1 / own PHY rate
    inv_rate: f64,
    /// contenders on the air, this radio included
    n: usize,
    /// Σ 1 / rate over those contenders
    inv_rate_sum: f64,
    remaining: f64,
    speed: f64,
    since: f64,
    /// completion time of the newest scheduled event
    due: f64,
}

#[derive(Default)]
struct Radio {
    queue: VecDeque<usize>,
    serving: Option<Serving>,
    /// completions scheduled under an older version are stale
    version: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    Epoch(usize),
    Done(usize, u64),
    Arrival(usize),
    End,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Event {
    /// bit pattern of a non-negative f64, ordered like the value
    time: u64,
    seq: u64,
    kind: EventKind,
}

/// (rate, frame error) of a link direction, shared by the current epoch.
type DirState = (f64, f64);

struct Engine<'a> {
    t: &'a MeshTopology,
    model: &'a CostModel,
    flows: &'a [Flow],
    timeline: &'a [Epoch],
    cfg: &'a SimConfig,
    now: f64,
    seq: u64,
    events: BinaryHeap<Reverse<Event>>,
    processed: u64,
    radios: Vec<Radio>,
    /// radios with a packet on the air
    busy: BTreeSet<usize>,
    radio_index: BTreeMap<RadioKey, usize>,
    packets: Vec<Packet>,
    epoch: usize,
    /// per flow: current path, if routed
    paths: Vec<Option<Rc<[Hop]>>>,
    /// per flow: packets queued at their first radio, not yet in service
    head_waiting: Vec<u32>,
    dir_cache: RefCell<BTreeMap<(LinkId, bool, ChannelId), DirState>>,
    /// contention overhead by contender count, seconds
    overhead_cache: Vec<f64>,
    window: (f64, f64),
    per_flow_bits: Vec<u64>,
    delay_sum: f64,
    delivered: Tally,
    dropped: Tally,
    drops_by_cause: BTreeMap<DropCause, Tally>,
    offered_total: Tally,
    delivered_total: Tally,
    dropped_total: Tally,
}

impl<'a> Engine<'a> {
    fn schedule(&mut self, at: f64, kind: EventKind) {
        debug_assert!(at >= self.now, "event scheduled in the past");
        self.seq += 1;
        self.events.push(Reverse(Event { time: at.to_bits(), seq: self.seq, kind }));
    }

    fn asg(&self) -> &'a ChannelAssignment {
        &self.timeline[self.epoch].assignment
    }

    fn routes(&self) -> &'a RouteTable {
        &self.timeline[self.epoch].routes
    }

    fn in_window(&self) -> bool {
        self.now >= self.window.0 && self.now <= self.window.1
    }

    fn channel(&self, l: LinkId) -> ChannelId {
        let t = self.t;
        self.asg().link_channel(t, l).unwrap_or_else(|| t.channels(t.link(l).band())[0].id)
    }

    fn radio_for(&mut self, hop: &Hop) -> usize {
        let key = RadioKey { node: hop.tx, band: self.t.link(hop.link).band(), channel: self.channel(hop.link) };
        if let Some(&i) = self.radio_index.get(&key) {
            return i;
        }
        self.radios.push(Radio::default());
        self.radio_index.insert(key, self.radios.len() - 1);
        self.radios.len() - 1
    }

    /// Rate and frame error of a direction on `f` against the epoch's active links.
    fn dir_state_on(&self, l: LinkId, reverse: bool, f: ChannelId) -> DirState {
        if let Some(&s) = self.dir_cache.borrow().get(&(l, reverse, f)) {
            return s;
        }
        let band = self.t.link(l).band();
        let mut group: Vec<LinkId> = self
            .routes()
            .active_links()
            .into_iter()
            .filter(|&k| self.t.link(k).band() == band && self.channel(k) == f)
            .collect();
        if !group.contains(&l) {
            group.push(l);
        }
        let st: LinkChannelState = self.model.direction_state(l, f, reverse, &group);
        // an undecodable direction limps along at the lowest rate
        let s = match st.rate_bps {
            Some(r) => (r, st.frame_error),
            None => (RATE_TABLE[0].0, FER_CEIL),
        };
        self.dir_cache.borrow_mut().insert((l, reverse, f), s);
        s
    }

    fn build_paths(&mut self) {
        let routes = self.routes();
        self.paths = self
            .flows
            .iter()
            .map(|f| {
                let r = routes.routes.get(&f.id)?;
                let hops: Vec<Hop> = r
                    .links
                    .iter()
                    .zip(r.nodes.windows(2))
                    .map(|(&l, w)| Hop { link: l, reverse: self.t.link(l).tx != w[0], tx: w[0] })
                    .collect();
                Some(Rc::from(hops))
            })
            .collect();
    }

    fn drop_packet(&mut self, bits: u64, cause: DropCause) {
        self.dropped_total.add(bits);
        if self.in_window() {
            self.dropped.add(bits);
            self.drops_by_cause.entry(cause).or_default().add(bits);
        }
    }

    /// Generates one packet of `flow` now and hands it to its first radio.
    fn generate(&mut self, flow: usize) {
        let bits = self.flows[flow].packet_bits.round() as u64;
        self.offered_total.add(bits);
        let Some(path) = self.paths[flow].clone() else {
            self.drop_packet(bits, DropCause::Unroutable);
            return;
        };
        self.packets.push(Packet { flow, bits, created: self.now, path, hop: 0 });
        let id = self.packets.len() - 1;
        self.enqueue(id, DropCause::QueueOverflow);
    }

    fn enqueue(&mut self, p: usize, cause: DropCause) {
        let hop = self.packets[p].path[self.packets[p].hop];
        let r = self.radio_for(&hop);
        if self.radios[r].queue.len() >= self.cfg.queue_packets {
            let bits = self.packets[p].bits;
            self.drop_packet(bits, cause);
            return;
        }
        self.radios[r].queue.push_back(p);
        if self.packets[p].hop == 0 {
            self.head_waiting[self.packets[p].flow] += 1;
        }
        if self.radios[r].serving.is_none() {
            self.start_service(r);
        }
    }

    fn start_service(&mut self, r: usize) {
        let Some(p) = self.radios[r].queue.pop_front() else { return };
        if self.packets[p].hop == 0 {
            self.head_waiting[self.packets[p].flow] -= 1;
        }
        let hop = self.packets[p].path[self.packets[p].hop];
        let channel = self.channel(hop.link);
        let (rate, frame_error) = self.dir_state_on(hop.link, hop.reverse, channel);
        let mut s = Serving {
            packet: p,
            link: hop.link,
            band: self.t.link(hop.link).band(),
            channel,
            bits: self.packets[p].bits as f64,
            frame_error,
            inv_rate: 1.0 / rate,
            n: 1,
            inv_rate_sum: 1.0 / rate,
            remaining: 1.0,
            speed: 0.0,
            since: self.now,
            due: f64::INFINITY,
        };
        let others = self.contenders(r, &s);
        for &k in &others {
            let o = self.radios[k].serving.expect("busy contender");
            s.n += 1;
            s.inv_rate_sum += o.inv_rate;
        }
        self.radios[r].serving = Some(s);
        self.busy.insert(r);
        self.respeed(r);
        for k in others {
            self.adjust(k, 1, s.inv_rate);
        }
        // a saturated source refills its first radio as soon as a packet leaves
        let pk = &self.packets[p];
        if pk.hop == 0 && matches!(self.flows[pk.flow].demand, DemandModel::Saturated) {
            self.generate(pk.flow);
        }
    }

    /// Busy radios other than `r` sharing the medium with `s`.
    fn contenders(&self, r: usize, s: &Serving) -> Vec<usize> {
        self.busy
            .iter()
            .copied()
            .filter(|&i| {
                i != r
                    && self.radios[i].serving.is_some_and(|o| {
                        o.band == s.band && o.channel == s.channel && self.model.contend(s.link, o.link)
                    })
            })
            .collect()
    }

    /// Contention overhead of `n` saturated stations, seconds per packet.
    fn overhead_s(&mut self, n: usize) -> f64 {
        while self.overhead_cache.len() <= n {
            let m = self.overhead_cache.len().max(1);
            let p = SaturationParams::reference(m, 1.0, 1.0);
            let o = solve(&p).overhead_slots * p.slot_s;
            self.overhead_cache.push(o);
        }
        self.overhead_cache[n]
    }

    /// A contender joined (`dn = 1`) or left (`dn = -1`) the medium of `r`.
    fn adjust(&mut self, r: usize, dn: i64, inv_rate: f64) {
        let Some(mut s) = self.radios[r].serving else { return };
        s.n = (s.n as i64 + dn) as usize;
        s.inv_rate_sum += dn as f64 * inv_rate;
        self.radios[r].serving = Some(s);
        self.respeed(r);
    }

    /// Brings progress up to now and sets the speed for the current
    /// contender set: one packet per `n · ρ(n) / (1 − e)`.
    fn respeed(&mut self, r: usize) {
        let Some(mut s) = self.radios[r].serving else { return };
        s.remaining = (s.remaining - (self.now - s.since) * s.speed).max(0.0);
        s.since = self.now;
        let per_packet = s.n as f64 * self.overhead_s(s.n) + s.bits * s.inv_rate_sum;
        s.speed = (1.0 - s.frame_error) / per_packet;
        let due = self.now + s.remaining / s.speed;
        // a later completion is picked up when the earlier event fires
        if due < s.due {
            s.due = due;
            self.radios[r].version += 1;
            let v = self.radios[r].version;
            self.schedule(due, EventKind::Done(r, v));
        }
        self.radios[r].serving = Some(s);
    }

    fn finish_service(&mut self, r: usize, version: u64) {
        if self.radios[r].version != version {
            return;
        }
        let mut s = self.radios[r].serving.expect("completion of an idle radio");
        let left = s.remaining - (self.now - s.since) * s.speed;
        if left > 1e-9 {
            // slowed down since this event was scheduled
            s.due = f64::INFINITY;
            self.radios[r].serving = Some(s);
            self.respeed(r);
            return;
        }
        self.radios[r].serving = None;
        self.busy.remove(&r);
        for k in self.contenders(r, &s) {
            self.adjust(k, -1, s.inv_rate);
        }
        let p = s.packet;
        self.packets[p].hop += 1;
        if self.packets[p].hop == self.packets[p].path.len() {
            let (bits, flow, created) = (self.packets[p].bits, self.packets[p].flow, self.packets[p].created);
            self.delivered_total.add(bits);
            if self.in_window() {
                self.delivered.add(bits);
                self.per_flow_bits[flow] += bits;
                self.delay_sum += self.now - created;
            }
        } else {
            self.enqueue(p, DropCause::QueueOverflow);
        }
        self.start_service(r);
    }

    /// Switches to epoch `e`; queued packets follow their radio's new channel.
    fn apply_epoch(&mut self, e: usize) {
        self.epoch = e;
        self.dir_cache.borrow_mut().clear();
        self.build_paths();
        let mut waiting = Vec::new();
        for radio in &mut self.radios {
            waiting.extend(radio.queue.drain(..));
        }
        for &p in &waiting {
            if self.packets[p].hop == 0 {
                self.head_waiting[self.packets[p].flow] -= 1;
            }
        }
        for p in waiting {
            self.enqueue(p, DropCause::Retune);
        }
        self.revive_saturated();
    }

    /// Gives every routed saturated flow without a waiting packet a new one.
    fn revive_saturated(&mut self) {
        for i in 0..self.flows.len() {
            if matches!(self.flows[i].demand, DemandModel::Saturated)
                && self.paths[i].is_some()
                && self.head_waiting[i] == 0
            {
                self.generate(i);
            }
        }
    }

    fn arrival(&mut self, flow: usize) {
        let f = &self.flows[flow];
        let rate = f.demand_at(self.now).unwrap_or(0.0);
        if rate > 0.0 {
            self.generate(flow);
            let next = self.now + f.packet_bits / rate;
            self.schedule(next, EventKind::Arrival(flow));
        } else if matches!(f.demand, DemandModel::Trace(_)) {
            let next = ((self.now / TRACE_INTERVAL_S).floor() + 1.0) * TRACE_INTERVAL_S;
            self.schedule(next, EventKind::Arrival(flow));
        }
    }

    fn in_flight(&self) -> Tally {
        let mut t = Tally::default();
        for r in &self.radios {
            for &p in r.queue.iter().chain(r.serving.iter().map(|s| &s.packet)) {
                t.add(self.packets[p].bits);
            }
        }
        t
    }
}

/// Runs `flows` over the timeline and measures from
/// `max(warm-up, convergence)` for `horizon_s` seconds.
pub fn simulate(
    t: &MeshTopology,
    model: &CostModel,
    flows: &[Flow],
    timeline: &[Epoch],
    info: &RunInfo,
    cfg: &SimConfig,
) -> MetricsReport {
    assert!(!timeline.is_empty() && timeline[0].time_s == 0.0, "timeline starts at 0");
    let start = cfg.warmup_s.max(info.convergence_time_s);
    let end = start + cfg.horizon_s;
    let mut eng = Engine {
        t,
        model,
        flows,
        timeline,
        cfg,
        now: 0.0,
        seq: 0,
        events: BinaryHeap::new(),
        processed: 0,
        radios: Vec::new(),
        busy: BTreeSet::new(),
        radio_index: BTreeMap::new(),
        packets: Vec::new(),
        epoch: 0,
        paths: Vec::new(),
        head_waiting: vec![0; flows.len()],
        dir_cache: RefCell::new(BTreeMap::new()),
        overhead_cache: Vec::new(),
        window: (start, end),
        per_flow_bits: vec![0; flows.len()],
        delay_sum: 0.0,
        delivered: Tally::default(),
        dropped: Tally::default(),
        drops_by_cause: BTreeMap::new(),
        offered_total: Tally::default(),
        delivered_total: Tally::default(),
        dropped_total: Tally::default(),
    };
    eng.build_paths();
    for (i, ep) in timeline.iter().enumerate().skip(1) {
        if ep.time_s < end {
            eng.schedule(ep.time_s, EventKind::Epoch(i));
        }
    }
    eng.schedule(end, EventKind::End);
    eng.revive_saturated();
    // periodic sources start at a seeded offset inside their first interval
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x51A1_7EED);
    for (i, f) in flows.iter().enumerate() {
        if let Some(r) = f.demand_at(0.0) {
            let first = if r > 0.0 { rng.gen::<f64>() * f.packet_bits / r } else { 0.0 };
            eng.schedule(first, EventKind::Arrival(i));
        }
    }
    while let Some(Reverse(ev)) = eng.events.pop() {
        eng.now = f64::from_bits(ev.time);
        eng.processed += 1;
        match ev.kind {
            EventKind::End => break,
            EventKind::Epoch(e) => eng.apply_epoch(e),
            EventKind::Done(r, v) => eng.finish_service(r, v),
            EventKind::Arrival(f) => eng.arrival(f),
        }
    }

    let horizon = end - start;
    let per_flow: BTreeMap<FlowId, f64> =
        flows.iter().enumerate().map(|(i, f)| (f.id, eng.per_flow_bits[i] as f64 / horizon)).collect();
    let total = per_flow.values().fold(0.0, |acc, v| acc + v);
    let unroutable: Vec<FlowId> = flows.iter().enumerate().filter(|(i, _)| eng.paths[*i].is_none()).map(|(_, f)| f.id).collect();
    MetricsReport {
        policy: info.policy.clone(),
        seed: cfg.seed,
        measure_start_s: start,
        measure_end_s: end,
        total_throughput_bps: total,
        per_flow_throughput_bps: per_flow,
        avg_delay_s: if eng.delivered.packets > 0 { eng.delay_sum / eng.delivered.packets as f64 } else { 0.0 },
        delivered: eng.delivered,
        dropped: eng.dropped,
        drops_by_cause: eng.drops_by_cause.clone(),
        offered_total: eng.offered_total,
        delivered_total: eng.delivered_total,
        dropped_total: eng.dropped_total,
        in_flight_total: eng.in_flight(),
        unroutable_flows: unroutable,
        iterations: info.iterations,
        converged: info.converged,
        convergence_time_s: info.convergence_time_s,
        objective_s: info.objective_s,
        objective_trace: info.objective_trace.clone(),
        events: eng.processed,
    }
}
