//! Flow demands, load measurement and near-future load estimation.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{ScenarioConfig, TrafficMode};
use crate::error::{Error, Result};
use crate::topology::{FlowId, MeshTopology, NodeId};

/// Trace demands are piecewise constant over intervals of this length.
pub const TRACE_INTERVAL_S: f64 = 180.0;
pub const EWMA_ALPHA: f64 = 0.3;

/// G.711-like voice: 160-byte payload every 20 ms.
pub const VOIP_PACKET_BITS: f64 = 1280.0;
pub const VOIP_INTERVAL_S: f64 = 0.020;
pub const VOIP_RATE_BPS: f64 = VOIP_PACKET_BITS / VOIP_INTERVAL_S;

/// Step function of demand (bit/s) over time.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DemandSeries {
    /// (interval start, rate), ascending by start; each step lasts one trace interval
    pub steps: Vec<(f64, f64)>,
}

impl DemandSeries {
    pub fn rate_at(&self, t: f64) -> f64 {
        let idx = self.steps.partition_point(|&(s, _)| s <= t);
        if idx == 0 {
            return 0.0;
        }
        let (start, rate) = self.steps[idx - 1];
        if t < start + TRACE_INTERVAL_S {
            rate
        } else {
            0.0
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { steps: self.steps.iter().map(|&(s, r)| (s, r * factor)).collect() }
    }

    /// Per-interval averages strictly before `t`, oldest first.
    pub fn history_until(&self, t: f64) -> Vec<f64> {
        self.steps.iter().filter(|(s, _)| *s <= t).map(|&(_, r)| r).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DemandModel {
    Saturated,
    Cbr { rate_bps: f64 },
    Trace(DemandSeries),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub id: FlowId,
    pub src: NodeId,
    pub dst: NodeId,
    pub demand: DemandModel,
    pub packet_bits: f64,
}

impl Flow {
    pub fn new(id: FlowId, src: NodeId, dst: NodeId, demand: DemandModel, packet_bits: f64) -> Result<Self> {
        if src == dst {
            return Err(Error::Config(format!("flow {id}: source equals destination")));
        }
        if let DemandModel::Cbr { rate_bps } = demand {
            if !(rate_bps > 0.0) {
                return Err(Error::Config(format!("flow {id}: CBR rate must be positive")));
            }
        }
        Ok(Self { id, src, dst, demand, packet_bits })
    }

    pub fn voip(id: FlowId, src: NodeId, dst: NodeId) -> Result<Self> {
        Self::new(id, src, dst, DemandModel::Cbr { rate_bps: VOIP_RATE_BPS }, VOIP_PACKET_BITS)
    }

    /// Offered rate at time `t`; `None` for saturated sources.
    pub fn demand_at(&self, t: f64) -> Option<f64> {
        match &self.demand {
            DemandModel::Saturated => None,
            DemandModel::Cbr { rate_bps } => Some(*rate_bps),
            DemandModel::Trace(s) => Some(s.rate_at(t)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadSample {
    pub start_s: f64,
    pub duration_s: f64,
    pub offered_bits: f64,
    pub served_bits: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadEstimate {
    pub current_bps: f64,
    pub estimated_bps: f64,
}

/// Served bits over the trailing `window` (ending at the latest sample end),
/// divided by the window. Samples partly inside the window count pro rata.
pub fn current_load(samples: &[LoadSample], window: f64) -> f64 {
    assert!(window > 0.0, "window must be positive");
    let Some(end) = samples.iter().map(|s| s.start_s + s.duration_s).reduce(f64::max) else {
        return 0.0;
    };
    let from = end - window;
    let mut bits = 0.0;
    for s in samples {
        let lo = s.start_s.max(from);
        let hi = (s.start_s + s.duration_s).min(end);
        if hi > lo && s.duration_s > 0.0 {
            bits += s.served_bits * (hi - lo) / s.duration_s;
        }
    }
    bits / window
}

/// Exponentially weighted average of per-interval loads, oldest first.
pub fn estimate_load(history: &[f64]) -> f64 {
    let mut it = history.iter();
    let Some(&first) = it.next() else { return 0.0 };
    it.fold(first, |acc, &x| EWMA_ALPHA * x + (1.0 - EWMA_ALPHA) * acc)
}

/// Reads a normalized trace (`interval_start_s,ap_id,demand_bps`) into
/// per-AP demand series. `ap_id` is either a bare node number or `apN`.
pub fn load_trace_ingest(path: &Path, known_aps: &BTreeSet<NodeId>) -> Result<BTreeMap<NodeId, DemandSeries>> {
    let text = std::fs::read_to_string(path)?;
    parse_trace(&text, path, known_aps)
}

pub fn parse_trace(text: &str, path: &Path, known_aps: &BTreeSet<NodeId>) -> Result<BTreeMap<NodeId, DemandSeries>> {
    let err = |line: u64, msg: String| Error::Trace { path: path.to_path_buf(), line, msg };
    let mut out: BTreeMap<NodeId, DemandSeries> = BTreeMap::new();
    if text.trim().is_empty() {
        return Ok(out);
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    let expected = ["interval_start_s", "ap_id", "demand_bps"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(err(1, format!("expected header {}", expected.join(","))));
    }
    let mut last: Option<(f64, NodeId)> = None;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let start: f64 = rec[0].parse().map_err(|_| err(line, format!("bad interval_start_s {:?}", &rec[0])))?;
        let ap_text = rec[1].strip_prefix("ap").unwrap_or(&rec[1]);
        let ap = NodeId(ap_text.parse().map_err(|_| err(line, format!("bad ap_id {:?}", &rec[1])))?);
        let demand: f64 = rec[2].parse().map_err(|_| err(line, format!("bad demand_bps {:?}", &rec[2])))?;
        if !(start >= 0.0) || !(demand >= 0.0) {
            return Err(err(line, "negative time or demand".into()));
        }
        if !known_aps.contains(&ap) {
            return Err(err(line, format!("unknown AP {}", &rec[1])));
        }
        if let Some(prev) = last {
            if (start, ap) <= prev {
                return Err(err(line, "rows must be sorted by time, then ap_id, without duplicates".into()));
            }
        }
        last = Some((start, ap));
        out.entry(ap).or_default().steps.push((start, demand));
    }
    Ok(out)
}

/// Flows for a scenario. Saturated: every client sends to a random other
/// client. VoIP: `sessions` random client pairs. Trace: every client sends
/// to a random other client at its AP's trace demand divided evenly among
/// that AP's clients.
pub fn generate_flows(
    cfg: &ScenarioConfig,
    t: &MeshTopology,
    trace: Option<&BTreeMap<NodeId, DemandSeries>>,
) -> Result<Vec<Flow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xF10F_5EED);
    let clients: Vec<NodeId> = t.clients().map(|c| c.id).collect();
    if clients.len() < 2 {
        return Ok(Vec::new());
    }
    let pick_other = |rng: &mut ChaCha8Rng, src: NodeId| loop {
        let d = clients[rng.gen_range(0..clients.len())];
        if d != src {
            return d;
        }
    };
    let mut flows = Vec::new();
    let mode = match (cfg.traffic.mode, trace) {
        (TrafficMode::Trace, Some(tr)) if !tr.is_empty() => TrafficMode::Trace,
        (TrafficMode::Trace, _) => {
            log::warn!("trace is empty; falling back to saturated traffic");
            TrafficMode::Saturated
        }
        (m, _) => m,
    };
    match mode {
        TrafficMode::Saturated => {
            for &src in &clients {
                let dst = pick_other(&mut rng, src);
                let id = FlowId(flows.len() as u32);
                flows.push(Flow::new(id, src, dst, DemandModel::Saturated, cfg.traffic.packet_bits)?);
            }
        }
        TrafficMode::Voip => {
            for _ in 0..cfg.traffic.sessions {
                let mut pair = clients.choose_multiple(&mut rng, 2);
                let (src, dst) = (*pair.next().unwrap(), *pair.next().unwrap());
                flows.push(Flow::voip(FlowId(flows.len() as u32), src, dst)?);
            }
        }
        TrafficMode::Trace => {
            let trace = trace.unwrap();
            for &src in &clients {
                let dst = pick_other(&mut rng, src);
                let ap = t.association[&src];
                let share = 1.0 / t.clients_of(ap).len() as f64;
                let series = trace.get(&ap).map(|s| s.scaled(share)).unwrap_or_default();
                let id = FlowId(flows.len() as u32);
                flows.push(Flow::new(id, src, dst, DemandModel::Trace(series), cfg.traffic.packet_bits)?);
            }
        }
    }
    Ok(flows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn aps(ids: &[u32]) -> BTreeSet<NodeId> {
        ids.iter().map(|&i| NodeId(i)).collect()
    }

    #[test]
    fn current_load_cases() {
        assert_eq!(current_load(&[], 1.0), 0.0);
        let one = [LoadSample { start_s: 0.0, duration_s: 1.0, offered_bits: 1e7, served_bits: 1e7 }];
        assert_eq!(current_load(&one, 1.0), 1e7);
        let two = [
            LoadSample { start_s: 0.0, duration_s: 180.0, offered_bits: 2e6 * 180.0, served_bits: 2e6 * 180.0 },
            LoadSample { start_s: 180.0, duration_s: 180.0, offered_bits: 4e6 * 180.0, served_bits: 4e6 * 180.0 },
        ];
        assert!((current_load(&two, 360.0) - 3e6).abs() < 1e-6);
        // only the newer interval inside a 180 s window
        assert!((current_load(&two, 180.0) - 4e6).abs() < 1e-6);
    }

    #[test]
    fn ewma_cases() {
        assert_eq!(estimate_load(&[7.0, 7.0, 7.0]), 7.0);
        assert!((estimate_load(&[0.0, 10e6]) - 3e6).abs() < 1e-6);
        assert!((estimate_load(&[4e6, 4e6, 8e6]) - 5.2e6).abs() < 1e-6);
        assert_eq!(estimate_load(&[5.0]), 5.0);
    }

    #[test]
    fn trace_single_row() {
        let s = parse_trace("interval_start_s,ap_id,demand_bps\n0,ap3,2000000\n", Path::new("t"), &aps(&[3])).unwrap();
        let series = &s[&NodeId(3)];
        assert_eq!(series.rate_at(0.0), 2e6);
        assert_eq!(series.rate_at(179.9), 2e6);
        assert_eq!(series.rate_at(180.0), 0.0);
    }

    #[test]
    fn trace_step_lookup() {
        let text = "interval_start_s,ap_id,demand_bps\n0,1,2000000\n180,1,6000000\n";
        let s = parse_trace(text, Path::new("t"), &aps(&[1])).unwrap();
        assert_eq!(s[&NodeId(1)].rate_at(90.0), 2e6);
        assert_eq!(s[&NodeId(1)].rate_at(200.0), 6e6);
    }

    #[test]
    fn trace_empty_and_errors() {
        assert!(parse_trace("", Path::new("t"), &aps(&[0])).unwrap().is_empty());
        let bad = parse_trace("interval_start_s,ap_id,demand_bps\n0,1,abc\n", Path::new("t"), &aps(&[1]));
        match bad {
            Err(Error::Trace { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let unknown = parse_trace("interval_start_s,ap_id,demand_bps\n0,9,1\n", Path::new("t"), &aps(&[1]));
        assert!(matches!(unknown, Err(Error::Trace { line: 2, .. })));
        let unsorted = parse_trace("interval_start_s,ap_id,demand_bps\n180,1,1\n0,1,1\n", Path::new("t"), &aps(&[1]));
        assert!(matches!(unsorted, Err(Error::Trace { line: 3, .. })));
        assert!(parse_trace("a,b,c\n", Path::new("t"), &aps(&[1])).is_err());
    }

    #[test]
    fn flow_validation() {
        assert!(Flow::new(FlowId(0), NodeId(1), NodeId(1), DemandModel::Saturated, 1.0).is_err());
        assert!(Flow::new(FlowId(0), NodeId(1), NodeId(2), DemandModel::Cbr { rate_bps: 0.0 }, 1.0).is_err());
        let v = Flow::voip(FlowId(0), NodeId(1), NodeId(2)).unwrap();
        assert_eq!(v.demand_at(3.0), Some(64_000.0));
    }
}
