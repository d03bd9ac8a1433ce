//! Scenario configuration, read from TOML.
//!
//! ```toml
//! arena_m = 1000.0
//! aps = 10
//! clients = 40
//! radios = 2            # backhaul data radios per AP (control radio extra)
//! channels = 12         # backhaul channels: 3 or 12
//! policy = "arachne"    # arachne | optimal | single | random | interference | tree
//! seed = 7
//! horizon_s = 20.0
//! placement = "grid"    # grid | random | [placement.explicit]
//!
//! [traffic]
//! mode = "saturated"    # saturated | voip | trace
//!
//! [protocol]
//! max_iterations = 20
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::arachne::ProtocolConfig;
use crate::error::{Error, Result};
use crate::optimal::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Arachne,
    Optimal,
    Single,
    Random,
    Interference,
    Tree,
}

impl Policy {
    pub const ALL: [Policy; 6] =
        [Policy::Arachne, Policy::Optimal, Policy::Single, Policy::Random, Policy::Interference, Policy::Tree];

    pub fn name(&self) -> &'static str {
        match self {
            Policy::Arachne => "arachne",
            Policy::Optimal => "optimal",
            Policy::Single => "single",
            Policy::Random => "random",
            Policy::Interference => "interference",
            Policy::Tree => "tree",
        }
    }
}

impl std::str::FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Policy::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown policy {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    Grid,
    Random,
    Explicit { aps: Vec<[f64; 2]>, clients: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrafficMode {
    Saturated,
    Voip,
    Trace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    pub mode: TrafficMode,
    /// VoIP session count; ignored otherwise
    pub sessions: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    /// data packet size for saturated and trace flows
    pub packet_bits: f64,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self { mode: TrafficMode::Saturated, sessions: 8, trace: None, packet_bits: 12000.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub arena_m: f64,
    pub aps: usize,
    pub clients: usize,
    pub radios: usize,
    pub channels: usize,
    pub backhaul_range_m: f64,
    pub tx_power_dbm: f64,
    pub policy: Policy,
    pub seed: u64,
    /// measured interval, seconds, after warm-up and protocol convergence
    pub horizon_s: f64,
    pub warmup_s: f64,
    /// per-radio queue capacity, packets
    pub queue_packets: usize,
    pub placement: Placement,
    pub traffic: TrafficConfig,
    pub protocol: ProtocolConfig,
    pub solver: SolverConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            arena_m: 1000.0,
            aps: 10,
            clients: 40,
            radios: 2,
            channels: 12,
            backhaul_range_m: 300.0,
            tx_power_dbm: 20.0,
            policy: Policy::Arachne,
            seed: 1,
            horizon_s: 20.0,
            warmup_s: 10.0,
            queue_packets: 100,
            placement: Placement::Grid,
            traffic: TrafficConfig::default(),
            protocol: ProtocolConfig::default(),
            solver: SolverConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.arena_m > 0.0) {
            return bad(format!("arena_m must be positive, got {}", self.arena_m));
        }
        let n_aps = match &self.placement {
            Placement::Explicit { aps, .. } => aps.len(),
            _ => self.aps,
        };
        if n_aps == 0 {
            return bad("at least one AP is required".into());
        }
        if self.radios < 2 {
            return bad(format!("radios must be at least 2, got {}", self.radios));
        }
        if self.channels != 3 && self.channels != 12 {
            return bad(format!("channels must be 3 or 12, got {}", self.channels));
        }
        if !(self.horizon_s > 0.0) || !(self.warmup_s >= 0.0) {
            return bad("horizon_s must be positive and warmup_s non-negative".into());
        }
        if self.queue_packets == 0 {
            return bad("queue_packets must be positive".into());
        }
        if !(self.traffic.packet_bits > 0.0) {
            return bad("traffic.packet_bits must be positive".into());
        }
        if self.traffic.mode == TrafficMode::Trace && self.traffic.trace.is_none() {
            return bad("traffic.mode = \"trace\" needs traffic.trace".into());
        }
        self.protocol.validate()?;
        // TOML integers are signed 64-bit
        toml::to_string(self).map_err(|e| Error::Config(format!("not representable as TOML: {e}")))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = ScenarioConfig::default();
        let text = cfg.to_toml();
        assert_eq!(ScenarioConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn explicit_placement_round_trip() {
        let cfg = ScenarioConfig {
            placement: Placement::Explicit { aps: vec![[0.0, 0.0]], clients: vec![[10.0, 0.0]] },
            traffic: TrafficConfig { mode: TrafficMode::Trace, trace: Some("t.csv".into()), ..Default::default() },
            ..Default::default()
        };
        let text = cfg.to_toml();
        assert_eq!(ScenarioConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let cfg = ScenarioConfig::from_toml("aps = 4\npolicy = \"single\"\n[protocol]\nmax_iterations = 3\n").unwrap();
        assert_eq!(cfg.aps, 4);
        assert_eq!(cfg.policy, Policy::Single);
        assert_eq!(cfg.protocol.max_iterations, 3);
        assert_eq!(cfg.clients, 40);
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(ScenarioConfig::from_toml("channels = 5").is_err());
        assert!(ScenarioConfig::from_toml("radios = 1").is_err());
        assert!(ScenarioConfig::from_toml("aps = 0").is_err());
        assert!(ScenarioConfig::from_toml("bogus = 1").is_err());
        assert!(ScenarioConfig::from_toml("[protocol]\nw1 = 0.9\nw2 = 0.4").is_err());
        assert!(ScenarioConfig { seed: u64::MAX, ..Default::default() }.validate().is_err());
    }
}
