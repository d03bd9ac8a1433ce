//! Airtime cost and the DCF saturation model behind it.
//!
//! Time inside the saturation model is kept in slots; the public functions
//! that return time convert to seconds using the configured slot length.

use serde::{Deserialize, Serialize};

use crate::phy::LinkChannelState;

/// Seconds. `f64::INFINITY` marks an unusable link.
pub type Airtime = f64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AirtimeConfig {
    /// channel-access plus protocol overhead, seconds
    pub overhead_s: f64,
    /// test frame size, bits
    pub test_frame_bits: f64,
}

impl Default for AirtimeConfig {
    fn default() -> Self {
        Self { overhead_s: 1.25e-3, test_frame_bits: 8224.0 }
    }
}

/// `[overhead + B_t / R] / (1 - e)` for a measured rate and frame-error rate.
pub fn airtime_from(cfg: &AirtimeConfig, rate_bps: f64, frame_error: f64) -> Airtime {
    if !(rate_bps > 0.0) || !(frame_error < 1.0) {
        return f64::INFINITY;
    }
    (cfg.overhead_s + cfg.test_frame_bits / rate_bps) / (1.0 - frame_error)
}

pub fn airtime_cost(cfg: &AirtimeConfig, s: &LinkChannelState) -> Airtime {
    match s.rate_bps {
        Some(r) => airtime_from(cfg, r, s.frame_error),
        None => f64::INFINITY,
    }
}

/// Uplink plus downlink cost; infinite if either direction is.
pub fn bidirectional_cost(up: Airtime, down: Airtime) -> Airtime {
    if up.is_infinite() || down.is_infinite() {
        f64::INFINITY
    } else {
        up + down
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationParams {
    /// maximum attempt index K (attempts 0..=K)
    pub max_attempts: u32,
    /// mean backoff at the first attempt, slots; b_k = 2^k · b_0
    pub b0: f64,
    pub slot_s: f64,
    /// success overhead T_0, slots
    pub t0_slots: f64,
    /// collision overhead T_c, slots
    pub tc_slots: f64,
    pub n: usize,
    pub packet_bits: f64,
    /// per-contender PHY rates; a single entry is shared by all n contenders
    pub rates_bps: Vec<f64>,
}

impl SaturationParams {
    /// Parameters of the overhead curve: K=7, b_0=16, 20 µs slots, T_0=52, T_c=17.
    pub fn reference(n: usize, packet_bits: f64, rate_bps: f64) -> Self {
        Self {
            max_attempts: 7,
            b0: 16.0,
            slot_s: 20e-6,
            t0_slots: 52.0,
            tc_slots: 17.0,
            n,
            packet_bits,
            rates_bps: vec![rate_bps],
        }
    }

    fn backoff(&self, k: u32) -> f64 {
        self.b0 * 2f64.powi(k as i32)
    }

    fn rate(&self, i: usize) -> f64 {
        if self.rates_bps.len() == 1 {
            self.rates_bps[0]
        } else {
            self.rates_bps[i]
        }
    }

    /// Σ_i L / C_i in slots
    fn transmission_slots_sum(&self) -> f64 {
        (0..self.n).map(|i| self.packet_bits / self.rate(i) / self.slot_s).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationSolution {
    pub gamma: f64,
    pub beta: f64,
    pub throughput_bps: f64,
    pub delay_s: f64,
    /// contention and protocol overhead: ρ minus the mean transmission time, slots
    pub overhead_slots: f64,
}

/// Attempt probability for a given collision probability.
pub fn attempt_rate(gamma: f64, p: &SaturationParams) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut g = 1.0;
    for k in 0..=p.max_attempts {
        num += g;
        den += g * p.backoff(k);
        g *= gamma;
    }
    num / den
}

/// Collision probability seen by one of `n` nodes attempting with probability `beta`.
pub fn collision_prob(beta: f64, n: usize) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    1.0 - (1.0 - beta).powi(n as i32 - 1)
}

/// Equilibrium `(γ*, β*)` by bisection on `γ − Γ(G(γ))` over `[0, 1]`.
pub fn solve_fixed_point(p: &SaturationParams) -> (f64, f64) {
    let g = |gamma: f64| gamma - collision_prob(attempt_rate(gamma, p), p.n);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    if g(lo) >= 0.0 {
        return (0.0, attempt_rate(0.0, p));
    }
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * 0.5 {
            break;
        }
    }
    let gamma = 0.5 * (lo + hi);
    (gamma, attempt_rate(gamma, p))
}

fn check_beta(beta: f64) {
    assert!(beta > 0.0 && beta < 1.0, "attempt rate must lie strictly inside (0, 1), got {beta}");
}

/// Aggregate saturation throughput θ(β), bit/s.
pub fn throughput(p: &SaturationParams, beta: f64) -> f64 {
    check_beta(beta);
    let n = p.n as f64;
    let idle = (1.0 - beta).powi(p.n as i32);
    let succ_one = beta * (1.0 - beta).powi(p.n as i32 - 1);
    let busy_success: f64 = (0..p.n)
        .map(|i| succ_one * (p.packet_bits / p.rate(i) / p.slot_s + p.t0_slots))
        .sum();
    let collision = (1.0 - idle - n * succ_one) * p.tc_slots;
    let bits_per_slot = n * succ_one * p.packet_bits / (1.0 + busy_success + collision);
    bits_per_slot / p.slot_s
}

/// Mean time per delivered packet in the cell, in slots, term by term.
fn delay_terms_slots(p: &SaturationParams, beta: f64) -> (f64, f64) {
    let n = p.n as f64;
    let succ = n * beta * (1.0 - beta).powi(p.n as i32 - 1);
    let idle = (1.0 - beta).powi(p.n as i32);
    let overhead = 1.0 / succ + (p.t0_slots - p.tc_slots) + (1.0 - idle) / succ * p.tc_slots;
    let transmission = p.transmission_slots_sum() / n;
    (overhead, transmission)
}

/// Per-packet delay ρ, seconds.
pub fn per_packet_delay(p: &SaturationParams, beta: f64) -> f64 {
    check_beta(beta);
    let (o, tx) = delay_terms_slots(p, beta);
    (o + tx) * p.slot_s
}

/// Solves the equilibrium and evaluates every quantity at it.
pub fn solve(p: &SaturationParams) -> SaturationSolution {
    let (gamma, beta) = solve_fixed_point(p);
    let (overhead_slots, _) = delay_terms_slots(p, beta);
    SaturationSolution {
        gamma,
        beta,
        throughput_bps: throughput(p, beta),
        delay_s: per_packet_delay(p, beta),
        overhead_slots,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(k: u32, b0: f64, n: usize) -> SaturationParams {
        SaturationParams { max_attempts: k, b0, ..SaturationParams::reference(n, 12000.0, 54e6) }
    }

    #[test]
    fn attempt_rate_values() {
        assert_eq!(attempt_rate(0.0, &params(7, 16.0, 1)), 0.0625);
        assert!((attempt_rate(1.0, &params(7, 16.0, 1)) - 8.0 / 4080.0).abs() < 1e-15);
        assert!((attempt_rate(0.5, &params(1, 2.0, 1)) - 0.375).abs() < 1e-15);
    }

    #[test]
    fn attempt_rate_decreasing() {
        let p = params(7, 16.0, 1);
        let mut prev = f64::INFINITY;
        for i in 0..=100 {
            let g = attempt_rate(i as f64 / 100.0, &p);
            assert!(g < prev);
            prev = g;
        }
    }

    #[test]
    fn collision_prob_values() {
        assert_eq!(collision_prob(0.7, 1), 0.0);
        assert_eq!(collision_prob(1.0, 5), 1.0);
        assert!((collision_prob(0.1, 3) - 0.19).abs() < 1e-15);
    }

    #[test]
    fn single_node_fixed_point() {
        let (g, b) = solve_fixed_point(&params(7, 16.0, 1));
        assert_eq!(g, 0.0);
        assert_eq!(b, 0.0625);
    }

    #[test]
    fn single_node_overhead_is_68_slots() {
        let s = solve(&params(7, 16.0, 1));
        assert!((s.overhead_slots - 68.0).abs() < 1e-12);
    }

    #[test]
    fn single_node_throughput_by_hand() {
        // n=1, β=1/16: θ = βL / (1 + β(L/C + T0)) per slot
        let p = params(7, 16.0, 1);
        let beta = 0.0625;
        let tx_slots = 12000.0 / 54e6 / 20e-6;
        let want = beta * 12000.0 / (1.0 + beta * (tx_slots + 52.0)) / 20e-6;
        assert!((throughput(&p, beta) - want).abs() / want < 1e-12);
    }

    #[test]
    fn zero_payload_zero_throughput() {
        let mut p = params(7, 16.0, 3);
        p.packet_bits = 0.0;
        assert_eq!(throughput(&p, 0.05), 0.0);
    }

    #[test]
    #[should_panic]
    fn degenerate_beta_rejected() {
        throughput(&params(7, 16.0, 2), 1.0);
    }

    #[test]
    fn eq1_spot_values() {
        let cfg = AirtimeConfig::default();
        let c = airtime_from(&cfg, 54e6, 0.0);
        assert!((c - 1.402_296_3e-3).abs() < 1e-9);
        assert!((airtime_from(&cfg, 54e6, 0.5) - 2.0 * c).abs() < 1e-15);
        let zero = AirtimeConfig { test_frame_bits: 0.0, ..cfg };
        assert_eq!(airtime_from(&zero, 54e6, 0.0), 1.25e-3);
        assert!(airtime_from(&cfg, 54e6, 1.0).is_infinite());
    }

    #[test]
    fn bidirectional_sums() {
        assert!((bidirectional_cost(1.4e-3, 1.4e-3) - 2.8e-3).abs() < 1e-15);
        assert_eq!(bidirectional_cost(0.0, 3.0), 3.0);
        assert!((bidirectional_cost(1.4023e-3, 2.8046e-3) - 4.2069e-3).abs() < 1e-15);
        assert!(bidirectional_cost(f64::INFINITY, 1.0).is_infinite());
    }

    #[test]
    fn airtime_monotone_grid() {
        let cfg = AirtimeConfig::default();
        let rates = [6e6, 9e6, 12e6, 18e6, 24e6, 36e6, 48e6, 54e6];
        let errs = [0.0, 0.01, 0.1, 0.3, 0.5, 0.9];
        for w in rates.windows(2) {
            for &e in &errs {
                assert!(airtime_from(&cfg, w[1], e) < airtime_from(&cfg, w[0], e));
            }
        }
        for w in errs.windows(2) {
            for &r in &rates {
                assert!(airtime_from(&cfg, r, w[1]) > airtime_from(&cfg, r, w[0]));
            }
        }
    }
}
