//! Hybrid half-duplex/full-duplex pair logic.
//!
//! Each pair node flips an independent coin with its shaped OP; the joint
//! outcome picks one of four modes (FD, HD in either direction, silence).
//! FD reception carries a residual self-interference term: a fraction chi of
//! the receiver's own transmit power leaks past cancellation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mac::{access_probability, MacPolicy};

/// State of one duplex-capable pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairState {
    pub op_a: f64,
    pub op_b: f64,
    /// Residual self-interference: fraction of own transmit power leaking
    /// into own receiver after cancellation, in [0, 1].
    pub si_residual_factor: f64,
    /// Linear gain A -> B.
    pub link_gain_ab: f64,
    /// Linear gain B -> A.
    pub link_gain_ba: f64,
}

/// Duplex outcome of one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DuplexOutcome {
    Fd,
    HdA,
    HdB,
    Silence,
}

/// Distribution over the four duplex outcomes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeDistribution {
    pub fd: f64,
    pub hd_a: f64,
    pub hd_b: f64,
    pub silence: f64,
}

/// Transmit direction within a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    AToB,
    BToA,
}

/// Joint mode distribution induced by two independent per-node coins with
/// the policy-shaped OPs.
pub fn mode_probabilities(pair: &PairState, policy: &MacPolicy) -> Result<ModeDistribution> {
    let p_a = access_probability(pair.op_a, policy)?;
    let p_b = access_probability(pair.op_b, policy)?;
    Ok(ModeDistribution {
        fd: p_a * p_b,
        hd_a: p_a * (1.0 - p_b),
        hd_b: (1.0 - p_a) * p_b,
        silence: (1.0 - p_a) * (1.0 - p_b),
    })
}

/// Draw one duplex outcome via two independent Bernoulli flips, one per
/// node.
pub fn sample_mode<R: Rng + ?Sized>(
    pair: &PairState,
    policy: &MacPolicy,
    rng: &mut R,
) -> Result<DuplexOutcome> {
    let p_a = access_probability(pair.op_a, policy)?;
    let p_b = access_probability(pair.op_b, policy)?;
    let a = rng.random_bool(p_a);
    let b = rng.random_bool(p_b);
    Ok(match (a, b) {
        (true, true) => DuplexOutcome::Fd,
        (true, false) => DuplexOutcome::HdA,
        (false, true) => DuplexOutcome::HdB,
        (false, false) => DuplexOutcome::Silence,
    })
}

/// FD SINR for one direction while both nodes transmit. The receiver's own
/// transmission leaks `chi * P_own` into its receiver.
pub fn fd_sinr(
    pair: &PairState,
    direction: Direction,
    tx_power_a: f64,
    tx_power_b: f64,
    external_interference_at_rx: f64,
    noise: f64,
) -> f64 {
    let (signal, self_leak) = match direction {
        Direction::AToB => (
            tx_power_a * pair.link_gain_ab,
            pair.si_residual_factor * tx_power_b,
        ),
        Direction::BToA => (
            tx_power_b * pair.link_gain_ba,
            pair.si_residual_factor * tx_power_a,
        ),
    };
    let denom = self_leak + external_interference_at_rx + noise;
    if denom == 0.0 {
        f64::INFINITY
    } else {
        signal / denom
    }
}

/// Per-slot rate model for the FD-vs-HD comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "model")]
pub enum RateModel {
    /// log2(1 + SINR).
    Shannon,
    /// success * log2(1 + theta), success iff SINR > theta.
    Threshold { theta: f64 },
}

impl RateModel {
    pub fn rate(&self, sinr: f64) -> f64 {
        match self {
            RateModel::Shannon => (1.0 + sinr).log2(),
            RateModel::Threshold { theta } => {
                if sinr > *theta {
                    (1.0 + theta).log2()
                } else {
                    0.0
                }
            }
        }
    }
}

/// Ratio of FD sum rate (both directions every slot, with self-interference)
/// to the half-duplex baseline where the two directions alternate with equal
/// time shares and no self-interference. Symmetric transmit powers.
pub fn fd_vs_hd_gain(
    pair: &PairState,
    tx_power: f64,
    external_interference: f64,
    noise: f64,
    rate_model: RateModel,
) -> f64 {
    let fd_ab = fd_sinr(
        pair,
        Direction::AToB,
        tx_power,
        tx_power,
        external_interference,
        noise,
    );
    let fd_ba = fd_sinr(
        pair,
        Direction::BToA,
        tx_power,
        tx_power,
        external_interference,
        noise,
    );
    let fd_sum = rate_model.rate(fd_ab) + rate_model.rate(fd_ba);

    let hd_denom = external_interference + noise;
    let hd = |gain: f64| {
        if hd_denom == 0.0 {
            f64::INFINITY
        } else {
            tx_power * gain / hd_denom
        }
    };
    let hd_mean = 0.5 * rate_model.rate(hd(pair.link_gain_ab))
        + 0.5 * rate_model.rate(hd(pair.link_gain_ba));
    fd_sum / hd_mean
}
