//! MAC policy: mapping an OP value to a transmission decision.
//!
//! Three access-probability shapes (linear, concave, deterministic step),
//! the density-based shape selection rule, and the three power/access modes:
//! maximal power (always on, full power), reduced power (always on,
//! OP-scaled power), random access (Bernoulli(OP-shaped), full power).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Access-probability shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PolicyKind {
    /// p = op.
    RandomLinear,
    /// p = log(1 + c*op) / log(1 + c), concave with normalized endpoints.
    RandomConcave { curvature: f64 },
    /// p = 1 if op >= threshold else 0. The boundary transmits.
    Deterministic { threshold: f64 },
}

/// Full MAC policy: shape plus the shape-selection threshold and the power
/// ceiling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacPolicy {
    pub kind: PolicyKind,
    /// Shape-selection threshold for [`select_policy_shape`].
    pub beta: f64,
    /// Linear watts.
    pub max_power: f64,
}

impl MacPolicy {
    pub fn linear(max_power: f64) -> Self {
        Self {
            kind: PolicyKind::RandomLinear,
            beta: 0.004,
            max_power,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            PolicyKind::RandomConcave { curvature } if !(curvature > 0.0) => {
                return Err(Error::Config(format!(
                    "policy.curvature must be positive, got {curvature}"
                )));
            }
            PolicyKind::Deterministic { threshold } if !(0.0..=1.0).contains(&threshold) => {
                return Err(Error::Config(format!(
                    "policy.tau must lie in [0, 1], got {threshold}"
                )));
            }
            _ => {}
        }
        if !(self.beta > 0.0) {
            return Err(Error::Config(format!(
                "policy.beta must be positive, got {}",
                self.beta
            )));
        }
        if !(self.max_power > 0.0) {
            return Err(Error::Config(format!(
                "policy.max_power must be positive, got {}",
                self.max_power
            )));
        }
        Ok(())
    }
}

/// Power/access mode of a transmitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccessMode {
    /// Always transmit at max power.
    MaxPower,
    /// Always transmit at op * max power.
    ReducedPower,
    /// Transmit with the shaped probability at max power.
    RandomAccess,
}

/// A per-slot transmission decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TxDecision {
    pub transmit: bool,
    /// Linear watts; positive iff transmitting.
    pub power: f64,
}

impl TxDecision {
    pub const SILENT: TxDecision = TxDecision {
        transmit: false,
        power: 0.0,
    };
}

/// Map an OP value to a transmission probability under the policy shape.
pub fn access_probability(op_value: f64, policy: &MacPolicy) -> Result<f64> {
    if !(0.0..=1.0).contains(&op_value) {
        return Err(Error::InvalidProbability(op_value));
    }
    let p = match policy.kind {
        PolicyKind::RandomLinear => op_value,
        PolicyKind::RandomConcave { curvature } => {
            (1.0 + curvature * op_value).ln() / (1.0 + curvature).ln()
        }
        PolicyKind::Deterministic { threshold } => {
            if op_value >= threshold {
                1.0
            } else {
                0.0
            }
        }
    };
    Ok(p.clamp(0.0, 1.0))
}

/// Shape-selection rule: the concave shape pays off while the product of
/// node density and mean OP stays below beta; the linear shape wins at or
/// above it (ties go linear).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyShape {
    Concave,
    Linear,
}

pub fn select_policy_shape(node_density: f64, mean_op: f64, beta: f64) -> PolicyShape {
    if node_density * mean_op < beta {
        PolicyShape::Concave
    } else {
        PolicyShape::Linear
    }
}

/// Draw one transmission decision for a node with the given OP under the
/// access mode.
pub fn transmit_decision<R: Rng + ?Sized>(
    op_value: f64,
    mode: AccessMode,
    policy: &MacPolicy,
    rng: &mut R,
) -> Result<TxDecision> {
    if !(0.0..=1.0).contains(&op_value) {
        return Err(Error::InvalidProbability(op_value));
    }
    Ok(match mode {
        AccessMode::MaxPower => TxDecision {
            transmit: true,
            power: policy.max_power,
        },
        AccessMode::ReducedPower => {
            if op_value == 0.0 {
                TxDecision::SILENT
            } else {
                TxDecision {
                    transmit: true,
                    power: op_value * policy.max_power,
                }
            }
        }
        AccessMode::RandomAccess => {
            let p = access_probability(op_value, policy)?;
            if rng.random_bool(p) {
                TxDecision {
                    transmit: true,
                    power: policy.max_power,
                }
            } else {
                TxDecision::SILENT
            }
        }
    })
}

/// Expected transmit energy of one slot: probability-of-transmission times
/// power times slot duration.
pub fn expected_energy(
    op_value: f64,
    mode: AccessMode,
    policy: &MacPolicy,
    slot_duration: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&op_value) {
        return Err(Error::InvalidProbability(op_value));
    }
    Ok(match mode {
        AccessMode::MaxPower => policy.max_power * slot_duration,
        AccessMode::ReducedPower => op_value * policy.max_power * slot_duration,
        AccessMode::RandomAccess => {
            access_probability(op_value, policy)? * policy.max_power * slot_duration
        }
    })
}
