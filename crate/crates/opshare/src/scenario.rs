//! Declarative run configuration: the scenario file schema, defaults,
//! validation, and `key=value` overrides.
//!
//! Scenarios are TOML files whose sections mirror the config structs here.
//! Thresholds are written in dB (field names carry the `_db` suffix) and
//! converted to linear units at the point of use; transmit powers accept
//! either plain watts or a `"<x> dBm"` / `"<x> dBW"` string. Every default
//! is materialized at parse time, so the resolved snapshot emitted next to
//! run results contains no implicit values.

use std::fmt;
use std::path::Path;

use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ChannelModel, FieldModel, Point};
use crate::mac::{AccessMode, MacPolicy, PolicyKind};
use crate::op::ConditioningConfig;

/// Convert a dB value to a linear ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Which node of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeId {
    A,
    B,
}

/// One communication pair. Topology comes either from positions (gains are
/// derived from the path-loss law, with per-slot fading) or from explicit
/// gains plus constant per-node external interference; the two styles cannot
/// be mixed within a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairSpec {
    /// Position of node A, meters. In the simplex (duplex-disabled) case
    /// node A is the transmitter of the pair.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node_a: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node_b: Option<[f64; 2]>,
    /// Pinned OP for node A; bypasses the OP engine for this node.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub op_a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub op_b: Option<f64>,
    /// Explicit linear gain A -> B (explicit-gain scenarios only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gain_ab: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gain_ba: Option<f64>,
    /// Constant external interference at each node's receiver, watts.
    pub ext_interference_a: f64,
    pub ext_interference_b: f64,
}

impl Default for PairSpec {
    fn default() -> Self {
        Self {
            node_a: None,
            node_b: None,
            op_a: None,
            op_b: None,
            gain_ab: None,
            gain_ba: None,
            ext_interference_a: 0.0,
            ext_interference_b: 0.0,
        }
    }
}

/// Explicit cross-pair gain `from -> to` for explicit-gain scenarios.
/// Unlisted cross links do not couple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossGain {
    /// (pair index, node).
    pub from: (usize, NodeId),
    pub to: (usize, NodeId),
    pub gain: f64,
}

/// The incumbent transmitter to protect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrimaryConfig {
    pub position: [f64; 2],
    /// Receiver position; defaults to 5 m east of the transmitter.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rx_position: Option<[f64; 2]>,
    #[serde(deserialize_with = "de_power")]
    pub tx_power: f64,
    pub transmit_probability: f64,
    /// Seconds between on/off re-draws.
    pub decision_period: f64,
    /// The primary link's own success requirement, independent of the
    /// secondary access threshold.
    pub success_threshold_db: f64,
}

impl Default for PrimaryConfig {
    fn default() -> Self {
        Self {
            position: [0.0, 0.0],
            rx_position: None,
            tx_power: 1.0,
            transmit_probability: 0.4,
            decision_period: 11.0,
            success_threshold_db: 0.0,
        }
    }
}

impl PrimaryConfig {
    pub fn rx_point(&self) -> Point {
        match self.rx_position {
            Some([x, y]) => Point::new(x, y),
            None => Point::new(self.position[0] + 5.0, self.position[1]),
        }
    }
}

/// MAC policy section. `kind = "auto"` defers the linear/concave choice to
/// the density rule at run start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub kind: PolicyKindConfig,
    pub curvature: f64,
    pub tau: f64,
    pub beta: f64,
    #[serde(deserialize_with = "de_power")]
    pub max_power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKindConfig {
    Linear,
    Concave,
    Deterministic,
    Auto,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            kind: PolicyKindConfig::Linear,
            curvature: 9.0,
            tau: 0.5,
            beta: 0.004,
            max_power: 1.0,
        }
    }
}

impl PolicyConfig {
    /// Concrete MAC policy for a non-auto kind.
    pub fn to_mac_policy(&self) -> Result<MacPolicy> {
        let kind = match self.kind {
            PolicyKindConfig::Linear => PolicyKind::RandomLinear,
            PolicyKindConfig::Concave => PolicyKind::RandomConcave {
                curvature: self.curvature,
            },
            PolicyKindConfig::Deterministic => PolicyKind::Deterministic {
                threshold: self.tau,
            },
            PolicyKindConfig::Auto => {
                return Err(Error::Config(
                    "policy.kind=auto must be resolved before building a MAC policy".into(),
                ))
            }
        };
        let policy = MacPolicy {
            kind,
            beta: self.beta,
            max_power: self.max_power,
        };
        policy.validate()?;
        Ok(policy)
    }
}

/// Duplex section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DuplexConfig {
    pub enabled: bool,
    /// Residual self-interference fraction.
    pub chi: f64,
    pub rate_model: RateModelConfig,
    pub scheme: DuplexScheme,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateModelConfig {
    Threshold,
    Shannon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DuplexScheme {
    /// OP-driven per-node coins; FD when both transmit.
    Hybrid,
    /// Deterministic alternation at full power: the conventional TDD
    /// baseline the hybrid is compared against.
    Tdd,
}

impl Default for DuplexConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            chi: 0.01,
            rate_model: RateModelConfig::Threshold,
            scheme: DuplexScheme::Hybrid,
        }
    }
}

/// OP source for unpinned nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpSource {
    /// Precomputed table file (see `op-table` CLI command).
    Table,
    /// Run the Monte Carlo estimator at every OP refresh. Slow; meant for
    /// small validation scenarios.
    Live,
    /// Closed-form unconditional coverage at the scenario threshold,
    /// ignoring measured interference (the uncorrelated limit).
    OracleUncorrelated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpConfig {
    pub source: OpSource,
    /// Desired-link distance r used in OP queries, meters.
    pub link_distance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table_path: Option<String>,
    pub conditioning: ConditioningConfig,
}

impl Default for OpConfig {
    fn default() -> Self {
        Self {
            source: OpSource::OracleUncorrelated,
            link_distance: 10.0,
            table_path: None,
            conditioning: ConditioningConfig::default(),
        }
    }
}

/// Slot timing and the control-loop delay chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingConfig {
    /// Slot duration, seconds.
    pub slot: f64,
    /// Sensor measurement period.
    pub sensing_period: f64,
    /// Node-to-server feedback period.
    pub feedback_period: f64,
    /// How often nodes refresh their OP values.
    pub op_read_period: f64,
    /// Per-hop control delays (feedback wait, uplink, downlink, apply, ...),
    /// seconds. Their sum is the staleness of the OP values nodes act on.
    pub control_delays: Vec<f64>,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            slot: 1e-3,
            sensing_period: 1e-3,
            feedback_period: 5e-3,
            op_read_period: 3.0,
            control_delays: Vec::new(),
        }
    }
}

impl TimingConfig {
    pub fn control_delay_total(&self) -> f64 {
        self.control_delays.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub slots: u64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            slots: 10_000,
            seed: 1,
        }
    }
}

/// LTE-style per-frame overhead shares removed from the usable rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OverheadConfig {
    /// Extended cyclic prefix: 512 / (2048 + 512).
    pub cp_fraction: f64,
    /// One sync symbol per 60-symbol half frame.
    pub pss_fraction: f64,
    /// Cell-specific reference symbol share.
    pub rs_fraction: f64,
}

impl Default for OverheadConfig {
    fn default() -> Self {
        Self {
            cp_fraction: 512.0 / 2560.0,
            pss_fraction: 1.0 / 60.0,
            rs_fraction: 0.0476,
        }
    }
}

impl OverheadConfig {
    pub fn usable_fraction(&self) -> f64 {
        1.0 - self.cp_fraction - self.pss_fraction - self.rs_fraction
    }
}

/// Full declarative description of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Link bandwidth for throughput accounting, Hz.
    pub bandwidth_hz: f64,
    /// Secondary access threshold theta, dB.
    pub access_threshold_db: f64,
    /// Maximum tolerated truncation-tail fraction of the interferer field.
    pub max_field_tail_fraction: f64,
    /// Sensor positions, meters.
    pub sensors: Vec<[f64; 2]>,
    pub field: FieldModel,
    pub channel: ChannelModel,
    pub pairs: Vec<PairSpec>,
    pub cross_gains: Vec<CrossGain>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub primary: Option<PrimaryConfig>,
    pub policy: PolicyConfig,
    pub access_mode: AccessMode,
    pub duplex: DuplexConfig,
    pub op: OpConfig,
    pub timing: TimingConfig,
    pub run: RunConfig,
    pub overhead: OverheadConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            bandwidth_hz: 20e6,
            access_threshold_db: 0.0,
            max_field_tail_fraction: 0.01,
            sensors: Vec::new(),
            field: FieldModel::default(),
            channel: ChannelModel::default(),
            pairs: Vec::new(),
            cross_gains: Vec::new(),
            primary: None,
            policy: PolicyConfig::default(),
            access_mode: AccessMode::RandomAccess,
            duplex: DuplexConfig::default(),
            op: OpConfig::default(),
            timing: TimingConfig::default(),
            run: RunConfig::default(),
            overhead: OverheadConfig::default(),
        }
    }
}

/// Topology flavor, decided by the pair specs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    Positional,
    ExplicitGains,
}

impl ScenarioConfig {
    pub fn access_threshold_linear(&self) -> f64 {
        db_to_linear(self.access_threshold_db)
    }

    pub fn topology(&self) -> Result<Topology> {
        let positional = self
            .pairs
            .iter()
            .filter(|p| p.node_a.is_some() && p.node_b.is_some())
            .count();
        let explicit = self.pairs.iter().filter(|p| p.gain_ab.is_some()).count();
        if positional == self.pairs.len() && explicit == 0 {
            Ok(Topology::Positional)
        } else if explicit == self.pairs.len() && positional == 0 {
            Ok(Topology::ExplicitGains)
        } else {
            Err(Error::Config(
                "pairs must all use positions (node_a/node_b) or all use explicit gains \
                 (gain_ab), not a mix"
                    .into(),
            ))
        }
    }

    /// Full invariant check; every scenario goes through this at parse time.
    pub fn validate(&self) -> Result<()> {
        self.field.validate()?;
        self.channel.validate()?;
        if !(self.bandwidth_hz > 0.0) {
            return Err(Error::Config(format!(
                "bandwidth_hz must be positive, got {}",
                self.bandwidth_hz
            )));
        }
        if !self.access_threshold_db.is_finite() {
            return Err(Error::Config("access_threshold_db must be finite".into()));
        }
        if self.pairs.is_empty() {
            return Err(Error::Config("at least one [[pairs]] entry is required".into()));
        }

        let topology = self.topology()?;
        for (i, pair) in self.pairs.iter().enumerate() {
            for (label, op) in [("op_a", pair.op_a), ("op_b", pair.op_b)] {
                if let Some(v) = op {
                    if !(0.0..=1.0).contains(&v) {
                        return Err(Error::Config(format!(
                            "pairs[{i}].{label} must lie in [0, 1], got {v}"
                        )));
                    }
                }
            }
            for (label, gain) in [("gain_ab", pair.gain_ab), ("gain_ba", pair.gain_ba)] {
                if let Some(g) = gain {
                    if !(g > 0.0) {
                        return Err(Error::Config(format!(
                            "pairs[{i}].{label} must be positive, got {g}"
                        )));
                    }
                }
            }
            for (label, v) in [
                ("ext_interference_a", pair.ext_interference_a),
                ("ext_interference_b", pair.ext_interference_b),
            ] {
                if !(v >= 0.0) {
                    return Err(Error::Config(format!(
                        "pairs[{i}].{label} must be non-negative, got {v}"
                    )));
                }
            }
        }

        match topology {
            Topology::ExplicitGains => self.validate_explicit()?,
            Topology::Positional => self.validate_positional()?,
        }

        self.validate_policy_section()?;
        self.validate_duplex()?;
        self.validate_op_section(topology)?;
        self.validate_timing()?;
        self.validate_overhead()?;
        self.validate_primary()?;
        Ok(())
    }

    fn validate_explicit(&self) -> Result<()> {
        if self.field.density != 0.0 {
            return Err(Error::Config(
                "explicit-gain scenarios require field.density = 0 (ambient interference is \
                 given per node via ext_interference_*)"
                    .into(),
            ));
        }
        if self.primary.is_some() {
            return Err(Error::Config(
                "explicit-gain scenarios do not support a primary node; use positions".into(),
            ));
        }
        if !self.sensors.is_empty() {
            return Err(Error::Config(
                "explicit-gain scenarios do not support sensors; pin OP values instead".into(),
            ));
        }
        for (i, pair) in self.pairs.iter().enumerate() {
            if pair.op_a.is_none() {
                return Err(Error::Config(format!(
                    "explicit-gain scenarios require pairs[{i}].op_a (pinned OP)"
                )));
            }
            if self.duplex.enabled && pair.op_b.is_none() {
                return Err(Error::Config(format!(
                    "duplex scenarios require pairs[{i}].op_b (pinned OP)"
                )));
            }
            if self.duplex.enabled && pair.gain_ba.is_none() {
                return Err(Error::Config(format!(
                    "duplex scenarios require pairs[{i}].gain_ba"
                )));
            }
        }
        for (k, cg) in self.cross_gains.iter().enumerate() {
            for (label, (pair_idx, _)) in [("from", cg.from), ("to", cg.to)] {
                if pair_idx >= self.pairs.len() {
                    return Err(Error::Config(format!(
                        "cross_gains[{k}].{label} references pair {pair_idx}, but only {} pairs \
                         exist",
                        self.pairs.len()
                    )));
                }
            }
            if !(cg.gain > 0.0) {
                return Err(Error::Config(format!(
                    "cross_gains[{k}].gain must be positive, got {}",
                    cg.gain
                )));
            }
        }
        Ok(())
    }

    fn validate_positional(&self) -> Result<()> {
        if !self.cross_gains.is_empty() {
            return Err(Error::Config(
                "cross_gains apply only to explicit-gain scenarios; positional gains come from \
                 the path-loss law"
                    .into(),
            ));
        }
        if self.field.density > 0.0 {
            let tail = self.field.truncation_tail_fraction(&self.channel);
            if tail > self.max_field_tail_fraction {
                return Err(Error::Config(format!(
                    "field.region_radius too small: truncated-tail interference fraction \
                     {tail:.3e} exceeds max_field_tail_fraction {}; enlarge the radius",
                    self.max_field_tail_fraction
                )));
            }
        }
        Ok(())
    }

    fn validate_policy_section(&self) -> Result<()> {
        let p = &self.policy;
        if !(p.curvature > 0.0) {
            return Err(Error::Config(format!(
                "policy.curvature must be positive, got {}",
                p.curvature
            )));
        }
        if !(0.0..=1.0).contains(&p.tau) {
            return Err(Error::Config(format!(
                "policy.tau must lie in [0, 1], got {}",
                p.tau
            )));
        }
        if !(p.beta > 0.0) {
            return Err(Error::Config(format!(
                "policy.beta must be positive, got {}",
                p.beta
            )));
        }
        if !(p.max_power > 0.0) {
            return Err(Error::Config(format!(
                "policy.max_power must be positive, got {}",
                p.max_power
            )));
        }
        if p.kind == PolicyKindConfig::Auto && self.topology()? == Topology::ExplicitGains {
            return Err(Error::Config(
                "policy.kind=auto needs a field density to apply the shape rule; explicit-gain \
                 scenarios must pick a concrete kind"
                    .into(),
            ));
        }
        Ok(())
    }

    fn validate_duplex(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.duplex.chi) {
            return Err(Error::Config(format!(
                "duplex.chi must lie in [0, 1], got {}",
                self.duplex.chi
            )));
        }
        Ok(())
    }

    fn validate_op_section(&self, topology: Topology) -> Result<()> {
        if !(self.op.link_distance > 0.0) {
            return Err(Error::Config(format!(
                "op.link_distance must be positive, got {}",
                self.op.link_distance
            )));
        }
        self.op.conditioning.validate()?;
        // Note: op.table_path is checked when a run actually needs the
        // table, so the op-table command can bootstrap one for a
        // table-sourced scenario.
        // Sources that read sensor measurements need sensors, unless every
        // node's OP is pinned.
        let all_pinned = self.pairs.iter().all(|p| {
            p.op_a.is_some() && (!self.duplex.enabled || p.op_b.is_some())
        });
        if topology == Topology::Positional
            && !all_pinned
            && matches!(self.op.source, OpSource::Table | OpSource::Live)
            && self.sensors.is_empty()
        {
            return Err(Error::Config(
                "op.source=table/live requires at least one sensor position".into(),
            ));
        }
        Ok(())
    }

    fn validate_timing(&self) -> Result<()> {
        let t = &self.timing;
        if !(t.slot > 0.0) {
            return Err(Error::Config(format!(
                "timing.slot must be positive, got {}",
                t.slot
            )));
        }
        for (name, period) in [
            ("timing.sensing_period", t.sensing_period),
            ("timing.feedback_period", t.feedback_period),
            ("timing.op_read_period", t.op_read_period),
        ] {
            if !(period > 0.0) {
                return Err(Error::Config(format!(
                    "{name} must be positive, got {period}"
                )));
            }
            let ratio = period / t.slot;
            if (ratio - ratio.round()).abs() > 1e-6 * ratio.max(1.0) {
                return Err(Error::Config(format!(
                    "{name} ({period} s) must be an integer multiple of timing.slot ({} s)",
                    t.slot
                )));
            }
        }
        for (i, d) in t.control_delays.iter().enumerate() {
            if !(*d >= 0.0) {
                return Err(Error::Config(format!(
                    "timing.control_delays[{i}] must be non-negative, got {d}"
                )));
            }
        }
        Ok(())
    }

    fn validate_overhead(&self) -> Result<()> {
        let o = &self.overhead;
        for (name, v) in [
            ("overhead.cp_fraction", o.cp_fraction),
            ("overhead.pss_fraction", o.pss_fraction),
            ("overhead.rs_fraction", o.rs_fraction),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Config(format!(
                    "{name} must lie in [0, 1), got {v}"
                )));
            }
        }
        let sum = o.cp_fraction + o.pss_fraction + o.rs_fraction;
        if sum >= 1.0 {
            return Err(Error::Config(format!(
                "overhead.cp_fraction + overhead.pss_fraction + overhead.rs_fraction must stay \
                 below 1, got {sum}"
            )));
        }
        Ok(())
    }

    fn validate_primary(&self) -> Result<()> {
        if let Some(p) = &self.primary {
            if !(0.0..=1.0).contains(&p.transmit_probability) {
                return Err(Error::Config(format!(
                    "primary.transmit_probability must lie in [0, 1], got {}",
                    p.transmit_probability
                )));
            }
            if !(p.tx_power > 0.0) {
                return Err(Error::Config(format!(
                    "primary.tx_power must be positive, got {}",
                    p.tx_power
                )));
            }
            let ratio = p.decision_period / self.timing.slot;
            if !(p.decision_period > 0.0)
                || (ratio - ratio.round()).abs() > 1e-6 * ratio.max(1.0)
            {
                return Err(Error::Config(format!(
                    "primary.decision_period ({} s) must be a positive integer multiple of \
                     timing.slot",
                    p.decision_period
                )));
            }
        }
        Ok(())
    }

    /// Resolved snapshot of this config as TOML. Re-parsing the output gives
    /// a structurally identical config.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| Error::Runtime(format!("config serialization failed: {e}")))
    }

    pub fn pair_node_point(&self, pair: usize, node: NodeId) -> Option<Point> {
        let p = &self.pairs[pair];
        let coords = match node {
            NodeId::A => p.node_a,
            NodeId::B => p.node_b,
        };
        coords.map(|[x, y]| Point::new(x, y))
    }
}

/// Parse a scenario file, apply `key.path=value` overrides, materialize
/// defaults, and validate every invariant. Errors carry the offending key
/// path.
pub fn parse_scenario(path: &Path, overrides: &[String]) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read scenario {path:?}: {e}")))?;
    parse_scenario_str(&text, overrides)
}

/// String-input variant of [`parse_scenario`].
pub fn parse_scenario_str(text: &str, overrides: &[String]) -> Result<ScenarioConfig> {
    let table: toml::Table = text
        .parse()
        .map_err(|e| Error::Config(format!("scenario parse error: {e}")))?;
    let mut value = toml::Value::Table(table);
    for entry in overrides {
        apply_override(&mut value, entry)?;
    }
    let config: ScenarioConfig = ScenarioConfig::deserialize(value)
        .map_err(|e| Error::Config(format!("scenario error: {e}")))?;
    config.validate()?;
    Ok(config)
}

/// Apply one `key.path=value` override onto the raw TOML tree. The value is
/// parsed as a TOML literal; bare words fall back to strings.
fn apply_override(root: &mut toml::Value, entry: &str) -> Result<()> {
    let (key_path, raw_value) = entry.split_once('=').ok_or_else(|| {
        Error::Config(format!("override '{entry}' must have the form key.path=value"))
    })?;
    let key_path = key_path.trim();
    if key_path.is_empty() {
        return Err(Error::Config(format!("override '{entry}' has an empty key")));
    }
    let parsed: toml::Value = match format!("v = {}", raw_value.trim()).parse::<toml::Table>() {
        Ok(mut table) => table.remove("v").unwrap(),
        Err(_) => toml::Value::String(raw_value.trim().to_string()),
    };

    let mut cursor = root;
    let segments: Vec<&str> = key_path.split('.').collect();
    for (i, segment) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        // Numeric segments index into arrays (e.g. pairs.0.op_a).
        if let Ok(index) = segment.parse::<usize>() {
            let arr = cursor.as_array_mut().ok_or_else(|| {
                Error::Config(format!("override '{key_path}': '{segment}' indexes a non-array"))
            })?;
            if index >= arr.len() {
                return Err(Error::Config(format!(
                    "override '{key_path}': index {index} out of range ({} entries)",
                    arr.len()
                )));
            }
            if last {
                arr[index] = parsed;
                return Ok(());
            }
            cursor = &mut arr[index];
            continue;
        }
        let table = cursor.as_table_mut().ok_or_else(|| {
            Error::Config(format!(
                "override '{key_path}': '{segment}' is not a table in the scenario"
            ))
        })?;
        if last {
            table.insert(segment.to_string(), parsed);
            return Ok(());
        }
        cursor = table
            .entry(segment.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    Ok(())
}

/// Accept a power either as plain watts or as a `"<x> dBm"` / `"<x> dBW"`
/// string.
fn de_power<'de, D: Deserializer<'de>>(deserializer: D) -> std::result::Result<f64, D::Error> {
    struct PowerVisitor;

    impl<'de> de::Visitor<'de> for PowerVisitor {
        type Value = f64;

        fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            f.write_str("watts as a number, or a string like \"30 dBm\" or \"0 dBW\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<f64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, s: &str) -> std::result::Result<f64, E> {
            parse_power_str(s).map_err(E::custom)
        }
    }

    deserializer.deserialize_any(PowerVisitor)
}

fn parse_power_str(s: &str) -> std::result::Result<f64, String> {
    let trimmed = s.trim();
    let (number, scale) = if let Some(v) = trimmed.strip_suffix("dBm") {
        (v, 1e-3)
    } else if let Some(v) = trimmed.strip_suffix("dBW") {
        (v, 1.0)
    } else {
        return Err(format!("power '{s}' needs a dBm or dBW suffix (or use plain watts)"));
    };
    let db: f64 = number
        .trim()
        .parse()
        .map_err(|e| format!("power '{s}': {e}"))?;
    Ok(scale * db_to_linear(db))
}
